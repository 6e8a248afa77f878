"""The PGM-based linear estimator for mixed unitary channel weights.

The protocol prepares the maximally entangled probe, sends it through the
channel, and measures the Pretty Good Measurement of the unitary orbit
ensemble. With overlap matrix K the outcome distribution is p = K theta, so
the empirical frequencies p_hat invert to theta_hat = K⁺ p_hat. The default
sampling path draws outcome counts directly from the categorical law K theta;
the full Born path recomputes that law from the simulated output state and is
kept as a physics cross-check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import fisher, linalg, povm as povm_mod
from .channel import MixedUnitaryChannel, apply_with_ancilla
from .records import ExperimentRecord
from .seeding import derive_rng, derive_seed

CONDITION_WARN_THRESHOLD = 1e8
SAMPLING_PATHS = ("categorical_from_K", "full_born")
GERSCHGORIN_DIAG = 0.7
GERSCHGORIN_FLOOR = 0.4


@dataclass(frozen=True)
class EstimatorOptions:
    """Knobs of the linear estimator.

    pseudo_inverse_cutoff is relative to the largest singular value of K.
    project_to_simplex additionally reports the Euclidean projection of
    theta_hat onto the simplex; the raw linear estimate stays the primary
    output because the error analysis concerns the unprojected estimator.
    """

    pseudo_inverse_cutoff: float = 1e-10
    project_to_simplex: bool = False
    sampling_path: str = "categorical_from_K"

    def __post_init__(self) -> None:
        if self.pseudo_inverse_cutoff <= 0:
            raise ValueError("pseudo_inverse_cutoff must be > 0")
        if self.sampling_path not in SAMPLING_PATHS:
            raise ValueError(
                f"sampling_path must be one of {SAMPLING_PATHS}, got {self.sampling_path!r}"
            )


@dataclass(frozen=True)
class EstimateResult:
    """One estimation run: counts over kept outcomes and the linear estimate."""

    theta_hat: np.ndarray
    counts: np.ndarray
    N: int
    seed: int | None
    squared_error: float | None = None
    theta_projected: np.ndarray | None = None
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PgmProtocol:
    """Precomputed measurement data shared by every shot of a channel's protocol."""

    channel: MixedUnitaryChannel
    povm: povm_mod.Povm
    overlap: np.ndarray
    kept: np.ndarray
    pinv: np.ndarray
    condition_number: float
    p_categorical: np.ndarray
    p_born: np.ndarray

    @classmethod
    def build(cls, channel: MixedUnitaryChannel, options: EstimatorOptions) -> "PgmProtocol":
        ensemble = povm_mod.unitary_orbit_ensemble(channel)
        measurement = povm_mod.pgm(ensemble)
        overlap = povm_mod.overlap_matrix(measurement, ensemble)
        kept = povm_mod.nonzero_rows(overlap)
        block = overlap[kept]
        pinv = np.linalg.pinv(block, rcond=options.pseudo_inverse_cutoff)
        condition_number = float(np.linalg.cond(block, 2))
        p_cat = _normalized_distribution(fisher.outcome_distribution(block, channel.theta))
        probe = linalg.max_entangled_state(channel.d_channel)
        rho_out = apply_with_ancilla(channel, linalg.pure_density(probe))
        p_born = _normalized_distribution(povm_mod.born_probabilities(rho_out, measurement)[kept])
        return cls(channel, measurement, overlap, kept, pinv, condition_number, p_cat, p_born)

    def outcome_law(self, sampling_path: str) -> np.ndarray:
        if sampling_path == "categorical_from_K":
            return self.p_categorical
        return self.p_born


def _normalized_distribution(p: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    total = float(p.sum())
    if abs(total - 1.0) > povm_mod.BORN_SUM_TOL:
        raise ValueError(f"outcome probabilities sum to {total!r}")
    return p / total


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    rho = int(np.max(idx[u + (1.0 - css) / idx > 0.0]))
    shift = (1.0 - css[rho - 1]) / rho
    return np.clip(v + shift, 0.0, None)


def estimate_from_protocol(
    protocol: PgmProtocol,
    N: int,
    options: EstimatorOptions,
    rng: np.random.Generator,
    seed: int | None = None,
) -> EstimateResult:
    """Draw N outcomes from a prebuilt protocol and invert to theta_hat."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    p = protocol.outcome_law(options.sampling_path)
    counts = rng.multinomial(N, p)
    p_hat = counts / N
    channel = protocol.channel
    if channel.rank == 1:
        # K is the 1x1 identity up to rounding; the exact answer is forced.
        theta_hat = np.ones(1)
    else:
        theta_hat = protocol.pinv @ p_hat
    warnings: tuple[str, ...] = ()
    if protocol.condition_number > CONDITION_WARN_THRESHOLD:
        warnings = (
            f"ill-conditioned K: condition number {protocol.condition_number:.3e} "
            f"exceeds {CONDITION_WARN_THRESHOLD:g}; pseudoinverse estimate may be noisy",
        )
    squared_error = float(np.sum((theta_hat - channel.theta) ** 2))
    projected = project_to_simplex(theta_hat) if options.project_to_simplex else None
    return EstimateResult(theta_hat, counts, N, seed, squared_error, projected, warnings)


def run_pgm_estimator(
    channel: MixedUnitaryChannel,
    N: int,
    options: EstimatorOptions | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> EstimateResult:
    """Run the full PGM estimation protocol once with N measurement shots.

    Parameters
    ----------
    channel : MixedUnitaryChannel
        The channel whose weights are estimated; its own theta is the truth
        used for the squared error.
    N : int
        Number of shots.
    options : EstimatorOptions, optional
        Estimator knobs; defaults used when omitted.
    rng : numpy.random.Generator, optional
        Sampling stream; built from `seed` when omitted.
    seed : int, optional
        Recorded in the result and used to build `rng` when none is given.

    Returns
    -------
    EstimateResult
    """
    options = options or EstimatorOptions()
    if rng is None:
        rng = np.random.default_rng(seed)
    protocol = PgmProtocol.build(channel, options)
    return estimate_from_protocol(protocol, N, options, rng, seed)


def mse_curve(
    channel: MixedUnitaryChannel,
    N_values: list[int],
    trials: int,
    options: EstimatorOptions | None = None,
    root_seed: int = 0,
    trial_indices: list[int] | None = None,
) -> list[ExperimentRecord]:
    """Monte Carlo squared-error records over a grid of shot counts.

    Each (N, trial) cell owns a seed derived from (root_seed, N, trial), so
    growing the grid never perturbs existing cells and workers handling
    disjoint `trial_indices` produce exactly the rows a serial run would.
    The protocol is built once and shared across cells; only the sampling
    differs.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if trial_indices is None:
        trial_indices = list(range(trials))
    options = options or EstimatorOptions()
    protocol = PgmProtocol.build(channel, options)
    records = []
    for N in N_values:
        for trial in trial_indices:
            cell_seed = derive_seed(root_seed, "mse_sweep", N, trial)
            start = time.perf_counter()
            result = estimate_from_protocol(
                protocol, N, options, np.random.default_rng(cell_seed), cell_seed
            )
            records.append(
                ExperimentRecord(
                    kind="mse_sweep",
                    seed=cell_seed,
                    d_channel=channel.d_channel,
                    r=channel.rank,
                    k=1,
                    N=N,
                    trial=trial,
                    metrics={"sq_error": result.squared_error},
                    wall_time=time.perf_counter() - start,
                )
            )
    return records


def concentration_trial(d_channel: int, r: int, root_seed: int, trial: int) -> ExperimentRecord:
    """One concentration trial: Haar orbit, PGM, and overlap-block statistics.

    Records min_i K_ii, mean_i K_ii, and the smallest eigenvalue of the
    symmetrized r x r overlap block. Every K with min_i K_ii >= 0.7 must
    have lambda_min >= 0.4 by Gerschgorin diagonal dominance; a violation
    raises immediately rather than being recorded.
    """
    if r > d_channel**2:
        raise ValueError(
            f"r = {r} exceeds d_channel**2 = {d_channel**2}; the orbit states "
            "cannot remain close to orthogonal beyond that rank"
        )
    trial_seed = derive_seed(root_seed, "concentration", trial)
    rng = derive_rng(root_seed, "concentration", trial)
    start = time.perf_counter()
    unitaries = np.stack([linalg.haar_unitary(d_channel, rng) for _ in range(r)])
    channel = MixedUnitaryChannel(unitaries, np.full(r, 1.0 / r))
    ensemble = povm_mod.unitary_orbit_ensemble(channel)
    overlap = povm_mod.overlap_matrix(povm_mod.pgm(ensemble), ensemble)
    block = overlap[povm_mod.nonzero_rows(overlap)]
    if block.shape != (r, r):
        raise ValueError(f"overlap block has shape {block.shape}, expected ({r}, {r})")
    diagonal = np.diag(block)
    min_kii = float(diagonal.min())
    mean_kii = float(diagonal.mean())
    lambda_min = float(np.linalg.eigvalsh((block + block.T) / 2.0)[0])
    if min_kii >= GERSCHGORIN_DIAG and lambda_min < GERSCHGORIN_FLOOR - 1e-8:
        raise AssertionError(
            f"Gerschgorin violation: min K_ii = {min_kii:.6f} but "
            f"lambda_min = {lambda_min:.6f} < {GERSCHGORIN_FLOOR}"
        )
    return ExperimentRecord(
        kind="concentration",
        seed=trial_seed,
        d_channel=d_channel,
        r=r,
        trial=trial,
        metrics={"min_kii": min_kii, "mean_kii": mean_kii, "lambda_min_k": lambda_min},
        wall_time=time.perf_counter() - start,
    )


def concentration_summary(records: list[ExperimentRecord]) -> dict:
    """Aggregate statistics of concentration records."""
    min_vals = np.array([rec.metrics["min_kii"] for rec in records])
    mean_vals = np.array([rec.metrics["mean_kii"] for rec in records])
    lam_vals = np.array([rec.metrics["lambda_min_k"] for rec in records])
    return {
        "trials": len(records),
        "threshold": GERSCHGORIN_DIAG,
        "fraction_min_kii_ge_threshold": float(np.mean(min_vals >= GERSCHGORIN_DIAG)),
        "mean_of_mean_kii": float(mean_vals.mean()),
        "min_of_min_kii": float(min_vals.min()),
        "min_lambda_min": float(lam_vals.min()),
    }


def min_diagonal_experiment(
    d_channel: int,
    r: int,
    trials: int,
    root_seed: int = 0,
) -> tuple[list[ExperimentRecord], dict]:
    """Concentration experiment over `trials` independent Haar orbit draws."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    records = [concentration_trial(d_channel, r, root_seed, t) for t in range(trials)]
    return records, concentration_summary(records)
