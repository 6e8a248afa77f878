"""POVMs, the Pretty Good Measurement, overlap matrices, and Born-rule sampling.

The overlap matrix K of a POVM {E_i} against an ensemble {rho_j} has entries
K_ij = Tr(E_i rho_j); the induced outcome distribution of a channel with
mixing weights theta is p = K theta. When a completion effect is present its
row is stored last; downstream consumers drop all-zero rows before inverting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .channel import MixedUnitaryChannel

OVERLAP_IMAG_TOL = 1e-8
OVERLAP_NEG_TOL = 1e-12
BORN_SUM_TOL = 1e-6
BORN_NEG_TOL = 1e-10
ZERO_ROW_TOL = 1e-12


@dataclass(frozen=True)
class Povm:
    """A POVM: `effects` of shape (s, dim, dim) plus an optional completion effect.

    Every effect must be Hermitian PSD within tolerance and the effects
    (including the completion, when present) must sum to the identity.
    """

    effects: np.ndarray
    completion_effect: np.ndarray | None = None

    def __post_init__(self) -> None:
        effects = np.asarray(self.effects, dtype=complex)
        if effects.ndim != 3 or effects.shape[1] != effects.shape[2]:
            raise ValueError(f"effects must have shape (s, dim, dim), got {effects.shape}")
        total = np.zeros(effects.shape[1:], dtype=complex)
        for i in range(effects.shape[0]):
            linalg.check_hermitian(effects[i], name=f"effects[{i}]")
            lo = float(np.linalg.eigvalsh(effects[i])[0])
            if lo < linalg.PSD_EIG_FLOOR:
                raise ValueError(f"effects[{i}] has eigenvalue {lo:.3e} below PSD floor")
            total += effects[i]
        completion = self.completion_effect
        if completion is not None:
            completion = linalg.check_hermitian(completion, name="completion_effect")
            if completion.shape != effects.shape[1:]:
                raise ValueError("completion_effect dimension does not match effects")
            lo = float(np.linalg.eigvalsh(completion)[0])
            if lo < linalg.PSD_EIG_FLOOR:
                raise ValueError(f"completion_effect has eigenvalue {lo:.3e} below PSD floor")
            total += completion
            completion.setflags(write=False)
        residue = np.linalg.norm(total - np.eye(effects.shape[1]))
        if residue > linalg.COMPLETENESS_TOL:
            raise ValueError(
                f"effects do not sum to identity: residue {residue:.3e} > "
                f"{linalg.COMPLETENESS_TOL:g}"
            )
        effects.setflags(write=False)
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "completion_effect", completion)

    @property
    def dim(self) -> int:
        return int(self.effects.shape[1])

    @property
    def n_outcomes(self) -> int:
        extra = 0 if self.completion_effect is None else 1
        return int(self.effects.shape[0]) + extra

    def stack(self) -> np.ndarray:
        """All effects as one (n_outcomes, dim, dim) array, completion last."""
        if self.completion_effect is None:
            return self.effects
        return np.concatenate([self.effects, self.completion_effect[None]], axis=0)


@dataclass(frozen=True)
class Ensemble:
    """A finite ensemble of density operators, stored as one (r, dim, dim) array."""

    states: np.ndarray

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=complex)
        if states.ndim != 3 or states.shape[1] != states.shape[2]:
            raise ValueError(f"states must have shape (r, dim, dim), got {states.shape}")
        for j in range(states.shape[0]):
            linalg.check_density_operator(states[j], name=f"states[{j}]")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def size(self) -> int:
        return int(self.states.shape[0])


def probe_orbit_ensemble(
    channel: MixedUnitaryChannel,
    probe: np.ndarray,
    d_ancilla: int,
) -> Ensemble:
    """Ensemble of states (U_a ⊗ I)|probe⟩⟨probe|(U_a ⊗ I)† for all channel unitaries.

    The probe lives on a d_channel x d_ancilla system; the channel's unitaries
    act on the first factor.
    """
    probe = linalg.check_state_vector(probe)
    d = channel.d_channel
    if d_ancilla < 1:
        raise ValueError(f"d_ancilla must be >= 1, got {d_ancilla}")
    if probe.size != d * d_ancilla:
        raise ValueError(
            f"probe dim {probe.size} does not match d_channel*d_ancilla = {d * d_ancilla}"
        )
    psi = probe.reshape(d, d_ancilla)
    vectors = np.einsum("akm,mj->akj", channel.unitaries, psi).reshape(channel.rank, -1)
    states = np.einsum("ai,aj->aij", vectors, vectors.conj())
    return Ensemble(states)


def unitary_orbit_ensemble(channel: MixedUnitaryChannel) -> Ensemble:
    """Orbit of the maximally entangled probe under the channel's unitaries."""
    probe = linalg.max_entangled_state(channel.d_channel)
    return probe_orbit_ensemble(channel, probe, channel.d_channel)


def pgm(ensemble: Ensemble) -> Povm:
    """Pretty Good Measurement of the uniform mixture of an ensemble.

    With sigma the equal-weight average of the states, the effects are
    E_i = sigma^{-1/2} (rho_i / r) sigma^{-1/2} using the pseudo-inverse
    square root; the kernel projector I - sum E_i is appended as an explicit
    completion effect so the POVM is complete.

    Parameters
    ----------
    ensemble : Ensemble
        r states of equal dimension.

    Returns
    -------
    Povm
        r effects plus the kernel completion effect.
    """
    states = ensemble.states
    r = ensemble.size
    sigma = states.mean(axis=0)
    root = linalg.inv_sqrt_psd(sigma)
    effects = np.einsum("ab,jbc,cd->jad", root, states, root, optimize=True) / r
    effects = (effects + effects.conj().transpose(0, 2, 1)) / 2.0
    completion = np.eye(ensemble.dim, dtype=complex) - effects.sum(axis=0)
    completion = (completion + completion.conj().T) / 2.0
    # The completion is the projector onto ker(sigma); rounding can leave
    # eigenvalues a hair below zero, so clip before validation.
    w, v = np.linalg.eigh(completion)
    completion = (v * np.clip(w, 0.0, None)) @ v.conj().T
    return Povm(effects, completion)


def random_povm(dim: int, n_outcomes: int, rng: np.random.Generator) -> Povm:
    """Draw a random complete POVM by normalizing Wishart-distributed effects.

    Each raw effect is G G† for a dim x dim complex Gaussian G; the batch is
    conjugated by the inverse square root of its sum so the effects add to
    the identity exactly (up to rounding), with no completion effect needed.
    """
    if n_outcomes < 1:
        raise ValueError(f"n_outcomes must be >= 1, got {n_outcomes}")
    raw = np.empty((n_outcomes, dim, dim), dtype=complex)
    for i in range(n_outcomes):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        raw[i] = g @ g.conj().T
    root = linalg.inv_sqrt_psd(raw.sum(axis=0))
    effects = np.einsum("ab,jbc,cd->jad", root, raw, root, optimize=True)
    effects = (effects + effects.conj().transpose(0, 2, 1)) / 2.0
    return Povm(effects)


def overlap_matrix(povm: Povm, ensemble: Ensemble) -> np.ndarray:
    """Overlap matrix K_ij = Tr(E_i rho_j), completion row last when present.

    Entries must be real within an imaginary residue of 1e-8 (a larger
    residue signals a malformed effect or state and raises) and are clamped
    at zero from below after validation.
    """
    if povm.dim != ensemble.dim:
        raise ValueError(f"POVM dim {povm.dim} does not match ensemble dim {ensemble.dim}")
    entries = np.einsum("iab,jba->ij", povm.stack(), ensemble.states, optimize=True)
    imag_residue = float(np.abs(entries.imag).max(initial=0.0))
    if imag_residue > OVERLAP_IMAG_TOL:
        raise ValueError(
            f"overlap entries have imaginary residue {imag_residue:.3e} > "
            f"{OVERLAP_IMAG_TOL:g}"
        )
    k = entries.real
    if k.min(initial=0.0) < -OVERLAP_NEG_TOL:
        raise ValueError(f"overlap entry {k.min():.3e} below -{OVERLAP_NEG_TOL:g}")
    return np.clip(k, 0.0, None)


def check_overlap_matrix(k: np.ndarray, complete: bool = True) -> np.ndarray:
    """Validate overlap-matrix invariants: entry range and column sums."""
    k = np.asarray(k, dtype=float)
    if k.ndim != 2:
        raise ValueError(f"overlap matrix must be 2-d, got shape {k.shape}")
    if k.min(initial=0.0) < -OVERLAP_NEG_TOL:
        raise ValueError(f"overlap entry {k.min():.3e} below -{OVERLAP_NEG_TOL:g}")
    col_sums = k.sum(axis=0)
    if col_sums.max(initial=0.0) > 1.0 + linalg.COMPLETENESS_TOL:
        raise ValueError(f"overlap column sum {col_sums.max():.10f} exceeds 1")
    if complete and np.abs(col_sums - 1.0).max(initial=0.0) > linalg.COMPLETENESS_TOL:
        raise ValueError("overlap columns do not sum to 1 for a complete POVM")
    return k


def nonzero_rows(k: np.ndarray, tol: float = ZERO_ROW_TOL) -> np.ndarray:
    """Boolean mask of overlap-matrix rows with norm above `tol`."""
    return np.linalg.norm(np.asarray(k, dtype=float), axis=1) > tol


def born_probabilities(rho: np.ndarray, povm: Povm) -> np.ndarray:
    """Outcome distribution Tr(E_i rho) of measuring `rho`, completion last.

    Negative residues above -1e-10 are clamped to zero and the vector is
    renormalized; a total probability off by more than 1e-6 raises.
    """
    rho = linalg.check_density_operator(rho)
    if rho.shape[0] != povm.dim:
        raise ValueError(f"state dim {rho.shape[0]} does not match POVM dim {povm.dim}")
    raw = np.einsum("iab,ba->i", povm.stack(), rho, optimize=True)
    imag_residue = float(np.abs(raw.imag).max(initial=0.0))
    if imag_residue > OVERLAP_IMAG_TOL:
        raise ValueError(f"Born probabilities have imaginary residue {imag_residue:.3e}")
    p = raw.real
    if p.min(initial=0.0) < -BORN_NEG_TOL:
        raise ValueError(f"inconsistent POVM: negative probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    total = float(p.sum())
    if abs(total - 1.0) > BORN_SUM_TOL:
        raise ValueError(f"inconsistent POVM: probabilities sum to {total!r}")
    return p / total


def born_sample(
    rho: np.ndarray,
    povm: Povm,
    rng: np.random.Generator,
    size: int | None = None,
) -> int | np.ndarray:
    """Sample outcome indices from the Born distribution of `rho` under `povm`.

    Returns a single index when `size` is None, else an array of indices.
    """
    p = born_probabilities(rho, povm)
    if size is None:
        return int(rng.choice(p.size, p=p))
    return rng.choice(p.size, size=size, p=p)
