"""Mixed unitary channels: application to states and k-fold effective concatenation.

A mixed unitary channel of rank r applies one of r known unitaries U_a with
probability theta_a. The flat-index convention for k-tuples (a_1, ..., a_k)
is sum_i a_i * r**(k-i) with a_1 most significant; the same convention is
used by the tensor-power Jacobian so the two modules index the effective
channel identically.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from . import linalg

THETA_SUM_TOL = 1e-12
DEFAULT_RANK_CAP = 4096
RANK_CAP_ENV = "MUCLAB_RANK_CAP"


class RankCapExceeded(RuntimeError):
    """Raised when an effective channel would exceed the configured rank cap."""


def rank_cap() -> int:
    """Current cap on effective rank r**k, overridable via MUCLAB_RANK_CAP."""
    raw = os.environ.get(RANK_CAP_ENV)
    if raw is None:
        return DEFAULT_RANK_CAP
    cap = int(raw)
    if cap < 1:
        raise ValueError(f"{RANK_CAP_ENV} must be >= 1, got {cap}")
    return cap


def check_probability_vector(theta: np.ndarray, tol: float = THETA_SUM_TOL) -> np.ndarray:
    """Validate a probability vector (non-negative, sums to 1 within `tol`)."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size == 0:
        raise ValueError(f"theta must be a non-empty 1-d vector, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta contains non-finite entries")
    if theta.min() < 0.0:
        raise ValueError(f"theta has negative entry {theta.min()!r}")
    total = float(theta.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"theta sums to {total!r}, off by more than {tol:g}")
    return theta


@dataclass(frozen=True)
class MixedUnitaryChannel:
    """A rank-r mixed unitary channel rho -> sum_a theta_a U_a rho U_a†.

    Parameters
    ----------
    unitaries : ndarray
        Array of shape (r, d_channel, d_channel); each slice is unitary.
    theta : ndarray
        Probability vector of length r.
    """

    unitaries: np.ndarray
    theta: np.ndarray
    d_channel: int = field(init=False)
    rank: int = field(init=False)

    def __post_init__(self) -> None:
        unitaries = np.asarray(self.unitaries, dtype=complex)
        if unitaries.ndim != 3 or unitaries.shape[1] != unitaries.shape[2]:
            raise ValueError(
                f"unitaries must have shape (r, d, d), got {unitaries.shape}"
            )
        for a in range(unitaries.shape[0]):
            linalg.check_unitary(unitaries[a], name=f"unitaries[{a}]")
        theta = check_probability_vector(self.theta)
        if theta.size != unitaries.shape[0]:
            raise ValueError(
                f"theta length {theta.size} does not match rank {unitaries.shape[0]}"
            )
        unitaries.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "unitaries", unitaries)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "d_channel", int(unitaries.shape[1]))
        object.__setattr__(self, "rank", int(unitaries.shape[0]))


def apply(channel: MixedUnitaryChannel, rho: np.ndarray) -> np.ndarray:
    """Apply the channel to a density operator on its own d_channel system."""
    rho = linalg.check_density_operator(rho)
    if rho.shape[0] != channel.d_channel:
        raise ValueError(
            f"state dim {rho.shape[0]} does not match channel dim {channel.d_channel}"
        )
    out = np.zeros_like(rho)
    for weight, u in zip(channel.theta, channel.unitaries):
        out += weight * (u @ rho @ u.conj().T)
    return out


def apply_with_ancilla(channel: MixedUnitaryChannel, rho: np.ndarray) -> np.ndarray:
    """Apply the channel to the first tensor factor of a bipartite density operator.

    The operator lives on a d_channel x d_ancilla system; the ancilla factor
    is untouched. With d_ancilla = 1 this reduces to `apply`.
    """
    rho = linalg.check_density_operator(rho)
    d = channel.d_channel
    total = rho.shape[0]
    if total % d != 0:
        raise ValueError(f"total dim {total} is not divisible by channel dim {d}")
    d_anc = total // d
    # (U ⊗ I) rho (U ⊗ I)† as a blockwise product: reshape to (d, anc, d, anc)
    # and contract U against the channel indices on both sides.
    blocks = rho.reshape(d, d_anc, d, d_anc)
    out = np.zeros_like(blocks)
    for weight, u in zip(channel.theta, channel.unitaries):
        rotated = np.einsum("ab,bjcl,dc->ajdl", u, blocks, u.conj(), optimize=True)
        out += weight * rotated
    return out.reshape(total, total)


def concat_effective(
    channel: MixedUnitaryChannel,
    intermediates: list[np.ndarray] | None = None,
    k: int | None = None,
) -> MixedUnitaryChannel:
    """Build the rank r**k effective channel of k uses interleaved with unitaries.

    The composite unitary for tuple (a_1, ..., a_k) is V_k U_{a_k} ... V_1 U_{a_1}
    (the channel acts first, then V_1, and so on), and the effective theta is the
    k-th tensor power of theta under the flat-index convention.

    Parameters
    ----------
    channel : MixedUnitaryChannel
        The single-use channel.
    intermediates : list of ndarray, optional
        k unitaries V_1, ..., V_k of dim d_channel. Defaults to k identities
        when only `k` is given.
    k : int, optional
        Number of uses; required when `intermediates` is omitted.

    Returns
    -------
    MixedUnitaryChannel
        The effective channel of rank r**k.
    """
    d = channel.d_channel
    if intermediates is None:
        if k is None:
            raise ValueError("either intermediates or k must be given")
        intermediates = [np.eye(d, dtype=complex)] * k
    vs = [linalg.check_unitary(v, name=f"intermediates[{i}]") for i, v in enumerate(intermediates)]
    if k is not None and k != len(vs):
        raise ValueError(f"k={k} does not match {len(vs)} intermediates")
    k = len(vs)
    if k < 1:
        raise ValueError("k must be >= 1")
    for i, v in enumerate(vs):
        if v.shape[0] != d:
            raise ValueError(f"intermediates[{i}] dim {v.shape[0]} != channel dim {d}")

    r = channel.rank
    cap = rank_cap()
    eff_rank = r**k
    if eff_rank > cap:
        raise RankCapExceeded(
            f"effective rank r**k = {eff_rank} exceeds cap {cap}; "
            f"raise {RANK_CAP_ENV} to override"
        )

    eff_unitaries = np.empty((eff_rank, d, d), dtype=complex)
    for flat, tup in enumerate(itertools.product(range(r), repeat=k)):
        mat = np.eye(d, dtype=complex)
        for v, a in zip(vs, tup):
            mat = v @ channel.unitaries[a] @ mat
        eff_unitaries[flat] = mat

    eff_theta = channel.theta
    for _ in range(k - 1):
        eff_theta = np.kron(eff_theta, channel.theta)
    # kron of (a_1-major) powers places theta[a_1]*...*theta[a_k] at the flat
    # index sum_i a_i r**(k-i), matching itertools.product order above.
    return MixedUnitaryChannel(eff_unitaries, eff_theta)


def from_spec(spec: dict, rng: np.random.Generator | None = None) -> MixedUnitaryChannel:
    """Build a channel from its JSON-style specification dict.

    Recognized keys: "d_channel" (int, required), "unitaries" ("haar" or a
    list of matrices with [re, im] entry pairs), "theta" (list of floats,
    "uniform", or "dirichlet"), "r" (int, required when neither unitaries nor
    theta fixes the rank), and "seed" (int, overrides `rng` for the random
    draws).
    """
    if "d_channel" not in spec:
        raise ValueError("channel spec is missing required field 'd_channel'")
    d = int(spec["d_channel"])
    if d < 1:
        raise ValueError(f"d_channel must be >= 1, got {d}")
    if "seed" in spec:
        rng = np.random.default_rng(int(spec["seed"]))

    unitaries_spec = spec.get("unitaries", "haar")
    theta_spec = spec.get("theta", "uniform")

    if isinstance(unitaries_spec, str):
        if unitaries_spec != "haar":
            raise ValueError(f"unknown unitaries spec {unitaries_spec!r}")
        explicit_unitaries = None
    else:
        explicit_unitaries = np.asarray(unitaries_spec, dtype=float)
        if explicit_unitaries.ndim != 4 or explicit_unitaries.shape[-1] != 2:
            raise ValueError(
                "explicit unitaries must be nested [re, im] pairs of shape (r, d, d, 2)"
            )
        explicit_unitaries = explicit_unitaries[..., 0] + 1j * explicit_unitaries[..., 1]

    if isinstance(theta_spec, str):
        explicit_theta = None
        if theta_spec not in ("uniform", "dirichlet"):
            raise ValueError(f"unknown theta spec {theta_spec!r}")
    else:
        explicit_theta = check_probability_vector(np.asarray(theta_spec, dtype=float))

    if explicit_unitaries is not None:
        r = explicit_unitaries.shape[0]
    elif explicit_theta is not None:
        r = explicit_theta.size
    elif "r" in spec:
        r = int(spec["r"])
    else:
        raise ValueError("channel spec needs 'r' when unitaries and theta are both random")
    if "r" in spec and int(spec["r"]) != r:
        raise ValueError(f"spec field 'r'={spec['r']} conflicts with inferred rank {r}")
    if r < 1:
        raise ValueError(f"rank must be >= 1, got {r}")

    if explicit_unitaries is None:
        if rng is None:
            raise ValueError("haar unitaries need a 'seed' field or an rng")
        explicit_unitaries = np.stack([linalg.haar_unitary(d, rng) for _ in range(r)])
    if explicit_unitaries.shape[1] != d:
        raise ValueError(
            f"unitary dim {explicit_unitaries.shape[1]} does not match d_channel {d}"
        )

    if explicit_theta is None:
        if theta_spec == "uniform":
            explicit_theta = np.full(r, 1.0 / r)
        else:
            if rng is None:
                raise ValueError("dirichlet theta needs a 'seed' field or an rng")
            explicit_theta = rng.dirichlet(np.ones(r))

    return MixedUnitaryChannel(explicit_unitaries, explicit_theta)
