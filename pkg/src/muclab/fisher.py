"""Fisher information of overlap-matrix protocols, tensor-power Jacobians, and bounds.

The classical model induced by an overlap matrix K is p(theta) = K theta on
the probability simplex. Its Fisher information, projected onto the tangent
space {v : 1ᵀv = 0}, is I(theta) = P K⊤ D(p)⁻¹ K P with P the orthogonal
tangent-space projector. Concatenated protocols pull the effective channel's
Fisher information back through the Jacobian of theta -> theta^{⊗k}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import povm as povm_mod
from .channel import (
    RANK_CAP_ENV,
    MixedUnitaryChannel,
    RankCapExceeded,
    check_probability_vector,
    concat_effective,
    rank_cap,
)

ZERO_PROB_TOL = 1e-14
ZERO_ROW_TOL = 1e-12
AUDIT_REL_TOL = 1e-6


def simplex_projector(r: int) -> np.ndarray:
    """Orthogonal projector onto the simplex tangent space {v : sum(v) = 0}."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    return np.eye(r) - np.full((r, r), 1.0 / r)


def outcome_distribution(k: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Outcome distribution p = K theta of the induced classical model."""
    k = np.asarray(k, dtype=float)
    theta = check_probability_vector(theta)
    if k.ndim != 2 or k.shape[1] != theta.size:
        raise ValueError(f"K shape {k.shape} does not match theta length {theta.size}")
    return k @ theta


def fisher_matrix(k: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Fisher information I(theta) = P K⊤ D(p)⁻¹ K P of the model p = K theta.

    Rows whose entire K-row is numerically zero carry no probability and are
    dropped. A vanishing outcome probability on a row with nonzero
    sensitivity means theta sits on the simplex boundary where the Fisher
    information diverges; that raises instead of being clamped.

    Parameters
    ----------
    k : ndarray
        Overlap matrix of shape (s, r).
    theta : ndarray
        Interior point of the probability simplex, length r.

    Returns
    -------
    ndarray
        Symmetric PSD r x r matrix annihilating the all-ones vector.
    """
    theta = check_probability_vector(theta)
    p = outcome_distribution(k, theta)
    keep = povm_mod.nonzero_rows(k, ZERO_ROW_TOL)
    if np.any(p[keep] < ZERO_PROB_TOL):
        worst = int(np.argmin(np.where(keep, p, np.inf)))
        raise ValueError(
            f"outcome {worst} has probability {p[worst]:.3e} with a nonzero K-row; "
            "Fisher information diverges at this theta"
        )
    kk = np.asarray(k, dtype=float)[keep]
    pk = p[keep]
    core = kk.T @ (kk / pk[:, None])
    proj = simplex_projector(theta.size)
    fim = proj @ core @ proj
    return (fim + fim.T) / 2.0


def tensor_jacobian(theta: np.ndarray, k: int) -> np.ndarray:
    """Jacobian of the tensor-power map theta -> theta^{⊗k}.

    Entry (a, b) is sum over positions i with a_i = b of the product of
    theta over the remaining positions of the k-tuple a, under the flat-index
    convention sum_i a_i r**(k-i) shared with the effective channel.
    """
    theta = check_probability_vector(theta)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    r = theta.size
    if r**k > rank_cap():
        raise RankCapExceeded(
            f"tensor power r**k = {r**k} exceeds cap {rank_cap()}; "
            f"raise {RANK_CAP_ENV} to override"
        )
    eye = np.eye(r)
    jac = np.zeros((r**k, r))
    power = {0: np.ones(1)}
    for n in range(1, k):
        power[n] = np.kron(power[n - 1], theta)
    for i in range(k):
        left = power[i][:, None]
        right = power[k - 1 - i][:, None]
        jac += np.kron(np.kron(left, eye), right)
    return jac


def fisher_concat(
    channel: MixedUnitaryChannel,
    intermediates: list[np.ndarray] | None,
    povm: povm_mod.Povm,
    theta: np.ndarray,
    probe: np.ndarray | None = None,
    d_ancilla: int | None = None,
    k: int | None = None,
) -> np.ndarray:
    """Fisher information of a k-fold concatenated protocol at `theta`.

    Builds the effective channel with the given intermediate unitaries, its
    orbit ensemble (maximally entangled probe unless one is supplied), the
    overlap matrix of `povm` against that ensemble, and the effective-model
    Fisher information at theta^{⊗k}; then pulls back through the
    tensor-power Jacobian and projects onto the tangent space.

    Returns
    -------
    ndarray
        Symmetric PSD r x r matrix P J⊤ Ĩ(theta^{⊗k}) J P.
    """
    theta = check_probability_vector(theta)
    if theta.size != channel.rank:
        raise ValueError(f"theta length {theta.size} does not match rank {channel.rank}")
    if intermediates is None:
        if k is None:
            raise ValueError("either intermediates or k must be given")
        intermediates = [np.eye(channel.d_channel, dtype=complex)] * k
    k_uses = len(intermediates)
    base = MixedUnitaryChannel(channel.unitaries, theta)
    effective = concat_effective(base, intermediates)
    if probe is None:
        ensemble = povm_mod.unitary_orbit_ensemble(effective)
    else:
        if d_ancilla is None:
            raise ValueError("d_ancilla is required with an explicit probe")
        ensemble = povm_mod.probe_orbit_ensemble(effective, probe, d_ancilla)
    overlap = povm_mod.overlap_matrix(povm, ensemble)
    eff_fim = fisher_matrix(overlap, effective.theta)
    jac = tensor_jacobian(theta, k_uses)
    proj = simplex_projector(theta.size)
    fim = proj @ jac.T @ eff_fim @ jac @ proj
    return (fim + fim.T) / 2.0


@dataclass(frozen=True)
class BoundReport:
    """Audit of a Fisher trace against its k² r d ceiling (r d when k = 1)."""

    trace_fisher: float
    bound: float
    slack: float
    satisfied: bool


def audit_trace_bound(fisher: np.ndarray, r: int, d: int, k: int = 1) -> BoundReport:
    """Compare Tr(fisher) at the uniform parameter against the k²·r·d bound.

    The probe dimension d is d_channel times d_ancilla. The report is
    satisfied when slack = bound - trace is at least -1e-6 times the bound.
    """
    fisher = np.asarray(fisher, dtype=float)
    trace = float(np.trace(fisher))
    bound = float(k * k * r * d)
    slack = bound - trace
    return BoundReport(trace, bound, slack, bool(slack >= -AUDIT_REL_TOL * bound))


def van_trees_lower_bound(
    r: int,
    d: int,
    k: int,
    epsilon: float,
    trace_fisher: float | None = None,
) -> float:
    """Reference-scale sample-count lower bound for target mean-square error.

    With a measured Fisher trace the value is r² / (trace · ε²); otherwise
    the closed form r / (k·d·ε²) obtained by substituting the trace ceiling.
    Both are constant-1 reference scales, not certified bounds.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if trace_fisher is not None:
        if trace_fisher <= 0:
            raise ValueError(f"trace_fisher must be > 0, got {trace_fisher}")
        return r * r / (trace_fisher * epsilon * epsilon)
    return r / (k * d * epsilon * epsilon)
