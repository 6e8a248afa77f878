"""Dense complex linear algebra: Haar sampling, entangled probes, PSD matrix functions.

Numerical tolerances shared across the package:

=============================  ========
unitarity (Frobenius residue)  1e-10
hermiticity                    1e-10
trace normalization            1e-10
eigenvalue floor for PSD       -1e-10
POVM / projector completeness  1e-8
support-projector residue      1e-8
=============================  ========
"""

from __future__ import annotations

import numpy as np

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_EIG_FLOOR = -1e-10
COMPLETENESS_TOL = 1e-8
SUPPORT_TOL = 1e-8


def check_square(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat.view(float))):
        raise ValueError(f"{name} contains non-finite entries")
    return mat


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL, name: str = "unitary") -> np.ndarray:
    """Validate U†U = I within `tol` (Frobenius norm) and return the array."""
    u = check_square(np.asarray(u, dtype=complex), name)
    residue = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
    if residue > tol:
        raise ValueError(f"{name} is not unitary: ||U†U - I||_F = {residue:.3e} > {tol:g}")
    return u


def check_hermitian(mat: np.ndarray, tol: float = HERMITIAN_TOL, name: str = "matrix") -> np.ndarray:
    mat = check_square(np.asarray(mat, dtype=complex), name)
    residue = np.linalg.norm(mat - mat.conj().T)
    if residue > tol:
        raise ValueError(f"{name} is not Hermitian: ||A - A†||_F = {residue:.3e} > {tol:g}")
    return mat


def check_state_vector(psi: np.ndarray, tol: float = TRACE_TOL) -> np.ndarray:
    """Validate a pure-state amplitude vector (unit norm within `tol`)."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size == 0:
        raise ValueError(f"state vector must be 1-d and non-empty, got shape {psi.shape}")
    if not np.all(np.isfinite(psi.view(float))):
        raise ValueError("state vector contains non-finite entries")
    norm_sq = float(np.vdot(psi, psi).real)
    if abs(norm_sq - 1.0) > tol:
        raise ValueError(f"state vector has squared norm {norm_sq!r}, off by more than {tol:g}")
    return psi


def check_density_operator(
    rho: np.ndarray,
    herm_tol: float = HERMITIAN_TOL,
    trace_tol: float = TRACE_TOL,
    eig_floor: float = PSD_EIG_FLOOR,
    name: str = "density operator",
) -> np.ndarray:
    """Validate Hermiticity, unit trace, and PSD spectrum of a density matrix."""
    rho = check_hermitian(rho, herm_tol, name)
    trace = complex(np.trace(rho))
    if abs(trace - 1.0) > trace_tol:
        raise ValueError(f"{name} has trace {trace!r}, off by more than {trace_tol:g}")
    lo = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)[0])
    if lo < eig_floor:
        raise ValueError(f"{name} has eigenvalue {lo:.3e} below floor {eig_floor:g}")
    return rho


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a Haar-distributed unitary of the given dimension.

    A complex Ginibre matrix is orthonormalized by QR and each column is
    rescaled by the phase of the matching diagonal entry of R; without that
    phase fix the QR output is not Haar.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r).copy()
    diag /= np.abs(diag)
    return q * diag


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a Haar-random pure-state vector (normalized complex Gaussian)."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def max_entangled_state(d_channel: int) -> np.ndarray:
    """Amplitudes of the maximally entangled state on a d_channel × d_channel system.

    Entry 1/sqrt(d_channel) at every index j*d_channel + j, zero elsewhere.
    """
    if d_channel < 1:
        raise ValueError(f"d_channel must be >= 1, got {d_channel}")
    psi = np.zeros(d_channel * d_channel, dtype=complex)
    psi[:: d_channel + 1] = 1.0 / np.sqrt(d_channel)
    return psi


def pure_density(psi: np.ndarray) -> np.ndarray:
    """Rank-one density operator |psi><psi| of a normalized amplitude vector."""
    psi = check_state_vector(psi)
    return np.outer(psi, psi.conj())


def default_cutoff(dim: int) -> float:
    """Relative eigenvalue cutoff for rank decisions: dim times machine epsilon."""
    return dim * float(np.finfo(float).eps)


def inv_sqrt_psd(mat: np.ndarray, cutoff: float | None = None) -> np.ndarray:
    """Pseudo-inverse square root of a Hermitian PSD matrix.

    Eigenvalues above cutoff * lambda_max map to lambda**-0.5; the rest
    (the numerical kernel) map to zero.
    """
    mat = check_hermitian(mat, name="PSD matrix")
    if cutoff is None:
        cutoff = default_cutoff(mat.shape[0])
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2.0)
    wmax = float(w[-1])
    if wmax <= 0.0:
        return np.zeros_like(mat)
    keep = w > cutoff * wmax
    scaled = v[:, keep] / np.sqrt(w[keep])
    return scaled @ v[:, keep].conj().T


def support_projector(mat: np.ndarray, cutoff: float | None = None) -> np.ndarray:
    """Orthogonal projector onto the numerical support of a Hermitian PSD matrix."""
    mat = check_hermitian(mat, name="PSD matrix")
    if cutoff is None:
        cutoff = default_cutoff(mat.shape[0])
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2.0)
    wmax = float(w[-1])
    if wmax <= 0.0:
        return np.zeros_like(mat)
    keep = w > cutoff * wmax
    return v[:, keep] @ v[:, keep].conj().T


def partial_trace(rho: np.ndarray, dim_left: int, dim_right: int, keep: int) -> np.ndarray:
    """Trace out one tensor factor of an operator on a dim_left × dim_right system.

    keep=0 returns the reduced operator on the left factor, keep=1 on the right.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim_left * dim_right, dim_left * dim_right):
        raise ValueError(
            f"operator shape {rho.shape} does not match factors ({dim_left}, {dim_right})"
        )
    blocks = rho.reshape(dim_left, dim_right, dim_left, dim_right)
    if keep == 0:
        return np.einsum("ijkj->ik", blocks)
    if keep == 1:
        return np.einsum("jijk->ik", blocks)
    raise ValueError(f"keep must be 0 or 1, got {keep}")
