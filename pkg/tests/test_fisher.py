"""Tests for Fisher information, the tensor-power Jacobian, and bound audits."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from muclab import channel, fisher, linalg, povm

import oracles

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def haar_channel(d, r, rng, theta=None):
    unitaries = np.stack([linalg.haar_unitary(d, rng) for _ in range(r)])
    if theta is None:
        theta = np.full(r, 1.0 / r)
    return channel.MixedUnitaryChannel(unitaries, theta)


def random_overlap_matrix(s, r, rng):
    """A random column-stochastic matrix, the K of some complete measurement."""
    k = rng.dirichlet(np.ones(s), size=r).T
    return k


def test_simplex_projector_r2():
    assert_allclose(fisher.simplex_projector(2), [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


@pytest.mark.parametrize("r", [1, 2, 5, 9])
def test_simplex_projector_properties(r):
    proj = fisher.simplex_projector(r)
    assert np.abs(proj @ np.ones(r)).max() <= 1e-12
    assert np.abs(proj @ proj - proj).max() <= 1e-12


def test_outcome_distribution_identity_overlap():
    assert_allclose(
        fisher.outcome_distribution(np.eye(2), np.array([0.2, 0.8])), [0.2, 0.8], atol=1e-15
    )


def test_outcome_distribution_single_row_of_ones():
    assert_allclose(
        fisher.outcome_distribution(np.ones((1, 3)), np.array([0.3, 0.3, 0.4])), [1.0], atol=1e-15
    )


def test_outcome_distribution_matches_direct_born_probabilities():
    """K theta agrees with Tr(E_i Lambda(psi)) computed through the physics path."""
    chan = channel.MixedUnitaryChannel(
        np.stack([np.eye(2, dtype=complex), PAULI_X]), np.array([0.5, 0.5])
    )
    ensemble = povm.unitary_orbit_ensemble(chan)
    measurement = povm.pgm(ensemble)
    overlap = povm.overlap_matrix(measurement, ensemble)
    model_p = fisher.outcome_distribution(overlap, chan.theta)
    rho_out = channel.apply_with_ancilla(
        chan, linalg.pure_density(linalg.max_entangled_state(2))
    )
    direct_p = povm.born_probabilities(rho_out, measurement)
    assert_allclose(model_p, direct_p, atol=1e-10)


def test_fisher_matrix_identity_overlap_at_uniform():
    """K = I2 at uniform theta gives 2 P_s, by hand and by finite differences."""
    fim = fisher.fisher_matrix(np.eye(2), np.array([0.5, 0.5]))
    assert_allclose(fim, 2 * fisher.simplex_projector(2), atol=1e-12)
    assert abs(np.trace(fim) - 2.0) < 1e-12
    assert_allclose(fim, oracles.fd_fisher(np.eye(2), np.array([0.5, 0.5])), atol=1e-6)


def test_fisher_matrix_single_outcome_is_zero():
    fim = fisher.fisher_matrix(np.ones((1, 3)), np.array([0.2, 0.3, 0.5]))
    assert_allclose(fim, np.zeros((3, 3)), atol=1e-12)


@pytest.mark.parametrize("s,r,seed", [(4, 3, 0), (8, 5, 1), (6, 4, 2), (2, 2, 3)])
def test_fisher_matrix_matches_finite_differences(s, r, seed):
    rng = np.random.default_rng(seed)
    k = random_overlap_matrix(s, r, rng)
    theta = rng.dirichlet(np.ones(r) * 5)
    fim = fisher.fisher_matrix(k, theta)
    assert np.abs(fim - oracles.fd_fisher(k, theta)).max() <= 1e-6


def test_fisher_matrix_is_symmetric_psd_and_annihilates_ones():
    rng = np.random.default_rng(4)
    k = random_overlap_matrix(7, 4, rng)
    theta = rng.dirichlet(np.ones(4))
    fim = fisher.fisher_matrix(k, theta)
    assert np.abs(fim - fim.T).max() <= 1e-9
    assert np.linalg.eigvalsh(fim)[0] >= -1e-8
    assert np.linalg.norm(fim @ np.ones(4)) <= 1e-8


def test_fisher_matrix_drops_zero_rows():
    k = np.vstack([np.eye(2), np.zeros(2)])
    fim = fisher.fisher_matrix(k, np.array([0.5, 0.5]))
    assert abs(np.trace(fim) - 2.0) < 1e-12


def test_fisher_matrix_raises_on_boundary_divergence():
    """A zero-probability outcome with nonzero sensitivity is a divergence, not a drop."""
    with pytest.raises(ValueError):
        fisher.fisher_matrix(np.eye(2), np.array([1.0, 0.0]))


def test_pgm_fisher_trace_bound_at_uniform_spot_check():
    rng = np.random.default_rng(5)
    chan = haar_channel(3, 5, rng)
    ensemble = povm.unitary_orbit_ensemble(chan)
    overlap = povm.overlap_matrix(povm.pgm(ensemble), ensemble)
    fim = fisher.fisher_matrix(overlap, chan.theta)
    assert np.trace(fim) <= 5 * 9 + 1e-9


def test_tensor_jacobian_k1_is_identity():
    assert_allclose(fisher.tensor_jacobian(np.array([0.3, 0.7]), 1), np.eye(2), atol=1e-15)


@pytest.mark.parametrize("theta,k", [
    ([0.5, 0.3, 0.2], 2),
    ([0.25, 0.75], 3),
    ([0.1, 0.2, 0.3, 0.4], 2),
])
def test_tensor_jacobian_matches_brute_force_and_finite_differences(theta, k):
    theta = np.array(theta)
    jac = fisher.tensor_jacobian(theta, k)
    assert_allclose(jac, oracles.brute_force_jacobian(theta, k), atol=1e-12)
    assert np.abs(jac - oracles.fd_jacobian(theta, k)).max() <= 1e-8


def test_tensor_jacobian_uniform_entries():
    """At uniform theta, entry (a, b) is the count of b in tuple a times r^{1-k}."""
    r, k = 3, 2
    jac = fisher.tensor_jacobian(np.full(r, 1 / r), k)
    counts = oracles.brute_force_jacobian(np.full(r, 1 / r), k) * r ** (k - 1)
    assert_allclose(jac, counts * r ** (1 - k), atol=1e-12)


@pytest.mark.parametrize("r,k", [(2, 1), (2, 2), (3, 2), (2, 3), (4, 2), (6, 3)])
def test_tensor_jacobian_uniform_gram_matrix(r, k):
    """The uniform-point Gram matrix implied by the entrywise definition.

    J⊤J = k r^{-k} (r I + (k-1) 11⊤), hence the squared operator norm is
    exactly k² r^{1-k}. These follow from the definition by direct counting
    and the brute-force oracle confirms them.
    """
    theta = np.full(r, 1.0 / r)
    jac = fisher.tensor_jacobian(theta, k)
    gram = jac.T @ jac
    expected = k * r ** (-k) * (r * np.eye(r) + (k - 1) * np.ones((r, r)))
    assert_allclose(gram, expected, atol=1e-12)
    brute = oracles.brute_force_jacobian(theta, k)
    assert_allclose(brute.T @ brute, expected, atol=1e-12)
    norm_sq = np.linalg.norm(jac, 2) ** 2
    assert abs(norm_sq - k**2 * r ** (1 - k)) <= 1e-10


def test_tensor_jacobian_respects_rank_cap(monkeypatch):
    monkeypatch.setenv(channel.RANK_CAP_ENV, "8")
    with pytest.raises(channel.RankCapExceeded):
        fisher.tensor_jacobian(np.full(3, 1 / 3), 2)


def test_fisher_concat_k1_equals_plain_fisher():
    rng = np.random.default_rng(6)
    chan = haar_channel(2, 2, rng, theta=np.array([0.4, 0.6]))
    ensemble = povm.unitary_orbit_ensemble(chan)
    measurement = povm.pgm(ensemble)
    plain = fisher.fisher_matrix(povm.overlap_matrix(measurement, ensemble), chan.theta)
    concat = fisher.fisher_concat(chan, [np.eye(2, dtype=complex)], measurement, chan.theta)
    assert_allclose(concat, plain, atol=1e-10)


@pytest.mark.parametrize("theta", [[0.5, 0.5], [0.3, 0.7]])
def test_fisher_concat_matches_finite_differences(theta):
    """Concatenated Fisher equals the finite-difference Fisher of p = K̃ theta^{⊗k}."""
    rng = np.random.default_rng(7)
    theta = np.array(theta)
    chan = haar_channel(2, 2, rng, theta=theta)
    intermediates = [linalg.haar_unitary(2, rng) for _ in range(2)]
    effective = channel.concat_effective(chan, intermediates)
    ensemble = povm.unitary_orbit_ensemble(effective)
    measurement = povm.pgm(ensemble)
    k_tilde = povm.overlap_matrix(measurement, ensemble)
    fim = fisher.fisher_concat(chan, intermediates, measurement, theta)
    expected = oracles.fd_fisher_concat(k_tilde, theta, 2)
    assert np.abs(fim - expected).max() <= 1e-6


def test_fisher_concat_chain_rule_internal_consistency():
    """At uniform theta the result is exactly J⊤ Ĩ J from independent parts."""
    rng = np.random.default_rng(8)
    theta = np.array([0.5, 0.5])
    chan = haar_channel(2, 2, rng, theta=theta)
    intermediates = [linalg.haar_unitary(2, rng) for _ in range(2)]
    effective = channel.concat_effective(chan, intermediates)
    ensemble = povm.unitary_orbit_ensemble(effective)
    measurement = povm.pgm(ensemble)
    eff_fim = fisher.fisher_matrix(povm.overlap_matrix(measurement, ensemble), effective.theta)
    jac = fisher.tensor_jacobian(theta, 2)
    assembled = jac.T @ eff_fim @ jac
    fim = fisher.fisher_concat(chan, intermediates, measurement, theta)
    assert np.abs(fim - assembled).max() <= 1e-10


def test_fisher_concat_annihilates_ones_at_nonuniform_theta():
    rng = np.random.default_rng(9)
    theta = np.array([0.2, 0.8])
    chan = haar_channel(2, 2, rng, theta=theta)
    intermediates = [linalg.haar_unitary(2, rng) for _ in range(2)]
    effective = channel.concat_effective(chan, intermediates)
    measurement = povm.pgm(povm.unitary_orbit_ensemble(effective))
    fim = fisher.fisher_concat(chan, intermediates, measurement, theta)
    assert np.linalg.norm(fim @ np.ones(2)) <= 1e-8
    assert np.linalg.eigvalsh(fim)[0] >= -1e-8


def test_audit_trace_bound_identity_overlap():
    fim = fisher.fisher_matrix(np.eye(2), np.array([0.5, 0.5]))
    report = fisher.audit_trace_bound(fim, 2, 2, k=1)
    assert report.bound == 4.0
    assert report.satisfied
    assert abs(report.slack - 2.0) < 1e-12


def test_audit_trace_bound_zero_fisher():
    report = fisher.audit_trace_bound(np.zeros((3, 3)), 3, 4, k=1)
    assert report.satisfied
    assert report.slack == report.bound


def test_audit_trace_bound_concat_form():
    report = fisher.audit_trace_bound(np.eye(2), 2, 4, k=3)
    assert report.bound == 9 * 2 * 4


def test_van_trees_closed_form():
    assert abs(fisher.van_trees_lower_bound(4, 2, 1, 0.1) - 200.0) < 1e-9


def test_van_trees_with_saturated_trace():
    r, d, eps = 4, 2, 0.1
    value = fisher.van_trees_lower_bound(r, d, 1, eps, trace_fisher=r * d)
    assert abs(value - r / (d * eps**2)) < 1e-9


def test_van_trees_doubling_k_halves_closed_form():
    one = fisher.van_trees_lower_bound(3, 4, 1, 0.2)
    two = fisher.van_trees_lower_bound(3, 4, 2, 0.2)
    assert abs(one - 2 * two) < 1e-12


def test_van_trees_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        fisher.van_trees_lower_bound(2, 2, 1, 0.0)
