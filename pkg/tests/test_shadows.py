"""Protocol simulation: Born probabilities, reconstruction profiles, estimator
identities, and median-of-means aggregation."""
import numpy as np
import pytest

from crmshadow.cliffords import enumerate_cliffords, sample_local_clifford, \
    sample_uniform_clifford
from crmshadow.shadows import (
    EstimatorConfig,
    MeasurementRecord,
    born_probabilities,
    crm_estimate,
    default_mom_batches,
    median_of_means,
    reconstruction_profile,
    run_protocol,
    simulate_round,
)
from crmshadow.states import QuantumState, make_state

from helpers import local_inverse_map, rand_density, rand_pure


def test_born_probabilities_match_dense(rng):
    n = 2
    u = sample_uniform_clifford(n, rng)
    um = u.unitary()
    for state in (QuantumState.pure(rand_pure(4, rng)),
                  QuantumState.dense(rand_density(4, rng))):
        p = born_probabilities(u, state)
        direct = np.real(np.einsum("ij,jk,ik->i", um, state.density(), np.conj(um)))
        assert np.allclose(p, direct, atol=1e-10)
        assert abs(p.sum() - 1.0) < 1e-12


@pytest.mark.parametrize("ensemble", ["clifford", "local_pauli"])
def test_reconstruction_profile_matches_dense(ensemble, rng):
    n, d = 2, 4
    sigma = make_state("s_nk", n=n, k=1)
    obs_char = sigma.char_function()
    obs = sigma.density() - np.eye(d) / d
    if ensemble == "clifford":
        inv = (d + 1.0) * obs
        u = sample_uniform_clifford(n, rng)
    else:
        inv = local_inverse_map(obs, n)
        u = sample_local_clifford(n, rng)
    g = reconstruction_profile(u, obs_char, ensemble)
    um = u.unitary()
    direct = np.real(np.einsum("ij,jk,ik->i", um, inv, np.conj(um)))
    assert np.allclose(g, direct, atol=1e-9)


def test_standard_estimator_unbiased_over_full_group(rng):
    # exact average of the per-circuit expected estimate over all 24 Cliffords
    # equals Tr(O rho)
    n, d = 1, 2
    sigma = QuantumState.pure(np.array([1.0, 0.0], dtype=complex))
    obs_char = sigma.char_function()
    obs = sigma.density() - np.eye(d) / d
    rho = QuantumState.dense(rand_density(d, rng))
    truth = float(np.real(np.trace(obs @ rho.density())))
    total = 0.0
    elems = list(enumerate_cliffords(1))
    for u in elems:
        g = reconstruction_profile(u, obs_char, "clifford")
        p = born_probabilities(u, rho)
        total += float(p @ g)
    assert abs(total / len(elems) - truth) < 1e-10


def test_crm_estimator_expected_value_identity(rng):
    # with fractional counts R * P_rho the CRM estimate reduces to
    # sum_s [P_rho - P_sigma] g + Tr(O sigma) exactly
    n = 2
    sigma = make_state("ghz", n=n)
    obs_char = sigma.char_function()
    rho = QuantumState.dense(rand_density(4, rng))
    u = sample_uniform_clifford(n, rng)
    p_rho = born_probabilities(u, rho)
    record = MeasurementRecord(u, p_rho * 100.0)
    est = crm_estimate(record, obs_char, sigma, mode="crm", ensemble="clifford")
    g = reconstruction_profile(u, obs_char, "clifford")
    p_sig = born_probabilities(u, sigma)
    d = 4
    tr_o_sigma = 1.0 - 1.0 / d
    direct = float((p_rho - p_sig) @ g) + tr_o_sigma
    assert abs(est - direct) < 1e-10


def test_crm_requires_prior():
    sigma = make_state("ghz", n=1)
    u = sample_uniform_clifford(1, np.random.default_rng(0))
    record = MeasurementRecord(u, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        crm_estimate(record, sigma.char_function(), None, mode="crm")


def test_simulate_round_counts(rng):
    rho = make_state("ghz", n=2)
    u = sample_uniform_clifford(2, rng)
    rec = simulate_round(rho, u, 50, rng)
    assert rec.R == 50
    assert rec.counts.sum() == 50


def test_estimator_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(ensemble="bogus")
    with pytest.raises(ValueError):
        EstimatorConfig(mode="bogus")
    with pytest.raises(ValueError):
        EstimatorConfig(mode="standard", R=4)
    with pytest.raises(ValueError):
        EstimatorConfig(R=0)


def test_median_of_means():
    vals = [1.0, 2.0, 3.0, 100.0]
    assert median_of_means(vals, 1) == pytest.approx(26.5)
    # with 4 batches the outlier ends in its own batch and is suppressed
    assert median_of_means(vals, 4) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        median_of_means([], 2)
    with pytest.raises(ValueError):
        median_of_means([1.0], 0)


def test_default_mom_batches():
    assert default_mom_batches(0.01) == int(np.ceil(2 * np.log(200.0)))
    assert default_mom_batches(0.9999) >= 1


def test_run_protocol_deterministic():
    sigma = make_state("ghz", n=2)
    from crmshadow.channels import apply, depolarizing
    rho = apply(depolarizing(0.05), sigma)
    cfg = EstimatorConfig(ensemble="clifford", mode="crm", R=4, n_u=50, mom_batches=5)
    a = run_protocol(rho, sigma.char_function(), cfg, sigma, seed=11)
    b = run_protocol(rho, sigma.char_function(), cfg, sigma, seed=11)
    assert a == b
    c = run_protocol(rho, sigma.char_function(), cfg, sigma, seed=12)
    assert a != c
