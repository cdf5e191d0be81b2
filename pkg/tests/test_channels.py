"""Noise channels: dense action, characteristic-function action, infidelities."""
import numpy as np
import pytest

from crmshadow.channels import (
    NoiseModel,
    apply,
    collective_rotation,
    depolarizing,
    pauli_anti_prob,
    pauli_channel_char,
    pauli_channel_dense,
    pauli_channel_infidelity,
    sample_random_local_rotation,
    sample_random_pauli_channel,
    single_error_channel,
)
from crmshadow.paulis import PauliOp, pauli_spectrum
from crmshadow.states import QuantumState, infidelity

from helpers import rand_pure


def _dense_pauli_channel(model, sigma_mat):
    rho = (1.0 - float(np.sum(model.p_vals))) * sigma_mat
    n = int(np.log2(sigma_mat.shape[0]))
    for i, w in zip(model.p_idx, model.p_vals):
        m = PauliOp.from_index(int(i), n).to_matrix()
        rho = rho + w * (m @ sigma_mat @ m.conj().T)
    return rho


def test_pauli_channel_char_matches_dense(rng):
    n, d = 2, 4
    sigma = QuantumState.pure(rand_pure(d, rng))
    model = sample_random_pauli_channel(n, 0.3, rng)
    rho_dense = _dense_pauli_channel(model, sigma.density())
    chi = pauli_channel_char(model, sigma.char_function())
    assert np.allclose(chi.to_dense(), pauli_spectrum(rho_dense, n), atol=1e-10)


def test_pauli_channel_dense_state(rng):
    n, d = 3, 8
    sigma = QuantumState.pure(rand_pure(d, rng))
    model = sample_random_pauli_channel(n, 0.2, rng)
    rho = pauli_channel_dense(model, sigma)
    assert np.allclose(np.asarray(rho), _dense_pauli_channel(model, sigma.density()),
                       atol=1e-10)


def test_pauli_channel_infidelity_matches_dense(rng):
    n, d = 2, 4
    sigma = QuantumState.pure(rand_pure(d, rng))
    model = sample_random_pauli_channel(n, 0.15, rng)
    rho = _dense_pauli_channel(model, sigma.density())
    eps_dense = 1.0 - float(np.real(np.trace(rho @ sigma.density())))
    eps = pauli_channel_infidelity(model, sigma.char_function())
    assert abs(eps - eps_dense) < 1e-10


def test_pauli_anti_prob(rng):
    # anti-probability of P = total channel weight on Paulis anticommuting with P
    n = 2
    model = sample_random_pauli_channel(n, 0.2, rng)
    idx = np.arange(1, 16, dtype=np.int64)
    anti = pauli_anti_prob(model, idx)
    for pos, i in enumerate(idx):
        p = PauliOp.from_index(int(i), n)
        direct = sum(w for j, w in zip(model.p_idx, model.p_vals)
                     if not p.commutes(PauliOp.from_index(int(j), n)))
        assert abs(anti[pos] - direct) < 1e-12


def test_depolarizing_channel(rng):
    d = 8
    sigma = QuantumState.pure(rand_pure(d, rng))
    rho = apply(depolarizing(0.1), sigma)
    expected = 0.9 * sigma.density() + 0.1 * np.eye(d) / d
    assert np.allclose(rho.density(), expected, atol=1e-10)
    assert abs(infidelity(rho, sigma) - 0.1 * (1 - 1.0 / d)) < 1e-10


def test_single_error_channel_stabilizer_trace_norm():
    # stabilizer sigma: rho commutes with sigma, ||Delta||_1 = 2 eps
    from crmshadow.states import deviation, make_state, schatten_norms
    sigma = make_state("ghz", n=2)
    model = single_error_channel(PauliOp.from_label("XI"), 0.2)
    rho = apply(model, sigma)
    eps = infidelity(rho, sigma)
    d1, _ = schatten_norms(deviation(rho, sigma))
    assert abs(d1 - 2.0 * eps) < 1e-10


def test_local_rotation_mean_infidelity(rng):
    # Haar-average infidelity of a sampled local-rotation unitary equals the
    # requested eps_bar (statistical check over Haar-random states)
    n, d, eps_bar, samples = 2, 4, 0.05, 3000
    model = sample_random_local_rotation(n, eps_bar, rng)
    vals = np.empty(samples)
    for t in range(samples):
        sv = rand_pure(d, rng)
        sigma = QuantumState.pure(sv)
        rho = apply(model, sigma)
        vals[t] = infidelity(rho, sigma)
    se = vals.std(ddof=1) / np.sqrt(samples)
    assert abs(vals.mean() - eps_bar) < 4 * se


def test_local_rotation_gives_pure_state(rng):
    model = sample_random_local_rotation(3, 0.02, rng)
    sigma = QuantumState.pure(rand_pure(8, rng))
    rho = apply(model, sigma)
    assert rho.is_pure
    assert abs(np.linalg.norm(rho.vector) - 1.0) < 1e-12


def test_collective_rotation_infidelity_increases_with_angle():
    from crmshadow.states import make_state
    sigma = make_state("s_nk", n=3, k=2)
    eps = [infidelity(apply(collective_rotation(3, t), sigma), sigma)
           for t in (0.01, 0.05, 0.2)]
    assert eps[0] < eps[1] < eps[2]
    assert infidelity(apply(collective_rotation(3, 0.0), sigma), sigma) < 1e-12


def test_noise_model_dict_roundtrip(rng):
    for model in (depolarizing(0.05),
                  sample_random_pauli_channel(2, 0.2, rng),
                  sample_random_local_rotation(2, 0.01, rng),
                  collective_rotation(2, 0.3),
                  single_error_channel(PauliOp.from_label("XZ"), 0.1)):
        clone = NoiseModel.from_dict(model.to_dict())
        assert clone.tag == model.tag
        for field in ("p_idx", "p_vals", "angles", "axes", "theta"):
            a, b = getattr(model, field, None), getattr(clone, field, None)
            if a is None:
                assert b is None
            else:
                assert np.allclose(np.asarray(a, dtype=float),
                                   np.asarray(b, dtype=float))


def test_random_pauli_channel_infidelity_scale(rng):
    # the strength parameter sets the total error weight; infidelity on a pure
    # state stays within (0, ||p||_1]
    model = sample_random_pauli_channel(3, 0.1, rng)
    sigma = QuantumState.pure(rand_pure(8, rng))
    eps = pauli_channel_infidelity(model, sigma.char_function())
    assert 0.0 < eps <= float(np.sum(model.p_vals)) + 1e-12
