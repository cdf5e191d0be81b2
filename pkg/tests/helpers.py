"""Shared randomized-instance generators and dense linear-algebra oracles."""
from __future__ import annotations

import numpy as np

from crmshadow.paulis import PauliOp


def rand_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def rand_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = rank or d
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def rand_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2.0


def rand_traceless_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    h = rand_hermitian(d, rng)
    return h - np.trace(h) / d * np.eye(d)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def haar_unitaries(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, d, d) stack of Haar unitaries."""
    z = rng.normal(size=(count, d, d)) + 1j * rng.normal(size=(count, d, d))
    q, r = np.linalg.qr(z)
    diag = np.einsum("kii->ki", r)
    return q * (diag / np.abs(diag))[:, None, :]


def dense_pauli(idx: int, n: int) -> np.ndarray:
    return PauliOp.from_index(idx, n).to_matrix()


def all_pauli_matrices(n: int) -> list[np.ndarray]:
    return [dense_pauli(i, n) for i in range(4**n)]


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(m))))


def frob_sq(m: np.ndarray) -> float:
    return float(np.real(np.vdot(m, m)))


def local_inverse_map(obs: np.ndarray, n: int) -> np.ndarray:
    """Reconstruction map of the tensor-product single-qubit Clifford ensemble:
    M^{-1}(O) = sum_P 3^{w(P)} Tr(O P) P / d over all Paulis."""
    d = 1 << n
    out = np.zeros((d, d), dtype=complex)
    for i in range(4**n):
        p = PauliOp.from_index(i, n)
        out += 3.0**p.weight * np.trace(obs @ p.to_matrix()) * p.to_matrix() / d
    return out


def brute_force_v_star_general(unitaries, inv_obs: np.ndarray, tau: np.ndarray,
                               obs: np.ndarray) -> float:
    """E_U[f_tau(U)^2] - Tr(O tau)^2 with an arbitrary reconstruction map."""
    total = 0.0
    count = 0
    for u in unitaries:
        do = np.real(np.einsum("ij,jk,ik->i", u, inv_obs, np.conj(u)))
        dt = np.real(np.einsum("ij,jk,ik->i", u, tau, np.conj(u)))
        total += float(do @ dt) ** 2
        count += 1
    return total / count - float(np.real(np.trace(obs @ tau))) ** 2


def brute_force_v_standard_general(unitaries, inv_obs: np.ndarray,
                                   rho: np.ndarray, obs: np.ndarray) -> float:
    """E_{U, s~P_rho}[g(U,s)^2] - Tr(O rho)^2 with an arbitrary reconstruction map."""
    total = 0.0
    count = 0
    for u in unitaries:
        do = np.real(np.einsum("ij,jk,ik->i", u, inv_obs, np.conj(u)))
        pr = np.real(np.einsum("ij,jk,ik->i", u, rho, np.conj(u)))
        total += float(pr @ do**2)
        count += 1
    return total / count - float(np.real(np.trace(obs @ rho))) ** 2
