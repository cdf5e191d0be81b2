"""State construction, fidelity/infidelity, deviation operators and norms.

States are dense at the target sizes (n <= 14 for pure vectors, n <= 12 for
dense density matrices).  Mixed states may alternatively carry an ensemble
decomposition rho = sum_k w_k |v_k><v_k|; low-rank ensembles unlock O(d) paths
for the expectation values the variance formulas need.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from ._errors import BudgetError
from ._rng import rng_stream
from .paulis import (
    CharFunction,
    char_function,
    pack,
    pauli_spectrum,
    unpack,
    weight,
)

#: dense density-matrix operations refuse n above this
DENSE_BUDGET = 12

#: ensembles with at most this many components use the per-component O(d) paths
SMALL_ENSEMBLE = 64


def _qubit_to_state_mask(mask, n: int):
    """Map qubit-indexed bitmasks (qubit 0 = leftmost factor) to basis-index masks
    (qubit 0 = most significant bit of the state index)."""
    mask = np.asarray(mask, dtype=np.int64)
    out = np.zeros_like(mask)
    for q in range(n):
        out |= ((mask >> q) & 1) << (n - 1 - q)
    return out


def vector_pauli_expectations(psi: np.ndarray, idx, n: int, *, chunk: int = 512) -> np.ndarray:
    """<psi| P_idx |psi> for packed indices, vectorized, O(|idx| d)."""
    idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
    x, z = unpack(idx, n)
    xb = _qubit_to_state_mask(x, n)
    zb = _qubit_to_state_mask(z, n)
    wy = np.bitwise_count(x & z).astype(np.int64)
    zx = np.bitwise_count(zb & xb).astype(np.int64)
    # <psi|P|psi> = i^{w} (-1)^{z.x} sum_t conj(psi_t) (-1)^{z.t} psi[t xor x]
    phases = np.array([1.0 + 0j, 1j, -1.0, -1j])
    pref = phases[wy % 4] * (1.0 - 2.0 * (zx & 1))
    d = len(psi)
    t = np.arange(d)
    out = np.empty(len(idx))
    for lo in range(0, len(idx), chunk):
        sl = slice(lo, min(lo + chunk, len(idx)))
        gathered = psi[t[None, :] ^ xb[sl, None]]
        signs = 1.0 - 2.0 * (np.bitwise_count(t[None, :] & zb[sl, None]) & 1)
        s = np.einsum("t,pt,pt->p", np.conj(psi), signs, gathered)
        out[sl] = np.real(pref[sl] * s)
    return out


@dataclass
class QuantumState:
    """Pure (vector), ensemble (weights + vectors), or dense density matrix."""

    n: int
    vector: np.ndarray | None = None
    weights: np.ndarray | None = None
    vectors: np.ndarray | None = None
    rho: np.ndarray | None = None
    char_hint: CharFunction | None = field(default=None, repr=False)

    # -- structure ----------------------------------------------------------
    @property
    def d(self) -> int:
        return 1 << self.n

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def kind(self) -> str:
        if self.vector is not None:
            return "pure"
        if self.rho is not None:
            return "dense"
        return "ensemble"

    @classmethod
    def pure(cls, vector: np.ndarray, char_hint: CharFunction | None = None) -> "QuantumState":
        vector = np.asarray(vector, dtype=complex)
        n = int(len(vector)).bit_length() - 1
        nrm = np.linalg.norm(vector)
        if abs(nrm - 1.0) > 1e-12:
            vector = vector / nrm
        return cls(n=n, vector=vector, char_hint=char_hint)

    @classmethod
    def ensemble(cls, weights, vectors, char_hint: CharFunction | None = None) -> "QuantumState":
        weights = np.asarray(weights, dtype=float)
        vectors = np.asarray(vectors, dtype=complex)
        n = int(vectors.shape[1]).bit_length() - 1
        return cls(n=n, weights=weights, vectors=vectors, char_hint=char_hint)

    @classmethod
    def dense(cls, rho: np.ndarray) -> "QuantumState":
        rho = np.asarray(rho, dtype=complex)
        n = int(rho.shape[0]).bit_length() - 1
        return cls(n=n, rho=rho)

    # -- representations ----------------------------------------------------
    def density(self, *, budget: int | None = None) -> np.ndarray:
        cap = DENSE_BUDGET if budget is None else budget
        if self.n > cap:
            raise BudgetError(f"dense density matrix at n={self.n} exceeds budget {cap}")
        if self.rho is not None:
            return self.rho
        if self.vector is not None:
            return np.outer(self.vector, np.conj(self.vector))
        # ensemble: sum_k w_k |v_k><v_k| with V rows = component vectors
        return (self.vectors.T * self.weights) @ self.vectors.conj()

    def char_function(self, tol: float = 1e-12, budget: int | None = None) -> CharFunction:
        if self.char_hint is not None:
            return self.char_hint
        if self.vector is not None:
            spec = pauli_spectrum(self.vector, self.n, budget=budget)
        else:
            spec = pauli_spectrum(self.density(budget=budget), self.n, budget=budget)
        return CharFunction.from_spectrum(spec, self.n, tol)

    # -- expectations -------------------------------------------------------
    def pauli_expectations(self, idx) -> np.ndarray:
        """Tr(state * P_idx) at packed indices."""
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if self.vector is not None:
            return vector_pauli_expectations(self.vector, idx, self.n)
        if self.weights is not None and len(self.weights) <= SMALL_ENSEMBLE:
            out = np.zeros(len(idx))
            for w, v in zip(self.weights, self.vectors):
                out += w * vector_pauli_expectations(v, idx, self.n)
            return out
        if self.char_hint is not None:
            return self.char_hint.value_at(idx)
        spec = pauli_spectrum(self.density(), self.n)
        return spec[idx]

    def expectation(self, m: np.ndarray) -> float:
        """Tr(state * M) for a dense Hermitian M."""
        if self.vector is not None:
            return float(np.real(np.vdot(self.vector, m @ self.vector)))
        if self.weights is not None:
            acc = 0.0
            for w, v in zip(self.weights, self.vectors):
                acc += w * np.real(np.vdot(v, m @ v))
            return float(acc)
        return float(np.real(np.trace(self.rho @ m)))

    def overlap(self, phi: np.ndarray) -> float:
        """<phi| state |phi>."""
        if self.vector is not None:
            return float(np.abs(np.vdot(phi, self.vector)) ** 2)
        if self.weights is not None:
            amps = self.vectors @ np.conj(phi)
            return float(np.dot(self.weights, np.abs(amps) ** 2))
        return float(np.real(np.vdot(phi, self.rho @ phi)))

    def apply_to(self, phi: np.ndarray) -> np.ndarray:
        """state @ |phi> without forming the dense matrix for ensembles."""
        if self.vector is not None:
            return self.vector * np.vdot(self.vector, phi)
        if self.weights is not None:
            amps = np.conj(self.vectors) @ np.asarray(phi)
            return (self.weights * amps) @ self.vectors
        return self.rho @ phi

    def purity(self) -> float:
        if self.vector is not None:
            return 1.0
        if self.weights is not None and len(self.weights) <= SMALL_ENSEMBLE:
            gram = np.abs(np.conj(self.vectors) @ self.vectors.T) ** 2
            return float(self.weights @ gram @ self.weights)
        if self.char_hint is not None:
            return self.char_hint.l2sq() / self.d
        rho = self.density()
        return float(np.sum(np.abs(rho) ** 2))


# ---------------------------------------------------------------------------
# fidelity / deviation
# ---------------------------------------------------------------------------

def infidelity(rho: QuantumState, sigma: QuantumState) -> float:
    """eps = 1 - F(rho, sigma); for pure sigma this is 1 - <phi|rho|phi>."""
    if rho.n != sigma.n:
        raise ValueError("dimension mismatch")
    if sigma.is_pure:
        return float(np.clip(1.0 - rho.overlap(sigma.vector), 0.0, 1.0))
    if rho.is_pure:
        return float(np.clip(1.0 - sigma.overlap(rho.vector), 0.0, 1.0))
    a = sigma.density()
    b = rho.density()
    evals, evecs = np.linalg.eigh(a)
    evals = np.clip(evals, 0.0, None)
    sq = (evecs * np.sqrt(evals)) @ evecs.conj().T
    inner = sq @ b @ sq
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    fid = float(np.sum(np.sqrt(w))) ** 2
    return float(np.clip(1.0 - fid, 0.0, 1.0))


@dataclass
class Deviation:
    """Delta = rho - sigma with cached norms and expectation hooks."""

    rho: QuantumState
    sigma: QuantumState

    @property
    def n(self) -> int:
        return self.sigma.n

    @property
    def d(self) -> int:
        return 1 << self.n

    def pauli_expectations(self, idx) -> np.ndarray:
        return self.rho.pauli_expectations(idx) - self.sigma.pauli_expectations(idx)

    def matrix(self, *, budget: int | None = None) -> np.ndarray:
        return self.rho.density(budget=budget) - self.sigma.density(budget=budget)

    @cached_property
    def norm2sq(self) -> float:
        """||Delta||_2^2 = Tr rho^2 - 2 Tr rho sigma + Tr sigma^2."""
        if self.sigma.is_pure:
            cross = self.rho.overlap(self.sigma.vector)
            s2 = 1.0
        else:
            cross = _hs_inner(self.rho, self.sigma)
            s2 = self.sigma.purity()
        return float(max(self.rho.purity() - 2.0 * cross + s2, 0.0))

    @cached_property
    def trace_norm(self) -> float | None:
        """||Delta||_1, exact when a small-rank or dense path exists, else None."""
        if self.rho.is_pure and self.sigma.is_pure:
            f = self.rho.overlap(self.sigma.vector)
            return float(2.0 * np.sqrt(max(1.0 - f, 0.0)))
        comps = []
        if self.rho.kind == "ensemble" and len(self.rho.weights) <= SMALL_ENSEMBLE:
            comps = list(zip(self.rho.weights, self.rho.vectors))
        elif self.rho.is_pure:
            comps = [(1.0, self.rho.vector)]
        if comps and self.sigma.is_pure:
            vecs = np.array([v for _, v in comps] + [self.sigma.vector])
            q, _ = np.linalg.qr(vecs.T, mode="reduced")
            proj = np.conj(q.T)
            small = np.zeros((q.shape[1], q.shape[1]), dtype=complex)
            for w, v in comps:
                pv = proj @ v
                small += w * np.outer(pv, np.conj(pv))
            ps = proj @ self.sigma.vector
            small -= np.outer(ps, np.conj(ps))
            return float(np.sum(np.abs(np.linalg.eigvalsh(small))))
        if self.n <= DENSE_BUDGET:
            return float(np.sum(np.abs(np.linalg.eigvalsh(self.matrix()))))
        return None


def _hs_inner(a: QuantumState, b: QuantumState) -> float:
    if b.is_pure:
        return a.overlap(b.vector)
    if a.is_pure:
        return b.overlap(a.vector)
    return float(np.real(np.sum(a.density() * b.density().conj().T)))


def deviation(rho: QuantumState, sigma: QuantumState) -> Deviation:
    if rho.n != sigma.n:
        raise ValueError("dimension mismatch")
    return Deviation(rho, sigma)


def schatten_norms(delta: Deviation) -> tuple[float | None, float]:
    """(||Delta||_1 or None when infeasible, ||Delta||_2^2)."""
    return delta.trace_norm, delta.norm2sq


# ---------------------------------------------------------------------------
# state families
# ---------------------------------------------------------------------------

_KET0 = np.array([1.0, 0.0], dtype=complex)


def _t_state(theta: float) -> np.ndarray:
    return np.array([1.0, np.exp(1j * theta)]) / np.sqrt(2.0)


def _kron_chain(factors) -> np.ndarray:
    out = np.array([1.0 + 0j])
    for f in factors:
        out = np.kron(out, f)
    return out


def _snk_char(n: int, k: int, theta: float) -> CharFunction:
    # per-qubit char: |0> -> {I:1, Z:1}; (|0>+e^{i theta}|1>)/sqrt2 -> {I:1, X:cos, Y:sin}
    factors = [((0, 2), (1.0, 1.0))] * (n - k)
    factors += [((0, 1, 3), (1.0, np.cos(theta), np.sin(theta)))] * k
    return CharFunction.from_factors(factors)


def _ghz_char(n: int) -> CharFunction:
    d = 1 << n
    zmasks = np.arange(d, dtype=np.int64)
    parity = np.bitwise_count(zmasks) & 1
    even = zmasks[parity == 0]
    wz = np.bitwise_count(even).astype(np.int64)
    idx_z = pack(np.zeros_like(even), even)
    val_z = np.ones(len(even))
    ones = np.full(len(even), d - 1, dtype=np.int64)
    idx_x = pack(ones, even)
    val_x = np.where(wz % 4 == 0, 1.0, -1.0)
    idx = np.concatenate([idx_z, idx_x])
    val = np.concatenate([val_z, val_x])
    order = np.argsort(idx)
    return CharFunction(n, idx[order], val[order])


def _apply_cz_chain(vec: np.ndarray, n: int) -> np.ndarray:
    out = vec.copy()
    s = np.arange(len(vec))
    for q in range(n - 1):
        b1 = (s >> (n - 1 - q)) & 1
        b2 = (s >> (n - 1 - (q + 1))) & 1
        out = np.where((b1 & b2) == 1, -out, out)
    return out


def _tfim_hamiltonian(n: int, j: float, h: float) -> sparse.csr_matrix:
    sx = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    sz = sparse.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
    eye = sparse.identity(2, format="csr")

    def site_op(op, i):
        ops = [eye] * n
        ops[i] = op
        m = ops[0]
        for o in ops[1:]:
            m = sparse.kron(m, o, "csr")
        return m

    ham = sparse.csr_matrix((2**n, 2**n))
    for i in range(n):
        ham = ham - j * (site_op(sz, i) @ site_op(sz, (i + 1) % n))  # periodic chain
        ham = ham - h * site_op(sx, i)
    return ham


def _tfim_ground(n: int, j: float, h: float) -> np.ndarray:
    ham = _tfim_hamiltonian(n, j, h)
    d = 2**n
    if d <= 64:
        evals, evecs = np.linalg.eigh(ham.toarray())
    else:
        evals, evecs = spla.eigsh(ham, k=2, which="SA")
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    # degenerate ordered phase: gauge to the vector closest to the even-parity
    # symmetric combination of the basis returned by the solver
    if len(evals) > 1 and evals[1] - evals[0] < 1e-8:
        flip = d - 1 - np.arange(d)  # global spin flip X^{(x) n} in the z-basis
        basis = evecs[:, :2]
        best, best_ov = None, -1.0
        for coeffs in ([1, 1], [1, -1], [1, 1j], [1, -1j]):
            v = basis @ (np.asarray(coeffs, dtype=complex) / np.sqrt(2))
            ov = abs(np.vdot(v, v[flip]).real)
            if ov > best_ov:
                best, best_ov = v, ov
        vec = best
    else:
        vec = evecs[:, 0].astype(complex)
    vec = vec / np.linalg.norm(vec)
    first = np.flatnonzero(np.abs(vec) > 1e-10)[0]
    vec = vec * np.exp(-1j * np.angle(vec[first]))
    return vec


def haar_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    d = 1 << n
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def make_state(family: str, **params) -> QuantumState:
    """Construct a named pure target state.

    Families: s_nk(n, k), s_nk_theta(n, k, theta), magic_cluster(n), ghz(n),
    tfim_ground(n, j, h), haar_random(n, rng|seed), structured_random(n, rng|seed).
    """
    if family == "s_nk":
        n, k = params["n"], params["k"]
        vec = _kron_chain([_KET0] * (n - k) + [_t_state(np.pi / 4)] * k)
        return QuantumState.pure(vec, char_hint=_snk_char(n, k, np.pi / 4))
    if family == "s_nk_theta":
        n, k, theta = params["n"], params["k"], params["theta"]
        vec = _kron_chain([_KET0] * (n - k) + [_t_state(theta)] * k)
        return QuantumState.pure(vec, char_hint=_snk_char(n, k, theta))
    if family == "magic_cluster":
        n = params["n"]
        vec = _apply_cz_chain(_kron_chain([_t_state(np.pi / 4)] * n), n)
        return QuantumState.pure(vec)
    if family == "ghz":
        n = params["n"]
        vec = np.zeros(1 << n, dtype=complex)
        vec[0] = vec[-1] = 1 / np.sqrt(2)
        return QuantumState.pure(vec, char_hint=_ghz_char(n))
    if family == "tfim_ground":
        n = params["n"]
        return QuantumState.pure(_tfim_ground(n, params.get("j", 1.0), params["h"]))
    if family == "haar_random":
        rng = params.get("rng") or rng_stream(params["seed"], "haar_state")
        return QuantumState.pure(haar_vector(params["n"], rng))
    if family == "structured_random":
        n = params["n"]
        rng = params.get("rng") or rng_stream(params["seed"], "structured_state")
        alpha = np.exp(rng.uniform(-5.0, 0.0))
        phi0 = haar_vector(n - 1, rng)
        phi1 = haar_vector(n - 1, rng)
        vec = np.zeros(1 << n, dtype=complex)
        vec[0::2] = alpha * phi0
        vec[1::2] = np.sqrt(1.0 - alpha**2) * phi1
        return QuantumState.pure(vec)
    raise ValueError(f"unknown state family: {family!r}")


def sre2(state: QuantumState) -> float:
    """Stabilizer 2-Renyi entropy M2 of a pure state."""
    if not state.is_pure:
        raise ValueError("sre2 is defined here for pure states only")
    char = state.char_function()
    return float(np.log2(state.d / char.l4_4()))


def sre2_snk(k: int, theta: float = np.pi / 4) -> float:
    """Closed form M2 for |S_{n,k}(theta)> (independent of n)."""
    return float(-k * np.log2((7.0 + np.cos(4.0 * theta)) / 8.0))
