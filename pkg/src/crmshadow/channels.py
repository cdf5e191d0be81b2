"""Noise models: Pauli channels, depolarizing, and coherent rotations, with the
randomized samplers the figure sweeps use."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._errors import BudgetError
from .paulis import PAULI_BUDGET, CharFunction, PauliOp, anticommute_parity
from .states import QuantumState

#: random Pauli channels above the full-support budget draw this many error terms
SPARSE_PAULI_SUPPORT = 4096


@dataclass(frozen=True)
class NoiseModel:
    tag: str  # depolarizing | pauli | single_error_pauli | local_rotation | collective_rotation
    p: float | None = None                       # depolarizing strength
    p_idx: np.ndarray | None = field(default=None, repr=False)   # packed error Paulis
    p_vals: np.ndarray | None = field(default=None, repr=False)  # their probabilities
    axes: np.ndarray | None = field(default=None, repr=False)    # (n, 3) rotation axes
    angles: np.ndarray | None = field(default=None, repr=False)  # (n,) rotation angles
    theta: float | None = None                   # collective-rotation angle

    def __post_init__(self):
        if self.tag == "depolarizing":
            if not (0.0 <= self.p <= 1.0):
                raise ValueError("depolarizing strength must be in [0, 1]")
        elif self.tag in ("pauli", "single_error_pauli"):
            if np.any(self.p_vals < 0) or self.p_vals.sum() > 1.0 + 1e-12:
                raise ValueError("Pauli-channel probabilities must be >= 0 with sum <= 1")
        elif self.tag == "local_rotation":
            norms = np.linalg.norm(self.axes, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-12:
                raise ValueError("rotation axes must be unit vectors")

    @property
    def is_coherent(self) -> bool:
        return self.tag in ("local_rotation", "collective_rotation")

    # -- serialization (experiment configs / sidecars) ----------------------
    def to_dict(self) -> dict:
        out = {"tag": self.tag}
        if self.p is not None:
            out["p"] = self.p
        if self.p_idx is not None:
            out["p_idx"] = [int(i) for i in self.p_idx]
            out["p_vals"] = [float(v) for v in self.p_vals]
        if self.axes is not None:
            out["axes"] = self.axes.tolist()
            out["angles"] = self.angles.tolist()
        if self.theta is not None:
            out["theta"] = self.theta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        kw = dict(data)
        tag = kw.pop("tag")
        if "p_idx" in kw:
            kw["p_idx"] = np.asarray(kw["p_idx"], dtype=np.int64)
            kw["p_vals"] = np.asarray(kw["p_vals"], dtype=float)
        if "axes" in kw:
            kw["axes"] = np.asarray(kw["axes"], dtype=float)
            kw["angles"] = np.asarray(kw["angles"], dtype=float)
        return cls(tag=tag, **kw)


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def _apply_single_qubit(vec: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    shaped = vec.reshape(1 << q, 2, 1 << (n - 1 - q))
    return np.einsum("ab,ibj->iaj", u, shaped).reshape(-1)


def local_rotation_unitary_factors(model: NoiseModel) -> list[np.ndarray]:
    factors = []
    for (vx, vy, vz), th in zip(model.axes, model.angles):
        c, s = np.cos(th / 2.0), np.sin(th / 2.0)
        sig = np.array([[vz, vx - 1j * vy], [vx + 1j * vy, -vz]])
        factors.append(c * np.eye(2) - 1j * s * sig)
    return factors


def collective_rotation_unitary(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[np.exp(-1j * theta) * c, -s], [s, np.exp(1j * theta) * c]])


def apply(model: NoiseModel, sigma: QuantumState) -> QuantumState:
    """The noisy preparation rho = N(sigma)."""
    n, d = sigma.n, sigma.d
    if model.tag == "depolarizing":
        rho = (1.0 - model.p) * sigma.density() + model.p * np.eye(d) / d
        return QuantumState.dense(rho)
    if model.tag in ("pauli", "single_error_pauli"):
        if not sigma.is_pure:
            raise ValueError("Pauli channels are applied to pure targets here")
        total = float(model.p_vals.sum())
        weights = np.concatenate([[1.0 - total], model.p_vals])
        vecs = [sigma.vector]
        for ix in model.p_idx:
            vecs.append(PauliOp.from_index(int(ix), n).apply(sigma.vector))
        hint = None
        if sigma.char_hint is not None:
            hint = pauli_channel_char(model, sigma.char_hint)
        return QuantumState.ensemble(weights, np.array(vecs), char_hint=hint)
    if model.tag == "local_rotation":
        vec = sigma.vector
        for q, u in enumerate(local_rotation_unitary_factors(model)):
            vec = _apply_single_qubit(vec, u, q, n)
        return QuantumState.pure(vec)
    if model.tag == "collective_rotation":
        u = collective_rotation_unitary(model.theta)
        vec = sigma.vector
        for q in range(n):
            vec = _apply_single_qubit(vec, u, q, n)
        return QuantumState.pure(vec)
    raise ValueError(f"unknown noise model tag: {model.tag!r}")


def pauli_channel_dense(model: NoiseModel, sigma: QuantumState, *,
                        chunk: int = 2048) -> np.ndarray:
    """Dense rho = P(sigma) for a pure target, vectorized over the error support.

    Builds the component matrix C with rows P_k |phi> in O(|support| d), then
    rho = C' diag(w) C.  Memory-bounded by chunking over errors.
    """
    from .paulis import unpack
    from .states import _qubit_to_state_mask

    vec = sigma.vector
    n, d = sigma.n, sigma.d
    m = len(model.p_idx)
    x, z = unpack(model.p_idx, n)
    xb = _qubit_to_state_mask(x, n)
    zb = _qubit_to_state_mask(z, n)
    phases = np.array([1.0 + 0j, 1j, -1.0, -1j])
    pref = (phases[np.bitwise_count(x & z).astype(np.int64) % 4]
            * (1.0 - 2.0 * (np.bitwise_count(zb & xb) & 1)))
    t = np.arange(d)
    total = float(model.p_vals.sum())
    rho = (1.0 - total) * np.outer(vec, np.conj(vec))
    for lo in range(0, m, chunk):
        sl = slice(lo, min(lo + chunk, m))
        # (P |phi>)[t] = pref (-1)^{z.t} phi[t xor x]
        signs = 1.0 - 2.0 * (np.bitwise_count(t[None, :] & zb[sl, None]) & 1)
        comps = pref[sl, None] * signs * vec[t[None, :] ^ xb[sl, None]]
        rho += (comps.T * model.p_vals[sl]) @ comps.conj()
    return rho


def pauli_anti_prob(model: NoiseModel, idx, *, chunk: int = 512) -> np.ndarray:
    """a(P) = sum of channel probabilities on errors anticommuting with P."""
    idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
    out = np.empty(len(idx))
    for lo in range(0, len(idx), chunk):
        rows = idx[lo:lo + chunk]
        anti = anticommute_parity(rows[:, None], model.p_idx[None, :])
        out[lo:lo + chunk] = anti @ model.p_vals
    return out


def pauli_channel_char(model: NoiseModel, sigma_char: CharFunction) -> CharFunction:
    """Exact char function of P(sigma): Tr(rho P) = (1 - 2 a(P)) Tr(sigma P)."""
    damp = 1.0 - 2.0 * pauli_anti_prob(model, sigma_char.idx)
    return CharFunction(sigma_char.n, sigma_char.idx, sigma_char.val * damp)


def pauli_channel_infidelity(model: NoiseModel, sigma_char_dense_or_fn) -> float:
    """eps = sum_i p_i * eta_i with eta_i = 1 - Tr(sigma P_i)^2."""
    if isinstance(sigma_char_dense_or_fn, CharFunction):
        vals = sigma_char_dense_or_fn.value_at(model.p_idx)
    else:
        vals = np.asarray(sigma_char_dense_or_fn)[model.p_idx]
    return float(np.dot(model.p_vals, 1.0 - vals**2))


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def sample_random_pauli_channel(n: int, beta: float, rng: np.random.Generator,
                                support: int | None = None) -> NoiseModel:
    """p_i i.i.d. uniform on the error support, renormalized to ||p||_1 = beta."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    if n <= PAULI_BUDGET and support is None:
        idx = np.arange(1, 4**n, dtype=np.int64)
    else:
        m = support or SPARSE_PAULI_SUPPORT
        if m > 4**n - 1:
            raise BudgetError(f"support {m} exceeds the {4**n - 1} nontrivial Paulis")
        seen = np.unique(rng.integers(1, 4**n, size=2 * m, dtype=np.int64))
        while len(seen) < m:
            seen = np.unique(np.concatenate(
                [seen, rng.integers(1, 4**n, size=m, dtype=np.int64)]))
        idx = np.sort(rng.choice(seen, size=m, replace=False))
    p = rng.uniform(0.0, 1.0, size=len(idx))
    p *= beta / p.sum()
    return NoiseModel(tag="pauli", p_idx=idx, p_vals=p)


def single_error_channel(pauli: PauliOp, prob: float) -> NoiseModel:
    return NoiseModel(tag="single_error_pauli",
                      p_idx=np.array([pauli.index], dtype=np.int64),
                      p_vals=np.array([prob]))


def sample_random_local_rotation(n: int, eps_bar: float, rng: np.random.Generator) -> NoiseModel:
    """Per-qubit rotations with Haar-average infidelity eps_bar.

    h_k ~ U(0, 1] renormalized (as h_k^t) so that prod h_k = xi = 1 - (d+1) eps_bar / d,
    then theta_k = arccos(2 h_k - 1); axes uniform on the sphere.
    """
    d = float(1 << n)
    if not 0.0 < eps_bar < d / (d + 1.0):
        raise ValueError("eps_bar out of range (0, d/(d+1))")
    xi = 1.0 - (d + 1.0) / d * eps_bar
    h = 1.0 - rng.uniform(0.0, 1.0, size=n)  # in (0, 1]
    t = np.log(xi) / np.sum(np.log(h))
    h = h**t
    angles = np.arccos(np.clip(2.0 * h - 1.0, -1.0, 1.0))
    axes = rng.standard_normal((n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return NoiseModel(tag="local_rotation", axes=axes, angles=angles)


def collective_rotation(n: int, theta: float) -> NoiseModel:
    return NoiseModel(tag="collective_rotation", theta=float(theta))


def depolarizing(p: float) -> NoiseModel:
    return NoiseModel(tag="depolarizing", p=float(p))
