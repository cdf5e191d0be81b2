"""Uniform Clifford-group sampling, Pauli conjugation, and dense state action.

A Clifford element is stored by its conjugation images U X_q U^dag and
U Z_q U^dag (signed Paulis); global phase is ignored throughout.  Uniform
sampling draws a canonical symplectic-group index (the transvection-based
construction of Koenig & Smolin, "How to efficiently select an arbitrary
Clifford group element") plus uniform sign bits.  For dense application the
element is decomposed once into H/S/CNOT/CZ/X/Z gates and cached.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from ._errors import BudgetError
from .paulis import PauliOp, pauli_mul
from .states import QuantumState

# ---------------------------------------------------------------------------
# symplectic group over GF(2), vectors in qubit-pair layout v[2q] = x_q, v[2q+1] = z_q
# ---------------------------------------------------------------------------


def _symp_inner(v: np.ndarray, w: np.ndarray) -> int:
    t = np.sum(v[0::2] * w[1::2]) + np.sum(w[0::2] * v[1::2])
    return int(t % 2)


def _transvect(k: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (v + _symp_inner(k, v) * k) % 2


def _int_to_bits(i: int, n: int) -> np.ndarray:
    return np.array([(i >> j) & 1 for j in range(n)], dtype=np.int8)


def _find_transvection(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Two transvections h with Z_h1 Z_h2 x = y (Koenig-Smolin Lemma 2)."""
    out = np.zeros((2, len(x)), dtype=np.int8)
    if np.array_equal(x, y):
        return out
    if _symp_inner(x, y) == 1:
        out[0] = (x + y) % 2
        return out
    z = np.zeros(len(x), dtype=np.int8)
    for i in range(len(x) // 2):
        ii = 2 * i
        if (x[ii] + x[ii + 1]) != 0 and (y[ii] + y[ii + 1]) != 0:
            z[ii] = (x[ii] + y[ii]) % 2
            z[ii + 1] = (x[ii + 1] + y[ii + 1]) % 2
            if z[ii] + z[ii + 1] == 0:
                z[ii + 1] = 1
                if x[ii] != x[ii + 1]:
                    z[ii] = 1
            out[0] = (x + z) % 2
            out[1] = (y + z) % 2
            return out
    # no pair has both nonzero: z needs one contribution from an x-pair and one
    # from a y-pair so that both transvections are nontrivial
    for i in range(len(x) // 2):
        ii = 2 * i
        if (x[ii] + x[ii + 1]) != 0 and (y[ii] + y[ii + 1]) == 0:
            if x[ii] == x[ii + 1]:
                z[ii + 1] = 1
            else:
                z[ii + 1] = x[ii]
                z[ii] = x[ii + 1]
            break
    for i in range(len(x) // 2):
        ii = 2 * i
        if (x[ii] + x[ii + 1]) == 0 and (y[ii] + y[ii + 1]) != 0:
            if y[ii] == y[ii + 1]:
                z[ii + 1] = 1
            else:
                z[ii + 1] = y[ii]
                z[ii] = y[ii + 1]
            break
    out[0] = (x + z) % 2
    out[1] = (y + z) % 2
    return out


def num_cosets(n: int) -> int:
    return 2 ** (2 * n - 1) * (2 ** (2 * n) - 1)


def num_symplectics(n: int) -> int:
    x = 1
    for j in range(1, n + 1):
        x *= num_cosets(j)
    return x


def num_cliffords(n: int) -> int:
    """|Cl_n| modulo global phase = |Sp(2n)| * 4^n (sign bits)."""
    return num_symplectics(n) * 4**n


def symplectic_matrix(i: int, n: int) -> np.ndarray:
    """Canonical symplectic matrix with index i; rows are the 2n images."""
    nn = 2 * n
    s = (1 << nn) - 1
    k = (i % s) + 1
    i //= s
    f1 = _int_to_bits(k, nn)
    e1 = np.zeros(nn, dtype=np.int8)
    e1[0] = 1
    tv = _find_transvection(e1, f1)
    bits = _int_to_bits(i % (1 << (nn - 1)), nn - 1)
    eprime = e1.copy()
    for j in range(2, nn):
        eprime[j] = bits[j - 1]
    h0 = _transvect(tv[0], eprime)
    h0 = _transvect(tv[1], h0)
    if bits[0] == 1:
        f1 = f1 * 0
    if n == 1:
        g = np.eye(2, dtype=np.int8)
    else:
        g = np.zeros((nn, nn), dtype=np.int8)
        g[:2, :2] = np.eye(2, dtype=np.int8)
        g[2:, 2:] = symplectic_matrix(i >> (nn - 1), n - 1)
    for j in range(nn):
        g[j] = _transvect(tv[0], g[j])
        g[j] = _transvect(tv[1], g[j])
        g[j] = _transvect(h0, g[j])
        g[j] = _transvect(f1, g[j])
    return g


def random_symplectic_index(n: int, rng: np.random.Generator) -> int:
    """Uniform canonical index, drawn radix-by-radix (works beyond int64)."""
    idx = 0
    for j in range(n, 0, -1):
        k = int(rng.integers(0, (1 << (2 * j)) - 1))
        b = int(rng.integers(0, 1 << (2 * j - 1)))
        idx = idx * num_cosets(j) + (b * ((1 << (2 * j)) - 1) + k)
    return idx


# ---------------------------------------------------------------------------
# Clifford elements
# ---------------------------------------------------------------------------

def _row_to_pauli(row: np.ndarray, sign_bit: int, n: int) -> PauliOp:
    x = z = 0
    for q in range(n):
        x |= int(row[2 * q]) << q
        z |= int(row[2 * q + 1]) << q
    return PauliOp(n, x, z, 2 * int(sign_bit))


class CliffordElement:
    """Clifford unitary given by its signed conjugation images of X_q and Z_q."""

    def __init__(self, x_images: list[PauliOp], z_images: list[PauliOp]):
        self.n = x_images[0].n
        self.x_images = list(x_images)
        self.z_images = list(z_images)

    # -- constructors -------------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "CliffordElement":
        xs = [PauliOp(n, 1 << q, 0, 0) for q in range(n)]
        zs = [PauliOp(n, 0, 1 << q, 0) for q in range(n)]
        return cls(xs, zs)

    @classmethod
    def from_symplectic(cls, sym: np.ndarray, sign_bits: int, n: int) -> "CliffordElement":
        xs = [_row_to_pauli(sym[2 * q], (sign_bits >> (2 * q)) & 1, n) for q in range(n)]
        zs = [_row_to_pauli(sym[2 * q + 1], (sign_bits >> (2 * q + 1)) & 1, n) for q in range(n)]
        return cls(xs, zs)

    @classmethod
    def tensor(cls, parts: list["CliffordElement"]) -> "CliffordElement":
        n = sum(p.n for p in parts)
        xs, zs = [], []
        off = 0
        for p in parts:
            for q in range(p.n):
                xi, zi = p.x_images[q], p.z_images[q]
                xs.append(PauliOp(n, xi.x << off, xi.z << off, xi.phase))
                zs.append(PauliOp(n, zi.x << off, zi.z << off, zi.phase))
            off += p.n
        return cls(xs, zs)

    # -- conjugation --------------------------------------------------------
    def conjugate_pauli(self, p: PauliOp) -> PauliOp:
        """U P U^dag by composing generator images."""
        acc = PauliOp.identity(self.n)
        for q in range(self.n):
            if (p.x >> q) & 1:
                acc = pauli_mul(acc, self.x_images[q])
            if (p.z >> q) & 1:
                acc = pauli_mul(acc, self.z_images[q])
        w = int(np.bitwise_count(np.int64(p.x & p.z)))
        # P = i^{phase + w} X^x Z^z, and acc = U X^x Z^z U^dag
        return PauliOp(self.n, acc.x, acc.z, (acc.phase + p.phase + w) % 4)

    def diagonalizes(self, p: PauliOp) -> bool:
        return self.conjugate_pauli(p).x == 0

    def key(self) -> tuple:
        """Canonical hashable identity (mod global phase)."""
        return tuple((im.x, im.z, im.phase) for im in self.x_images + self.z_images)

    # -- gate decomposition -------------------------------------------------
    @cached_property
    def gates(self) -> list[tuple]:
        return _decompose(self)

    def unitary(self) -> np.ndarray:
        d = 1 << self.n
        if self.n > 12:
            raise BudgetError("dense unitary refused above n = 12")
        cols = np.eye(d, dtype=complex)
        return apply_gates(cols, self.gates, self.n)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return apply_gates(np.asarray(vec, dtype=complex), self.gates, self.n)


def apply_to_state(u: CliffordElement, psi: QuantumState) -> QuantumState:
    if not psi.is_pure:
        raise ValueError("dense application expects a pure state")
    return QuantumState.pure(u.apply(psi.vector))


def conjugate_pauli(u: CliffordElement, p: PauliOp) -> PauliOp:
    return u.conjugate_pauli(p)


def diagonalizes(u: CliffordElement, p: PauliOp) -> bool:
    return u.diagonalizes(p)


# ---------------------------------------------------------------------------
# elementary gates: conjugation images and dense action
# ---------------------------------------------------------------------------

_GATE_CACHE: dict[tuple, CliffordElement] = {}


def _gate_element(gate: tuple, n: int) -> CliffordElement:
    key = (gate, n)
    if key in _GATE_CACHE:
        return _GATE_CACHE[key]
    el = CliffordElement.identity(n)
    kind = gate[0]
    if kind == "H":
        q = gate[1]
        el.x_images[q] = PauliOp(n, 0, 1 << q, 0)
        el.z_images[q] = PauliOp(n, 1 << q, 0, 0)
    elif kind == "S":
        q = gate[1]
        el.x_images[q] = PauliOp(n, 1 << q, 1 << q, 0)  # X -> Y
    elif kind == "X":
        q = gate[1]
        el.z_images[q] = PauliOp(n, 0, 1 << q, 2)  # Z -> -Z
    elif kind == "Z":
        q = gate[1]
        el.x_images[q] = PauliOp(n, 1 << q, 0, 2)  # X -> -X
    elif kind == "CNOT":
        c, t = gate[1], gate[2]
        el.x_images[c] = PauliOp(n, (1 << c) | (1 << t), 0, 0)
        el.z_images[t] = PauliOp(n, 0, (1 << c) | (1 << t), 0)
    elif kind == "CZ":
        a, b = gate[1], gate[2]
        el.x_images[a] = PauliOp(n, 1 << a, 1 << b, 0)
        el.x_images[b] = PauliOp(n, 1 << b, 1 << a, 0)
    else:
        raise ValueError(f"unknown gate {gate!r}")
    _GATE_CACHE[key] = el
    return el


_H2 = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def apply_gates(vec: np.ndarray, gates: list[tuple], n: int) -> np.ndarray:
    """Apply a gate list to a state vector (or a (d, k) stack of columns)."""
    d = 1 << n
    single = vec.ndim == 1
    v = vec.reshape(d, -1).copy()
    s = np.arange(d)

    def bit(q):
        return (s >> (n - 1 - q)) & 1

    for gate in gates:
        kind = gate[0]
        if kind == "H":
            q = gate[1]
            shaped = v.reshape(1 << q, 2, -1)
            v = np.einsum("ab,ibk->iak", _H2, shaped).reshape(d, -1)
        elif kind == "S":
            q = gate[1]
            v = v * np.where(bit(q) == 1, 1j, 1.0)[:, None]
        elif kind == "X":
            q = gate[1]
            v = v[s ^ (1 << (n - 1 - q))]
        elif kind == "Z":
            q = gate[1]
            v = v * np.where(bit(q) == 1, -1.0, 1.0)[:, None]
        elif kind == "CNOT":
            c, t = gate[1], gate[2]
            v = v[s ^ (bit(c) << (n - 1 - t))]
        elif kind == "CZ":
            a, b = gate[1], gate[2]
            v = v * np.where((bit(a) & bit(b)) == 1, -1.0, 1.0)[:, None]
        else:
            raise ValueError(f"unknown gate {gate!r}")
    return v[:, 0] if single else v


def _decompose(u: CliffordElement) -> list[tuple]:
    """Reduce U to the identity frame with elementary gates; return the gate
    sequence for U itself (inverses in reverse order)."""
    n = u.n
    xs = list(u.x_images)
    zs = list(u.z_images)
    applied: list[tuple] = []

    def app(gate):
        g = _gate_element(gate, n)
        for q in range(n):
            xs[q] = g.conjugate_pauli(xs[q])
            zs[q] = g.conjugate_pauli(zs[q])
        applied.append(gate)

    for j in range(n):
        p = xs[j]
        if p.x == 0:
            k = (p.z & -p.z).bit_length() - 1
            app(("H", k))
            p = xs[j]
        k = j if (p.x >> j) & 1 else (p.x & -p.x).bit_length() - 1
        for m in range(n):
            if m != k and (p.x >> m) & 1:
                app(("CNOT", k, m))
        p = xs[j]
        if (p.z >> k) & 1:
            app(("S", k))
            p = xs[j]
        for m in range(n):
            if m != k and (p.z >> m) & 1:
                app(("CZ", k, m))
        p = xs[j]
        if k != j:
            app(("CNOT", j, k))
            app(("CNOT", k, j))
            app(("CNOT", j, k))
            p = xs[j]
        q_img = zs[j]
        for m in range(n):
            if m != j and (q_img.x >> m) & 1:
                if (q_img.z >> m) & 1:
                    app(("S", m))
                app(("H", m))
        q_img = zs[j]
        for m in range(n):
            if m != j and (q_img.z >> m) & 1:
                app(("CNOT", m, j))
        q_img = zs[j]
        if (q_img.x >> j) & 1:
            app(("H", j))
            app(("S", j))
            app(("H", j))
        if xs[j].phase == 2:
            app(("Z", j))
        if zs[j].phase == 2:
            app(("X", j))

    for q in range(n):
        assert xs[q] == PauliOp(n, 1 << q, 0, 0) and zs[q] == PauliOp(n, 0, 1 << q, 0), \
            "decomposition failed to reach the identity frame"

    inv = []
    for gate in reversed(applied):
        if gate[0] == "S":
            inv += [("Z", gate[1]), ("S", gate[1])]
        else:
            inv.append(gate)
    return inv


# ---------------------------------------------------------------------------
# sampling and enumeration
# ---------------------------------------------------------------------------

def sample_uniform_clifford(n: int, rng: np.random.Generator) -> CliffordElement:
    idx = random_symplectic_index(n, rng)
    sym = symplectic_matrix(idx, n)
    signs = int(rng.integers(0, 1 << (2 * n)))
    return CliffordElement.from_symplectic(sym, signs, n)


def sample_local_clifford(n: int, rng: np.random.Generator) -> CliffordElement:
    parts = [sample_uniform_clifford(1, rng) for _ in range(n)]
    return CliffordElement.tensor(parts)


def enumerate_cliffords(n: int):
    """All |Sp(2n)| * 4^n elements mod phase (use only for n <= 2 oracles)."""
    for i in range(num_symplectics(n)):
        sym = symplectic_matrix(i, n)
        for signs in range(1 << (2 * n)):
            yield CliffordElement.from_symplectic(sym, signs, n)
