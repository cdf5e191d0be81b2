"""Pauli-operator algebra on bit-packed indices, and characteristic functions.

An n-qubit Pauli is encoded by two n-bit masks (x, z); the represented operator
is the Hermitian canonical form

    P0(x, z) = i^{|x AND z|} X^x Z^z,

i.e. per-qubit factors I, X, Z, Y for (x_q, z_q) = (0,0), (1,0), (0,1), (1,1).
A `PauliOp` additionally carries a phase exponent k with operator i^k * P0.

For bulk work, unsigned Paulis are packed into a single integer with the x and z
bits interleaved: bit 2q holds x_q and bit 2q+1 holds z_q, so the per-qubit
2-bit code is 0=I, 1=X, 2=Z, 3=Y and the canonical iteration order is plain
integer order.  All vectorized helpers below operate on int64 arrays of packed
indices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._errors import BudgetError

# interleaved even-bit mask: selects x bits (or z bits after a shift)
_EVEN = 0x5555555555555555

#: default cap for operations that iterate/allocate over all 4^n Paulis
PAULI_BUDGET = 12

_SQ2 = np.sqrt(2.0)

_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0, 1], [1, 0]], dtype=complex)
_Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
_FACTOR_MATS = (_I2, _X2, _Z2, _Y2)  # order matches the 2-bit code x + 2z
_FACTOR_LABELS = "IXZY"
_PHASES = np.array([1, 1j, -1, -1j])


def _require_budget(n: int, budget: int | None = None) -> None:
    cap = PAULI_BUDGET if budget is None else budget
    if n > cap:
        raise BudgetError(
            f"operation iterates over 4^{n} Paulis; budget allows n <= {cap} "
            "(pass an explicit budget to override)"
        )


# ---------------------------------------------------------------------------
# packed-index helpers (vectorized; accept scalars or int64 arrays)
# ---------------------------------------------------------------------------

def pack(x, z):
    """Interleave compact x/z masks into a packed Pauli index."""
    x = np.asarray(x, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    xi = np.zeros_like(x)
    zi = np.zeros_like(z)
    # spread bit q to bit 2q
    for q in range(64):
        bit = np.int64(1) << q
        if not (np.any(x >> q) or np.any(z >> q)):
            break
        xi |= ((x >> q) & 1) << (2 * q)
        zi |= ((z >> q) & 1) << (2 * q)
    return xi | (zi << 1)


def unpack(idx, n: int):
    """Inverse of :func:`pack`: packed index -> compact (x, z) masks."""
    idx = np.asarray(idx, dtype=np.int64)
    x = np.zeros_like(idx)
    z = np.zeros_like(idx)
    for q in range(n):
        x |= ((idx >> (2 * q)) & 1) << q
        z |= ((idx >> (2 * q + 1)) & 1) << q
    return x, z


def weight(idx):
    """Number of non-identity tensor factors."""
    idx = np.asarray(idx, dtype=np.int64)
    return np.bitwise_count((idx | (idx >> 1)) & _EVEN).astype(np.int64)


def anticommute_parity(a, b):
    """1 where the (unsigned) Paulis anticommute, else 0."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    t = ((a & _EVEN) & ((b >> 1) & _EVEN)) ^ (((a >> 1) & _EVEN) & (b & _EVEN))
    return (np.bitwise_count(t) & 1).astype(np.int64)


def locally_commuting_and_cap(a, b):
    """Elementwise (P_a diamond P_b, w(P_a intersect P_b)).

    Two Paulis are locally commuting when on every qubit the factors are equal
    or at least one is the identity; the cap weight counts qubits where both
    are non-identity (necessarily equal when locally commuting).
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    nt_a = (a | (a >> 1)) & _EVEN
    nt_b = (b | (b >> 1)) & _EVEN
    both = nt_a & nt_b
    diff = ((a ^ b) | ((a ^ b) >> 1)) & _EVEN
    ok = (both & diff) == 0
    cap = np.bitwise_count(both & ~diff).astype(np.int64)
    return ok, cap


# ---------------------------------------------------------------------------
# scalar PauliOp
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PauliOp:
    """A signed/phased n-qubit Pauli operator i^phase * P0(x, z)."""

    n: int
    x: int
    z: int
    phase: int = 0  # exponent of i, mod 4

    def __post_init__(self):
        object.__setattr__(self, "phase", self.phase % 4)

    # -- constructors -------------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliOp":
        return cls(n, 0, 0, 0)

    @classmethod
    def from_index(cls, idx: int, n: int) -> "PauliOp":
        x, z = unpack(idx, n)
        return cls(n, int(x), int(z), 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliOp":
        phase = 0
        if label and label[0] in "+-":
            if label[0] == "-":
                phase = 2
            label = label[1:]
        if label.startswith("i"):
            phase += 1
            label = label[1:]
        x = z = 0
        for q, ch in enumerate(label):  # qubit 0 is the leftmost character
            code = _FACTOR_LABELS.index(ch)
            x |= (code & 1) << q
            z |= (code >> 1) << q
        return cls(len(label), x, z, phase)

    # -- basic structure ----------------------------------------------------
    @property
    def index(self) -> int:
        """Packed (interleaved x/z) index of the unsigned Pauli."""
        return int(pack(self.x, self.z))

    @property
    def weight(self) -> int:
        return int(weight(self.index))

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def sign(self) -> complex:
        return complex(_PHASES[self.phase])

    def label(self) -> str:
        pre = {0: "+", 1: "+i", 2: "-", 3: "-i"}[self.phase]
        body = "".join(
            _FACTOR_LABELS[((self.x >> q) & 1) | (((self.z >> q) & 1) << 1)]
            for q in range(self.n)
        )
        return pre + body

    # -- algebra ------------------------------------------------------------
    def __mul__(self, other: "PauliOp") -> "PauliOp":
        return pauli_mul(self, other)

    def commutes(self, other: "PauliOp") -> bool:
        _check_same_n(self, other)
        return not bool(anticommute_parity(self.index, other.index))

    def locally_commutes(self, other: "PauliOp") -> bool:
        _check_same_n(self, other)
        ok, _ = locally_commuting_and_cap(self.index, other.index)
        return bool(ok)

    def cap_weight(self, other: "PauliOp") -> int:
        _check_same_n(self, other)
        _, cap = locally_commuting_and_cap(self.index, other.index)
        return int(cap)

    def cup_weight(self, other: "PauliOp") -> int:
        return self.weight + other.weight - self.cap_weight(other)

    # -- dense forms --------------------------------------------------------
    def to_matrix(self) -> np.ndarray:
        m = np.array([[1.0 + 0j]])
        # leftmost label character = qubit 0 = most significant kron factor
        for q in range(self.n):
            code = ((self.x >> q) & 1) | (((self.z >> q) & 1) << 1)
            m = np.kron(m, _FACTOR_MATS[code])
        return self.sign * m

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """P |psi> in O(d)."""
        d = 1 << self.n
        xb, zb = _to_big_endian_bits(self.x, self.n), _to_big_endian_bits(self.z, self.n)
        t = np.arange(d)
        signs = 1.0 - 2.0 * (np.bitwise_count(t & zb) & 1)
        w = int(np.bitwise_count(np.int64(self.x & self.z)))
        pref = _PHASES[(self.phase + w) % 4] * (1.0 - 2.0 * (np.bitwise_count(np.int64(zb & xb)) & 1))
        # (P psi)[t] = i^{phase+w} (-1)^{z.(t xor x)} psi[t xor x]
        #            = pref * (-1)^{z.t} psi[t xor x]
        return pref * signs * psi[t ^ xb]


def _check_same_n(a: PauliOp, b: PauliOp) -> None:
    if a.n != b.n:
        raise ValueError(f"qubit-count mismatch: {a.n} != {b.n}")


def _to_big_endian_bits(mask: int, n: int) -> int:
    """Convert qubit-indexed mask (qubit 0 = leftmost kron factor) to a basis-state
    bitmask where qubit 0 is the most significant bit of the state index."""
    out = 0
    for q in range(n):
        if (mask >> q) & 1:
            out |= 1 << (n - 1 - q)
    return out


def pauli_mul(a: PauliOp, b: PauliOp) -> PauliOp:
    """Product ab with the exact phase tracked."""
    _check_same_n(a, b)
    x3, z3 = a.x ^ b.x, a.z ^ b.z
    w1 = int(np.bitwise_count(np.int64(a.x & a.z)))
    w2 = int(np.bitwise_count(np.int64(b.x & b.z)))
    w3 = int(np.bitwise_count(np.int64(x3 & z3)))
    cross = int(np.bitwise_count(np.int64(a.z & b.x)))
    phase = (a.phase + b.phase + w1 + w2 - w3 + 2 * cross) % 4
    return PauliOp(a.n, x3, z3, phase)


def commutes(a: PauliOp, b: PauliOp) -> bool:
    return a.commutes(b)


def locally_commutes(a: PauliOp, b: PauliOp) -> bool:
    return a.locally_commutes(b)


def cap_weight(a: PauliOp, b: PauliOp) -> int:
    return a.cap_weight(b)


def cup_weight(a: PauliOp, b: PauliOp) -> int:
    return a.cup_weight(b)


# ---------------------------------------------------------------------------
# full Pauli spectrum (fast transform)
# ---------------------------------------------------------------------------

def _fwht(a: np.ndarray) -> np.ndarray:
    """Walsh-Hadamard transform along the last axis: out[z] = sum_t (-1)^{z.t} a[t]."""
    d = a.shape[-1]
    lead = a.shape[:-1]
    a = a.reshape(-1, d)
    h = 1
    while h < d:
        a = a.reshape(a.shape[0], -1, 2, h)
        top = a[:, :, 0, :] + a[:, :, 1, :]
        bot = a[:, :, 0, :] - a[:, :, 1, :]
        a = np.concatenate([top[:, :, None, :], bot[:, :, None, :]], axis=2)
        a = a.reshape(a.shape[0], -1)
        h *= 2
    return a.reshape(*lead, d)


def _interleave_perm(n: int) -> list[int]:
    # cube axes are (x_{q=0}, ..., x_{q=n-1}, z_{q=0}, ..., z_{q=n-1}) with
    # qubit 0 the most significant basis-index bit; the packed index wants
    # (z_{n-1}, x_{n-1}, ..., z_0, x_0) from most to least significant
    perm = []
    for i in reversed(range(n)):
        perm += [n + i, i]
    return perm


def pauli_spectrum(obj: np.ndarray, n: int, *, budget: int | None = None,
                   chunk: int = 256) -> np.ndarray:
    """All 4^n Pauli expectations Tr(M P0), packed-index order.

    `obj` is either a dense Hermitian (d, d) matrix or a pure-state vector of
    length d = 2^n (interpreted as the projector onto it).  Cost O(d^2 log d).
    """
    _require_budget(n, budget)
    d = 1 << n
    obj = np.asarray(obj)
    is_vec = obj.ndim == 1
    if not is_vec and obj.shape != (d, d):
        raise ValueError("expected a length-d vector or d x d matrix")
    t = np.arange(d)
    out2d = np.empty((d, d))
    for lo in range(0, d, chunk):
        xs = np.arange(lo, min(lo + chunk, d))
        tx = t[None, :] ^ xs[:, None]
        if is_vec:
            g = obj[t][None, :] * np.conj(obj)[tx]
        else:
            g = obj[t[None, :], tx]
        f = _fwht(g)
        # phase i^{|x AND z|}: number of Y factors
        wyz = np.bitwise_count(xs[:, None] & t[None, :])
        out2d[xs] = np.real(_PHASES[wyz % 4] * f)
    cube = out2d.reshape((2,) * (2 * n))
    return np.ascontiguousarray(cube.transpose(_interleave_perm(n))).reshape(4**n)


# ---------------------------------------------------------------------------
# characteristic functions
# ---------------------------------------------------------------------------

DROP_TOL = 1e-12


@dataclass(frozen=True)
class CharFunction:
    """Sparse real characteristic function Xi(P) = Tr(O P) over unsigned Paulis."""

    n: int
    idx: np.ndarray  # sorted packed indices with |value| > tolerance
    val: np.ndarray

    @classmethod
    def from_spectrum(cls, spectrum: np.ndarray, n: int, tol: float = DROP_TOL) -> "CharFunction":
        keep = np.flatnonzero(np.abs(spectrum) > tol)
        return cls(n, keep.astype(np.int64), np.asarray(spectrum)[keep].astype(float))

    @classmethod
    def from_factors(cls, factors: Sequence[tuple[Iterable[int], Iterable[float]]],
                     tol: float = DROP_TOL) -> "CharFunction":
        """Tensor-product assembly from per-qubit (codes, values) pairs.

        Codes use the 2-bit convention 0=I, 1=X, 2=Z, 3=Y; qubit q contributes
        code << 2q to the packed index.  Keeps product sparsity exactly.
        """
        idx = np.zeros(1, dtype=np.int64)
        val = np.ones(1)
        for q, (codes, values) in enumerate(factors):
            codes = np.asarray(list(codes), dtype=np.int64)
            values = np.asarray(list(values), dtype=float)
            idx = (idx[:, None] | (codes[None, :] << (2 * q))).ravel()
            val = (val[:, None] * values[None, :]).ravel()
        keep = np.abs(val) > tol
        idx, val = idx[keep], val[keep]
        order = np.argsort(idx)
        return cls(len(factors), idx[order], val[order])

    @property
    def d(self) -> int:
        return 1 << self.n

    @property
    def support_size(self) -> int:
        return len(self.idx)

    def value_at(self, query) -> np.ndarray:
        """Values at packed indices (0 off-support)."""
        query = np.asarray(query, dtype=np.int64)
        if len(self.idx) == 0:
            return np.zeros(query.shape)
        pos = np.searchsorted(self.idx, query)
        pos = np.clip(pos, 0, len(self.idx) - 1)
        hit = self.idx[pos] == query
        out = np.where(hit, self.val[pos], 0.0)
        return out

    def without_identity(self) -> "CharFunction":
        keep = self.idx != 0
        return CharFunction(self.n, self.idx[keep], self.val[keep])

    def l2sq(self) -> float:
        return float(np.dot(self.val, self.val))

    def l4_4(self) -> float:
        return float(np.sum(self.val**4))

    def to_dense(self, *, budget: int | None = None) -> np.ndarray:
        _require_budget(self.n, budget)
        out = np.zeros(4**self.n)
        out[self.idx] = self.val
        return out


def char_function(obj, n: int | None = None, *, tol: float = DROP_TOL,
                  budget: int | None = None) -> CharFunction:
    """Characteristic function of a Hermitian operator or state.

    Accepts a dense Hermitian matrix, a pure-state vector, or any object with a
    `char_function()` method (states carry exact sparse constructions for
    product-form families).
    """
    if hasattr(obj, "char_function"):
        return obj.char_function(tol=tol, budget=budget)
    arr = np.asarray(obj)
    if n is None:
        d = arr.shape[0]
        n = int(d).bit_length() - 1
        if 1 << n != d:
            raise ValueError("dimension is not a power of two")
    if arr.ndim == 2 and np.max(np.abs(arr - arr.conj().T)) > 1e-10:
        raise ValueError("char_function requires a Hermitian operator")
    return CharFunction.from_spectrum(pauli_spectrum(arr, n, budget=budget), n, tol)


def cross_char(a: CharFunction, b: CharFunction) -> CharFunction:
    """Xi_{A,B}(P) = Tr(A P) Tr(B P) on the intersected support."""
    if a.n != b.n:
        raise ValueError("dimension mismatch")
    common, ia, ib = np.intersect1d(a.idx, b.idx, assume_unique=True, return_indices=True)
    return CharFunction(a.n, common, a.val[ia] * b.val[ib])


def twisted_cross_char(a, b, idx: np.ndarray, n: int) -> np.ndarray:
    """Twisted entries Xi~_{A,B}(P) = Tr(A P B P) at the given packed indices.

    `a` is a dense Hermitian matrix; `b` is a dense matrix, a pure-state vector,
    or a (weights, vectors) ensemble — the latter two use Pauli action on
    vectors, O(d) per Pauli per component.
    """
    idx = np.asarray(idx, dtype=np.int64)
    a = np.asarray(a)
    out = np.empty(len(idx))
    if isinstance(b, tuple):
        wts, vecs = b
    elif np.asarray(b).ndim == 1:
        wts, vecs = np.ones(1), np.asarray(b)[None, :]
    else:
        wts, vecs = None, None
    for i, ix in enumerate(idx):
        p = PauliOp.from_index(int(ix), n)
        if wts is None:
            bm = np.asarray(b)
            pm = p.to_matrix()
            out[i] = np.real(np.trace(a @ pm @ bm @ pm))
        else:
            acc = 0.0
            for w, v in zip(wts, vecs):
                pv = p.apply(v)
                acc += w * np.real(np.vdot(pv, a @ pv))
            out[i] = acc
    return out


# ---------------------------------------------------------------------------
# stabilizer 2-Renyi entropy and the K tables
# ---------------------------------------------------------------------------

def sre2_from_char(char: CharFunction) -> float:
    """M2 = log2(d / ||Xi||_4^4) for a normalized pure state's char function."""
    return float(np.log2(char.d / char.l4_4()))


@dataclass(frozen=True)
class KSigmaTable:
    """eta_i = 1 - Tr(sigma P_i)^2 and the anticommutation-weighted fourth-moment
    sums K_sigma(P_i) and K_sigma(P_i, P_j) over sigma's char support."""

    char: CharFunction  # char of sigma, identity included

    def eta(self, idx) -> np.ndarray:
        return 1.0 - self.char.value_at(idx) ** 2

    def k1(self, idx) -> np.ndarray:
        """K(P_i) = sum over P_k anticommuting with P_i of Tr(sigma P_k)^4."""
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        c4 = self.char.val**4
        anti = anticommute_parity(idx[:, None], self.char.idx[None, :])
        return anti @ c4

    def k2(self, idx_i, idx_j) -> np.ndarray:
        """K(P_i, P_j): fourth-moment sum over P_k anticommuting with both."""
        idx_i = np.atleast_1d(np.asarray(idx_i, dtype=np.int64))
        idx_j = np.atleast_1d(np.asarray(idx_j, dtype=np.int64))
        c4 = self.char.val**4
        anti_i = anticommute_parity(idx_i[:, None], self.char.idx[None, :])
        anti_j = anticommute_parity(idx_j[:, None], self.char.idx[None, :])
        return (anti_i & anti_j) @ c4


def k_sigma_tables(char: CharFunction) -> KSigmaTable:
    return KSigmaTable(char)


# ---------------------------------------------------------------------------
# pair sums used by the variance engine
# ---------------------------------------------------------------------------

def commuting_pair_matrix(idx: np.ndarray) -> np.ndarray:
    """Dense 0/1 matrix C[i,j] = 1 iff P_i and P_j commute (small supports only)."""
    idx = np.asarray(idx, dtype=np.int64)
    anti = anticommute_parity(idx[:, None], idx[None, :])
    return 1.0 - anti.astype(float)


class CommutingPairSum:
    """T(a) = sum_{i,j commuting} a_i a_j over a fixed Pauli support.

    The commutation structure depends only on the support, so it is computed
    once (dense when small, chunked otherwise) and reused across evaluations
    with different coefficient vectors.
    """

    #: supports up to this size keep the dense mask in memory
    DENSE_LIMIT = 4096

    def __init__(self, idx: np.ndarray, *, pair_budget: int = 4 * 10**8,
                 chunk: int = 512):
        self.idx = np.asarray(idx, dtype=np.int64)
        m = len(self.idx)
        if m * m > pair_budget:
            raise BudgetError(
                f"commuting-pair sum needs {m*m:.2e} pairs, budget {pair_budget:.2e}")
        self.chunk = chunk
        self._dense = commuting_pair_matrix(self.idx) if m <= self.DENSE_LIMIT else None

    def __call__(self, a: np.ndarray, b: np.ndarray | None = None) -> float:
        """sum_{i,j commuting} a_i b_j (b defaults to a); includes i = j."""
        if b is None:
            b = a
        if self._dense is not None:
            return float(a @ (self._dense @ b))
        total = 0.0
        m = len(self.idx)
        for lo in range(0, m, self.chunk):
            rows = self.idx[lo:lo + self.chunk]
            anti = anticommute_parity(rows[:, None], self.idx[None, :])
            comm = 1.0 - anti
            total += float(a[lo:lo + self.chunk] @ (comm @ b))
        return total
