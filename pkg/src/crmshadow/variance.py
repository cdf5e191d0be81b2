"""Exact variance formulas for standard / thrifty / common-randomized shadow
estimation under each measurement ensemble.

Conventions.  O is a traceless observable, sigma the prior state, rho the
(noisy) system state, Delta = rho - sigma.  The per-round variance after
reusing each circuit R times is

    V_R = V*(O, Delta) + [V(O, rho) - V*(O, rho)] / R,

where V(O, rho) is the single-round variance of standard shadow estimation
and V*(O, tau) is the circuit-to-circuit variance of the average estimator.
Thrifty estimation is the sigma = 0 special case; standard estimation is
thrifty with R = 1.

For the Clifford ensemble two algebraically equivalent implementations are
kept on purpose: a commuting-pair sum over the sparse cross characteristic
function (production path; its commutation mask depends only on the support
and is cached across noise draws) and a characteristic-function form whose
twisted entries Tr(tau P O P) are computed directly from Pauli action on
vectors (independent oracle path).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._errors import BudgetError
from .paulis import (
    PAULI_BUDGET,
    CharFunction,
    CommutingPairSum,
    PauliOp,
    locally_commuting_and_cap,
    twisted_cross_char,
    weight,
)
from .states import QuantumState

#: default cap on the number of (i, j) pairs in local-Clifford ensemble sums
PAULI_PAIR_BUDGET = 10**8

_METHODS = ("exact_sum", "closed_form_depolarizing", "bound_only")


@dataclass(frozen=True)
class VarianceReport:
    """The three variance components for one (ensemble, O, rho, sigma) tuple."""

    ensemble: str
    v: float               # V(O, rho): standard single-round variance
    v_star_rho: float      # V*(O, rho)
    v_star_delta: float    # V*(O, Delta)
    method: str = "exact_sum"
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if self.method != "bound_only":
            tol = 1e-9
            if min(self.v, self.v_star_rho, self.v_star_delta) < -tol:
                raise ValueError("negative variance component")
            if self.v_star_rho > self.v + tol:
                raise ValueError("V*(O, rho) exceeds V(O, rho)")

    def v_R(self, R: float) -> float:
        return v_R(self, R)


def v_R(report: VarianceReport, R: float) -> float:
    """V_R = V*(O, Delta) + [V(O, rho) - V*(O, rho)] / R."""
    if R < 1:
        raise ValueError("R must be >= 1")
    return report.v_star_delta + (report.v - report.v_star_rho) / R


# ---------------------------------------------------------------------------
# 3-design standard-shadow variance
# ---------------------------------------------------------------------------

def v_standard_3design(obs: np.ndarray, rho: QuantumState | np.ndarray) -> float:
    """V(O, rho) = (d+1)/(d+2) [Tr(O^2) + 2 Tr(rho O^2)] - Tr(rho O)^2."""
    obs = np.asarray(obs)
    d = obs.shape[0]
    if abs(np.trace(obs)) > 1e-9:
        raise ValueError("observable must be traceless")
    o2 = obs @ obs
    if isinstance(rho, QuantumState):
        tr_rho_o2 = rho.expectation(o2)
        tr_rho_o = rho.expectation(obs)
    else:
        tr_rho_o2 = float(np.real(np.trace(rho @ o2)))
        tr_rho_o = float(np.real(np.trace(rho @ obs)))
    tr_o2 = float(np.real(np.trace(o2)))
    val = (d + 1.0) / (d + 2.0) * (tr_o2 + 2.0 * tr_rho_o2) - tr_rho_o**2
    assert val <= 2.0 * tr_o2 + 1e-9
    return float(val)


def v_standard_3design_fidelity(d: int, fidelity: float) -> float:
    """V(O, rho) for O = sigma - 1/d with pure sigma and F = <phi|rho|phi>."""
    return float(-fidelity**2 + d * (2.0 * fidelity + 1.0) / (d + 2.0))


# ---------------------------------------------------------------------------
# Clifford ensemble: V*(O, tau) dual paths
# ---------------------------------------------------------------------------

def v_star_clifford(xi: CharFunction, *, pair_sum: CommutingPairSum | None = None) -> float:
    """V*(O, tau) from the commuting-pair form (production path).

    `xi` is the cross characteristic function Xi_{tau,O}(P) = Tr(O P) Tr(tau P)
    over nontrivial Paulis (the identity entry vanishes for traceless O).
    With a_i = xi values, T = sum over commuting pairs (diagonal included):

        V* = 2(d+1)/(d^2 (d+2)) (T - ||a||^2) + (d+1)/d^2 ||a||^2 - Tr(tau O)^2.
    """
    d = float(xi.d)
    a = xi.val
    if pair_sum is None:
        pair_sum = CommutingPairSum(xi.idx)
    t = pair_sum(a)
    s2 = float(a @ a)
    tr_tau_o = float(a.sum()) / d
    return (2.0 * (d + 1.0) / (d**2 * (d + 2.0)) * (t - s2)
            + (d + 1.0) / d**2 * s2 - tr_tau_o**2)


def v_star_clifford_char(obs_matrix: np.ndarray, tau, xi: CharFunction) -> float:
    """V*(O, tau) from the characteristic-function form (oracle path).

        V* = (d+1)/(d(d+2)) (||Xi||_2^2 + Xi~ . Xi) - Tr(tau O)^2 / (d+2),

    with twisted entries Xi~(P) = Tr(tau P O P) evaluated directly.  `tau` is
    a dense matrix, a pure-state vector, or a (weights, vectors) ensemble.
    """
    d = float(xi.d)
    twisted = twisted_cross_char(obs_matrix, tau, xi.idx, xi.n)
    tr_tau_o = float(xi.val.sum()) / d
    vo = (d + 1.0) / (d * (d + 2.0)) * (xi.l2sq() + float(twisted @ xi.val))
    return vo - tr_tau_o**2 / (d + 2.0)


def clifford_bound(xi: CharFunction) -> float:
    """Upper bound V*(O, tau) <= (2/d) ||Xi_{tau,O}||_2^2 (budget fallback)."""
    return 2.0 / xi.d * xi.l2sq()


def v_star_clifford_depolarizing(d: float, p: float, m2: float) -> VarianceReport:
    """Closed forms for O = sigma - 1/d, rho = (1-p) sigma + p 1/d, pure sigma
    with stabilizer 2-Renyi entropy m2.  Valid at any d given m2."""
    bracket = (2.0 ** (1.0 - m2) * (d + 1.0) - 4.0) / (d + 2.0)
    v_star_delta = p**2 * bracket
    v_star_rho = (1.0 - p) ** 2 * bracket
    fidelity = 1.0 - p * (1.0 - 1.0 / d)
    v = v_standard_3design_fidelity(d, fidelity)
    eps = p * (1.0 - 1.0 / d)
    assert v_star_delta <= 2.0 ** (1.0 - m2) * eps**2 + 1e-12
    return VarianceReport("clifford", v, v_star_rho, v_star_delta,
                          method="closed_form_depolarizing",
                          detail={"p": p, "m2": m2, "eps": eps})


# ---------------------------------------------------------------------------
# 4-design ensemble
# ---------------------------------------------------------------------------

def v_star_4design_traces(d: float, tr_do: float, tr_d2o2: float, tr_d2: float,
                          tr_o2: float, tr_dodo: float) -> float:
    """V*(O, Delta) for a unitary 4-design from precomputed traces."""
    c = d * (d + 2.0) * (d + 3.0)
    return ((d**2 + 3.0 * d + 4.0) / c * tr_do**2
            + 2.0 * (d + 1.0) ** 2 / c * tr_d2o2
            + (d + 1.0) / (d * (d + 3.0)) * tr_d2 * tr_o2
            - 2.0 * (d + 1.0) / c * tr_dodo)


def v_star_rho_4design_traces(d: float, tr_ro: float, tr_r2o2: float, tr_r2: float,
                              tr_o2: float, tr_roro: float, tr_ro2: float) -> float:
    """V*(O, rho) for a unitary 4-design from precomputed traces.

    Because the reconstruction profile of a traceless O sums to zero over
    outcomes, the identity component of rho drops out of the cross-moment
    average, so V*(O, rho) equals the Delta formula evaluated at rho - 1/d.
    Expanded in traces of rho this is the Delta formula with rho plus
    -4(d+1)/(d(d+2)(d+3)) Tr(rho O^2) - (d+1)/(d(d+2)(d+3)) Tr(O^2)
    (verified against a Haar Monte-Carlo evaluation of the defining average)."""
    c = d * (d + 2.0) * (d + 3.0)
    extra = -(d + 1.0) / c * (4.0 * tr_ro2 + tr_o2)
    return v_star_4design_traces(d, tr_ro, tr_r2o2, tr_r2, tr_o2, tr_roro) + extra


def v_star_4design(obs: np.ndarray, delta: np.ndarray) -> float:
    """V*(O, Delta) for a unitary 4-design (dense matrices)."""
    obs = np.asarray(obs)
    delta = np.asarray(delta)
    d = float(obs.shape[0])
    od = obs @ delta
    return v_star_4design_traces(
        d,
        float(np.real(np.trace(od))),
        float(np.real(np.trace(delta @ delta @ obs @ obs))),
        float(np.real(np.sum(np.abs(delta) ** 2))),
        float(np.real(np.sum(np.abs(obs) ** 2))),
        float(np.real(np.trace(od @ od))),
    )


def v_star_rho_4design(obs: np.ndarray, rho: np.ndarray) -> float:
    """V*(O, rho) for a unitary 4-design (dense matrices)."""
    obs = np.asarray(obs)
    rho = np.asarray(rho)
    d = float(obs.shape[0])
    ro = rho @ obs
    return v_star_rho_4design_traces(
        d,
        float(np.real(np.trace(ro))),
        float(np.real(np.trace(rho @ rho @ obs @ obs))),
        float(np.real(np.sum(np.abs(rho) ** 2))),
        float(np.real(np.sum(np.abs(obs) ** 2))),
        float(np.real(np.trace(ro @ ro))),
        float(np.real(np.trace(rho @ obs @ obs))),
    )


def four_design_depolarizing(d: float, p: float) -> tuple[float, float]:
    """(V*(O, rho), V*(O, Delta)) for a 4-design with the fidelity observable
    O = sigma - 1/d (pure sigma) and rho = (1-p) sigma + p 1/d.

    All traces reduce to scalars in (d, p): with Delta = -p O,
    O^2 = (1 - 2/d) sigma + 1/d^2 and Tr(O^4), Tr(rho^2), ... in closed form,
    so the formulas stay usable at dimensions far beyond dense budgets.
    """
    tr_o2 = 1.0 - 1.0 / d
    tr_o4 = (1.0 - 2.0 / d) ** 2 + 2.0 * (1.0 - 2.0 / d) / d**2 + 1.0 / d**3
    v_star_delta = v_star_4design_traces(
        d, -p * tr_o2, p**2 * tr_o4, p**2 * tr_o2, tr_o2, p**2 * tr_o4)
    f = 1.0 - p * (1.0 - 1.0 / d)
    tr_r2 = (1.0 - p) ** 2 + 2.0 * p * (1.0 - p) / d + p**2 / d
    v_star_rho = v_star_rho_4design_traces(
        d,
        f - 1.0 / d,
        (1.0 - 2.0 / d) * f**2 + tr_r2 / d**2,
        tr_r2,
        tr_o2,
        f**2 - 2.0 * f**2 / d + tr_r2 / d**2,
        (1.0 - 2.0 / d) * f + 1.0 / d**2,
    )
    return v_star_rho, v_star_delta


def four_design_orthogonal_flip(d: float, p: float) -> tuple[float, float]:
    """(V*(O, rho), V*(O, Delta)) for a 4-design with O = sigma - 1/d and
    rho = (1-p) sigma + p tau, where tau = P sigma P is a flipped pure state
    orthogonal to sigma (<phi|P|phi> = 0, so sigma tau = 0)."""
    tr_o2 = 1.0 - 1.0 / d
    v_star_delta = v_star_4design_traces(
        d, -p,
        p**2 * (1.0 - 2.0 / d) + 2.0 * p**2 / d**2,
        2.0 * p**2,
        tr_o2,
        p**2 * ((1.0 - 1.0 / d) ** 2 + 1.0 / d**2))
    q = 1.0 - p  # = fidelity
    tr_r2 = q**2 + p**2
    v_star_rho = v_star_rho_4design_traces(
        d,
        q - 1.0 / d,
        (1.0 - 2.0 / d) * q**2 + tr_r2 / d**2,
        tr_r2,
        tr_o2,
        q**2 - 2.0 * q**2 / d + tr_r2 / d**2,
        (1.0 - 2.0 / d) * q + 1.0 / d**2,
    )
    return v_star_rho, v_star_delta


# ---------------------------------------------------------------------------
# local-Clifford (Pauli-measurement) ensemble
# ---------------------------------------------------------------------------

def _local_pair_sum(idx: np.ndarray, a: np.ndarray, b: np.ndarray,
                    rho_char: CharFunction | None = None,
                    obs_val: np.ndarray | None = None,
                    *, chunk: int = 256):
    """sum over locally-commuting pairs of 3^{cap} a_i b_j, or (with rho_char)
    of 3^{cap} o_i o_j Tr(rho P_i P_j) using Tr(rho P_i P_j) = rho-char(i xor j)
    (the product of locally commuting Paulis carries sign +1)."""
    total = 0.0
    m = len(idx)
    for lo in range(0, m, chunk):
        rows = idx[lo:lo + chunk]
        ok, cap = locally_commuting_and_cap(rows[:, None], idx[None, :])
        w3 = np.where(ok, 3.0**cap, 0.0)
        if rho_char is None:
            total += float(a[lo:lo + chunk] @ (w3 @ b))
        else:
            cross = np.where(ok, rho_char.value_at(rows[:, None] ^ idx[None, :]), 0.0)
            total += float(obs_val[lo:lo + chunk] @ ((w3 * cross) @ obs_val))
    return total


def v_pauli_ensemble(obs_char: CharFunction, rho_char: CharFunction,
                     sigma_char: CharFunction | None = None, *,
                     pair_budget: int = PAULI_PAIR_BUDGET,
                     chunk: int = 256) -> VarianceReport:
    """V, V*(O, rho), V*(O, Delta) for tensor products of single-qubit Cliffords.

    All three are sums of 3^{w(Pi cap Pj)}/d^2-weighted products over locally
    commuting pairs of nontrivial Paulis in the support of Xi_O.  `obs_char`
    must exclude the identity (automatic for traceless O); `sigma_char = None`
    means a zero prior (thrifty mode, Delta = rho).
    """
    xi_o = obs_char.without_identity()
    idx, o = xi_o.idx, xi_o.val
    d = float(xi_o.d)
    rho_vals = rho_char.value_at(idx)
    sig_vals = sigma_char.value_at(idx) if sigma_char is not None else np.zeros_like(rho_vals)
    delta_vals = rho_vals - sig_vals
    tr_o_rho = float(o @ rho_vals) / d
    tr_o_delta = float(o @ delta_vals) / d
    m = len(idx)
    if m * m > pair_budget:
        cap = 3.0 ** (weight(idx) / 2.0)
        v_bound = float(np.sum(cap * np.abs(o))) ** 2 / d**2
        vsr_bound = float(np.sum(cap * np.abs(o * rho_vals))) ** 2 / d**2
        vsd_bound = float(np.sum(cap * np.abs(o * delta_vals))) ** 2 / d**2
        return VarianceReport(
            "pauli", v_bound, vsr_bound, vsd_bound, method="bound_only",
            detail={"bound": "3^{cap} <= 3^{(w_i+w_j)/2} cap, pair budget exceeded",
                    "pairs": m * m, "pair_budget": pair_budget})
    ar = o * rho_vals
    ad = o * delta_vals
    s_rho = _local_pair_sum(idx, ar, ar, chunk=chunk)
    s_delta = _local_pair_sum(idx, ad, ad, chunk=chunk)
    s_v = _local_pair_sum(idx, o, o, rho_char, o, chunk=chunk)
    return VarianceReport(
        "pauli",
        s_v / d**2 - tr_o_rho**2,
        s_rho / d**2 - tr_o_rho**2,
        s_delta / d**2 - tr_o_delta**2,
        method="exact_sum",
        detail={"pairs": m * m})


def v_pauli_ensemble_auto(obs_char: CharFunction, rho_char: CharFunction,
                          sigma_char: CharFunction | None = None, *,
                          pair_budget: int = PAULI_PAIR_BUDGET,
                          dense_n_max: int = PAULI_BUDGET) -> VarianceReport:
    """Local-Clifford variances with automatic engine choice: sparse pair sum
    when it fits the pair budget, the dense Kronecker transform when the qubit
    count allows it (exact V*, bounded V), else the closed-form bounds."""
    m = obs_char.without_identity().support_size
    if m * m <= pair_budget:
        return v_pauli_ensemble(obs_char, rho_char, sigma_char, pair_budget=pair_budget)
    if obs_char.n <= dense_n_max:
        sig = sigma_char.to_dense() if sigma_char is not None else None
        return v_pauli_ensemble_dense(obs_char.to_dense(), rho_char.to_dense(), sig,
                                      obs_char.n)
    return v_pauli_ensemble(obs_char, rho_char, sigma_char, pair_budget=pair_budget)


#: per-qubit pair kernel of the local-Clifford ensemble sums: for single-qubit
#: codes a, b the weight is 3 when a = b != I, 1 when either is I, 0 otherwise,
#: so that (x' (kron F) y) = sum over locally commuting pairs of 3^{cap} x_i y_j.
_F_LOCAL = np.array([[1.0, 1.0, 1.0, 1.0],
                     [1.0, 3.0, 0.0, 0.0],
                     [1.0, 0.0, 3.0, 0.0],
                     [1.0, 0.0, 0.0, 3.0]])


def local_pair_transform(vals: np.ndarray, n: int) -> np.ndarray:
    """Apply the n-fold Kronecker power of the local pair kernel to a dense
    length-4^n vector indexed by packed Paulis (O(n 4^n))."""
    t = np.asarray(vals, dtype=float).reshape((4,) * n)
    for q in range(n):
        t = np.moveaxis(np.tensordot(_F_LOCAL, t, axes=(1, q)), 0, q)
    return t.reshape(-1)


def v_pauli_ensemble_dense(obs_vals: np.ndarray, rho_vals: np.ndarray,
                           sigma_vals: np.ndarray | None, n: int) -> VarianceReport:
    """Local-Clifford ensemble variances from dense length-4^n char vectors.

    V*(O, rho) and V*(O, Delta) are exact via the Kronecker pair transform; the
    standard-shadow V couples o_i o_j to rho-char(i xor j) and has no product
    structure, so it is replaced by its |Tr(rho P_i P_j)| <= 1 upper bound and
    the report is tagged bound_only (detail lists the exact components).
    """
    d = float(1 << n)
    o = np.asarray(obs_vals, dtype=float).copy()
    o[0] = 0.0
    rho_vals = np.asarray(rho_vals, dtype=float)
    delta_vals = rho_vals - (sigma_vals if sigma_vals is not None else 0.0)
    ar = o * rho_vals
    ad = o * delta_vals
    tr_o_rho = float(o @ rho_vals) / d
    tr_o_delta = float(o @ delta_vals) / d
    vsr = float(ar @ local_pair_transform(ar, n)) / d**2 - tr_o_rho**2
    vsd = float(ad @ local_pair_transform(ad, n)) / d**2 - tr_o_delta**2
    b = np.abs(o)
    v_bound = float(b @ local_pair_transform(b, n)) / d**2
    return VarianceReport(
        "pauli", v_bound, vsr, vsd, method="bound_only",
        detail={"exact": ["v_star_rho", "v_star_delta"],
                "v": "upper bound with |Tr(rho P_i P_j)| <= 1"})


def v_pauli_pauli_observable(obs: PauliOp, rho: QuantumState,
                             sigma: QuantumState | None, R: float) -> float:
    """V_R for a nontrivial Pauli observable under local-Clifford measurements:
    (3^w - 1) Tr(Delta O)^2 + 3^w [1 - Tr(rho O)^2] / R."""
    w = obs.weight
    if w == 0:
        raise ValueError("observable must be a nontrivial Pauli")
    tr_rho = float(rho.pauli_expectations([obs.index])[0])
    tr_sig = float(sigma.pauli_expectations([obs.index])[0]) if sigma is not None else 0.0
    tr_delta = tr_rho - tr_sig
    return (3.0**w - 1.0) * tr_delta**2 + 3.0**w * (1.0 - tr_rho**2) / R


def v_clifford_pauli_observable(obs: PauliOp, rho: QuantumState,
                                sigma: QuantumState | None, R: float) -> float:
    """V_R for a nontrivial Pauli observable under full Clifford measurements:
    d Tr(Delta O)^2 + (d+1) [1 - Tr(rho O)^2] / R."""
    if obs.weight == 0:
        raise ValueError("observable must be a nontrivial Pauli")
    d = float(1 << obs.n)
    tr_rho = float(rho.pauli_expectations([obs.index])[0])
    tr_sig = float(sigma.pauli_expectations([obs.index])[0]) if sigma is not None else 0.0
    tr_delta = tr_rho - tr_sig
    return d * tr_delta**2 + (d + 1.0) * (1.0 - tr_rho**2) / R


# ---------------------------------------------------------------------------
# 2-design observable-ensemble averages
# ---------------------------------------------------------------------------

def v_avg_2design_ensemble(o_norm2_sq: float, rho_purity: float,
                           delta_norm2_sq: float, d: float):
    """Average variances over Haar-rotated copies of a traceless observable:
    (V_avg, V*_rho_avg, V*_delta_avg)."""
    if o_norm2_sq <= 0:
        raise ValueError("||O||_2^2 must be positive")
    v = (1.0 + (d - rho_purity) / (d**2 - 1.0)) * o_norm2_sq
    v_star_rho = (d * rho_purity - 1.0) / (d**2 - 1.0) * o_norm2_sq
    v_star_delta = d * delta_norm2_sq * o_norm2_sq / (d**2 - 1.0)
    return v, v_star_rho, v_star_delta


# ---------------------------------------------------------------------------
# definitional (brute-force) oracles
# ---------------------------------------------------------------------------

def fidelity_observable(sigma: QuantumState) -> np.ndarray:
    """Dense O = sigma - 1/d for a pure target."""
    d = sigma.d
    return sigma.density(budget=sigma.n) - np.eye(d) / d


def brute_force_v_star(unitaries, obs: np.ndarray, tau: np.ndarray) -> float:
    """E_U[f_tau(U)^2] - Tr(O tau)^2 with
    f_tau(U) = sum_s <s|U M^{-1}(O) U'|s> <s|U tau U'|s>, M^{-1}(O) = (d+1) O."""
    obs = np.asarray(obs)
    tau = np.asarray(tau)
    d = obs.shape[0]
    total = 0.0
    count = 0
    for u in unitaries:
        do = (d + 1.0) * np.real(np.einsum("ij,jk,ik->i", u, obs, np.conj(u)))
        dt = np.real(np.einsum("ij,jk,ik->i", u, tau, np.conj(u)))
        total += float(do @ dt) ** 2
        count += 1
    return total / count - float(np.real(np.trace(obs @ tau))) ** 2


def brute_force_v_standard(unitaries, obs: np.ndarray, rho: np.ndarray) -> float:
    """E_{U, s~P_rho(.|U)} [((d+1) <s|U O U'|s>)^2] - Tr(rho O)^2."""
    obs = np.asarray(obs)
    rho = np.asarray(rho)
    d = obs.shape[0]
    total = 0.0
    count = 0
    for u in unitaries:
        do = (d + 1.0) * np.real(np.einsum("ij,jk,ik->i", u, obs, np.conj(u)))
        pr = np.real(np.einsum("ij,jk,ik->i", u, rho, np.conj(u)))
        total += float(pr @ do**2)
        count += 1
    return total / count - float(np.real(np.trace(obs @ rho))) ** 2
