"""Shadow-estimation protocol simulation: Born-rule measurement rounds,
reconstruction-map estimators (standard / thrifty / common-randomized), and
median-of-means aggregation.

One round samples a random circuit U, applies it to the system state, and
measures R computational-basis shots.  The common-randomized estimator
corrects the empirical distribution with the *analytic* outcome distribution
of the prior sigma under the same U:

    estimate = sum_s [P_hat(s|U) - P_sigma(s|U)] g(U, s) + Tr(O sigma),

where g(U, s) = <s| U M^{-1}(O) U'|s> is the reconstruction profile.  Thrifty
drops the sigma terms; standard estimation is thrifty with R = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import rng_stream
from .cliffords import CliffordElement, sample_local_clifford, sample_uniform_clifford
from .paulis import CharFunction, PauliOp, weight
from .states import QuantumState

MODES = ("standard", "thrifty", "crm")
ENSEMBLES = ("clifford", "local_pauli")


@dataclass(frozen=True)
class EstimatorConfig:
    ensemble: str = "clifford"
    mode: str = "crm"
    R: int = 1
    n_u: int = 1
    mom_batches: int = 1

    def __post_init__(self):
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.R < 1 or self.n_u < 1 or self.mom_batches < 1:
            raise ValueError("R, n_u and mom_batches must be >= 1")
        if self.mode == "standard" and self.R != 1:
            raise ValueError("standard mode is defined with R = 1")


@dataclass
class MeasurementRecord:
    circuit: CliffordElement
    counts: np.ndarray  # multinomial outcome counts, length d

    @property
    def R(self) -> int:
        return int(self.counts.sum())


def born_probabilities(u: CliffordElement, state: QuantumState) -> np.ndarray:
    """p(s) = <s| U state U' |s> for all d outcomes."""
    if state.is_pure:
        p = np.abs(u.apply(state.vector)) ** 2
    elif state.weights is not None:
        p = np.zeros(state.d)
        for w, v in zip(state.weights, state.vectors):
            p += w * np.abs(u.apply(v)) ** 2
    else:
        um = u.unitary()
        p = np.real(np.einsum("ij,jk,ik->i", um, state.rho, np.conj(um)))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def simulate_round(rho: QuantumState, u: CliffordElement, R: int,
                   rng: np.random.Generator) -> MeasurementRecord:
    """R computational-basis shots after applying U, as multinomial counts."""
    probs = born_probabilities(u, rho)
    return MeasurementRecord(u, rng.multinomial(R, probs))


def _to_big_endian(mask: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(mask)
    for q in range(n):
        out |= ((mask >> q) & 1) << (n - 1 - q)
    return out


def reconstruction_profile(u: CliffordElement, obs_char: CharFunction,
                           ensemble: str) -> np.ndarray:
    """g(U, s) = <s| U M^{-1}(O) U' |s> for every outcome s, for traceless O.

    Clifford / 3-design: M^{-1}(O) = (d+1) O.  Local single-qubit Cliffords:
    M^{-1}(O) = sum_i 3^{w(P_i)} Tr(O P_i) P_i / d.  Only Paulis that U maps to
    diagonal (Z-type) Paulis contribute: U P U' = +-Z_z gives the profile term
    coeff * (-1)^{z . s}.
    """
    xi = obs_char.without_identity()
    n, d = xi.n, xi.d
    zmasks, coeffs = [], []
    if ensemble == "clifford":
        factors = np.full(len(xi.idx), d + 1.0)
    else:
        factors = 3.0 ** weight(xi.idx).astype(float)
    for i, ix in enumerate(xi.idx):
        q = u.conjugate_pauli(PauliOp.from_index(int(ix), n))
        if q.x != 0:
            continue
        sign = 1.0 if q.phase == 0 else -1.0
        zmasks.append(q.z)
        coeffs.append(factors[i] * xi.val[i] * sign / d)
    g = np.zeros(d)
    if not zmasks:
        return g
    zb = _to_big_endian(np.asarray(zmasks, dtype=np.int64), n)
    s = np.arange(d)
    for z, c in zip(zb, coeffs):
        g += c * (1.0 - 2.0 * (np.bitwise_count(s & z) & 1))
    return g


def crm_estimate(record: MeasurementRecord, obs_char: CharFunction,
                 sigma: QuantumState | None = None, *,
                 mode: str = "crm", ensemble: str = "clifford") -> float:
    """Per-circuit estimate of Tr(O rho) from one measurement record."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    g = reconstruction_profile(record.circuit, obs_char, ensemble)
    p_hat = record.counts / record.R
    est = float(p_hat @ g)
    if mode == "crm":
        if sigma is None:
            raise ValueError("crm mode requires a prior state")
        p_sigma = born_probabilities(record.circuit, sigma)
        xi = obs_char.without_identity()
        tr_o_sigma = float(xi.val @ sigma.pauli_expectations(xi.idx)) / xi.d
        est += tr_o_sigma - float(p_sigma @ g)
    return est


def median_of_means(estimates, batches: int) -> float:
    estimates = np.asarray(estimates, dtype=float)
    if estimates.size == 0:
        raise ValueError("no estimates to aggregate")
    if batches < 1:
        raise ValueError("batches must be >= 1")
    batches = min(batches, estimates.size)
    means = [chunk.mean() for chunk in np.array_split(estimates, batches)]
    return float(np.median(means))


def default_mom_batches(delta: float) -> int:
    """K = ceil(2 ln(2/delta)) median-of-means batches."""
    return max(1, math.ceil(2.0 * math.log(2.0 / delta)))


def run_protocol(rho: QuantumState, obs_char: CharFunction,
                 config: EstimatorConfig, sigma: QuantumState | None = None,
                 *, seed: int = 0) -> tuple[float, float]:
    """Sample n_u circuits with R shots each; return (median-of-means estimate,
    empirical variance of the per-circuit estimates)."""
    if config.mode == "crm" and sigma is None:
        raise ValueError("crm mode requires a prior state")
    n = rho.n
    estimates = np.empty(config.n_u)
    for i in range(config.n_u):
        rng = rng_stream(seed, "circuit", i)
        if config.ensemble == "clifford":
            u = sample_uniform_clifford(n, rng)
        else:
            u = sample_local_clifford(n, rng)
        record = simulate_round(rho, u, config.R, rng)
        estimates[i] = crm_estimate(record, obs_char, sigma,
                                    mode=config.mode, ensemble=config.ensemble)
    est = median_of_means(estimates, config.mom_batches)
    var = float(np.var(estimates, ddof=1)) if config.n_u > 1 else 0.0
    return est, var
