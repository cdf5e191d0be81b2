"""Circuit-sample-cost bounds N_U for generic estimation and for
high-precision fidelity estimation (HPFE, error budget r * eps)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._errors import HypothesisError

#: sub-gaussian median-of-means constant in the sample-cost bound
COST_CONSTANT = 68.0

HPFE_THEOREMS = ("exact", "lemma3", "thm2", "thm4", "thm5_pauli", "thm5_depolarizing")


@dataclass(frozen=True)
class PrecisionSpec:
    r: float = 0.25        # relative precision factor (HPFE error = r * eps)
    delta: float = 0.01    # significance level
    eps: float | None = None      # target infidelity (HPFE)
    eps_abs: float | None = None  # absolute error (generic estimation)

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.r <= 0.0:
            raise ValueError("r must be positive")
        for name in ("eps", "eps_abs"):
            val = getattr(self, name)
            if val is not None and not 0.0 < val <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")


def _clamp(x: float) -> int:
    return max(1, math.ceil(x))


def n_u_generic(v_R: float, eps_abs: float, delta: float) -> int:
    """N_U = ceil(68 V_R / eps^2 * ln(2/delta)), clamped to >= 1."""
    if v_R < 0:
        raise ValueError("V_R must be nonnegative")
    if not (eps_abs > 0 and 0 < delta < 1):
        raise ValueError("invalid precision parameters")
    return _clamp(COST_CONSTANT * v_R / eps_abs**2 * math.log(2.0 / delta))


def n_u_hpfe(r: float, eps: float, delta: float, theorem: str = "exact", *,
             v_R: float | None = None,
             v_star_delta: float | None = None,
             R: float | None = None,
             delta2_sq: float | None = None,
             d: float | None = None,
             m2: float | None = None,
             noise_kind: str | None = None) -> int:
    """HPFE circuit sample cost at error r * eps, by exact variance or by one
    of the closed-form upper bounds.

    theorem:
      exact              - 68 V_R / (r eps)^2 ln(2/delta); needs v_R
      lemma3             - 68 [V*(O,Delta) + 2/R] / (r eps)^2 ln(2/delta) (3-designs)
      thm2               - 136 [2 ||Delta||_2^2 / d + 1/R] / (r eps)^2 ln(2/delta) (4-designs)
      thm4               - 136 [2^{1 - m2/2} ||Delta||_2^2 + 1/R] / (r eps)^2 ln(2/delta) (Clifford)
      thm5_pauli         - 136 ln(2/delta) [2/r^2 + 1/(R r^2 eps^2)]; requires Pauli-channel noise
      thm5_depolarizing  - 136 ln(2/delta) [2^{-m2}/r^2 + 1/(R r^2 eps^2)]; requires depolarizing
    """
    PrecisionSpec(r=r, delta=delta, eps=eps)
    log = math.log(2.0 / delta)
    err2 = (r * eps) ** 2

    def need(**kw):
        missing = [k for k, v in kw.items() if v is None]
        if missing:
            raise HypothesisError(f"{theorem} bound needs {', '.join(missing)}")

    if theorem == "exact":
        need(v_R=v_R)
        return n_u_generic(v_R, r * eps, delta)
    if theorem == "lemma3":
        need(v_star_delta=v_star_delta, R=R)
        return _clamp(COST_CONSTANT * (v_star_delta + 2.0 / R) / err2 * log)
    if theorem == "thm2":
        need(delta2_sq=delta2_sq, R=R, d=d)
        return _clamp(136.0 * (2.0 * delta2_sq / d + 1.0 / R) / err2 * log)
    if theorem == "thm4":
        need(delta2_sq=delta2_sq, R=R, m2=m2)
        return _clamp(136.0 * (2.0 ** (1.0 - m2 / 2.0) * delta2_sq + 1.0 / R) / err2 * log)
    if theorem == "thm5_pauli":
        need(R=R)
        if noise_kind not in ("pauli", "single_error_pauli", "depolarizing"):
            raise HypothesisError(
                f"thm5_pauli requires a Pauli-channel system state, got {noise_kind!r}")
        return _clamp(136.0 * log * (2.0 / r**2 + 1.0 / (R * err2)))
    if theorem == "thm5_depolarizing":
        need(R=R, m2=m2)
        if noise_kind != "depolarizing":
            raise HypothesisError(
                f"thm5_depolarizing requires depolarizing noise, got {noise_kind!r}")
        return _clamp(136.0 * log * (2.0 ** (-m2) / r**2 + 1.0 / (R * err2)))
    raise ValueError(f"unknown theorem {theorem!r}; choose from {HPFE_THEOREMS}")


def scaling_fit(points) -> tuple[float, float]:
    """Least-squares fit of log N_U against log eps: returns (exponent,
    intercept) with N_U ~ exp(intercept) * eps^exponent."""
    pts = [(float(e), float(nu)) for e, nu in points]
    if len(pts) < 3:
        raise ValueError("scaling fit needs at least 3 points")
    eps = np.array([p[0] for p in pts])
    nu = np.array([p[1] for p in pts])
    if len(np.unique(eps)) < len(eps):
        raise ValueError("eps values must be distinct")
    if np.any(eps <= 0) or np.any(nu <= 0):
        raise ValueError("scaling fit needs positive values")
    slope, intercept = np.polyfit(np.log(eps), np.log(nu), 1)
    return float(slope), float(intercept)
