"""End-to-end acceptance criteria.

Each test covers one acceptance criterion and prints a single
``[PASS]/[FAIL] <criterion>: <detail>`` line (visible with ``pytest -s`` or in
captured output on failure).  Tolerances are pinned in-line.
"""
import math

import numpy as np
import pytest
from scipy.stats import linregress

from crmshadow import channels
from crmshadow._rng import rng_stream
from crmshadow.cliffords import CliffordElement, enumerate_cliffords
from crmshadow.cost import scaling_fit
from crmshadow.experiments import (
    ExperimentSpec,
    FidelityEngine,
    RPolicy,
    mc_validate,
    run_experiment,
)
from crmshadow.paulis import CharFunction, k_sigma_tables
from crmshadow.states import QuantumState, make_state, sre2_snk
from crmshadow.variance import (
    brute_force_v_standard,
    brute_force_v_star,
    v_pauli_ensemble,
    v_standard_3design,
    v_star_4design,
    v_star_clifford,
    v_star_clifford_char,
    v_star_clifford_depolarizing,
    v_star_rho_4design,
)

from helpers import (
    all_pauli_matrices,
    brute_force_v_standard_general,
    brute_force_v_star_general,
    haar_unitaries,
    local_inverse_map,
    rand_density,
    rand_pure,
    rand_traceless_hermitian,
    trace_norm,
)

pytestmark = pytest.mark.acceptance

SEED = 20260823


def _criterion(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def _cross_char(tau: np.ndarray, obs: np.ndarray, n: int) -> CharFunction:
    paulis = all_pauli_matrices(n)
    idx = np.arange(1, 4**n)
    vals = np.array([np.real(np.trace(obs @ paulis[i]))
                     * np.real(np.trace(tau @ paulis[i])) for i in idx])
    return CharFunction(n, idx, vals)


def _stacked_unitaries(elems) -> np.ndarray:
    return np.stack([e.unitary() for e in elems])


def _geomean(vals) -> float:
    return float(np.exp(np.mean(np.log(np.asarray(vals, dtype=float)))))


def _fit_rows(rows, xkey="eps_target"):
    """Log-log exponent of N_U vs eps with N_U geometric-averaged per grid point."""
    by_x = {}
    for row in rows:
        by_x.setdefault(getattr(row, xkey), []).append(row.N_U)
    pts = [(x, _geomean(nus)) for x, nus in sorted(by_x.items())]
    return scaling_fit(pts)[0]


# ---------------------------------------------------------------------------
# 1. exhaustive Clifford-group oracle for the common-randomness variance
# ---------------------------------------------------------------------------

def test_clifford_group_brute_force_oracle():
    rng = np.random.default_rng(SEED)
    unitaries = [e.unitary() for e in enumerate_cliffords(1)]
    worst = 0.0
    for _ in range(50):
        obs = rand_traceless_hermitian(2, rng)
        rho = rand_density(2, rng)
        sigma = rand_density(2, rng)
        for tau in (rho - sigma, rho, sigma):
            ref = brute_force_v_star(unitaries, obs, tau)
            xi = _cross_char(tau, obs, 1)
            worst = max(worst,
                        abs(v_star_clifford(xi) - ref),
                        abs(v_star_clifford_char(obs, tau, xi) - ref))
        worst = max(worst, abs(v_standard_3design(obs, rho)
                               - brute_force_v_standard(unitaries, obs, rho)))
    _criterion("clifford-group-brute-force-oracle", worst < 1e-10,
               f"max |formula - exhaustive 24-element average| = {worst:.2e} "
               f"over 50 random (O, rho, sigma) at n=1 (tol 1e-10)")


@pytest.mark.slow
def test_clifford_group_brute_force_oracle_n2():
    rng = np.random.default_rng(SEED + 1)
    stack = _stacked_unitaries(enumerate_cliffords(2))  # (11520, 4, 4)
    worst = 0.0
    for _ in range(3):
        obs = rand_traceless_hermitian(4, rng)
        rho = rand_density(4, rng)
        sigma = rand_density(4, rng)
        delta = rho - sigma
        do = 5.0 * np.real(np.einsum("kij,jl,kil->ki", stack, obs, np.conj(stack)))
        for tau in (delta, rho):
            dt = np.real(np.einsum("kij,jl,kil->ki", stack, tau, np.conj(stack)))
            ref = float(np.mean(np.sum(do * dt, axis=1) ** 2)) \
                - float(np.real(np.trace(obs @ tau))) ** 2
            xi = _cross_char(tau, obs, 2)
            worst = max(worst,
                        abs(v_star_clifford(xi) - ref),
                        abs(v_star_clifford_char(obs, tau, xi) - ref))
    _criterion("clifford-group-brute-force-oracle-n2", worst < 1e-10,
               f"max deviation {worst:.2e} over 3 triples x 11520 elements (tol 1e-10)")


# ---------------------------------------------------------------------------
# 2. exhaustive local-Clifford (576-element) oracle for the product ensemble
# ---------------------------------------------------------------------------

def test_local_ensemble_brute_force_oracle():
    rng = np.random.default_rng(SEED + 2)
    singles = list(enumerate_cliffords(1))
    stack = np.stack([CliffordElement.tensor([a, b]).unitary()
                      for a in singles for b in singles])  # (576, 4, 4)
    paulis = all_pauli_matrices(2)
    idx_all = np.arange(16)
    worst = 0.0
    for _ in range(5):
        psi = rand_pure(4, rng)
        sig_mat = np.outer(psi, np.conj(psi))
        obs = sig_mat - np.eye(4) / 4.0
        rho = rand_density(4, rng)
        chars = {}
        for name, mat in (("obs", obs), ("rho", rho), ("sigma", sig_mat)):
            chars[name] = CharFunction(2, idx_all, np.array(
                [np.real(np.trace(mat @ paulis[i])) for i in idx_all]))
        rep = v_pauli_ensemble(chars["obs"].without_identity(),
                               chars["rho"], chars["sigma"])
        inv = local_inverse_map(obs, 2)
        refs = (
            brute_force_v_standard_general(stack, inv, rho, obs),
            brute_force_v_star_general(stack, inv, rho, obs),
            brute_force_v_star_general(stack, inv, rho - sig_mat, obs),
        )
        worst = max(worst,
                    abs(rep.v - refs[0]),
                    abs(rep.v_star_rho - refs[1]),
                    abs(rep.v_star_delta - refs[2]))
    _criterion("local-ensemble-brute-force-oracle", worst < 1e-10,
               f"max |pair-sum - exhaustive 576-element average| = {worst:.2e} "
               f"over 5 random instances at n=2 (tol 1e-10)")


# ---------------------------------------------------------------------------
# 3. Haar Monte-Carlo oracle for the 4-design closed forms
# ---------------------------------------------------------------------------

def test_four_design_monte_carlo_oracle():
    rng = np.random.default_rng(SEED + 3)
    d, count = 2, 100_000
    stack = haar_unitaries(d, count, rng)
    psi = rand_pure(d, rng)
    sig_mat = np.outer(psi, np.conj(psi))
    obs = sig_mat - np.eye(d) / d
    rho = rand_density(d, rng)
    do = (d + 1.0) * np.real(np.einsum("kij,jl,kil->ki", stack, obs, np.conj(stack)))
    worst_z = 0.0
    for tau, form in ((rho - sig_mat, v_star_4design(obs, rho - sig_mat)),
                      (rho, v_star_rho_4design(obs, rho))):
        dt = np.real(np.einsum("kij,jl,kil->ki", stack, tau, np.conj(stack)))
        f2 = np.sum(do * dt, axis=1) ** 2
        est = float(f2.mean()) - float(np.real(np.trace(obs @ tau))) ** 2
        se = float(f2.std(ddof=1)) / math.sqrt(count)
        worst_z = max(worst_z, abs(est - form) / se)
    _criterion("four-design-monte-carlo-oracle", worst_z <= 4.0,
               f"max |z| = {worst_z:.2f} over both closed forms "
               f"({count} Haar unitaries at d=2, gate 4 SE)")


# ---------------------------------------------------------------------------
# 4. simulated-protocol variance matches the analytic V_R
# ---------------------------------------------------------------------------

def test_estimator_variance_consistency():
    worst_z = 0.0
    for R in (1, 5, 50):
        spec = ExperimentSpec(figure="mcval", seed=SEED + R, params={
            "n": 2, "state_family": "ghz", "noise": "depolarizing", "p": 0.01,
            "circuits": 10_000, "R": R, "ensembles": ["clifford"],
            "modes": ["thrifty", "crm"],
        })
        report = mc_validate(spec)
        for row in report["rows"]:
            worst_z = max(worst_z, abs(row["z_mean"]), abs(row["z_var"]))
    _criterion("estimator-variance-consistency", worst_z <= 4.0,
               f"max |z| = {worst_z:.2f} over R in (1, 5, 50), modes thrifty/crm "
               "(GHZ n=2, 1% depolarizing, 10^4 circuits each, gate 4 sigma)")


# ---------------------------------------------------------------------------
# 5. depolarizing closed form equals the generic pair-sum path
# ---------------------------------------------------------------------------

def test_depolarizing_closed_form_vs_generic():
    worst = 0.0
    cases = 0
    for n in range(1, 7):
        d = float(1 << n)
        for k in range(0, n + 1):
            sigma = make_state("s_nk", n=n, k=k)
            eng = FidelityEngine(sigma)
            m2 = sre2_snk(k)
            for p in (0.001, 0.01, 0.1):
                closed = v_star_clifford_depolarizing(d, p, m2)
                eps = p * (1.0 - 1.0 / d)
                rep = eng.clifford_report((1.0 - p) * eng.obs.val, 1.0 - eps)
                worst = max(worst,
                            abs(closed.v - rep.v),
                            abs(closed.v_star_rho - rep.v_star_rho),
                            abs(closed.v_star_delta - rep.v_star_delta))
                cases += 1
    _criterion("depolarizing-closed-form", worst < 1e-9,
               f"max |closed form - pair sum| = {worst:.2e} over {cases} cases "
               f"(n <= 6, k <= n, p in {{0.001, 0.01, 0.1}}, tol 1e-9)")


# ---------------------------------------------------------------------------
# 6. sample-cost scaling exponents vs infidelity (7-qubit magic target)
# ---------------------------------------------------------------------------

def test_cost_scaling_classification():
    base = dict(seed=SEED, r_policy=RPolicy.parse("ceil(10/eps^2)"))
    spec2 = ExperimentSpec(figure="fig2", params={
        "n": 7, "k": [7], "noise": ["local_rotation", "pauli"],
        "modes": ["thrifty", "crm"], "draws": 50,
        "eps_grid": {"min": 1e-3, "max": 1e-1, "points": 10},
    }, **base)
    rows2 = run_experiment(spec2)
    spec_rot = ExperimentSpec(figure="figS4", params={
        "n": 7, "k": [7], "modes": ["crm"],
        "eps_grid": {"min": 1e-3, "max": 1e-1, "points": 10},
    }, **base)
    rows_rot = run_experiment(spec_rot)

    fits = {}
    for noise in ("local_rotation", "pauli"):
        fits[("thrifty", noise)] = _fit_rows(
            [r for r in rows2 if r.mode == "thrifty" and r.noise_kind == noise])
    fits[("crm", "pauli")] = _fit_rows(
        [r for r in rows2 if r.mode == "crm" and r.noise_kind == "pauli"])
    fits[("crm", "collective_rotation")] = _fit_rows(rows_rot)

    ok = (all(-2.2 <= fits[("thrifty", nk)] <= -1.8
              for nk in ("local_rotation", "pauli"))
          and -0.3 <= fits[("crm", "pauli")] <= 0.3
          and -1.3 <= fits[("crm", "collective_rotation")] <= -0.7)
    detail = ", ".join(f"{m}/{nk}: {v:+.2f}" for (m, nk), v in sorted(fits.items()))
    _criterion("cost-scaling-classification", ok,
               f"log-log exponents {detail} (gates: thrifty [-2.2,-1.8], "
               "crm/pauli [-0.3,0.3], crm/coherent [-1.3,-0.7])")


# ---------------------------------------------------------------------------
# 7. ensemble comparison trend in qubit count
# ---------------------------------------------------------------------------

def test_ensemble_trend_in_qubit_count():
    spec = ExperimentSpec(figure="fig3", seed=SEED,
                          r_policy=RPolicy.parse("fixed:2.0e10"),
                          params={"eps": 1e-3,
                                  "n_grid": list(range(2, 41, 2)),
                                  "pauli_n_max": 10,
                                  "ensembles": ["clifford", "pauli", "4design"]})
    rows = run_experiment(spec)
    series = {}
    for row in rows:
        if row.N_U is not None:
            series.setdefault(row.ensemble, []).append((row.n, row.N_U))
    checks = []
    for ens in ("clifford", "4design"):
        nus = [nu for _, nu in sorted(series[ens])]
        checks.append(all(b <= a for a, b in zip(nus, nus[1:])) and nus[-1] == 1)
    pauli = dict(series["pauli"])
    checks.append(pauli[4] < pauli[6] < pauli[8])
    ok = all(checks)
    _criterion("ensemble-trend-in-qubit-count", ok,
               "clifford/4design N_U non-increasing to 1 at n=40: "
               f"{checks[0]}/{checks[1]}; pauli increasing on n=4,6,8: {checks[2]} "
               f"(pauli N_U {pauli[4]} -> {pauli[6]} -> {pauli[8]})")


# ---------------------------------------------------------------------------
# 8. structured random targets: clifford flat, 4-design ~ 1/eps
# ---------------------------------------------------------------------------

def test_structured_targets_ensemble_exponents():
    spec = ExperimentSpec(figure="figA3", seed=SEED,
                          r_policy=RPolicy.parse("ceil(d/eps^2)"),
                          params={"n": 7, "draws": 20,
                                  "ensembles": ["clifford", "4design"]})
    rows = run_experiment(spec)
    fits = {}
    for ens in ("clifford", "4design"):
        pts = [(r.eps, r.N_U) for r in rows if r.ensemble == ens]
        fits[ens] = scaling_fit(pts)[0]
    ok = -0.3 <= fits["clifford"] <= 0.3 and -1.3 <= fits["4design"] <= -0.7
    _criterion("structured-targets-ensemble-exponents", ok,
               f"clifford exponent {fits['clifford']:+.2f} (gate [-0.3,0.3]), "
               f"4design exponent {fits['4design']:+.2f} (gate [-1.3,-0.7]) "
               "over 20 draws at n=7")


# ---------------------------------------------------------------------------
# 9. cost is linear in the stabilizer-entropy monotone 2^{-M2}
# ---------------------------------------------------------------------------

def test_cost_linear_in_stabilizer_entropy_monotone():
    spec = ExperimentSpec(figure="figS5", seed=SEED,
                          r_policy=RPolicy.parse("ceil(10/eps^2)"),
                          params={"n": 7, "eps": 0.01, "draws": 10,
                                  "sweeps": [{"k": list(range(8)),
                                              "theta": [math.pi / 4.0]}]})
    rows = run_experiment(spec)
    by_k = {}
    for row in rows:
        by_k.setdefault(row.k, ([], row.M2))[0].append(row.N_U)
    xs = [2.0 ** (-m2) for _, (_, m2) in sorted(by_k.items())]
    ys = [float(np.mean(nus)) for _, (nus, _) in sorted(by_k.items())]
    fit = linregress(xs, ys)
    r2 = fit.rvalue**2
    _criterion("cost-linear-in-stabilizer-entropy-monotone", r2 > 0.99,
               f"R^2 = {r2:.4f} for N_U vs 2^(-M2) at n=7, theta=pi/4, "
               f"k=0..7 (slope {fit.slope:.1f}, intercept {fit.intercept:.1f}, "
               "gate R^2 > 0.99)")


# ---------------------------------------------------------------------------
# 10. inequality property suites (>= 1000 randomized instances each)
# ---------------------------------------------------------------------------

def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _mixed_fidelity(rho: np.ndarray, sig: np.ndarray) -> float:
    # F = || sqrt(rho) sqrt(sigma) ||_1^2; the singular-value form avoids the
    # square root of eigenvalue noise near zero that the sqrtm form incurs
    s = np.linalg.svd(_sqrt_psd(rho) @ _sqrt_psd(sig), compute_uv=False)
    return float(np.sum(s) ** 2)


def test_property_suites():
    rng = np.random.default_rng(SEED + 10)
    tol = 1e-9
    failures = []

    # pure-prior norm chain + purity bounds (1000 instances, n <= 3)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        d = 1 << n
        psi = rand_pure(d, rng)
        sig = np.outer(psi, np.conj(psi))
        rho = rand_density(d, rng, rank=int(rng.integers(1, d + 1)))
        delta = rho - sig
        eps = 1.0 - float(np.real(np.vdot(psi, rho @ psi)))
        d2 = float(np.real(np.vdot(delta, delta)))
        d1 = trace_norm(delta)
        purity = float(np.real(np.vdot(rho, rho)))
        checks = [
            2.0 * d2 <= d1**2 + tol,
            d1**2 <= 4.0 * (d - 1.0) / d * d2 + tol,
            d / (d - 1.0) * eps**2 <= d2 + tol,
            d2 <= 2.0 * eps + tol,
            4.0 * eps**2 <= d1**2 + tol,
            d1**2 <= 4.0 * eps + tol,
            (1.0 - eps) ** 2 + eps**2 / (d - 1.0) <= purity + tol,
            purity <= 1.0 + tol,
        ]
        if not all(checks):
            failures.append(("pure-prior chain", checks))

    # general-prior chain: 2||Delta||_2^2 <= ||Delta||_1^2 <= 4 eps (1000)
    for _ in range(1000):
        n = int(rng.integers(1, 3))
        d = 1 << n
        rho = rand_density(d, rng, rank=int(rng.integers(1, d + 1)))
        sig = rand_density(d, rng, rank=int(rng.integers(1, d + 1)))
        delta = rho - sig
        d2 = float(np.real(np.vdot(delta, delta)))
        d1 = trace_norm(delta)
        eps = 1.0 - _mixed_fidelity(rho, sig)
        if not (2.0 * d2 <= d1**2 + tol and d1**2 <= 4.0 * eps + tol):
            failures.append(("general-prior chain", (d2, d1, eps)))

    # second-moment inequality Tr(Q^2) + Tr(rho Q)^2 >= 2 Tr(rho Q^2) (1000)
    for _ in range(1000):
        d = 1 << int(rng.integers(1, 4))
        q = rand_traceless_hermitian(d, rng)
        rho = rand_density(d, rng)
        lhs = float(np.real(np.trace(q @ q))) \
            + float(np.real(np.trace(rho @ q))) ** 2
        rhs = 2.0 * float(np.real(np.trace(rho @ q @ q)))
        if lhs < rhs - tol:
            failures.append(("second-moment inequality", (lhs, rhs)))

    # fourth-moment pair bound K(P_i, P_j) <= d eta_i eta_j / 2 (all pairs,
    # 10 random pure states at n in {2, 3} -> >> 1000 pairs)
    pair_count = 0
    for _ in range(10):
        n = int(rng.integers(2, 4))
        d = 1 << n
        state = QuantumState.pure(rand_pure(d, rng))
        tab = k_sigma_tables(state.char_function())
        idx = np.arange(1, 4**n)
        eta = tab.eta(idx)
        k2 = tab.k2(idx[:, None].repeat(len(idx), 1).ravel(),
                    np.tile(idx, len(idx)))
        bound = (d / 2.0) * np.outer(eta, eta).ravel()
        pair_count += len(k2)
        if np.any(k2 > bound + tol):
            failures.append(("fourth-moment pair bound", float(np.max(k2 - bound))))

    # Pauli-channel cross-norm bound ||Xi_{Delta,sigma}||_2^2 <= 2 d eps^2 (1000)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        d = 1 << n
        sigma = QuantumState.pure(rand_pure(d, rng))
        char = sigma.char_function()
        model = channels.sample_random_pauli_channel(
            n, float(rng.uniform(0.01, 0.5)), rng)
        rho_char = channels.pauli_channel_char(model, char)
        eps = channels.pauli_channel_infidelity(model, char)
        diff = rho_char.value_at(char.idx) - char.val
        xi2 = float(np.sum((diff * char.val) ** 2))
        if xi2 > 2.0 * d * eps**2 + tol:
            failures.append(("pauli-channel cross-norm bound", (xi2, eps)))

    # Haar-average identities for a fixed Pauli channel (statistical, 4 sigma)
    n, d, count = 2, 4, 2000
    model = channels.sample_random_pauli_channel(n, 0.2, np.random.default_rng(7))
    p1 = float(model.p_vals.sum())
    p2 = float(model.p_vals @ model.p_vals)
    eps_s = np.empty(count)
    d2_s = np.empty(count)
    for i in range(count):
        char = QuantumState.pure(rand_pure(d, rng)).char_function()
        rho_char = channels.pauli_channel_char(model, char)
        eps_s[i] = channels.pauli_channel_infidelity(model, char)
        d2_s[i] = float(np.sum((rho_char.val - char.val) ** 2)) / d
    for name, samples, target in (
            ("mean infidelity", eps_s, d / (d + 1.0) * p1),
            ("mean ||Delta||_2^2", d2_s, d / (d + 1.0) * (p1**2 + p2))):
        z = abs(samples.mean() - target) / (samples.std(ddof=1) / math.sqrt(count))
        if z > 4.0:
            failures.append((f"haar-average {name}", z))

    _criterion("inequality-property-suites", not failures,
               "0 violations" if not failures else f"violations: {failures[:3]}"
               f"; suites: pure-prior chain (1000), general-prior chain (1000), "
               f"second-moment (1000), pair bound ({pair_count} pairs), "
               "pauli cross-norm (1000), haar averages (2000 samples, 4 sigma)")
