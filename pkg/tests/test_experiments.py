"""Experiment pipelines: config validation, circuit-reuse policies, CSV
persistence, determinism, and the CLI surface."""
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from crmshadow import cli
from crmshadow._errors import ConfigError
from crmshadow.experiments import (
    COLUMNS,
    FIGURES,
    ResultRow,
    RPolicy,
    _grid,
    list_figures,
    load_config,
    mode_v_r,
    run_experiment,
    validate_config,
    write_results,
)
from crmshadow.states import make_state
from crmshadow.variance import (
    VarianceReport,
    v_standard_3design_fidelity,
    v_star_clifford,
)
from crmshadow.paulis import CharFunction
from crmshadow.experiments import FidelityEngine

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


# ---------------------------------------------------------------------------
# R policies
# ---------------------------------------------------------------------------

def test_r_policy_parse_and_resolve():
    p = RPolicy.parse("fixed:100")
    assert p.resolve(None, None) == 100
    assert p.describe() == "fixed:100"
    assert RPolicy.parse(250).resolve(None, None) == 250
    assert RPolicy.parse("2.0e10").resolve(None, None) == 2 * 10**10

    p = RPolicy.parse("ceil(10/eps^2)")
    assert p.resolve(0.01, 4) == 100000
    assert p.describe() == "ceil(10/eps^2)"

    p = RPolicy.parse("ceil(d/eps^2)")
    assert p.resolve(0.1, 128) == 12800
    assert p.describe() == "ceil(d/eps^2)"
    with pytest.raises(ValueError):
        p.resolve(None, 128)
    with pytest.raises(ConfigError):
        RPolicy.parse("ceil(banana)")


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def _minimal_figS3():
    return {
        "figure": "figS3",
        "seed": 1,
        "R_policy": "fixed:10",
        "params": {
            "n": 2, "k": [1], "modes": ["crm"],
            "eps_grid": [0.01, 0.02, 0.05],
        },
    }


def test_validate_minimal_config():
    spec = validate_config(_minimal_figS3())
    assert spec.figure == "figS3"
    assert spec.r == 0.25 and spec.delta == 0.01


def test_validate_collects_all_errors():
    bad = {
        "figure": "nope",
        "seed": "abc",
        "params": {"modes": ["bogus"], "ensembles": ["also_bogus"], "draws": -3},
    }
    with pytest.raises(ConfigError) as exc:
        validate_config(bad)
    text = "\n".join(exc.value.errors)
    assert "unknown figure" in text
    assert "seed" in text
    assert "unknown mode" in text
    assert "unknown ensemble" in text
    assert "draws" in text
    assert len(exc.value.errors) >= 5


def test_validate_missing_r_policy_and_params():
    cfg = _minimal_figS3()
    del cfg["R_policy"]
    del cfg["params"]["eps_grid"]
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg)
    text = "\n".join(exc.value.errors)
    assert "requires an R_policy" in text
    assert "missing params.eps_grid" in text


def test_validate_preset_merge():
    cfg = _minimal_figS3()
    cfg["presets"] = {"small": {"params": {"k": [0]}, "seed": 7}}
    spec = validate_config(cfg, preset="small")
    assert spec.params["k"] == [0]
    assert spec.seed == 7
    # untouched keys survive the merge
    assert spec.params["modes"] == ["crm"]
    with pytest.raises(ConfigError):
        validate_config(cfg, preset="missing")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.yaml")))
@pytest.mark.parametrize("preset", [None, "desk", "paper"])
def test_shipped_configs_validate(name, preset):
    spec = validate_config(load_config(CONFIG_DIR / name), preset=preset)
    assert spec.figure in set(FIGURES) | {"mcval"}


def test_grid_variants():
    assert np.allclose(_grid([1.0, 2.0, 4.0]), [1.0, 2.0, 4.0])
    g = _grid({"min": 1e-3, "max": 1e-1, "points": 3})
    assert np.allclose(g, [1e-3, 1e-2, 1e-1])
    lin = _grid({"min": 0.0, "max": 1.0, "points": 5, "log": False})
    assert np.allclose(lin, np.linspace(0, 1, 5))


# ---------------------------------------------------------------------------
# rows and persistence
# ---------------------------------------------------------------------------

def test_result_row_csv_values():
    row = ResultRow(figure="figS3", n=2, eps=0.015625, method="exact_sum")
    vals = row.csv_values()
    assert len(vals) == len(COLUMNS)
    as_map = dict(zip(COLUMNS, vals))
    assert as_map["figure"] == "figS3"
    assert as_map["n"] == "2"
    assert as_map["eps"] == repr(0.015625)
    assert as_map["ensemble"] == ""   # None -> empty cell
    assert as_map["schema_version"] == "1"


def test_write_results_and_determinism(tmp_path):
    spec = validate_config(_minimal_figS3())
    rows_a = run_experiment(spec)
    rows_b = run_experiment(spec)
    csv_a, json_a = write_results(rows_a, tmp_path / "a", spec, total_walltime=1.0)
    csv_b, _ = write_results(rows_b, tmp_path / "b", spec, total_walltime=2.0)

    with open(csv_a) as fh:
        recs_a = list(csv.reader(fh))
    with open(csv_b) as fh:
        recs_b = list(csv.reader(fh))
    assert recs_a[0] == list(COLUMNS)
    wt_col = COLUMNS.index("walltime_s")
    stripped_a = [r[:wt_col] + r[wt_col + 1:] for r in recs_a]
    stripped_b = [r[:wt_col] + r[wt_col + 1:] for r in recs_b]
    assert stripped_a == stripped_b
    assert len(recs_a) == 1 + len(rows_a)

    sidecar = json.loads(json_a.read_text())
    assert sidecar["columns"] == list(COLUMNS)
    assert sidecar["rows"] == len(rows_a)
    assert sidecar["spec"]["figure"] == "figS3"
    assert sidecar["spec"]["R_policy"] == "fixed:10"


def test_mode_v_r():
    rep = VarianceReport("clifford", 2.0, 0.5, 0.1)
    assert mode_v_r(rep, "standard", 100) == (2.0, 1)
    v, r = mode_v_r(rep, "thrifty", 10)
    assert v == pytest.approx(0.5 + (2.0 - 0.5) / 10) and r == 10
    v, r = mode_v_r(rep, "crm", 10)
    assert v == pytest.approx(0.1 + (2.0 - 0.5) / 10) and r == 10
    with pytest.raises(ValueError):
        mode_v_r(rep, "bogus", 1)


def test_fidelity_engine_clifford_report(rng):
    sigma = make_state("s_nk", n=3, k=2)
    eng = FidelityEngine(sigma)
    # a depolarized preparation in characteristic-function space
    p = 0.07
    rho_vals = (1.0 - p) * eng.obs.val
    eps = p * (1.0 - 1.0 / eng.d)
    rep = eng.clifford_report(rho_vals, 1.0 - eps)
    assert rep.v == pytest.approx(v_standard_3design_fidelity(eng.d, 1.0 - eps))
    o = eng.obs.val
    xi_rho = CharFunction(3, eng.obs.idx, o * rho_vals)
    xi_delta = CharFunction(3, eng.obs.idx, o * (rho_vals - o))
    assert rep.v_star_rho == pytest.approx(v_star_clifford(xi_rho), abs=1e-12)
    assert rep.v_star_delta == pytest.approx(v_star_clifford(xi_delta), abs=1e-12)
    assert rep.method == "exact_sum"


def test_list_figures_manifest():
    figs = list_figures()
    assert len(figs) == 15
    names = [f for f, _ in figs]
    assert names == sorted(names)
    assert all(info for _, info in figs)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_validate_ok(capsys):
    rc = cli.main(["validate", "--config", str(CONFIG_DIR / "figS3.yaml"),
                   "--preset", "desk"])
    assert rc == 0
    assert "OK" in capsys.readouterr().out


def test_cli_missing_config_is_config_error(capsys):
    rc = cli.main(["validate", "--config", "/nonexistent/nope.yaml"])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_cli_broken_config_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("figure: nope\nseed: 1\n")
    rc = cli.main(["validate", "--config", str(bad)])
    assert rc == 2
    assert "unknown figure" in capsys.readouterr().err


def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "figure: figS3\nseed: 3\nR_policy: fixed:10\n"
        "params:\n  n: 2\n  k: [1]\n  modes: [crm]\n"
        "  eps_grid: [0.01, 0.1]\n")
    rc = cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 0
    assert (tmp_path / "out" / "figS3.csv").exists()
    assert (tmp_path / "out" / "figS3.json").exists()


def test_cli_mc_validate_budget_exceeded(tmp_path, capsys):
    cfg = tmp_path / "mc.yaml"
    cfg.write_text(
        "figure: mcval\nseed: 3\n"
        "params:\n  n: 4\n  circuits: 10\n  ensembles: [clifford]\n"
        "  modes: [standard]\n")
    rc = cli.main(["mc-validate", "--config", str(cfg)])
    assert rc == 3
    assert "budget exceeded" in capsys.readouterr().err


def test_cli_list_figures(capsys):
    rc = cli.main(["list-figures"])
    assert rc == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 15
    assert out[0].startswith("fig2")
