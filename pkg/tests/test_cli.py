import csv
import json
from pathlib import Path

import numpy as np
import pytest

from mmiq import asymptotics as A
from mmiq import model1 as m1
from mmiq import model2 as m2
from mmiq.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, fmt, main
from mmiq.config import load_config, parse_config
from mmiq.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "queue": {"Q": [[-5.0, 5.0], [5.0, -5.0]], "lambda": [20.0, 10.0], "mu": [1.0, 2.0]},
    "model": "I",
    "scaling": {"N": 1.0, "alpha": 1.0},
    "times": {"grid": [0.5, 2.0]},
    "lag": 0.5,
    "sim": {"replications": 1000, "seed": 5, "engine": "auto"},
}


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = json.loads(json.dumps(BASE))
    for key, value in overrides.items():
        cfg[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(x) for x in row] for row in rows[1:]]


def run(args, tmp_path):
    return main(list(args) + ["--out", str(tmp_path / "out")])


# ---------------------------------------------------------------- formatting


def test_floats_use_seventeen_significant_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "1" and fmt(False) == "0"
    for x in (1 / 3, 1e-300, 123456.789, -2.5e17):
        assert float(fmt(x)) == x


# ------------------------------------------------------------------ analyze


def test_analyze_single_state(tmp_path, capsys):
    assert main(["analyze", "--config", str(CONFIGS / "mm_infinity.json"),
                 "--out", str(tmp_path)]) == EXIT_OK
    header, rows = read_csv(tmp_path / "cov.csv")
    assert header == ["t", "u", "cov"]
    row = next(r for r in rows if r[0] == 1.0 and r[1] == 0.0)
    assert row[2] == pytest.approx(1.5 * (1 - np.exp(-2.0)), rel=1e-8)
    _, means = read_csv(tmp_path / "mean.csv")
    for t, mean in means:
        assert mean == pytest.approx(1.5 * (1 - np.exp(-2.0 * t)), rel=1e-8)
    printed = capsys.readouterr().out.split()
    assert printed == [str(tmp_path / f) for f in ("mean.csv", "cov.csv", "limits.csv")]


@pytest.mark.parametrize("model", ["I", "II"])
def test_analyze_round_trips_library_values(tmp_path, model):
    path = write_config(tmp_path, model=model)
    assert run(["analyze", "--config", str(path)], tmp_path) == EXIT_OK
    out = tmp_path / "out"
    cfg = load_config(path)
    spec = cfg.queue_spec()
    grid = np.array([0.5, 2.0])
    header, means = read_csv(out / "mean.csv")
    assert header == ["t", "mean"]
    if model == "I":
        ref = m1.mean_trajectory(spec, cfg.scaling_params(), grid, method="auto").sum(axis=1)
    else:
        ref = m2.mean_m2(spec, grid)
    assert [r[1] for r in means] == list(ref)
    _, covs = read_csv(out / "cov.csv")
    for t, u, c in covs:
        if model == "I":
            expected = m1.covariance(spec, grid, u, method="auto")[list(grid).index(t)]
        else:
            expected = m2.covariance_m2(spec, t, u)
        assert c == expected
    header, limits = read_csv(out / "limits.csv")
    assert header == ["t", "u", "alpha", "v"]
    for t, u, alpha, v in limits:
        assert v == A.limit_cov(spec, model, alpha, t, u)


def test_section7_frozen_covariance(tmp_path):
    assert main(["analyze", "--config", str(CONFIGS / "two_state_model1.json"),
                 "--out", str(tmp_path)]) == EXIT_OK
    _, covs = read_csv(tmp_path / "cov.csv")
    row = next(r for r in covs if r[0] == 2.0 and r[1] == 0.5)
    assert row[2] == pytest.approx(7.74926891, rel=1e-8)


# ------------------------------------------------------------ config errors


def test_missing_mu_is_a_config_error(tmp_path, capsys):
    path = write_config(tmp_path, queue={"Q": BASE["queue"]["Q"], "lambda": [1.0, 2.0]})
    assert run(["analyze", "--config", str(path)], tmp_path) == EXIT_CONFIG
    assert "mu" in capsys.readouterr().err


def test_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "queue": {\n    "Q": [[-1, 1], [1, -1]],\n  }\n}\n')
    assert run(["analyze", "--config", str(path)], tmp_path) == EXIT_CONFIG
    assert "line 4" in capsys.readouterr().err


@pytest.mark.parametrize("overrides, needle", [
    (dict(model="III"), "model"),
    (dict(extra_key=1), "extra_key"),
    (dict(queue={"Q": [[-1.0, 1.0], [0.0, 0.0]], "lambda": [1.0, 1.0], "mu": [1.0, 1.0]}),
     "queue.Q"),
    (dict(queue={"Q": BASE["queue"]["Q"], "lambda": [1.0, 1.0], "mu": [1.0, 0.0]}), "mu"),
    (dict(sim={"replications": 10, "seed": -1}), "sim.seed"),
])
def test_invalid_configs(tmp_path, capsys, overrides, needle):
    path = write_config(tmp_path, **overrides)
    assert run(["analyze", "--config", str(path)], tmp_path) == EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_missing_file_and_bad_threads(tmp_path, capsys):
    assert run(["analyze", "--config", str(tmp_path / "nope.json")], tmp_path) == EXIT_CONFIG
    path = write_config(tmp_path)
    assert run(["simulate", "--config", str(path), "--threads", "0"], tmp_path) == EXIT_CONFIG
    assert "threads" in capsys.readouterr().err


def test_parse_config_defaults():
    cfg = parse_config(json.dumps({"queue": BASE["queue"], "times": {"t_star": 40.0}}))
    assert cfg.model == "I" and cfg.scaling.N == 1.0 and cfg.sim.replications == 1000
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("{")


# ----------------------------------------------------------------- simulate


def test_simulate_is_byte_reproducible(tmp_path):
    path = write_config(tmp_path)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["simulate", "--config", str(path), "--out", str(out)]) == EXIT_OK
        outs.append(out)
    for name in ("sim_moments.csv", "fclt_report.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    header, rows = read_csv(outs[0] / "sim_moments.csv")
    assert header == ["t", "est_mean", "se_mean", "est_var", "se_var", "est_cov", "se_cov"]
    assert [r[0] for r in rows] == [0.5, 2.0]
    # thread count does not change the output
    out = tmp_path / "threads"
    assert main(["simulate", "--config", str(path), "--out", str(out), "--threads", "2"]) == 0
    assert (out / "sim_moments.csv").read_bytes() == (outs[0] / "sim_moments.csv").read_bytes()


def test_simulate_rejects_too_few_replications(tmp_path, capsys):
    path = write_config(tmp_path, sim={"replications": 999, "seed": 1})
    assert run(["simulate", "--config", str(path)], tmp_path) == EXIT_NUMERICAL
    assert "InsufficientReplications" in capsys.readouterr().err


def test_numerical_failure_names_operation(tmp_path, capsys):
    path = write_config(tmp_path, scaling={"N": 1e16, "alpha": 1.0},
                        sim={"replications": 1000, "seed": 1, "engine": "poisson"})
    assert run(["simulate", "--config", str(path)], tmp_path) == EXIT_NUMERICAL
    assert "SimulationOverflow" in capsys.readouterr().err


# ------------------------------------------------------------------ figures


@pytest.mark.parametrize("model", ["I", "II"])
def test_fig2_round_trips_and_decreases(tmp_path, model):
    path = write_config(tmp_path, model=model, times={"t_star": 40.0},
                        figure={"fig2": {"u_max": 3.0, "num_u": 13}})
    assert run(["figure", "fig2", "--config", str(path)], tmp_path) == EXIT_OK
    out = tmp_path / "out"
    header, rows = read_csv(out / "fig2.csv")
    assert header == ["u", "cov_mu_21", "cov_mu_12"]
    cfg = load_config(path)
    specs = [cfg.queue_spec(mu=m) for m in ([2.0, 1.0], [1.0, 2.0])]
    for u, a, b in rows:
        for spec, val in zip(specs, (a, b)):
            if model == "I":
                assert val == m1.stationary_covariance(spec, u, method="auto")
            else:
                assert val == m2.stationary_covariance_m2(spec, u)
    cols = np.array(rows)[:, 1:]
    assert np.all(np.diff(cols, axis=0) < 0)
    var = m1.stationary_variance if model == "I" else m2.stationary_variance_m2
    assert rows[0][1] == pytest.approx(var(specs[0]), rel=1e-12)
    assert rows[0][2] == pytest.approx(var(specs[1]), rel=1e-12)
    script = (out / "fig2.gp").read_text()
    assert "fig2.csv" in script and "set output" in script


def test_fig2_needs_two_orderings(tmp_path, capsys):
    path = write_config(tmp_path, times={"t_star": 40.0},
                        figure={"fig2": {"mu_orderings": [[1.0, 2.0]]}})
    assert run(["figure", "fig2", "--config", str(path)], tmp_path) == EXIT_CONFIG
    assert "mu_orderings" in capsys.readouterr().err


def test_fig3_small_sweep(tmp_path):
    path = write_config(tmp_path, times={"t_star": 2.0}, sim={"replications": 200, "seed": 9},
                        figure={"fig3": {"alphas": [0.5, 2.0], "Ns": [1.0, 64.0],
                                         "downscale_to": 16.0, "t_star": 2.0}})
    assert run(["figure", "fig3", "--config", str(path), "--downscale"], tmp_path) == EXIT_OK
    out = tmp_path / "out"
    header, rows = read_csv(out / "fig3.csv")
    assert header == ["alpha", "ratio_N1", "ratio_N2", "limit"]
    spec = load_config(path).queue_spec()
    assert rows[1][3] == A.v1(spec, 2.0, 2.0, 0.0)
    assert rows[1][3] == pytest.approx(A.rho1(spec, 2.0), rel=1e-15)
    meta = json.loads((out / "fig3_meta.json").read_text())
    assert meta["downscaled"] is True
    assert meta["Ns"] == [1.0, 16.0] and meta["requested_Ns"] == [1.0, 64.0]
    assert len(meta["exact_ratio_N2"]) == 2
    assert "N = 16" in (out / "fig3.gp").read_text()
    first = (out / "fig3.csv").read_bytes()
    assert run(["figure", "fig3", "--config", str(path), "--downscale"], tmp_path) == EXIT_OK
    assert (out / "fig3.csv").read_bytes() == first


def test_csv_only_output_skips_scripts(tmp_path):
    path = write_config(tmp_path, times={"t_star": 40.0},
                        outputs={"directory": "unused", "formats": ["csv"]},
                        figure={"fig2": {"num_u": 3}})
    assert run(["figure", "fig2", "--config", str(path)], tmp_path) == EXIT_OK
    assert not (tmp_path / "out" / "fig2.gp").exists()


def test_output_directory_relative_to_config(tmp_path):
    path = write_config(tmp_path, outputs={"directory": "results"})
    assert main(["analyze", "--config", str(path)]) == EXIT_OK
    assert (tmp_path / "results" / "mean.csv").exists()


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.json")):
        cfg = load_config(path)
        cfg.queue_spec()
