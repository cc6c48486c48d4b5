import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsvfp.config import ExperimentConfig, load_config, parse_config
from nsvfp.errors import ConfigError
from nsvfp.harness import main
from nsvfp.io import RunManifest, Table, emit_plot_data, read_csv, write_csv

SMALL_TORUS = {
    "experiment": "torus-sim",
    "grid": {"dim": 1, "n": 32},
    "basis": {"N": 4},
    "run": {"T_final": 0.4, "dt": 0.05, "observe_every": 0.1},
}


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def run(tmp_path, data, command=None, out="out", extra=()):
    cfg = write_config(tmp_path, data)
    code = main([command or data["experiment"], "--config", cfg, "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


# ---- validation ------------------------------------------------------------------------


def test_validate_prints_resolved_config(tmp_path, capsys):
    assert main(["validate", "--config", write_config(tmp_path, {"experiment": "diagnostics"})]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["run"]["n_fields"] == 100
    assert out["grid"] == {"L": 1.0, "dim": 1, "n": 64}


@pytest.mark.parametrize("data", [
    {"experiment": "torus-sim", "bogus": 1},
    {"experiment": "torus-sim", "run": {"T_final": 1.0, "steps": 3}},
    {"experiment": "torus-sim", "grid": {"n": "64"}},
    {"experiment": "torus-sim", "grid": {"n": 63}},
    {"experiment": "torus-sim", "params": {"mu1": -1.0}},
    {"experiment": "torus-sim", "weights": {"tau": [0.5] * 8}},
    {"experiment": "torus-sim", "run": {"scheme": "rk4"}},
    {"experiment": "torus-sim", "seed": -1},
    {"experiment": "linear-decay", "fit": {"t_min": 0.0}},
    {"experiment": "heat-death"},
])
def test_invalid_configs_exit_one(tmp_path, data):
    assert main(["validate", "--config", write_config(tmp_path, data)]) == 1


def test_unreadable_config_exits_one(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 1
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["validate", "--config", str(p)]) == 1


def test_empty_k_list_is_validation_error_without_outputs(tmp_path):
    code, out = run(tmp_path, {"experiment": "mode-decay", "run": {"k_values": []}})
    assert code == 1
    assert not out.exists()


def test_subcommand_must_match_experiment(tmp_path):
    code, out = run(tmp_path, SMALL_TORUS, command="picard-check")
    assert code == 1 and not out.exists()


def test_bad_arguments_exit_one(tmp_path):
    assert main(["torus-sim"]) == 1
    assert main(["no-such-command", "--config", "x"]) == 1
    cfg = write_config(tmp_path, SMALL_TORUS)
    assert main(["torus-sim", "--config", cfg, "--threads", "0"]) == 1


# ---- runs ------------------------------------------------------------------------------


def test_torus_zero_final_time_gives_one_row(tmp_path):
    data = dict(SMALL_TORUS, run={"T_final": 0.0})
    code, out = run(tmp_path, data)
    assert code == 0
    tab = read_csv(out / "torus.csv")
    assert tab.columns == ("t", "E", "D", "H", "M", "cons_mass_f", "cons_mass_rho", "cons_momentum",
                           "cons_energy", "positivity_min")
    assert tab.data.shape == (1, 10)
    assert np.abs(tab.data[0, 5:9]).max() < 1e-14
    man = RunManifest.read(out / "manifest.json")
    assert man.status == "passed" and man.missing_files(out) == []


def test_small_torus_run_and_report(tmp_path, capsys):
    code, out = run(tmp_path, SMALL_TORUS, extra=("--threads", "1"))
    man = RunManifest.read(out / "manifest.json")
    assert code == man.exit_code
    assert set(man.checks) >= {"conservation", "positivity", "energy_monotone", "lyapunov"}
    assert man.missing_files(out) == []
    assert read_csv(out / "torus.csv").data.shape == (5, 10)
    cfg = write_config(tmp_path, SMALL_TORUS)
    assert main(["report", "--config", cfg, "--out", str(out)]) == code
    rep = json.loads((out / "report.json").read_text())
    assert rep["checks"] == man.checks
    assert rep["metrics"] == man.metrics


def test_report_without_outputs_is_runtime_error(tmp_path):
    cfg = write_config(tmp_path, SMALL_TORUS)
    assert main(["report", "--config", cfg, "--out", str(tmp_path / "nothing")]) == 2


def test_runtime_failure_recorded_in_manifest(tmp_path):
    # dt far beyond the transport CFL limit
    data = dict(SMALL_TORUS, run={"T_final": 1.0, "dt": 0.5})
    code, out = run(tmp_path, data)
    assert code == 2
    man = RunManifest.read(out / "manifest.json")
    assert man.status == "runtime_error"
    assert "CFL" in man.error
    assert man.files == []


def test_runs_are_byte_identical(tmp_path):
    a = run(tmp_path, SMALL_TORUS, out="a")[1]
    b = run(tmp_path, SMALL_TORUS, out="b")[1]
    assert (a / "torus.csv").read_bytes() == (b / "torus.csv").read_bytes()
    d = {"experiment": "diagnostics", "grid": {"dim": 2, "n": 16}, "run": {"n_fields": 5}}
    assert run(tmp_path, d, out="c")[0] == 0
    assert run(tmp_path, d, out="d")[0] == 0
    assert (tmp_path / "c" / "diagnostics.csv").read_bytes() == (tmp_path / "d" / "diagnostics.csv").read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    d = {"experiment": "diagnostics", "grid": {"dim": 1, "n": 32}, "run": {"n_fields": 3}}
    run(tmp_path, d, out="a")
    run(tmp_path, d, out="b", extra=("--seed", "17"))
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() != (tmp_path / "b" / "diagnostics.csv").read_bytes()
    assert RunManifest.read(tmp_path / "b" / "manifest.json").config["seed"] == 17


def test_small_mode_decay_run(tmp_path):
    d = {"experiment": "mode-decay", "basis": {"N": 4},
         "run": {"k_values": [0.5, 2.0], "n_directions": 2, "max_degree": 4}}
    code, out = run(tmp_path, d)
    assert code == 0
    assert read_csv(out / "mode_decay.csv").data.shape == (4, 8)


def test_linear_decay_envelope_recomputable_from_manifest(tmp_path):
    d = {"experiment": "linear-decay", "basis": {"N": 3}, "quadrature": {"n_radial": 16},
         "run": {"n_times": 8}}
    code, out = run(tmp_path, d)
    assert code in (0, 3)
    man = RunManifest.read(out / "manifest.json")
    for m in range(3):
        fit = man.fits[f"norm_m{m}"]
        plot = read_csv(out / f"plot_norm_m{m}.csv")
        assert plot.columns == ("t", "value", "fitted_envelope")
        t = plot.column("t")
        env = np.exp(fit["intercept"]) * (1 + t) ** fit["exponent"]
        assert np.allclose(plot.column("fitted_envelope"), env, rtol=1e-13)
        assert np.array_equal(plot.column("value"), read_csv(out / "decay_table.csv").column(f"norm_m{m}"))


# ---- config round trip ------------------------------------------------------------------


def test_config_round_trip_defaults():
    for exp in ("mode-decay", "linear-decay", "torus-sim", "picard-check", "diagnostics"):
        cfg = parse_config({"experiment": exp})
        assert parse_config(json.loads(cfg.to_json())) == cfg


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 64 - 1), n=st.sampled_from([16, 32, 64]), dim=st.integers(1, 3),
       tau=st.lists(st.floats(0, 0.1), min_size=8, max_size=8), T=st.floats(0, 50), dt=st.floats(1e-3, 0.05),
       t_min=st.floats(0, 5))
def test_config_round_trip_random(seed, n, dim, tau, T, dt, t_min):
    data = {"experiment": "torus-sim", "seed": seed, "grid": {"dim": dim, "n": n}, "weights": {"tau": tau},
            "run": {"T_final": T, "dt": dt}, "fit": {"t_min": t_min, "t_max": t_min + 10}}
    cfg = parse_config(data)
    again = parse_config(json.loads(cfg.to_json()))
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def test_load_config_from_file(tmp_path):
    cfg = load_config(write_config(tmp_path, SMALL_TORUS))
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.run.T_final == 0.4 and cfg.grid.n == 32 and cfg.fit_window() == (2.0, 20.0)
    with pytest.raises(ConfigError):
        parse_config([1, 2])


# ---- files ------------------------------------------------------------------------------


def test_csv_round_trip_is_exact(tmp_path):
    data = np.random.default_rng(0).standard_normal((7, 3)) * 10.0 ** np.arange(-5, 16, 7)
    tab = Table(("t", "x", "y"), data, {"t": "time"})
    write_csv(tmp_path / "a.csv", tab, title="demo")
    back = read_csv(tmp_path / "a.csv")
    assert back.columns == tab.columns
    assert np.array_equal(back.data, data)
    assert back.descriptions == {"t": "time"}


def test_csv_refuses_nan_without_partial_file(tmp_path):
    tab = Table(("t", "x"), [[0.0, 1.0], [1.0, np.nan]])
    with pytest.raises(ValueError):
        write_csv(tmp_path / "bad.csv", tab)
    assert list(tmp_path.iterdir()) == []


class _OneRow:
    times = [0.0]
    series = {"E": [2.5]}

    def array(self, name):
        return np.asarray(self.series[name])

    def envelope(self, name):
        return None


def test_plot_data_single_row_and_idempotent(tmp_path):
    p = emit_plot_data(_OneRow(), tmp_path / "plot.csv")
    first = p.read_bytes()
    lines = [ln for ln in first.decode().splitlines() if not ln.startswith("#")]
    assert lines == ["t,value", "0,2.5"]
    emit_plot_data(_OneRow(), tmp_path / "plot.csv")
    assert p.read_bytes() == first


def test_plot_data_refuses_nan_and_empty(tmp_path):
    r = _OneRow()
    r.series = {"E": [float("nan")]}
    with pytest.raises(ValueError):
        emit_plot_data(r, tmp_path / "nan.csv")
    assert not (tmp_path / "nan.csv").exists()
    r.times = []
    with pytest.raises(ValueError):
        emit_plot_data(r, tmp_path / "empty.csv")
