import json
import subprocess
import sys

import numpy as np
import pytest

from brotoc import (
    ConfigError,
    ExperimentConfig,
    ResourceLimitError,
    emit_records,
    fit_scaling,
    load_records,
    method_for,
    preset_config,
    run_experiment,
)
from brotoc.cli import main as cli_main
from brotoc.models import ModelSpec


def tiny_config(**overrides):
    data = {
        "models": [{"kind": "zero"}],
        "betas": [0.0, 0.7],
        "sizes": [2, 3],
        "realizations": 1,
        "time_grid": {"t_min": 5.0, "t_max": 50.0, "n_steps": 64},
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


class TestFitScaling:
    def test_exact_power_law(self):
        points = [(L, 2.0**-L) for L in range(4, 11)]
        fit = fit_scaling(points, k_last=5)
        assert fit.gamma == pytest.approx(1.0, abs=1e-12)
        assert fit.log2_alpha == pytest.approx(0.0, abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_prefactor_and_half_rate(self):
        points = [(L, 3.0 * 2.0 ** (-L / 2)) for L in range(4, 11)]
        fit = fit_scaling(points, k_last=5)
        assert fit.gamma == pytest.approx(0.5, abs=1e-12)
        assert fit.log2_alpha == pytest.approx(np.log2(3.0), abs=1e-10)

    def test_nonpositive_rejected(self):
        with pytest.raises(ConfigError):
            fit_scaling([(4, 1.0), (5, 0.0), (6, 1.0), (7, 1.0), (8, 1.0)], k_last=5)

    def test_too_few_points_rejected(self):
        with pytest.raises(ConfigError):
            fit_scaling([(4, 1.0), (5, 0.5)], k_last=5)


class TestMethodDispatch:
    def test_kind_routing(self):
        assert method_for(ModelSpec("tfim_integrable"), 0.0) == "time_grid"
        assert method_for(ModelSpec("tfim_chaotic"), 0.0) == "nrc_closed_form"
        assert method_for(ModelSpec("anderson"), 0.0) == "nrc_closed_form"
        assert method_for(ModelSpec("mbl"), 1.0) == "nrc_closed_form"
        assert method_for(ModelSpec("nrc_ps"), 0.0) == "nrc_ps_closed_form"
        assert method_for(ModelSpec("max_ent"), 0.0) == "me_closed_form"
        assert method_for(ModelSpec("gue"), 0.0) == "nrc_closed_form"
        assert method_for(ModelSpec("gue"), "inf") == "zero_temperature"
        assert method_for(ModelSpec("tfim", {"g": 1.0, "h": 0.0}), 0.0) == "time_grid"
        assert method_for(ModelSpec("tfim", {"g": -1.05, "h": 0.5}), 0.0) == "nrc_closed_form"

    def test_forced_time_grid_agrees_with_closed_form(self):
        base = {
            "models": [{"kind": "gue"}],
            "betas": [0.6],
            "sizes": [4],
            "realizations": 3,
            "time_grid": {"t_min": 10.0, "t_max": 1000.0, "n_steps": 4000},
            "master_seed": 5,
        }
        closed = run_experiment(ExperimentConfig.from_dict(base))
        forced = run_experiment(ExperimentConfig.from_dict({**base, "force_method": "time_grid"}))
        closed_mean = [r for r in closed if r["realization"] == "mean"][0]
        forced_mean = [r for r in forced if r["realization"] == "mean"][0]
        assert forced_mean["method"] == "time_grid"
        assert forced_mean["g_reg"] == pytest.approx(closed_mean["g_reg"], rel=0.01)


class TestRunExperiment:
    def test_zero_model_smoke(self):
        rows = run_experiment(tiny_config())
        assert rows
        for row in rows:
            assert row["n_value"] == pytest.approx(0.0, abs=1e-9)
            assert row["g_reg"] == pytest.approx(1.0, abs=1e-9)

    def test_row_order_and_mean_rows(self):
        config = tiny_config(models=[{"kind": "gue"}, {"kind": "zero"}], realizations=2)
        rows = run_experiment(config)
        keys = [(r["model"], r["L"], str(r["beta"]), str(r["realization"])) for r in rows]
        assert keys == sorted(keys, key=lambda k: (k[0], k[1], float(k[2]), k[3] == "mean"))
        means = [r for r in rows if r["realization"] == "mean"]
        assert all(r["stderr"] is not None for r in means)

    def test_serial_and_threaded_agree(self):
        config = tiny_config(models=[{"kind": "gue"}], realizations=3)
        serial = run_experiment(config, serial=True)
        threaded = run_experiment(config, serial=False, workers=2)
        assert serial == threaded

    def test_zero_temperature_rows(self):
        config = tiny_config(models=[{"kind": "gue"}], betas=["inf"], realizations=2)
        rows = run_experiment(config)
        for row in rows:
            assert row["method"] == "zero_temperature"
            assert row["beta"] == "inf"
            assert abs(row["n_value"]) < 1e-9  # nondegenerate ground states

    def test_size_cap_names_offender(self):
        config = tiny_config(sizes=[2, 13])
        with pytest.raises(ResourceLimitError, match="L=13"):
            run_experiment(config)

    def test_odd_sizes_skip_maximally_entangled_model(self):
        config = tiny_config(models=[{"kind": "max_ent"}], sizes=[3, 4], betas=[0.0])
        rows = run_experiment(config)
        assert {r["L"] for r in rows} == {4}

    def test_unknown_config_key_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"models": [{"kind": "zero"}], "bogus": 1})

    def test_bad_beta_rejected(self):
        with pytest.raises(ConfigError):
            tiny_config(betas=[-1.0])


class TestRecords:
    def test_csv_round_trip(self, tmp_path):
        rows = run_experiment(tiny_config(models=[{"kind": "gue"}], realizations=2))
        path = emit_records(rows, tmp_path / "records.csv", "csv")
        loaded = load_records(path)
        assert loaded == rows

    def test_json_round_trip(self, tmp_path):
        rows = run_experiment(tiny_config(models=[{"kind": "gue"}], realizations=2))
        path = emit_records(rows, tmp_path / "records.json", "json")
        loaded = load_records(path)
        assert loaded == rows

    def test_single_row_csv(self, tmp_path):
        rows = run_experiment(tiny_config(betas=[0.0], sizes=[2]))
        singles = [r for r in rows if r["realization"] != "mean"]
        path = emit_records(singles[:1], tmp_path / "one.csv", "csv")
        text = path.read_text().splitlines()
        assert len(text) == 2  # header + one data line
        assert text[0].startswith("model,L,d,beta,")

    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_records([], tmp_path / "none.csv", "csv")

    def test_byte_determinism(self, tmp_path):
        config = tiny_config(models=[{"kind": "gue"}, {"kind": "nrc_ps"}], realizations=2)
        a = emit_records(run_experiment(config), tmp_path / "a.csv", "csv").read_bytes()
        c = emit_records(run_experiment(config), tmp_path / "b.csv", "csv").read_bytes()
        assert a == c


class TestPresets:
    def test_all_presets_build(self):
        for name in ("fig1-desk", "fig2-desk", "fig3-desk", "fig4-desk", "table1-desk"):
            config = preset_config(name)
            assert config.models

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset_config("fig9")

    def test_fig1_shape(self):
        config = preset_config("fig1-desk")
        assert config.realizations == 28
        assert len(config.betas) == 8
        assert config.models[0].params["d"] == 100

    def test_fig2_beta_grid(self):
        config = preset_config("fig2-desk")
        assert config.sizes == [6]
        assert config.betas[0] == pytest.approx(1e-3)
        assert config.betas[-1] == pytest.approx(1e2)


class TestCli:
    def test_run_and_fit(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps(
                {
                    "models": [{"kind": "gue"}],
                    "betas": [0.0],
                    "sizes": [2, 3, 4],
                    "realizations": 2,
                    "output": {"path": "records.csv", "format": "csv"},
                }
            )
        )
        code = cli_main(
            ["run", "--config", str(config_path), "--serial", "--out", str(tmp_path)]
        )
        assert code == 0
        assert (tmp_path / "records.csv").exists()
        assert cli_main(["fit", "--input", str(tmp_path / "records.csv"), "--k-last", "3"]) == 0

    def test_seed_override_changes_rows(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps({"models": [{"kind": "gue"}], "betas": [0.0], "sizes": [2], "realizations": 1})
        )
        for seed, name in ((1, "s1"), (2, "s2")):
            out = tmp_path / name
            assert cli_main(["run", "--config", str(config_path), "--seed", str(seed), "--out", str(out)]) == 0
        a = (tmp_path / "s1" / "records.csv").read_text()
        c = (tmp_path / "s2" / "records.csv").read_text()
        assert a != c

    def test_missing_config_is_exit_2(self):
        assert cli_main(["run", "--config", "/nonexistent/config.json"]) == 2

    def test_no_config_or_preset_is_exit_2(self):
        assert cli_main(["run"]) == 2

    def test_config_resource_error_is_exit_3(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps({"models": [{"kind": "zero"}], "betas": [0.0], "sizes": [14]})
        )
        assert cli_main(["run", "--config", str(config_path)]) == 3

    def test_oracle_subcommand(self, capsys):
        code = cli_main(
            ["oracle", "--d", "4", "--beta", "0.7", "--t", "1.3", "--samples", "4000", "--seed", "3"]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "g_reg" in out and "worst |z|" in out

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "brotoc.cli", "--help"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "run" in proc.stdout and "oracle" in proc.stdout
