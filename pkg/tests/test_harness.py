import csv
import json

import numpy as np
import pytest

from rislink import cli
from rislink.config import SimulationConfig, load_config, parse_config
from rislink.errors import ConfigError
from rislink.harness import MetricRow, derive_seed, run, to_csv


def small(tmp_path, **kw):
    base = dict(trial_count=3, m_ris=8, n_nb=2, n_ue=2, out_dir=str(tmp_path))
    base.update(kw)
    return SimulationConfig(**base)


class TestConfig:
    def test_defaults_round_trip(self):
        cfg = SimulationConfig()
        assert parse_config(cfg.dump()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="foo"):
            parse_config("foo: 1\n")

    def test_zero_trials(self):
        with pytest.raises(ConfigError, match="trial_count"):
            parse_config("trial_count: 0\n")

    def test_yaml_error_location(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("seed: 1\n  bad: [\n")

    def test_group_divisibility(self):
        with pytest.raises(ConfigError):
            parse_config("m_ris: 10\ngroup_k: 4\n")

    def test_overrides_win(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("seed: 3\nformat: csv\n")
        cfg = load_config(p, seed=9, format=None)
        assert cfg.seed == 9 and cfg.format == "csv"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")


class TestSeeds:
    def test_deterministic(self):
        assert derive_seed(1, "decouple", 0) == derive_seed(1, "decouple", 0)

    def test_distinct(self):
        assert derive_seed(1, "decouple", 0) != derive_seed(1, "decouple", 1)
        assert derive_seed(1, "decouple", 0) != derive_seed(1, "coexist", 0)
        assert derive_seed(1, "decouple", 0) != derive_seed(2, "decouple", 0)

    def test_no_collisions(self):
        seeds = {derive_seed(0, "s", t) for t in range(10_000)}
        assert len(seeds) == 10_000
        assert all(0 <= s < 2**64 for s in seeds)


class TestMetricRow:
    def test_single_trial_std(self):
        r = MetricRow.from_trials("x", {}, "m", [2.5])
        assert r.mean == 2.5 and r.std == 0.0 and r.count == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            MetricRow("x", {}, "m", 0.0, 0.0, 0)

    def test_csv_round_trip_floats(self):
        v = 0.1 + 0.2
        text = to_csv(("a",), [{"a": v}])
        assert float(list(csv.reader(text.splitlines()))[1][0]) == v


class TestRun:
    def test_decouple_metrics(self, tmp_path):
        res = run(small(tmp_path), write=False)
        assert res.status == 0
        by = {r.metric: r for r in res.rows}
        assert by["offdiag_power_ratio"].mean < 1e-10
        assert by["offdiag_power_ratio"].count == 3

    def test_coexist_eleven_betas(self, tmp_path):
        res = run(small(tmp_path, scenario="coexist", n_nb=1, n_ue=1), write=False)
        betas = {r.params["beta"] for r in res.rows if "beta" in r.params}
        assert len(betas) == 11
        assert len(res.tables["sweep"][1]) == 11

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_byte_identical(self, tmp_path, fmt):
        cfg = small(tmp_path, scenario="frames", format=fmt, per_trial=True, n_bits=64, spread_k=[1, 2])
        outs = []
        for _ in range(2):
            assert run(cfg).status == 0
            outs.append({p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())})
        assert outs[0] == outs[1]
        assert "trials." + fmt in outs[0]

    def test_json_shape(self, tmp_path):
        run(small(tmp_path, format="json"))
        payload = json.loads((tmp_path / "metrics.json").read_text())
        assert set(payload) == {"config_echo", "rows"}
        assert payload["config_echo"]["seed"] == 0

    def test_seed_changes_output(self, tmp_path):
        a = run(small(tmp_path, seed=1), write=False).rows
        b = run(small(tmp_path, seed=2), write=False).rows
        assert [r.mean for r in a] != [r.mean for r in b]

    def test_all_scenarios_finite(self, tmp_path):
        for sc in ("multiuser", "sweep", "ttd"):
            res = run(small(tmp_path, scenario=sc, n_nb=1, n_ue=1, trial_count=2), write=False)
            assert res.status == 0, res.message
            assert all(np.isfinite(r.mean) for r in res.rows)


class TestCli:
    def test_success(self, tmp_path):
        assert cli.main(["decouple", "--out", str(tmp_path), "--seed", "4"]) == 0
        assert (tmp_path / "metrics.csv").exists()

    def test_bad_config(self, tmp_path, capsys):
        p = tmp_path / "c.yaml"
        p.write_text("trial_count: 0\n")
        assert cli.main(["decouple", "--config", str(p)]) == 2
        err = capsys.readouterr().err.strip()
        assert len(err.splitlines()) == 1 and "trial_count" in err

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["teleport"])
        assert exc.value.code == 2
