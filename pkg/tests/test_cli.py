"""Config parsing, exit codes, and the three CLI entry points."""

import json

import pytest

from krdoa.cli import (
    ConfigError,
    _default_workers,
    bundled_config_names,
    load_config,
    main,
    parse_config,
)

BUNDLED = [
    "nura_snapshot_sweep.json",
    "nura_snr_sweep.json",
    "ura_snapshot_sweep.json",
    "ura_snr_sweep.json",
]


def config_doc(tmp_path, **over):
    doc = {
        "geometry": {"kind": "ura", "m": 6, "n": 5},
        "sources": [[50.0, 60.0], [120.0, 110.0]],
        "methods": ["de-rmusic"],
        "sweep": {"axis": "snr", "values": [0.0, 10.0]},
        "runs": 2,
        "base_seed": 7,
        "snapshots": 16,
        "output": str(tmp_path / "out.csv"),
    }
    doc.update(over)
    return doc


def write_config(tmp_path, **over):
    doc = config_doc(tmp_path, **over)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path, doc


class TestParseConfig:
    def test_happy_path(self, tmp_path):
        cfg = parse_config(config_doc(tmp_path))
        assert cfg.ensemble.sweep_axis == "snr"
        assert cfg.ensemble.methods == ("de-rmusic",)
        assert cfg.ensemble.sources.pairs == ((50.0, 60.0), (120.0, 110.0))
        assert cfg.output.endswith("out.csv")

    def test_hash_ignores_key_order(self, tmp_path):
        doc = config_doc(tmp_path)
        reordered = dict(reversed(list(doc.items())))
        assert parse_config(doc).sha256 == parse_config(reordered).sha256

    def test_hash_sees_value_changes(self, tmp_path):
        a = parse_config(config_doc(tmp_path))
        b = parse_config(config_doc(tmp_path, runs=3))
        assert a.sha256 != b.sha256

    def test_unknown_top_level_field(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown field"):
            parse_config(config_doc(tmp_path, surprise=1))

    def test_unknown_geometry_field(self, tmp_path):
        doc = config_doc(tmp_path)
        doc["geometry"]["rows"] = 4
        with pytest.raises(ConfigError, match="geometry"):
            parse_config(doc)

    def test_unknown_sweep_field(self, tmp_path):
        doc = config_doc(tmp_path)
        doc["sweep"]["step"] = 1
        with pytest.raises(ConfigError, match="sweep"):
            parse_config(doc)

    def test_missing_required_field(self, tmp_path):
        doc = config_doc(tmp_path)
        del doc["runs"]
        with pytest.raises(ConfigError, match="missing"):
            parse_config(doc)

    def test_bad_kind(self, tmp_path):
        doc = config_doc(tmp_path)
        doc["geometry"]["kind"] = "circular"
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_random_source_policy_object(self, tmp_path):
        doc = config_doc(tmp_path,
                         sources={"count": "min_dim_minus_1", "seed": 5})
        cfg = parse_config(doc)
        assert cfg.ensemble.sources.count == "min_dim_minus_1"

    def test_bad_sources_type(self, tmp_path):
        with pytest.raises(ConfigError, match="sources"):
            parse_config(config_doc(tmp_path, sources=42))

    def test_bad_method_name(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown method"):
            parse_config(config_doc(tmp_path, methods=["capon"]))

    def test_empty_output_path(self, tmp_path):
        with pytest.raises(ConfigError, match="output"):
            parse_config(config_doc(tmp_path, output=""))


class TestLoadConfig:
    def test_from_file(self, tmp_path):
        path, doc = write_config(tmp_path)
        cfg = load_config(str(path))
        assert cfg.raw == doc

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="valid JSON"):
            load_config(str(path))

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("no_such_config.json")

    def test_bundled_names(self):
        assert bundled_config_names() == BUNDLED

    @pytest.mark.parametrize("name", BUNDLED)
    def test_bundled_configs_parse(self, name):
        cfg = load_config(name)
        assert cfg.ensemble.runs >= 1
        assert cfg.output.endswith(".csv")


class TestDefaultWorkers:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("KRDOA_WORKERS", "3")
        assert _default_workers() == 3

    def test_env_floor_is_one(self, monkeypatch):
        monkeypatch.setenv("KRDOA_WORKERS", "0")
        assert _default_workers() == 1

    def test_env_must_be_integer(self, monkeypatch):
        monkeypatch.setenv("KRDOA_WORKERS", "many")
        with pytest.raises(ConfigError):
            _default_workers()

    def test_unset_uses_cpu_count(self, monkeypatch):
        monkeypatch.delenv("KRDOA_WORKERS", raising=False)
        assert _default_workers() >= 1


class TestRunCommand:
    def test_writes_csv_sidecar_and_figure(self, tmp_path, capsys):
        path, doc = write_config(tmp_path)
        rc = main(["run", str(path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert (tmp_path / "out.csv").exists()
        assert (tmp_path / "out.meta.json").exists()
        assert (tmp_path / "out.png").exists()
        assert "out.csv" in out and "out.png" in out
        meta = json.loads((tmp_path / "out.meta.json").read_text())
        assert meta["base_seed"] == 7
        assert meta["rows"] == 2
        header = (tmp_path / "out.csv").read_text().splitlines()[0]
        assert header.startswith("sweep_axis,sweep_value,method")

    def test_no_plot_skips_figure(self, tmp_path):
        path, _ = write_config(tmp_path)
        rc = main(["run", str(path), "--no-plot"])
        assert rc == 0
        assert (tmp_path / "out.csv").exists()
        assert not (tmp_path / "out.png").exists()

    def test_all_cells_failing_exits_one(self, tmp_path, capsys):
        path, _ = write_config(
            tmp_path,
            geometry={"kind": "nura", "m": 6, "n": 5, "seed": 3},
            methods=["de-rmusic"],
            sweep={"axis": "snr", "values": [10.0]},
        )
        rc = main(["run", str(path), "--no-plot"])
        assert rc == 1
        err = capsys.readouterr().err
        assert "failed all runs" in err
        # the CSV still documents the failed cells
        assert (tmp_path / "out.csv").exists()

    def test_missing_config_exits_two(self, capsys):
        rc = main(["run", "definitely_not_here.json"])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_bad_workers_env_exits_two(self, tmp_path, monkeypatch):
        monkeypatch.setenv("KRDOA_WORKERS", "many")
        path, _ = write_config(tmp_path)
        assert main(["run", str(path)]) == 2


class TestSingleCommand:
    def test_prints_estimates_near_truth(self, capsys):
        rc = main([
            "single", "--m", "8", "--n", "6",
            "--source", "50,60", "--source", "120,110",
            "--snr", "20", "--snapshots", "64", "--seed", "0",
            "--method", "de-esprit",
        ])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["method"] == "de-esprit"
        assert doc["diagnostics"]["backend"] == "esprit"
        pairs = sorted(doc["pairs_deg"])
        assert abs(pairs[0][0] - 50.0) < 0.5 and abs(pairs[0][1] - 60.0) < 0.5
        assert abs(pairs[1][0] - 120.0) < 0.5 and abs(pairs[1][1] - 110.0) < 0.5
        assert len(doc["pairing_costs"]) == 2

    def test_non_uniform_kind_needs_seed(self, capsys):
        rc = main(["single", "--kind", "nura", "--source", "50,60"])
        assert rc == 2
        assert "geometry-seed" in capsys.readouterr().err

    def test_rooting_method_on_non_uniform_array_exits_one(self, capsys):
        rc = main([
            "single", "--kind", "nura", "--geometry-seed", "3",
            "--m", "8", "--n", "6", "--source", "50,60",
            "--method", "de-rmusic",
        ])
        assert rc == 1
        assert "azimuth estimation" in capsys.readouterr().err

    def test_bad_source_format_exits_two(self, capsys):
        rc = main(["single", "--source", "50:60"])
        assert rc == 2
        assert "azimuth,elevation" in capsys.readouterr().err

    def test_unknown_method_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["single", "--source", "50,60", "--method", "capon"])
        assert exc.value.code == 2


class TestListMethods:
    def test_lists_every_method_and_bundled_configs(self, capsys):
        rc = main(["list-methods"])
        assert rc == 0
        out = capsys.readouterr().out
        for name in ("de-rmusic", "de-esprit", "de-music", "de-music-opt",
                     "2d-music"):
            assert name in out
        for name in BUNDLED:
            assert name in out


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
