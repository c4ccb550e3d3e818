"""
Tests for cocycle_lab.manifest module.
"""

import json
from pathlib import Path

import numpy as np

from cocycle_lab import __version__
from cocycle_lab.manifest import (
    ExperimentConfig,
    RunManifest,
    content_hash,
    dumps_csv,
    dumps_json,
    write_output,
)


class TestWriters:
    """Tests for the canonical JSON and CSV writers."""

    def test_json_sorted_with_newline(self):
        text = dumps_json({"b": 1, "a": [np.float64(0.5), np.int64(3)]})
        assert text.endswith("\n")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": [0.5, 3], "b": 1}

    def test_json_converts_numpy_and_complex(self):
        data = json.loads(dumps_json({"z": 1 + 2j, "m": np.eye(2), "ok": np.bool_(True), "p": Path("x")}))
        assert data == {"z": [1.0, 2.0], "m": [[1.0, 0.0], [0.0, 1.0]], "ok": True, "p": "x"}

    def test_csv_uses_repr_floats(self):
        text = dumps_csv(["E", "n", "L"], [[0.1, 2, np.float64(1 / 3)]])
        assert text == "E,n,L\n0.1,2,0.3333333333333333\n"

    def test_content_hash(self):
        assert content_hash("abc") == content_hash("abc")
        assert len(content_hash("abc")) == 16
        assert content_hash("abc") != content_hash("abd")


class TestExperimentConfig:
    """Tests for configuration hashing."""

    def test_hash_ignores_workers_and_output(self):
        a = ExperimentConfig("lyapunov", {"E": 0.0, "n": 100}, workers=1, output_path="a.csv")
        b = ExperimentConfig("lyapunov", {"E": 0.0, "n": 100}, workers=8, output_path="b.csv")
        assert a.config_hash == b.config_hash

    def test_hash_tracks_params_and_model(self):
        base = ExperimentConfig("lyapunov", {"E": 0.0}, model_hash="m1")
        assert base.config_hash != ExperimentConfig("lyapunov", {"E": 0.5}, model_hash="m1").config_hash
        assert base.config_hash != ExperimentConfig("lyapunov", {"E": 0.0}, model_hash="m2").config_hash
        assert base.config_hash != ExperimentConfig("lyapunov", {"E": 0.0}, model_hash="m1", seed=3).config_hash

    def test_canonical_has_version(self):
        assert ExperimentConfig("cf").canonical()["version"] == __version__


class TestRunManifest:
    """Tests for manifests written next to outputs."""

    def _manifest(self, output):
        config = ExperimentConfig("ap", {"blocks": 20}, constants={"C_test": 10.0})
        return RunManifest.for_run(config, output, started_at=0.0, grid_sizes=[4096], dropped_orbits=[0])

    def test_path_for(self):
        assert RunManifest.path_for(Path("runs/le.csv")) == Path("runs/le.csv.manifest.json")

    def test_save_load(self, tmp_path):
        manifest = self._manifest(tmp_path / "ap.json")
        path = tmp_path / "ap.json.manifest.json"
        manifest.save(path)
        loaded = RunManifest.load(path)
        assert loaded is not None
        assert loaded.config_hash == manifest.config_hash
        assert loaded.constants == {"C_test": 10.0}
        assert loaded.grid_sizes == [4096]

    def test_load_missing(self, tmp_path):
        assert RunManifest.load(tmp_path / "absent.json") is None

    def test_load_corrupt(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert RunManifest.load(path) is None

    def test_write_output(self, tmp_path):
        output = tmp_path / "deep" / "dir" / "result.json"
        manifest_path = write_output('{"ok": true}\n', output, self._manifest(output))
        assert output.read_text() == '{"ok": true}\n'
        assert manifest_path == output.with_name("result.json.manifest.json")
        assert json.loads(manifest_path.read_text())["command"] == "ap"
