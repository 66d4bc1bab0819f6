import json

from dwellcert import __version__
from dwellcert.core.manifest import RunManifest


def test_manifest_lists_artifacts(tmp_path):
    manifest = RunManifest("cover", tmp_path, config_hash="ab" * 32, seed=3)
    first = manifest.add(tmp_path / "cover" / "samples.npz")
    manifest.add(tmp_path / "cover" / "samples.npz")
    manifest.add(tmp_path / "reports" / "dwell.json")
    assert first == tmp_path / "cover" / "samples.npz"
    assert manifest.artifacts == ["cover/samples.npz", "reports/dwell.json"]


def test_manifest_outside_out_dir(tmp_path):
    manifest = RunManifest("dwell", tmp_path / "out")
    manifest.add(tmp_path / "elsewhere.txt")
    assert manifest.artifacts == [str(tmp_path / "elsewhere.txt")]


def test_manifest_write(tmp_path):
    manifest = RunManifest("verify", tmp_path, argv=["verify", "run.toml"])
    path = manifest.write(11)
    assert path == tmp_path / "manifests" / "verify.json"
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["command"] == "verify"
    assert data["exit_code"] == 11
    assert data["argv"] == ["verify", "run.toml"]
    assert data["version"] == __version__
    assert data["out_dir"] == str(tmp_path)
    assert data["finished"] >= data["started"]
    assert data["artifacts"] == []
