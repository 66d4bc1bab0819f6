import json
import re

import numpy as np
import pytest

from dwellcert.core.checkpoint import (
    CHECKPOINT_VERSION,
    bundle_from_dict,
    bundle_to_dict,
    load_bundle,
    load_checkpoint,
    save_bundle,
)
from dwellcert.core.errors import CheckpointError

HASH = "ab" * 32


def test_save_and_load(tmp_path, bundle2):
    path = save_bundle(
        bundle2, tmp_path / "checkpoints" / "bundle.json", HASH, {"status": "x"}
    )
    assert path.exists()
    assert not path.with_name("bundle.json.tmp").exists()

    checkpoint = load_checkpoint(path, expected_hash=HASH)
    assert checkpoint.config_hash == HASH
    assert checkpoint.metadata == {"status": "x"}
    loaded = checkpoint.bundle
    assert loaded.mode_ids == (1, 2)
    assert loaded.shared_V is False
    xs = np.linspace(-1, 1, 7).reshape(-1, 1)
    ws = np.full((7, 1), 0.05)
    for mode in (1, 2):
        np.testing.assert_array_equal(loaded.V(mode, xs), bundle2.V(mode, xs))
        np.testing.assert_array_equal(
            loaded.control(mode, xs, ws), bundle2.control(mode, xs, ws)
        )
        assert loaded.modes[mode].settings == bundle2.modes[mode].settings
    np.testing.assert_array_equal(loaded.reference_point, bundle2.reference_point)
    assert loaded.state_box == bundle2.state_box


def test_shared_lyapunov_net_stays_shared(tmp_path, shared_bundle2):
    path = save_bundle(shared_bundle2, tmp_path / "bundle.json")
    loaded = load_bundle(path)
    assert loaded.shared_V
    assert loaded.modes[1].lyapunov is loaded.modes[2].lyapunov


def test_stored_certificates(bundle1):
    data = bundle_to_dict(bundle1)
    certificates = data["modes"]["1"]["certificates"]
    assert certificates["lyapunov"]["L_fn"] == pytest.approx(8.0)
    assert certificates["controller"]["L_fn"] == pytest.approx(1.0)
    assert data["version"] == CHECKPOINT_VERSION
    assert data["config_hash"] is None


def test_hash_mismatch(tmp_path, bundle1):
    path = save_bundle(bundle1, tmp_path / "bundle.json", HASH)
    with pytest.raises(CheckpointError, match="--ignore-config-hash"):
        load_checkpoint(path, expected_hash="cd" * 32)
    # without an expected hash, anything goes
    assert load_checkpoint(path).config_hash == HASH


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError, match="Checkpoint not found"):
        load_checkpoint(tmp_path / "nothing.json")


def test_corrupt_checkpoint(tmp_path):
    path = tmp_path / "bundle.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(CheckpointError, match=re.escape("Could not read checkpoint")):
        load_checkpoint(path)


@pytest.mark.parametrize(
    "change, message",
    [
        (dict(format="something"), "not a dwellcert checkpoint"),
        (dict(version=99), "unsupported checkpoint version 99"),
        (dict(state_box=None), "malformed checkpoint"),
        (dict(reference_point=[0.0, 0.0]), "invalid checkpoint"),
    ],
)
def test_bad_checkpoint_contents(bundle1, change, message):
    data = json.loads(json.dumps(bundle_to_dict(bundle1)))
    data.update(change)
    with pytest.raises(CheckpointError, match=message):
        bundle_from_dict(data)
