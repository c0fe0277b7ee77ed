import dataclasses

import numpy as np
import pytest

from spectral_bridge.container import read_container, write_container
from spectral_bridge.errors import ValidationError
from spectral_bridge.mae import (ModelConfig, load_checkpoint, pretrain,
                                 save_checkpoint)
from spectral_bridge.mae import model as mdl
from spectral_bridge.regressor import (RegressorCheckpoint, RegressorConfig,
                                       load_regressor, save_regressor)
from spectral_bridge.stats import GlobalStats
from spectral_bridge.synth import SceneConfig, gen_dataset

CFG = ModelConfig(embed_dim=16, band_group_size=1, spatial_patch=4,
                  encoder_layers=1, decoder_layers=1, attention_heads=1,
                  mask_fraction=0.5, steps=8, batch_size=4, seed=0)


@pytest.fixture(scope="module")
def trained():
    scenes = gen_dataset(SceneConfig(n_bands=8, height=8, width=8, n_endmembers=2), 6,
                         master_seed=2)
    cubes = [s.cube for s in scenes]
    return cubes, pretrain(cubes, CFG)


def test_checkpoint_round_trip_bit_exact(tmp_path, trained):
    _, result = trained
    path_a = tmp_path / "a.sbck"
    path_b = tmp_path / "b.sbck"
    save_checkpoint(result.final, path_a)
    loaded = load_checkpoint(path_a)
    save_checkpoint(loaded, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()
    for name, arr in result.final.params.items():
        np.testing.assert_array_equal(loaded.params[name], arr)
    assert loaded.config == result.final.config
    assert loaded.stage == "pretrained"
    assert loaded.hs_bands == result.final.hs_bands
    np.testing.assert_array_equal(loaded.hs_stats.mean, result.final.hs_stats.mean)
    np.testing.assert_array_equal(loaded.hs_stats.std, result.final.hs_stats.std)


def test_reloaded_forward_bit_identical(tmp_path, trained):
    cubes, result = trained
    path = tmp_path / "c.sbck"
    save_checkpoint(result.final, path)
    loaded = load_checkpoint(path)
    cfg = result.final.config
    geom = mdl.build_geometry(cubes[0].bands, 8, 8, 1, cfg)
    batch = np.stack([c.data for c in cubes[:2]]).astype(np.float32)
    mask = np.array([[0, 2], [1, 3]], dtype=np.int64)
    a, _ = mdl.forward_pretrain(result.final.params, batch, mask, geom, cfg)
    b, _ = mdl.forward_pretrain(loaded.params, batch, mask, geom, cfg)
    np.testing.assert_array_equal(a, b)


def test_checkpoint_rejects_bad_stage(trained):
    _, result = trained
    with pytest.raises(ValidationError, match="stage"):
        dataclasses.replace(result.final, stage="warmed-up")


def test_checkpoint_rejects_wrong_shapes(trained):
    _, result = trained
    params = dict(result.final.params)
    params["mask_token"] = np.zeros(7, dtype=np.float32)
    with pytest.raises(ValidationError, match="shape"):
        dataclasses.replace(result.final, params=params)


def test_checkpoint_rejects_float64_params(trained):
    _, result = trained
    params = {k: v.astype(np.float64) for k, v in result.final.params.items()}
    with pytest.raises(ValidationError, match="float32"):
        dataclasses.replace(result.final, params=params)


def test_container_magic_mismatch(tmp_path):
    write_container(tmp_path / "x.bin", "AAAA1", {"k": 1}, {"t": np.zeros(2, np.float32)})
    with pytest.raises(ValidationError, match="not a BBBB1"):
        read_container(tmp_path / "x.bin", "BBBB1")


def test_container_rejects_truncation(tmp_path):
    path = tmp_path / "x.bin"
    write_container(path, "AAAA1", {}, {"t": np.arange(4, dtype=np.float32)})
    raw = path.read_bytes()
    path.write_bytes(raw[:-6])
    with pytest.raises(ValidationError):
        read_container(path, "AAAA1")


def test_regressor_checkpoint_round_trip(tmp_path, rng):
    cfg = RegressorConfig(input_bands=5, hidden=(8, 4), steps=10, gas="CO2")
    params = {
        "fc0.w": rng.normal(size=(8, 5)).astype(np.float32),
        "fc0.b": np.zeros(8, np.float32),
        "fc1.w": rng.normal(size=(4, 8)).astype(np.float32),
        "fc1.b": np.zeros(4, np.float32),
        "fc2.w": rng.normal(size=(1, 4)).astype(np.float32),
        "fc2.b": np.zeros(1, np.float32),
    }
    ckpt = RegressorCheckpoint(config=cfg, params=params,
                               feature_stats=GlobalStats(10.0, 2.0),
                               label_mean=415.0, label_std=3.5)
    path = tmp_path / "r.sbrg"
    save_regressor(ckpt, path)
    loaded = load_regressor(path)
    assert loaded.config == cfg
    assert loaded.feature_stats == ckpt.feature_stats
    assert (loaded.label_mean, loaded.label_std) == (415.0, 3.5)
    for k, v in params.items():
        np.testing.assert_array_equal(loaded.params[k], v)
    path_b = tmp_path / "r2.sbrg"
    save_regressor(loaded, path_b)
    assert path.read_bytes() == path_b.read_bytes()
