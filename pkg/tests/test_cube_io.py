import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_bridge.bands import BandSpec, bands_from_arrays
from spectral_bridge.cube import HyperCube, cubes_equal, load_cube, save_cube
from spectral_bridge.errors import ValidationError

from conftest import make_bands, make_cube


def test_round_trip_identity(tmp_path, rng):
    cube = make_cube(rng, b=5, h=3, w=7)
    path = tmp_path / "c.hsc"
    save_cube(cube, path)
    loaded = load_cube(path)
    assert cubes_equal(cube, loaded)


@settings(max_examples=25, deadline=None)
@given(
    b=st.integers(1, 8), h=st.integers(1, 6), w=st.integers(1, 6),
    seed=st.integers(0, 2**31 - 1),
)
def test_round_trip_property(tmp_path_factory, b, h, w, seed):
    rng = np.random.default_rng(seed)
    data = rng.normal(0, 100.0, size=(b, h, w)).astype(np.float32)
    cube = HyperCube(data=data, bands=make_bands(b), patch_id="px", tile_id="tx")
    path = tmp_path_factory.mktemp("cubes") / "c.hsc"
    save_cube(cube, path)
    loaded = load_cube(path)
    assert np.array_equal(loaded.data, cube.data)
    assert loaded.bands == cube.bands
    assert (loaded.patch_id, loaded.tile_id) == ("px", "tx")


def test_enmap_shaped_cube(tmp_path, rng):
    # 202 bands, 128x128: the EnMAP patch shape
    data = rng.normal(0, 1, size=(202, 128, 128)).astype(np.float32)
    cube = HyperCube(data=data, bands=make_bands(202, 420, 2450), patch_id="a", tile_id="b")
    path = tmp_path / "big.hsc"
    save_cube(cube, path)
    loaded = load_cube(path)
    assert loaded.n_bands == 202 and loaded.height == 128 and loaded.width == 128


def test_band_count_mismatch_in_file(tmp_path):
    # header says 3 bands but only 2 band lines present
    payload = np.zeros(3 * 2 * 2, dtype="<f4").tobytes()
    raw = b"HSC1 3 2 2\n500.0 10.0\n600.0 10.0\npatch=p tile=t\n" + payload
    path = tmp_path / "bad.hsc"
    path.write_bytes(raw)
    with pytest.raises(ValidationError, match="band count mismatch"):
        load_cube(path)


def test_nan_payload_names_index(tmp_path):
    data = np.zeros((2, 2, 2), dtype="<f4")
    data[1, 0, 1] = np.nan
    raw = (b"HSC1 2 2 2\n500.0 10.0\n600.0 10.0\npatch=p tile=t\n" + data.tobytes())
    path = tmp_path / "nan.hsc"
    path.write_bytes(raw)
    with pytest.raises(ValidationError, match=r"band=1, row=0, col=1"):
        load_cube(path)


def test_truncated_payload(tmp_path):
    raw = b"HSC1 1 2 2\n500.0 10.0\npatch=p tile=t\n" + b"\x00" * 7
    path = tmp_path / "short.hsc"
    path.write_bytes(raw)
    with pytest.raises(ValidationError, match="payload size mismatch"):
        load_cube(path)


def test_malformed_header(tmp_path):
    path = tmp_path / "junk.hsc"
    path.write_bytes(b"NOPE 1 1 1\n")
    with pytest.raises(ValidationError, match="malformed header"):
        load_cube(path)


def test_non_increasing_wavelengths_refused():
    with pytest.raises(ValidationError, match="strictly increasing"):
        HyperCube(
            data=np.zeros((2, 1, 1), dtype=np.float32),
            bands=(BandSpec(700.0, 10.0), BandSpec(600.0, 10.0)),
            patch_id="p", tile_id="t",
        )


def test_degenerate_cube_refused():
    with pytest.raises(ValidationError, match="degenerate"):
        HyperCube(data=np.zeros((0, 2, 2), dtype=np.float32), bands=(),
                  patch_id="p", tile_id="t")


def test_band_count_mismatch_at_construction():
    with pytest.raises(ValidationError, match="band count mismatch"):
        HyperCube(data=np.zeros((3, 2, 2), dtype=np.float32),
                  bands=tuple(make_bands(2)), patch_id="p", tile_id="t")


def test_ids_reject_whitespace():
    with pytest.raises(ValidationError, match="whitespace"):
        HyperCube(data=np.zeros((1, 1, 1), dtype=np.float32),
                  bands=tuple(make_bands(1)), patch_id="has space", tile_id="t")


def test_data_is_read_only(small_cube):
    with pytest.raises(ValueError):
        small_cube.data[0, 0, 0] = 1.0


def test_band_spec_range_checks():
    with pytest.raises(ValidationError):
        BandSpec(300.0, 10.0)
    with pytest.raises(ValidationError):
        BandSpec(2600.0, 10.0)
    with pytest.raises(ValidationError):
        BandSpec(500.0, 0.0)
    spec = BandSpec(500.0, 10.0)
    assert spec.center_nm == 500.0


def test_bands_from_arrays_rejects_disorder():
    with pytest.raises(ValidationError):
        bands_from_arrays([500.0, 500.0], [10.0, 10.0])
