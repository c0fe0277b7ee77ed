import pytest

from spectral_bridge.errors import ValidationError
from spectral_bridge.labels import GasLabelSet, load_labels, save_labels


def write(tmp_path, rows):
    path = tmp_path / "labels.csv"
    lines = ["patch_id,gas,units,value"] + rows
    path.write_text("\n".join(lines) + "\n")
    return path


def test_three_valid_rows(tmp_path):
    path = write(tmp_path, ["a,CH4,ppb,1850.5", "b,CH4,ppb,1900.0", "c,CH4,ppb,1875.2"])
    labels = load_labels(path, "CH4")
    assert len(labels) == 3 and labels.skipped == 0
    assert labels.values["b"] == 1900.0


def test_blank_value_skipped_and_counted(tmp_path):
    path = write(tmp_path, ["a,CH4,ppb,1850.5", "b,CH4,ppb,", "c,CH4,ppb,1875.2"])
    labels = load_labels(path, "CH4")
    assert len(labels) == 2 and labels.skipped == 1


def test_duplicate_patch_id_errors(tmp_path):
    path = write(tmp_path, ["a,CH4,ppb,1850.5", "a,CH4,ppb,1900.0"])
    with pytest.raises(ValidationError, match="duplicate label"):
        load_labels(path, "CH4")


def test_unparseable_row_names_line(tmp_path):
    path = write(tmp_path, ["a,CH4,ppb,1850.5", "b,CH4,ppb,not-a-number"])
    with pytest.raises(ValidationError, match=":3"):
        load_labels(path, "CH4")


def test_other_gases_filtered(tmp_path):
    path = write(tmp_path, ["a,CH4,ppb,1850.5", "b,CO2,ppm,415.0"])
    assert len(load_labels(path, "CH4")) == 1
    assert len(load_labels(path, "CO2")) == 1


def test_units_must_match_gas(tmp_path):
    path = write(tmp_path, ["a,CH4,ppm,1850.5"])
    with pytest.raises(ValidationError, match="units"):
        load_labels(path, "CH4")


def test_no2_units(tmp_path):
    path = write(tmp_path, ["a,NO2,mol/m2,0.0001"])
    labels = load_labels(path, "NO2")
    assert labels.units == "mol/m2"


def test_round_trip(tmp_path):
    labels = GasLabelSet(gas="CO2", units="ppm", values={"a": 410.5, "b": 415.25})
    path = tmp_path / "out.csv"
    save_labels(labels, path)
    loaded = load_labels(path, "CO2")
    assert loaded.values == labels.values


def test_non_finite_label_rejected():
    with pytest.raises(ValidationError, match="finite"):
        GasLabelSet(gas="CH4", units="ppb", values={"a": float("nan")})
