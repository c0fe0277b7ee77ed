"""Gas concentration labels keyed by patch id."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ValidationError

# Units per gas product.
GAS_UNITS = {"NO2": "mol/m2", "CH4": "ppb", "CO2": "ppm"}

LABEL_COLUMNS = ["patch_id", "gas", "units", "value"]


@dataclass(frozen=True)
class GasLabelSet:
    """Concentration labels for one gas, one value per patch."""

    gas: str
    units: str
    values: Mapping[str, float]
    skipped: int = 0

    def __post_init__(self) -> None:
        if self.gas not in GAS_UNITS:
            raise ValidationError(f"unknown gas {self.gas!r}; expected one of {sorted(GAS_UNITS)}")
        if self.units != GAS_UNITS[self.gas]:
            raise ValidationError(
                f"units {self.units!r} inconsistent with gas {self.gas} "
                f"(expected {GAS_UNITS[self.gas]!r})"
            )
        for patch_id, value in self.values.items():
            if not math.isfinite(value):
                raise ValidationError(f"non-finite label for patch {patch_id!r}")
        object.__setattr__(self, "values", dict(self.values))

    def __len__(self) -> int:
        return len(self.values)


def load_labels(path: str | Path, gas: str) -> GasLabelSet:
    """Read a label CSV (columns patch_id,gas,units,value), keeping rows of ``gas``.

    Rows with a blank value are skipped and counted. A duplicate patch id for
    the requested gas is an error rather than last-wins.
    """
    if gas not in GAS_UNITS:
        raise ValidationError(f"unknown gas {gas!r}; expected one of {sorted(GAS_UNITS)}")
    path = Path(path)
    values: dict[str, float] = {}
    skipped = 0
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != LABEL_COLUMNS:
            raise ValidationError(f"label CSV {path} must have columns {','.join(LABEL_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            patch_id, row_gas, units, raw_value = (v.strip() for v in row)
            if row_gas != gas:
                continue
            if raw_value == "":
                skipped += 1
                continue
            try:
                value = float(raw_value)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: unparseable value {raw_value!r}") from exc
            if units != GAS_UNITS[gas]:
                raise ValidationError(
                    f"{path}:{lineno}: units {units!r} inconsistent with gas {gas}"
                )
            if patch_id in values:
                raise ValidationError(f"{path}:{lineno}: duplicate label for patch {patch_id!r}")
            values[patch_id] = value
    return GasLabelSet(gas=gas, units=GAS_UNITS[gas], values=values, skipped=skipped)


def save_labels(labels: GasLabelSet, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(LABEL_COLUMNS)
        for patch_id in sorted(labels.values):
            writer.writerow([patch_id, labels.gas, labels.units,
                             repr(float(labels.values[patch_id]))])
