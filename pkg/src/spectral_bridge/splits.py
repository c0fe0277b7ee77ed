"""Train/val/test split construction with easy and hard (tile-disjoint) modes."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SplitAssignment:
    """patch_id -> split mapping with tile provenance.

    In hard mode no tile appears in more than one split.
    """

    assignment: Mapping[str, str]
    tiles: Mapping[str, str]
    mode: str

    def __post_init__(self) -> None:
        if self.mode not in ("easy", "hard"):
            raise ValidationError(f"split mode must be 'easy' or 'hard', got {self.mode!r}")
        for patch_id, split in self.assignment.items():
            if split not in SPLIT_NAMES:
                raise ValidationError(f"unknown split {split!r} for patch {patch_id!r}")
            if patch_id not in self.tiles:
                raise ValidationError(f"patch {patch_id!r} missing tile provenance")
        if self.mode == "hard":
            tile_split: dict[str, str] = {}
            for patch_id, split in self.assignment.items():
                tile = self.tiles[patch_id]
                if tile_split.setdefault(tile, split) != split:
                    raise ValidationError(f"tile {tile!r} straddles splits in hard mode")
        object.__setattr__(self, "assignment", dict(self.assignment))
        object.__setattr__(self, "tiles", dict(self.tiles))

    def members(self, split: str) -> list[str]:
        """Patch ids of one split, sorted."""
        if split not in SPLIT_NAMES:
            raise ValidationError(f"unknown split {split!r}")
        return sorted(p for p, s in self.assignment.items() if s == split)

    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in SPLIT_NAMES}
        for split in self.assignment.values():
            out[split] += 1
        return out


def _target_counts(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of n items over the ratios."""
    raw = [n * r for r in ratios]
    base = [int(np.floor(v)) for v in raw]
    leftover = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def _check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    if len(ratios) != 3:
        raise ValidationError("ratios must be (train, val, test)")
    ratios = tuple(float(r) for r in ratios)
    if any(r < 0 for r in ratios):
        raise ValidationError(f"ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must sum to 1, got {sum(ratios)!r}")
    if ratios[0] <= 0:
        raise ValidationError("train ratio must be positive")
    return ratios


def make_splits(
    patches: Sequence[tuple[str, str]],
    mode: str,
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SplitAssignment:
    """Partition (patch_id, tile_id) pairs into train/val/test.

    Easy mode shuffles patch ids directly. Hard mode shuffles tiles and
    greedily assigns each tile to the split with the largest remaining
    patch-count deficit, so no tile straddles splits. Deterministic in
    (patches, mode, ratios, seed); input order does not matter.
    """
    ratios = _check_ratios(ratios)
    if not patches:
        raise ValidationError("patch list is empty")
    tiles: dict[str, str] = {}
    for patch_id, tile_id in patches:
        if patch_id in tiles:
            raise ValidationError(f"duplicate patch id {patch_id!r}")
        tiles[patch_id] = tile_id

    if mode not in ("easy", "hard"):
        raise ValidationError(f"split mode must be 'easy' or 'hard', got {mode!r}")

    rng = np.random.default_rng(seed)
    n = len(tiles)
    targets = _target_counts(n, ratios)
    assignment: dict[str, str] = {}

    if mode == "easy":
        ordered = sorted(tiles)
        perm = rng.permutation(n)
        shuffled = [ordered[i] for i in perm]
        start = 0
        for split, count in zip(SPLIT_NAMES, targets):
            for patch_id in shuffled[start : start + count]:
                assignment[patch_id] = split
            start += count
    else:
        by_tile: dict[str, list[str]] = {}
        for patch_id, tile_id in sorted(tiles.items()):
            by_tile.setdefault(tile_id, []).append(patch_id)
        tile_ids = sorted(by_tile)
        active = [i for i, r in enumerate(ratios) if r > 0]
        if len(tile_ids) < len(active):
            raise ValidationError(
                f"hard mode needs at least {len(active)} distinct tiles for "
                f"{len(active)} non-empty splits, got {len(tile_ids)}"
            )
        perm = rng.permutation(len(tile_ids))
        assigned = [0, 0, 0]
        for idx in perm:
            tile_id = tile_ids[idx]
            deficits = [(targets[i] - assigned[i], -i) for i in active]
            pick = active[max(range(len(active)), key=lambda j: deficits[j])]
            for patch_id in by_tile[tile_id]:
                assignment[patch_id] = SPLIT_NAMES[pick]
            assigned[pick] += len(by_tile[tile_id])

    return SplitAssignment(assignment=assignment, tiles=tiles, mode=mode)


def save_split(split: SplitAssignment, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["patch_id", "tile_id", "split"])
        for patch_id in sorted(split.assignment):
            writer.writerow([patch_id, split.tiles[patch_id], split.assignment[patch_id]])
        writer.writerow(["MODE", "", split.mode])


def load_split(path: str | Path) -> SplitAssignment:
    path = Path(path)
    assignment: dict[str, str] = {}
    tiles: dict[str, str] = {}
    mode = "easy"
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["patch_id", "tile_id", "split"]:
            raise ValidationError(f"split CSV {path} must have columns patch_id,tile_id,split")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 columns")
            if row[0] == "MODE":
                mode = row[2]
                continue
            if row[0] in assignment:
                raise ValidationError(f"{path}:{lineno}: duplicate patch id {row[0]!r}")
            assignment[row[0]] = row[2]
            tiles[row[0]] = row[1]
    return SplitAssignment(assignment=assignment, tiles=tiles, mode=mode)
