import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_bridge.errors import ValidationError
from spectral_bridge.splits import load_split, make_splits, save_split


def patches_on_tiles(n_patches, n_tiles):
    return [(f"p{i:03d}", f"t{i % n_tiles:03d}") for i in range(n_patches)]


def test_easy_counts_and_determinism():
    patches = patches_on_tiles(10, 10)
    a = make_splits(patches, "easy", (0.8, 0.1, 0.1), seed=3)
    b = make_splits(patches, "easy", (0.8, 0.1, 0.1), seed=3)
    assert a.assignment == b.assignment
    counts = a.counts()
    assert (counts["train"], counts["val"], counts["test"]) == (8, 1, 1)


def test_easy_input_order_invariance():
    patches = patches_on_tiles(20, 5)
    a = make_splits(patches, "easy", seed=9)
    b = make_splits(list(reversed(patches)), "easy", seed=9)
    assert a.assignment == b.assignment


def test_hard_no_tile_straddles():
    patches = patches_on_tiles(40, 8)
    split = make_splits(patches, "hard", (0.6, 0.2, 0.2), seed=1)
    seen = {}
    for patch_id, s in split.assignment.items():
        tile = split.tiles[patch_id]
        assert seen.setdefault(tile, s) == s


def test_hard_one_tile_per_patch_hits_ratios():
    split = make_splits(patches_on_tiles(10, 10), "hard", (0.8, 0.1, 0.1), seed=0)
    counts = split.counts()
    assert (counts["train"], counts["val"], counts["test"]) == (8, 1, 1)


def test_hard_single_tile_errors():
    with pytest.raises(ValidationError, match="distinct tiles"):
        make_splits(patches_on_tiles(6, 1), "hard", (0.8, 0.1, 0.1), seed=0)


def test_hard_different_seeds_differ():
    patches = patches_on_tiles(60, 20)
    a = make_splits(patches, "hard", seed=0)
    b = make_splits(patches, "hard", seed=1)
    assert a.assignment != b.assignment


def test_zero_val_ratio_allowed():
    split = make_splits(patches_on_tiles(10, 10), "hard", (0.8, 0.0, 0.2), seed=0)
    assert split.counts()["val"] == 0


def test_ratio_validation():
    with pytest.raises(ValidationError):
        make_splits(patches_on_tiles(4, 4), "easy", (0.5, 0.2, 0.2), seed=0)
    with pytest.raises(ValidationError):
        make_splits(patches_on_tiles(4, 4), "easy", (-0.1, 0.6, 0.5), seed=0)
    with pytest.raises(ValidationError):
        make_splits([], "easy", (0.8, 0.1, 0.1), seed=0)


def test_duplicate_patch_id_rejected():
    with pytest.raises(ValidationError, match="duplicate"):
        make_splits([("p0", "t0"), ("p0", "t1")], "easy", seed=0)


@settings(max_examples=40, deadline=None)
@given(
    n_tiles=st.integers(3, 15),
    per_tile=st.integers(1, 6),
    seed=st.integers(0, 10_000),
)
def test_hard_partition_property(n_tiles, per_tile, seed):
    patches = [(f"p{t}_{i}", f"t{t}") for t in range(n_tiles) for i in range(per_tile)]
    split = make_splits(patches, "hard", (0.7, 0.15, 0.15), seed=seed)
    # disjoint cover
    assert set(split.assignment) == {p for p, _ in patches}
    # each tile in exactly one split
    per_tile_splits = {}
    for patch_id, s in split.assignment.items():
        per_tile_splits.setdefault(split.tiles[patch_id], set()).add(s)
    assert all(len(v) == 1 for v in per_tile_splits.values())


def test_split_csv_round_trip(tmp_path):
    split = make_splits(patches_on_tiles(12, 4), "hard", seed=5)
    path = tmp_path / "splits.csv"
    save_split(split, path)
    loaded = load_split(path)
    assert loaded.assignment == split.assignment
    assert loaded.tiles == split.tiles
    assert loaded.mode == "hard"
