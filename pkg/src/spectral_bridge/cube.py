"""Spectral data cubes and the HSC v1 binary file format.

HSC v1 layout:

    HSC1 <B> <H> <W>\n
    <center_nm> <fwhm_nm>\n      (B lines)
    patch=<id> tile=<id>\n
    <raw little-endian float32, band-major (B, H, W) order>
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .bands import BandSpec, band_centers, validate_band_order
from .errors import ValidationError

MAGIC = b"HSC1"


@dataclass(frozen=True)
class HyperCube:
    """A B x H x W reflectance cube with per-band wavelength metadata.

    ``data`` is stored as read-only float32 in band-major order; band centers
    are strictly increasing. Instances are immutable and safe to share.
    """

    data: np.ndarray
    bands: tuple[BandSpec, ...]
    patch_id: str
    tile_id: str

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise ValidationError(f"cube data must be 3-D (B, H, W), got shape {data.shape}")
        if min(data.shape) < 1:
            raise ValidationError(f"degenerate cube shape {data.shape}: all dims must be >= 1")
        bands = validate_band_order(self.bands)
        if data.shape[0] != len(bands):
            raise ValidationError(
                f"band count mismatch: data has {data.shape[0]} bands, "
                f"{len(bands)} band specs given"
            )
        finite = np.isfinite(data)
        if not finite.all():
            b, h, w = (int(i) for i in np.argwhere(~finite)[0])
            raise ValidationError(f"non-finite value at band={b}, row={h}, col={w}")
        for name in (self.patch_id, self.tile_id):
            if not name or any(c.isspace() for c in name):
                raise ValidationError(f"patch/tile id must be non-empty without whitespace: {name!r}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "bands", bands)

    @property
    def n_bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def centers_nm(self) -> np.ndarray:
        return band_centers(self.bands)

    def with_data(self, data: np.ndarray) -> "HyperCube":
        """Same metadata, new payload (must keep the band count)."""
        return HyperCube(data=data, bands=self.bands, patch_id=self.patch_id, tile_id=self.tile_id)


def _read_text_line(f: BinaryIO, what: str) -> str:
    raw = bytearray()
    while True:
        ch = f.read(1)
        if not ch:
            raise ValidationError(f"truncated file while reading {what}")
        if ch == b"\n":
            break
        raw.extend(ch)
        if len(raw) > 4096:
            raise ValidationError(f"malformed header: oversized {what} line")
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"malformed header: {what} is not UTF-8") from exc


def save_cube(cube: HyperCube, path: str | Path) -> None:
    """Write ``cube`` in HSC v1 format; round-trips bit-exactly with load_cube."""
    path = Path(path)
    buf = io.BytesIO()
    b, h, w = cube.data.shape
    buf.write(f"HSC1 {b} {h} {w}\n".encode("utf-8"))
    for band in cube.bands:
        buf.write(f"{band.center_nm!r} {band.fwhm_nm!r}\n".encode("utf-8"))
    buf.write(f"patch={cube.patch_id} tile={cube.tile_id}\n".encode("utf-8"))
    buf.write(np.ascontiguousarray(cube.data, dtype="<f4").tobytes())
    path.write_bytes(buf.getvalue())


def load_cube(path: str | Path) -> HyperCube:
    """Read an HSC v1 file, validating header, band specs, and payload."""
    path = Path(path)
    with open(path, "rb") as f:
        header = _read_text_line(f, "header").split()
        if len(header) != 4 or header[0] != MAGIC.decode():
            raise ValidationError(f"malformed header in {path}: expected 'HSC1 B H W'")
        try:
            n_bands, height, width = (int(v) for v in header[1:])
        except ValueError as exc:
            raise ValidationError(f"malformed header in {path}: non-integer dimensions") from exc
        if min(n_bands, height, width) < 1:
            raise ValidationError(f"degenerate cube shape ({n_bands}, {height}, {width}) in {path}")

        bands = []
        for i in range(n_bands):
            line = _read_text_line(f, f"band spec {i}")
            if line.startswith("patch="):
                raise ValidationError(
                    f"band count mismatch in {path}: header declares {n_bands} bands, found {i}"
                )
            parts = line.split()
            if len(parts) != 2:
                raise ValidationError(f"malformed band spec line {i} in {path}: {line!r}")
            try:
                bands.append(BandSpec(float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ValidationError(f"malformed band spec line {i} in {path}: {line!r}") from exc

        meta = _read_text_line(f, "patch/tile line").split()
        if len(meta) != 2 or not meta[0].startswith("patch=") or not meta[1].startswith("tile="):
            raise ValidationError(f"malformed patch/tile line in {path}")
        patch_id = meta[0][len("patch="):]
        tile_id = meta[1][len("tile="):]

        expected = n_bands * height * width * 4
        payload = f.read(expected + 1)
        if len(payload) < expected:
            raise ValidationError(
                f"payload size mismatch in {path}: expected {expected} bytes, got {len(payload)}"
            )
        if len(payload) > expected:
            raise ValidationError(f"trailing bytes after payload in {path}")

    data = np.frombuffer(payload, dtype="<f4").reshape(n_bands, height, width)
    return HyperCube(data=data, bands=tuple(bands), patch_id=patch_id, tile_id=tile_id)


def load_cube_dir(directory: str | Path, suffix: str = ".hsc") -> list[HyperCube]:
    """Load every cube file in ``directory``, sorted by filename."""
    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir() if p.suffix == suffix)
    if not paths:
        raise ValidationError(f"no {suffix} files found in {directory}")
    return [load_cube(p) for p in paths]


def cubes_equal(a: HyperCube, b: HyperCube) -> bool:
    """Bit-exact equality of payload and metadata."""
    return (
        a.data.shape == b.data.shape
        and np.array_equal(a.data, b.data)
        and a.bands == b.bands
        and a.patch_id == b.patch_id
        and a.tile_id == b.tile_id
    )


def stack_cubes(cubes: Sequence[HyperCube]) -> np.ndarray:
    """Stack cubes sharing one band structure into an (N, B, H, W) array."""
    if not cubes:
        raise ValidationError("empty cube list")
    first = cubes[0]
    for c in cubes[1:]:
        if c.bands != first.bands or c.data.shape != first.data.shape:
            raise ValidationError("cubes do not share band structure and shape")
    return np.stack([c.data for c in cubes])
