"""Pixel-mask to patch-grid partitioning for patch-based feature extractors.

A binary object mask is resized to the extractor's square input resolution
(nearest neighbor, so the mask stays binary), then every patch containing
at least one object pixel becomes an object patch and the rest become
background patches.  The two sets always partition the grid exactly.

The partition is exported as an attention-mask spec naming the patches a
feature extractor must zero out: the background patches for the object
view, the object patches for the background view.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IndivisibleGrid, IoFailure, MalformedMask

DEFAULT_IMAGE_SIZE = 224
DEFAULT_PATCH_SIZE = 16

OBJECT_VALUE = 255
BACKGROUND_VALUE = 0


@dataclass(frozen=True)
class PixelMask:
    """Strictly binary mask: 0 = background, 255 = object, row-major bytes."""

    width: int
    height: int
    data: bytes

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise MalformedMask(f"mask size {self.width}x{self.height} invalid")
        if len(self.data) != self.width * self.height:
            raise MalformedMask(
                f"mask data is {len(self.data)} bytes, expected "
                f"{self.width * self.height}")
        values = set(self.data)
        if not values <= {BACKGROUND_VALUE, OBJECT_VALUE}:
            bad = sorted(values - {BACKGROUND_VALUE, OBJECT_VALUE})
            raise MalformedMask(f"mask holds non-binary values {bad[:5]}")

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.data, dtype=np.uint8).reshape(
            self.height, self.width)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "PixelMask":
        arr = np.asarray(arr, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0],
                   data=arr.tobytes())


@dataclass(frozen=True)
class PatchPartition:
    """Object/background split of the patch grid.

    ``object_patches`` and ``background_patches`` are disjoint (row, col)
    sets whose union is the full ``grid_h x grid_w`` grid.
    """

    grid_w: int
    grid_h: int
    object_patches: frozenset[tuple[int, int]]
    background_patches: frozenset[tuple[int, int]]
    image_size: int
    patch_size: int

    def __post_init__(self):
        full = {(r, c) for r in range(self.grid_h) for c in range(self.grid_w)}
        if self.object_patches & self.background_patches:
            raise MalformedMask("object and background patch sets overlap")
        if (self.object_patches | self.background_patches) != full:
            raise MalformedMask("patch sets do not cover the full grid")


@dataclass(frozen=True)
class AttentionMaskSpec:
    """Patches whose attention scores the extractor zeroes for one view."""

    view: str
    zeroed_patches: frozenset[tuple[int, int]]
    image_size: int
    patch_size: int

    def to_json(self) -> dict:
        return {
            "view": self.view,
            "image_size": self.image_size,
            "patch_size": self.patch_size,
            "zeroed": [[r, c] for r, c in sorted(self.zeroed_patches)],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=False)

    @classmethod
    def from_json(cls, obj: dict) -> "AttentionMaskSpec":
        return cls(
            view=obj["view"],
            zeroed_patches=frozenset((int(r), int(c)) for r, c in obj["zeroed"]),
            image_size=int(obj["image_size"]),
            patch_size=int(obj["patch_size"]),
        )


def _resize_nearest(mask: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbor resample to size x size, center-point sampling in
    exact integer arithmetic (no float rounding, idempotent at same size)."""
    h, w = mask.shape
    rows = ((2 * np.arange(size) + 1) * h) // (2 * size)
    cols = ((2 * np.arange(size) + 1) * w) // (2 * size)
    return mask[np.ix_(rows, cols)]


def partition_mask(mask: PixelMask, image_size: int = DEFAULT_IMAGE_SIZE,
                   patch_size: int = DEFAULT_PATCH_SIZE) -> PatchPartition:
    """A patch is an object patch iff at least one of its pixels (after
    resizing the mask to ``image_size``) is an object pixel."""
    if image_size <= 0 or patch_size <= 0 or image_size % patch_size != 0:
        raise IndivisibleGrid(
            f"image size {image_size} not divisible by patch size {patch_size}")
    grid = image_size // patch_size
    resized = _resize_nearest(mask.as_array(), image_size) == OBJECT_VALUE
    patch_has_object = resized.reshape(grid, patch_size, grid, patch_size).any(
        axis=(1, 3))
    obj = frozenset((int(r), int(c)) for r, c in np.argwhere(patch_has_object))
    bg = frozenset((int(r), int(c)) for r, c in np.argwhere(~patch_has_object))
    return PatchPartition(
        grid_w=grid, grid_h=grid,
        object_patches=obj, background_patches=bg,
        image_size=image_size, patch_size=patch_size,
    )


def to_attention_spec(partition: PatchPartition, view: str) -> AttentionMaskSpec:
    """Zero the complement of the view's content: background patches for the
    object view, object patches for the background view."""
    if view == "object":
        zeroed = partition.background_patches
    elif view == "background":
        zeroed = partition.object_patches
    else:
        raise MalformedMask(f"attention specs exist for 'object' and "
                            f"'background' views, not {view!r}")
    return AttentionMaskSpec(
        view=view,
        zeroed_patches=zeroed,
        image_size=partition.image_size,
        patch_size=partition.patch_size,
    )


# -- PGM (P5) I/O ------------------------------------------------------------


def read_pgm(path: str | Path) -> PixelMask:
    """Binary PGM, maxval 255, values restricted to {0, 255}."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(raw):
            if raw[pos : pos + 1].isspace():
                pos += 1
            elif raw[pos : pos + 1] == b"#":
                while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedMask(f"{path}: truncated PGM header")
        return raw[start:pos]

    if token() != b"P5":
        raise MalformedMask(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError as exc:
        raise MalformedMask(f"{path}: bad PGM header: {exc}") from exc
    if maxval != 255:
        raise MalformedMask(f"{path}: PGM maxval {maxval}, only 255 supported")
    pos += 1  # single whitespace byte after maxval
    data = raw[pos:]
    if len(data) != width * height:
        raise MalformedMask(
            f"{path}: PGM payload is {len(data)} bytes, expected "
            f"{width * height}")
    return PixelMask(width=width, height=height, data=data)


def write_pgm(mask: PixelMask, path: str | Path) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + mask.data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
