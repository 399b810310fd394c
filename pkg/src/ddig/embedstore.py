"""Embedding file format, metadata manifest, and slicing.

On-disk layout (extension ``.ddig``): magic ``DDIG``, version u16 LE,
dimension u32 LE, row count u32 LE, then a row-major payload of
``n x d`` 32-bit IEEE-754 LE floats.  Each file holds exactly one view
(full / object / background); a manifest in JSON Lines ties views of the
same dataset together by ``item_id``.

Items that have no object segmentation carry
``has_object_segmentation = false`` and have no row in the object view;
they still count in object-view precision denominators downstream.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    IoFailure,
    MagicMismatch,
    ManifestMismatch,
    NonFiniteValue,
    TruncatedPayload,
    VersionUnsupported,
)

MAGIC = b"DDIG"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHII")
HEADER_SIZE = _HEADER.size  # 14 bytes

VIEWS = ("full", "object", "background")
SPLITS = ("real", "generated")

_MANIFEST_KEYS = frozenset(
    ("item_id", "split", "region", "object_class", "view", "row_index",
     "has_object_segmentation")
)


@dataclass(frozen=True)
class EmbeddingRecord:
    """Metadata for one embedding row.

    ``row_index`` is the row's position inside its view's embedding file.
    """

    item_id: str
    split: str
    region: str
    object_class: str
    view: str
    row_index: int
    has_object_segmentation: bool

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestMismatch(
                f"invalid split {self.split!r} for item {self.item_id!r}")
        if self.view not in VIEWS:
            raise ManifestMismatch(
                f"invalid view {self.view!r} for item {self.item_id!r}")
        if self.row_index < 0:
            raise ManifestMismatch(
                f"negative row_index for item {self.item_id!r}")

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "split": self.split,
            "region": self.region,
            "object_class": self.object_class,
            "view": self.view,
            "row_index": self.row_index,
            "has_object_segmentation": self.has_object_segmentation,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EmbeddingRecord":
        if not isinstance(obj, dict) or not _MANIFEST_KEYS.issubset(obj):
            missing = _MANIFEST_KEYS - set(obj) if isinstance(obj, dict) else _MANIFEST_KEYS
            raise ManifestMismatch(
                f"manifest record missing keys: {sorted(missing)}")
        try:
            return cls(
                item_id=str(obj["item_id"]),
                split=str(obj["split"]),
                region=str(obj["region"]),
                object_class=str(obj["object_class"]),
                view=str(obj["view"]),
                row_index=int(obj["row_index"]),
                has_object_segmentation=bool(obj["has_object_segmentation"]),
            )
        except (TypeError, ValueError) as exc:
            raise ManifestMismatch(f"malformed manifest record: {exc}") from exc


@dataclass(frozen=True)
class SliceQuery:
    """Filter over an EmbeddingSet; ``view`` is mandatory, the rest optional."""

    view: str
    split: str | None = None
    region: str | None = None
    object_class: str | None = None

    def __post_init__(self):
        if self.view not in VIEWS:
            raise ManifestMismatch(f"invalid view {self.view!r} in slice query")

    def matches(self, rec: EmbeddingRecord) -> bool:
        if rec.view != self.view:
            return False
        if self.split is not None and rec.split != self.split:
            return False
        if self.region is not None and rec.region != self.region:
            return False
        if self.object_class is not None and rec.object_class != self.object_class:
            return False
        return True


class BalanceDeficit(NamedTuple):
    region: str
    object_class: str
    count: int


class EmbeddingSet:
    """A dense float32 matrix plus one metadata record per row.

    Rows may span several views (e.g. after merging the per-view files of
    one dataset).  Immutable after construction; the vector buffer is
    marked read-only so instances can be shared across workers.
    """

    def __init__(self, dimension: int, vectors: np.ndarray,
                 records: Sequence[EmbeddingRecord]):
        arr = np.ascontiguousarray(vectors, dtype=np.float32)
        if arr is vectors:
            arr = arr.copy()  # never freeze an array the caller still owns
        if arr.ndim != 2:
            arr = arr.reshape(len(records), dimension)
        self.dimension = int(dimension)
        self.vectors = arr
        self.records: tuple[EmbeddingRecord, ...] = tuple(records)
        self.vectors.flags.writeable = False
        self.validate()

    # -- invariants --------------------------------------------------------

    def validate(self) -> None:
        """Check all structural invariants; raises on the first violation."""
        if self.dimension <= 0:
            raise ManifestMismatch("dimension must be positive")
        n = len(self.records)
        if self.vectors.shape != (n, self.dimension):
            raise ManifestMismatch(
                f"vector matrix shape {self.vectors.shape} does not match "
                f"{n} records x dimension {self.dimension}")
        bad = np.flatnonzero(~np.isfinite(self.vectors).all(axis=1))
        if bad.size:
            raise NonFiniteValue(int(bad[0]))

        seen: set[tuple[str, str]] = set()
        seg_flag: dict[str, bool] = {}
        for rec in self.records:
            key = (rec.view, rec.item_id)
            if key in seen:
                raise ManifestMismatch(
                    f"duplicate item_id {rec.item_id!r} in view {rec.view!r}")
            seen.add(key)
            prev = seg_flag.setdefault(rec.item_id, rec.has_object_segmentation)
            if prev != rec.has_object_segmentation:
                raise ManifestMismatch(
                    f"inconsistent has_object_segmentation for item "
                    f"{rec.item_id!r}")
            if rec.view == "object" and not rec.has_object_segmentation:
                raise ManifestMismatch(
                    f"item {rec.item_id!r} has an object row but "
                    f"has_object_segmentation is false")

    # -- views and slicing -------------------------------------------------

    def __len__(self) -> int:
        return len(self.records)

    @property
    def views(self) -> tuple[str, ...]:
        present = {r.view for r in self.records}
        return tuple(v for v in VIEWS if v in present)

    def regions(self) -> tuple[str, ...]:
        return tuple(sorted({r.region for r in self.records}))

    def item_ids(self, region: str | None = None) -> set[str]:
        """Distinct item ids, optionally restricted to one region."""
        return {r.item_id for r in self.records
                if region is None or r.region == region}

    def slice(self, query: SliceQuery) -> "EmbeddingSet":
        """Subset matching the query; preserves row order; may be empty."""
        idx = [i for i, rec in enumerate(self.records) if query.matches(rec)]
        return EmbeddingSet(
            self.dimension,
            self.vectors[idx] if idx else np.empty((0, self.dimension), np.float32),
            [self.records[i] for i in idx],
        )

    def slice_by(self, view: str, split: str | None = None,
                 region: str | None = None,
                 object_class: str | None = None) -> "EmbeddingSet":
        return self.slice(SliceQuery(view=view, split=split, region=region,
                                     object_class=object_class))

    def compact(self) -> "EmbeddingSet":
        """Renumber row_index per view to the contiguous range the file
        format requires (needed before writing a sliced set)."""
        counters = {v: 0 for v in VIEWS}
        recs = []
        for rec in self.records:
            recs.append(replace(rec, row_index=counters[rec.view]))
            counters[rec.view] += 1
        return EmbeddingSet(self.dimension, self.vectors, recs)


def slice_set(dataset: EmbeddingSet, query: SliceQuery) -> EmbeddingSet:
    """Functional form of :meth:`EmbeddingSet.slice`."""
    return dataset.slice(query)


def validate_class_balance(dataset: EmbeddingSet,
                           min_per_cell: int) -> list[BalanceDeficit]:
    """Report every (region, object_class) cell with fewer than
    ``min_per_cell`` distinct items.

    The grid is the cross product of regions and classes observed anywhere
    in the set, so a class entirely missing from one region shows up with
    count 0.  Reports only; never re-balances.
    """
    regions = sorted({r.region for r in dataset.records})
    classes = sorted({r.object_class for r in dataset.records})
    counts: dict[tuple[str, str], set[str]] = {}
    for rec in dataset.records:
        counts.setdefault((rec.region, rec.object_class), set()).add(rec.item_id)
    deficits = []
    for region in regions:
        for cls in classes:
            n = len(counts.get((region, cls), ()))
            if n < min_per_cell:
                deficits.append(BalanceDeficit(region, cls, n))
    return deficits


# -- manifest I/O -----------------------------------------------------------


def read_manifest(path: str | Path) -> list[EmbeddingRecord]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestMismatch(
                f"{path} line {lineno}: invalid JSON: {exc}") from exc
        records.append(EmbeddingRecord.from_json(obj))
    return records


def write_manifest(records: Iterable[EmbeddingRecord], path: str | Path) -> None:
    path = Path(path)
    ordered = sorted(records, key=lambda r: (VIEWS.index(r.view), r.row_index))
    try:
        with io.open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in ordered:
                fh.write(json.dumps(rec.to_json(), sort_keys=False))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc


def _default_manifest_path(path: Path) -> Path:
    # foo.ddig -> foo.manifest.jsonl
    return path.with_suffix(".manifest.jsonl")


def _select_view_records(records: list[EmbeddingRecord], view: str | None,
                         where: str) -> tuple[str, list[EmbeddingRecord]]:
    present = sorted({r.view for r in records})
    if view is None:
        if len(present) == 1:
            view = present[0]
        else:
            raise ManifestMismatch(
                f"{where}: manifest holds views {present}; a view must be "
                f"specified")
    if view not in VIEWS:
        raise ManifestMismatch(f"{where}: unknown view {view!r}")
    return view, [r for r in records if r.view == view]


def _check_contiguous(records: list[EmbeddingRecord], n_rows: int,
                      where: str) -> list[EmbeddingRecord]:
    if len(records) != n_rows:
        raise ManifestMismatch(
            f"{where}: manifest has {len(records)} rows for this view but "
            f"the embedding file holds {n_rows}")
    ordered = sorted(records, key=lambda r: r.row_index)
    for expect, rec in enumerate(ordered):
        if rec.row_index != expect:
            raise ManifestMismatch(
                f"{where}: row_index values are not the contiguous range "
                f"0..{n_rows - 1} (found {rec.row_index} at position {expect})")
    return ordered


def _read_payload(path: Path) -> tuple[int, np.ndarray]:
    """Parse one .ddig file; returns (dimension, float32 matrix)."""
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < HEADER_SIZE or raw[:4] != MAGIC:
        raise MagicMismatch(f"{path}: not a DDIG file")
    _, version, dim, n_rows = _HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"{path}: version {version} (expected "
                                 f"{FORMAT_VERSION})")
    if dim == 0:
        raise ManifestMismatch(f"{path}: header dimension must be positive")
    expected = n_rows * dim * 4
    actual = len(raw) - HEADER_SIZE
    if actual != expected:
        raise TruncatedPayload(
            f"{path}: payload is {actual} bytes, header implies {expected} "
            f"({n_rows} rows x {dim} x 4)")
    vectors = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE).reshape(n_rows, dim)
    bad = np.flatnonzero(~np.isfinite(vectors).all(axis=1))
    if bad.size:
        raise NonFiniteValue(int(bad[0]), f"{path}: non-finite value at row {int(bad[0])}")
    return int(dim), vectors


def read_embedding_file(path: str | Path, manifest_path: str | Path | None = None,
                        view: str | None = None) -> EmbeddingSet:
    """Read one view's embedding file plus its manifest rows.

    ``manifest_path`` defaults to the ``.manifest.jsonl`` sidecar.  When the
    manifest covers several views, ``view`` selects which one this file is.
    """
    path = Path(path)
    dim, vectors = _read_payload(path)
    manifest_path = Path(manifest_path) if manifest_path else _default_manifest_path(path)
    if not manifest_path.exists():
        raise ManifestMismatch(f"manifest not found: {manifest_path}")
    records = read_manifest(manifest_path)
    view, view_records = _select_view_records(records, view, str(path))
    ordered = _check_contiguous(view_records, vectors.shape[0], str(path))
    return EmbeddingSet(dim, vectors, ordered)


def write_embedding_file(dataset: EmbeddingSet, path: str | Path,
                         manifest_path: str | Path | None = None) -> None:
    """Write a single-view set; round-trips bit-exactly through
    :func:`read_embedding_file`."""
    dataset.validate()
    if len(dataset.views) > 1:
        raise ValueError("write_embedding_file takes a single-view set; "
                         "use write_dataset for merged sets")
    path = Path(path)
    n = len(dataset)
    _check_contiguous(list(dataset.records), n, str(path))
    ordered = sorted(range(n), key=lambda i: dataset.records[i].row_index)
    payload = np.ascontiguousarray(dataset.vectors[ordered], dtype="<f4")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, dataset.dimension, n)
    try:
        path.write_bytes(header + payload.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    manifest_path = Path(manifest_path) if manifest_path else _default_manifest_path(path)
    write_manifest(dataset.records, manifest_path)


def load_dataset(manifest_path: str | Path, *, full: str | Path,
                 object: str | Path, background: str | Path) -> EmbeddingSet:
    """Merge the three per-view files of one dataset under a shared manifest."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise ManifestMismatch(f"manifest not found: {manifest_path}")
    records = read_manifest(manifest_path)
    paths = {"full": Path(full), "object": Path(object),
             "background": Path(background)}
    dim = None
    mats, recs = [], []
    for view in VIEWS:
        view_records = [r for r in records if r.view == view]
        d, vectors = _read_payload(paths[view])
        if dim is None:
            dim = d
        elif d != dim:
            raise ManifestMismatch(
                f"{paths[view]}: dimension {d} differs from other views ({dim})")
        ordered = _check_contiguous(view_records, vectors.shape[0], str(paths[view]))
        mats.append(vectors)
        recs.extend(ordered)
    leftover = {r.view for r in records} - set(VIEWS)
    if leftover:
        raise ManifestMismatch(f"manifest has records for unknown views {sorted(leftover)}")
    return EmbeddingSet(dim, np.vstack(mats), recs)


def write_dataset(dataset: EmbeddingSet, directory: str | Path,
                  stem: str) -> dict[str, Path]:
    """Write one ``.ddig`` file per view plus a shared manifest.

    Returns the written paths keyed by view name plus ``"manifest"``.
    """
    dataset.validate()
    directory = Path(directory)
    out: dict[str, Path] = {}
    for view in dataset.views:
        sub = dataset.slice(SliceQuery(view=view))
        n = len(sub)
        _check_contiguous(list(sub.records), n, f"{stem}.{view}")
        ordered = sorted(range(n), key=lambda i: sub.records[i].row_index)
        payload = np.ascontiguousarray(sub.vectors[ordered], dtype="<f4")
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, dataset.dimension, n)
        path = directory / f"{stem}.{view}.ddig"
        try:
            path.write_bytes(header + payload.tobytes())
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        out[view] = path
    manifest = directory / f"{stem}.manifest.jsonl"
    write_manifest(dataset.records, manifest)
    out["manifest"] = manifest
    return out
