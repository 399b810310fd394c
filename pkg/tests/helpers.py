"""Shared builders for synthetic datasets used across the test modules."""

from __future__ import annotations

import numpy as np

from ddig import VIEWS, EmbeddingRecord, EmbeddingSet
from ddig.analysis import RunReport
from ddig.manifold import MetricResult


class DatasetBuilder:
    """Accumulates (record, row) pairs and assembles an EmbeddingSet with
    per-view contiguous row indices."""

    def __init__(self, split: str, dimension: int):
        self.split = split
        self.dimension = dimension
        self.rows: list[np.ndarray] = []
        self.records: list[EmbeddingRecord] = []
        self._next = {view: 0 for view in VIEWS}

    def add_item(self, item_id: str, region: str, object_class: str,
                 vectors: dict[str, np.ndarray],
                 has_segmentation: bool = True) -> None:
        views = [v for v in VIEWS if v in vectors]
        if not has_segmentation and "object" in views:
            raise ValueError("unsegmented item cannot carry an object row")
        for view in views:
            self.records.append(EmbeddingRecord(
                item_id=item_id,
                split=self.split,
                region=region,
                object_class=object_class,
                view=view,
                row_index=self._next[view],
                has_object_segmentation=has_segmentation,
            ))
            self._next[view] += 1
            self.rows.append(np.asarray(vectors[view], dtype=np.float32))

    def build(self) -> EmbeddingSet:
        if self.rows:
            matrix = np.stack(self.rows).astype(np.float32)
        else:
            matrix = np.zeros((0, self.dimension), np.float32)
        return EmbeddingSet(self.dimension, matrix, self.records)


def same_vector_dataset(split: str, region_points: dict[str, np.ndarray],
                        object_class: str = "bag",
                        unsegmented: dict[str, int] | None = None) -> EmbeddingSet:
    """One item per point, identical vector in all three views.

    ``unsegmented[region]`` marks that many leading items per region as
    having no object segmentation (no object row).
    """
    unsegmented = unsegmented or {}
    b = DatasetBuilder(split, next(iter(region_points.values())).shape[1])
    for region in sorted(region_points):
        points = region_points[region]
        drop = unsegmented.get(region, 0)
        for i, p in enumerate(points):
            has_seg = i >= drop
            vectors = {"full": p, "background": p}
            if has_seg:
                vectors["object"] = p
            b.add_item(f"{split}-{region}-{i:04d}", region, object_class,
                       vectors, has_segmentation=has_seg)
    return b.build()


def make_report(cells, views=VIEWS, k=3, run_id="run", **overrides):
    """RunReport from {(region, view): (precision_counts, coverage_counts)}
    where each counts pair is (numerator, denominator)."""
    metric_cells = {}
    for key, ((ins, total), (cov, n_real)) in cells.items():
        metric_cells[key] = MetricResult(
            precision=ins / total,
            coverage=cov / n_real,
            n_generated_total=total,
            n_generated_embedded=total,
            n_real=n_real,
            inside_count=ins,
            covered_count=cov,
        )
    fields = dict(
        run_id=run_id,
        prompt_template="",
        k=k,
        cells=metric_cells,
        per_real_max={key: 1 for key in metric_cells},
        skipped=(),
        views=tuple(views),
        class_list=("bag", "cab"),
    )
    fields.update(overrides)
    return RunReport(**fields)


REGIONS_6 = ("Africa", "EastAsia", "Europe", "LatAm", "NorthAm", "Oceania")


def six_region_report(run_id, bg_coverage_counts, n_real, precision_counts):
    """Report over six regions and all views; background coverage is the
    per-region variable, everything else is flat."""
    ins, total = precision_counts
    cells = {}
    for region, cov in zip(REGIONS_6, bg_coverage_counts):
        for view in VIEWS:
            covered = cov if view == "background" else n_real // 2
            cells[(region, view)] = ((ins, total), (covered, n_real))
    return make_report(cells, run_id=run_id)


def planted_mining_sets() -> tuple[EmbeddingSet, EmbeddingSet]:
    """Planted cross-view coverage pattern on a 1-d embedding space.

    Real items sit in pairs (10j, 10j+1) so every k=1 radius is exactly 1.
    A generated point at pair_edge +- 0.4 covers exactly one real item.
    Planted outcomes at k=1:

    * r0 covered in object and full, not background -> low_diversity_background
    * r2 covered only in background                 -> low_diversity_object
    * g3, g4 background rows at ~5000, never inside -> low_realism_background
    * r1, r3 covered everywhere; r4 nowhere; r5 object-only; r6, r7
      unsegmented: all negative controls.
    """
    real_b = DatasetBuilder("real", 1)
    classes = {"r0": "cow", "r2": "bag"}
    for j in range(8):
        item = f"r{j}"
        base = 10.0 * (j // 2) + (j % 2)
        segmented = item not in ("r6", "r7")
        vectors = {"full": [base], "background": [base]}
        if segmented:
            vectors["object"] = [base]
        real_b.add_item(item, "R", classes.get(item, "misc"), vectors,
                        has_segmentation=segmented)

    gen_b = DatasetBuilder("generated", 1)
    placements = {
        # item: (full, object, background); None = no object row
        "g0": (-0.4, -0.4, 1.4),
        "g1": (1.4, 1.4, 9.6),
        "g2": (11.4, 11.4, 11.4),
        "g3": (5000.0, 21.4, 5000.0),
        "g4": (6000.0, None, 6000.0),
    }
    gen_classes = {"g3": "auto", "g4": "zebu"}
    for item, (full, obj, bg) in placements.items():
        vectors = {"full": [full], "background": [bg]}
        if obj is not None:
            vectors["object"] = [obj]
        gen_b.add_item(item, "R", gen_classes.get(item, "misc"), vectors,
                       has_segmentation=obj is not None)
    return real_b.build(), gen_b.build()


def mode_cloud(rng: np.random.Generator, centers: np.ndarray, per_mode: int,
               scale: float = 0.05) -> np.ndarray:
    """Tight Gaussian blob of ``per_mode`` points around each center."""
    parts = [c + rng.normal(scale=scale, size=(per_mode, centers.shape[1]))
             for c in centers]
    return np.concatenate(parts).astype(np.float32)


def disparity_fixture(seed: int = 424242, per_region: int = 500, d: int = 8):
    """Two-region Gaussian-mode construction.

    Real data: 4 well-separated modes per region, ``per_region`` points,
    identical vectors across views.  Generated object/full views sample
    the same modes as the real data in both regions.  Background-view
    generated points sit within a small perturbation of real points, but
    region B only ever lands near the first 2 of the 4 modes.  Real
    points in a dropped mode are then never covered, so B's background
    coverage is close to exactly half of A's (ratio near 2) while object
    coverage stays comparable across regions.
    """
    rng = np.random.default_rng(seed)
    per_mode = per_region // 4
    real_b = DatasetBuilder("real", d)
    gen_b = DatasetBuilder("generated", d)
    for region in ("RegionA", "RegionB"):
        centers = rng.normal(size=(4, d)) * 3.0
        real_pts = mode_cloud(rng, centers, per_mode)
        gen_all = mode_cloud(rng, centers, per_mode)
        if region == "RegionB":
            anchors = np.tile(real_pts[: per_mode * 2], (2, 1))
        else:
            anchors = real_pts
        gen_bg = (anchors + rng.normal(scale=0.01, size=anchors.shape)
                  ).astype(np.float32)
        for i in range(per_mode * 4):
            real_b.add_item(f"real-{region}-{i:04d}", region, "bag",
                            {"full": real_pts[i], "object": real_pts[i],
                             "background": real_pts[i]})
            gen_b.add_item(f"generated-{region}-{i:04d}", region, "bag",
                           {"full": gen_all[i], "object": gen_all[i],
                            "background": gen_bg[i]})
    return real_b.build(), gen_b.build()
