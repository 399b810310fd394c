"""Region-disaggregated metric runs, disparity statistics, failure-mode
mining, and comparison of two runs.

A run evaluates generated embeddings against real ones per (region, view)
cell.  Object-view precision denominators count every generated item in
the region, including items with no object segmentation (and therefore no
object row); full and background views count embedded rows, which by
construction include every item.

Failure modes are cross-view membership predicates evaluated per item:

* low_diversity_background: a real item covered in the object and full
  views but not in the background view.
* low_diversity_object: a real item covered in the background view but in
  neither the object nor the full view.
* low_realism_background: a generated item whose background embedding
  falls inside zero real hyperspheres.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .embedstore import VIEWS, EmbeddingSet, SliceQuery
from .errors import ConfigMismatch, DimensionMismatch, SingleRegion, TooFewPoints
from .manifold import (
    DEFAULT_K,
    MetricResult,
    build_manifold,
    compute_metrics,
    membership_profile,
)

GROUP_KEYS = ("region", "object_class")

FAILURE_MODES = (
    "low_diversity_background",
    "low_diversity_object",
    "low_realism_background",
)

COMPARISON_COLUMNS = (
    "avg_precision", "worst_precision", "avg_coverage", "worst_coverage",
)

# Table layout order for comparison output; report cells themselves use
# the canonical full/object/background order.
COMPARISON_VIEW_ORDER = ("object", "background", "full")

REPORT_FORMAT = "ddig-run-report"
REPORT_VERSION = 1


@dataclass(frozen=True)
class SkippedCell:
    region: str
    view: str
    reason: str


@dataclass(frozen=True)
class RunReport:
    """Per-(region, view) metric table for one evaluation run."""

    run_id: str
    prompt_template: str
    k: int
    cells: dict[tuple[str, str], MetricResult]
    per_real_max: dict[tuple[str, str], int]
    skipped: tuple[SkippedCell, ...]
    views: tuple[str, ...]
    group_by: str = "region"
    distance_metric: str = "euclidean"
    normalized: bool = False
    class_list: tuple[str, ...] = ()

    def regions(self) -> tuple[str, ...]:
        return tuple(sorted({region for region, _ in self.cells}))

    def view_regions(self, view: str) -> tuple[str, ...]:
        return tuple(sorted(r for r, v in self.cells if v == view))

    def averages(self) -> dict[str, tuple[float, float]]:
        """Unweighted per-view means of precision and coverage over regions."""
        out = {}
        for view in self.views:
            cells = [self.cells[(r, view)] for r in self.view_regions(view)]
            if cells:
                out[view] = (
                    sum(c.precision for c in cells) / len(cells),
                    sum(c.coverage for c in cells) / len(cells),
                )
        return out


@dataclass(frozen=True)
class CellMembership:
    """Per-item membership indicators for one (region, view) cell."""

    region: str
    view: str
    ref_item_ids: tuple[str, ...]
    gen_item_ids: tuple[str, ...]
    ref_covered: np.ndarray
    gen_inside: np.ndarray


@dataclass(frozen=True)
class RunMembership:
    """Everything mining needs: indicators per cell plus item metadata."""

    cells: dict[tuple[str, str], CellMembership]
    real_meta: dict[str, tuple[str, str]]  # item_id -> (region, object_class)
    gen_meta: dict[str, tuple[str, str]]

    def real_covered(self, item_id: str) -> dict[str, bool]:
        """Covered flag per view for one real item (views where it has a row)."""
        region = self.real_meta[item_id][0]
        out = {}
        for view in VIEWS:
            cell = self.cells.get((region, view))
            if cell is None:
                continue
            try:
                idx = cell.ref_item_ids.index(item_id)
            except ValueError:
                continue
            out[view] = bool(cell.ref_covered[idx])
        return out

    def gen_inside(self, item_id: str, view: str) -> bool | None:
        region = self.gen_meta[item_id][0]
        cell = self.cells.get((region, view))
        if cell is None:
            return None
        try:
            idx = cell.gen_item_ids.index(item_id)
        except ValueError:
            return None
        return bool(cell.gen_inside[idx])


def _group_value(rec, group_by: str) -> str:
    return getattr(rec, group_by)


def compute_run_details(real: EmbeddingSet, generated: EmbeddingSet,
                        k: int = DEFAULT_K,
                        views: Sequence[str] | None = None,
                        group_by: str = "region",
                        prompt_template: str = "",
                        run_id: str = "run") -> tuple[RunReport, RunMembership]:
    """Compute the full metric table plus the membership indicators that
    the failure-mode miners consume."""
    if group_by not in GROUP_KEYS:
        raise ConfigMismatch(f"group_by must be one of {GROUP_KEYS}, got "
                             f"{group_by!r}")
    views = tuple(v for v in VIEWS if v in (views or VIEWS))
    if not views:
        raise ConfigMismatch("no valid views requested")
    if real.dimension != generated.dimension:
        raise DimensionMismatch(
            f"real dimension {real.dimension} != generated dimension "
            f"{generated.dimension}")

    real_groups = {_group_value(r, group_by) for r in real.records}
    gen_groups = sorted({_group_value(r, group_by) for r in generated.records})
    missing = sorted(set(gen_groups) - real_groups)
    if missing:
        raise ConfigMismatch(
            f"groups present in generated but absent from real: {missing}")

    # item universe per group drives the object-view precision denominator
    universe: dict[str, set[str]] = {}
    for rec in generated.records:
        universe.setdefault(_group_value(rec, group_by), set()).add(rec.item_id)

    cells: dict[tuple[str, str], MetricResult] = {}
    per_real_max: dict[tuple[str, str], int] = {}
    memberships: dict[tuple[str, str], CellMembership] = {}
    skipped: list[SkippedCell] = []

    for group in gen_groups:
        for view in views:
            real_slice = real.slice(SliceQuery(view=view, **{group_by: group}))
            gen_slice = generated.slice(SliceQuery(view=view, **{group_by: group}))
            if view == "object":
                n_total = len(universe[group])
            else:
                n_total = len(gen_slice)
            if n_total == 0:
                skipped.append(SkippedCell(group, view, "no generated rows"))
                continue
            try:
                manifold = build_manifold(real_slice, k=k)
            except TooFewPoints as exc:
                skipped.append(SkippedCell(group, view, exc.oneline()))
                continue
            profile = membership_profile(manifold, gen_slice)
            metrics = compute_metrics(manifold, gen_slice, n_total, profile)
            key = (group, view)
            cells[key] = metrics
            per_real_max[key] = (int(profile.per_ref_counts.max())
                                 if len(gen_slice) else 0)
            memberships[key] = CellMembership(
                region=group,
                view=view,
                ref_item_ids=tuple(r.item_id for r in real_slice.records),
                gen_item_ids=tuple(r.item_id for r in gen_slice.records),
                ref_covered=profile.ref_covered,
                gen_inside=profile.gen_inside,
            )

    # real-only groups are reported, never silently dropped
    for group in sorted(real_groups - set(gen_groups)):
        skipped.append(SkippedCell(group, "*", "no generated items in group"))

    class_list = tuple(sorted({r.object_class for r in real.records}
                              | {r.object_class for r in generated.records}))
    report = RunReport(
        run_id=run_id,
        prompt_template=prompt_template,
        k=k,
        cells=cells,
        per_real_max=per_real_max,
        skipped=tuple(skipped),
        views=views,
        group_by=group_by,
        class_list=class_list,
    )
    membership = RunMembership(
        cells=memberships,
        real_meta={r.item_id: (_group_value(r, group_by), r.object_class)
                   for r in real.records},
        gen_meta={r.item_id: (_group_value(r, group_by), r.object_class)
                  for r in generated.records},
    )
    return report, membership


def compute_run(real: EmbeddingSet, generated: EmbeddingSet,
                k: int = DEFAULT_K, views: Sequence[str] | None = None,
                group_by: str = "region", prompt_template: str = "",
                run_id: str = "run") -> RunReport:
    report, _ = compute_run_details(real, generated, k=k, views=views,
                                    group_by=group_by,
                                    prompt_template=prompt_template,
                                    run_id=run_id)
    return report


# -- disparity statistics ----------------------------------------------------


@dataclass(frozen=True)
class MetricSpread:
    """Best/worst region spread of one metric within one view."""

    metric: str
    best_region: str
    worst_region: str
    best_value: float
    worst_value: float
    mean: float
    span: float
    ratio: float  # best / worst; inf when the worst region scored 0


@dataclass(frozen=True)
class DisparityStats:
    per_view: dict[str, dict[str, MetricSpread]]


def _spread(metric: str, values: list[tuple[str, float]]) -> MetricSpread:
    # ties resolve to the lexicographically first region name
    best_region, best = values[0]
    worst_region, worst = values[0]
    for region, value in values[1:]:
        if value > best:
            best_region, best = region, value
        if value < worst:
            worst_region, worst = region, value
    return MetricSpread(
        metric=metric,
        best_region=best_region,
        worst_region=worst_region,
        best_value=best,
        worst_value=worst,
        mean=sum(v for _, v in values) / len(values),
        span=best - worst,
        ratio=(best / worst) if worst > 0 else math.inf,
    )


def disparity_stats(report: RunReport) -> DisparityStats:
    """Worst/best region, mean, span, and best/worst ratio per view and
    metric.  Requires at least two regions."""
    if len(report.regions()) < 2:
        raise SingleRegion(
            f"disparity statistics need >= 2 regions, report has "
            f"{list(report.regions())}")
    per_view: dict[str, dict[str, MetricSpread]] = {}
    for view in report.views:
        regions = report.view_regions(view)
        if len(regions) < 2:
            continue
        cells = [(r, report.cells[(r, view)]) for r in regions]
        per_view[view] = {
            "precision": _spread("precision",
                                 [(r, c.precision) for r, c in cells]),
            "coverage": _spread("coverage",
                                [(r, c.coverage) for r, c in cells]),
        }
    return DisparityStats(per_view=per_view)


# -- failure-mode mining -----------------------------------------------------


@dataclass(frozen=True)
class FailureModeHit:
    mode: str
    item_id: str
    region: str
    object_class: str
    witness: dict

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "item_id": self.item_id,
            "region": self.region,
            "object_class": self.object_class,
            "witness": self.witness,
        }


def classify_low_diversity(covered_object: bool, covered_full: bool,
                           covered_background: bool) -> str | None:
    """Cross-view coverage predicate for the two low-diversity modes."""
    if covered_object and covered_full and not covered_background:
        return "low_diversity_background"
    if covered_background and not covered_object and not covered_full:
        return "low_diversity_object"
    return None


def mine_low_diversity(membership: RunMembership,
                       item_id: str) -> FailureModeHit | None:
    """Evaluate one real item; requires indicators in all three views."""
    covered = membership.real_covered(item_id)
    if set(covered) != set(VIEWS):
        return None
    mode = classify_low_diversity(covered["object"], covered["full"],
                                  covered["background"])
    if mode is None:
        return None
    region, object_class = membership.real_meta[item_id]
    return FailureModeHit(
        mode=mode,
        item_id=item_id,
        region=region,
        object_class=object_class,
        witness={
            "covered_object": covered["object"],
            "covered_full": covered["full"],
            "covered_background": covered["background"],
        },
    )


def mine_low_realism(membership: RunMembership,
                     item_id: str) -> FailureModeHit | None:
    """Evaluate one generated item in the background view: hit iff its
    embedding lies inside zero real hyperspheres."""
    inside = membership.gen_inside(item_id, "background")
    if inside is None or inside:
        return None
    region, object_class = membership.gen_meta[item_id]
    return FailureModeHit(
        mode="low_realism_background",
        item_id=item_id,
        region=region,
        object_class=object_class,
        witness={"generated_item_id": item_id},
    )


def mine_failure_modes(membership: RunMembership,
                       modes: Iterable[str] = FAILURE_MODES) -> list[FailureModeHit]:
    """Exhaustive mining over every item; hits sorted by
    (region, object_class, item_id)."""
    modes = set(modes)
    unknown = modes - set(FAILURE_MODES)
    if unknown:
        raise ConfigMismatch(f"unknown failure modes {sorted(unknown)}")
    hits: list[FailureModeHit] = []
    if modes & {"low_diversity_background", "low_diversity_object"}:
        for item_id in membership.real_meta:
            hit = mine_low_diversity(membership, item_id)
            if hit is not None and hit.mode in modes:
                hits.append(hit)
    if "low_realism_background" in modes:
        for item_id in membership.gen_meta:
            hit = mine_low_realism(membership, item_id)
            if hit is not None:
                hits.append(hit)
    hits.sort(key=lambda h: (h.region, h.object_class, h.item_id))
    return hits


def sample_hits(hits: Sequence[FailureModeHit], n: int,
                seed: int) -> list[FailureModeHit]:
    """Seeded subsample for qualitative inspection; deterministic."""
    ordered = sorted(hits, key=lambda h: (h.region, h.object_class, h.item_id,
                                          h.mode))
    if n >= len(ordered):
        return list(ordered)
    return random.Random(seed).sample(ordered, n)


# -- run comparison ----------------------------------------------------------


def round_half_away_from_zero(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class ComparisonEntry:
    view: str
    column: str
    original: float
    new: float
    delta: float
    delta_pct: int | None           # None when the original value is 0
    worst_region_original: str | None = None
    worst_region_new: str | None = None


@dataclass(frozen=True)
class ComparisonTable:
    k: int
    views: tuple[str, ...]
    regions: tuple[str, ...]
    original_run_id: str
    new_run_id: str
    entries: tuple[ComparisonEntry, ...]

    def entry(self, view: str, column: str) -> ComparisonEntry:
        for e in self.entries:
            if e.view == view and e.column == column:
                return e
        raise KeyError((view, column))


def _column_value(report: RunReport, view: str,
                  column: str) -> tuple[float, str | None]:
    regions = report.view_regions(view)
    metric = "precision" if "precision" in column else "coverage"
    values = [(r, getattr(report.cells[(r, view)], metric)) for r in regions]
    if column.startswith("avg_"):
        return sum(v for _, v in values) / len(values), None
    worst_region, worst = values[0]
    for region, value in values[1:]:
        if value < worst:
            worst_region, worst = region, value
    return worst, worst_region


def compare_runs(original: RunReport, new: RunReport) -> ComparisonTable:
    """Per view: average and worst-region precision and coverage for both
    runs, with absolute and whole-percent deltas (new relative to original).

    Both runs must share the full metric protocol; any config difference is
    a ConfigMismatch.
    """
    for attr in ("k", "views", "group_by", "distance_metric", "normalized",
                 "class_list"):
        a, b = getattr(original, attr), getattr(new, attr)
        if a != b:
            raise ConfigMismatch(f"runs differ in {attr}: {a!r} vs {b!r}")
    if original.regions() != new.regions():
        raise ConfigMismatch(
            f"runs cover different regions: {list(original.regions())} vs "
            f"{list(new.regions())}")
    for view in original.views:
        if original.view_regions(view) != new.view_regions(view):
            raise ConfigMismatch(
                f"view {view!r} has different region cells in the two runs")

    entries = []
    view_order = [v for v in COMPARISON_VIEW_ORDER if v in original.views]
    for view in view_order:
        if not original.view_regions(view):
            continue
        for column in COMPARISON_COLUMNS:
            orig_value, orig_worst = _column_value(original, view, column)
            new_value, new_worst = _column_value(new, view, column)
            delta = new_value - orig_value
            pct = (round_half_away_from_zero(100.0 * delta / orig_value)
                   if orig_value != 0 else None)
            entries.append(ComparisonEntry(
                view=view,
                column=column,
                original=orig_value,
                new=new_value,
                delta=delta,
                delta_pct=pct,
                worst_region_original=orig_worst,
                worst_region_new=new_worst,
            ))
    return ComparisonTable(
        k=original.k,
        views=tuple(view_order),
        regions=original.regions(),
        original_run_id=original.run_id,
        new_run_id=new.run_id,
        entries=tuple(entries),
    )


# -- serialization -----------------------------------------------------------


def report_to_json(report: RunReport) -> dict:
    cells = []
    for region, view in sorted(report.cells,
                               key=lambda k: (k[0], VIEWS.index(k[1]))):
        m = report.cells[(region, view)]
        cells.append({
            "region": region,
            "view": view,
            "precision": m.precision,
            "coverage": m.coverage,
            "n_real": m.n_real,
            "n_generated_total": m.n_generated_total,
            "n_generated_embedded": m.n_generated_embedded,
            "inside_count": m.inside_count,
            "covered_count": m.covered_count,
            "generated_per_real_max": report.per_real_max.get((region, view), 0),
        })
    averages = [
        {"view": view, "precision": p, "coverage": c}
        for view, (p, c) in report.averages().items()
    ]
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "run_id": report.run_id,
        "prompt_template": report.prompt_template,
        "k": report.k,
        "group_by": report.group_by,
        "views": list(report.views),
        "config": {
            "distance_metric": report.distance_metric,
            "normalized": report.normalized,
            "boundary": "inclusive",
            "class_list": list(report.class_list),
        },
        "cells": cells,
        "averages": averages,
        "skipped": [
            {"region": s.region, "view": s.view, "reason": s.reason}
            for s in report.skipped
        ],
    }


def report_dumps(report: RunReport) -> str:
    return json.dumps(report_to_json(report), indent=2) + "\n"


def report_from_json(obj: dict) -> RunReport:
    if obj.get("format") != REPORT_FORMAT:
        raise ConfigMismatch("not a run report (missing format marker)")
    if obj.get("version") != REPORT_VERSION:
        raise ConfigMismatch(f"unsupported report version {obj.get('version')}")
    cells: dict[tuple[str, str], MetricResult] = {}
    per_real_max: dict[tuple[str, str], int] = {}
    for cell in obj["cells"]:
        key = (cell["region"], cell["view"])
        m = MetricResult(
            precision=float(cell["precision"]),
            coverage=float(cell["coverage"]),
            n_generated_total=int(cell["n_generated_total"]),
            n_generated_embedded=int(cell["n_generated_embedded"]),
            n_real=int(cell["n_real"]),
            inside_count=int(cell["inside_count"]),
            covered_count=int(cell["covered_count"]),
        )
        if m.precision != m.inside_count / m.n_generated_total:
            raise ConfigMismatch(
                f"cell {key}: precision {m.precision} inconsistent with "
                f"counts {m.inside_count}/{m.n_generated_total}")
        if m.coverage != m.covered_count / m.n_real:
            raise ConfigMismatch(
                f"cell {key}: coverage {m.coverage} inconsistent with "
                f"counts {m.covered_count}/{m.n_real}")
        cells[key] = m
        per_real_max[key] = int(cell.get("generated_per_real_max", 0))
    config = obj.get("config", {})
    return RunReport(
        run_id=str(obj["run_id"]),
        prompt_template=str(obj.get("prompt_template", "")),
        k=int(obj["k"]),
        cells=cells,
        per_real_max=per_real_max,
        skipped=tuple(SkippedCell(s["region"], s["view"], s["reason"])
                      for s in obj.get("skipped", ())),
        views=tuple(obj["views"]),
        group_by=str(obj.get("group_by", "region")),
        distance_metric=str(config.get("distance_metric", "euclidean")),
        normalized=bool(config.get("normalized", False)),
        class_list=tuple(config.get("class_list", ())),
    )


def comparison_to_json(table: ComparisonTable) -> dict:
    return {
        "format": "ddig-comparison",
        "version": 1,
        "k": table.k,
        "views": list(table.views),
        "regions": list(table.regions),
        "original_run_id": table.original_run_id,
        "new_run_id": table.new_run_id,
        "entries": [
            {
                "view": e.view,
                "column": e.column,
                "original": e.original,
                "new": e.new,
                "delta": e.delta,
                "delta_pct": e.delta_pct,
                "worst_region_original": e.worst_region_original,
                "worst_region_new": e.worst_region_new,
            }
            for e in table.entries
        ],
    }


def comparison_to_csv(table: ComparisonTable) -> str:
    """Four-row table (Orig/New/Delta/Delta%), one column per
    view x {avg precision, worst precision, avg coverage, worst coverage}."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["row"] + [f"{view}:{column}" for view in table.views
                        for column in COMPARISON_COLUMNS]
    writer.writerow(header)
    by_key = {(e.view, e.column): e for e in table.entries}
    rows = (
        ("Orig", lambda e: f"{e.original:.3f}"),
        ("New", lambda e: f"{e.new:.3f}"),
        ("Delta", lambda e: f"{e.delta:.3f}"),
        ("Delta%", lambda e: "" if e.delta_pct is None else f"{e.delta_pct}%"),
    )
    for label, fmt in rows:
        writer.writerow([label] + [fmt(by_key[(v, c)]) for v in table.views
                                   for c in COMPARISON_COLUMNS])
    return buf.getvalue()
