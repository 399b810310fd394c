"""Command-line front end.

Commands
  compute    evaluate generated embeddings against real ones, write a report
  mine       list items matching a failure-mode predicate
  compare    diff two run reports (Orig/New/Delta/Delta% table)
  partition  turn a segmentation mask into an attention-mask spec
  validate   structural checks on embedding files, optional balance audit

Exit codes: 0 success, 2 usage/config, 3 data format, 4 computation.
All errors print a single line to stderr: ``error: <Name>: <detail>``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    FAILURE_MODES,
    compare_runs,
    comparison_to_csv,
    comparison_to_json,
    compute_run_details,
    mine_failure_modes,
    report_dumps,
    report_from_json,
    report_to_json,
    sample_hits,
)
from .decompose import partition_mask, read_pgm, to_attention_spec
from .embedstore import VIEWS, load_dataset, validate_class_balance
from .errors import (
    ConfigError,
    ConfigMismatch,
    DataFormatError,
    DdigError,
    ManifestNotFound,
)

_DATASET_KEYS = ("full", "object", "background", "manifest")


def _dataset_paths(prefix: str) -> dict[str, Path]:
    """Expand a prefix into the conventional four-file layout:
    ``{prefix}.{view}.ddig`` plus ``{prefix}.manifest.jsonl``."""
    base = Path(prefix)
    paths = {view: base.with_name(f"{base.name}.{view}.ddig") for view in VIEWS}
    paths["manifest"] = base.with_name(f"{base.name}.manifest.jsonl")
    return paths


def _add_split_args(parser: argparse.ArgumentParser, split: str) -> None:
    group = parser.add_argument_group(f"{split} inputs")
    group.add_argument(f"--{split}", metavar="PREFIX",
                       help=f"path prefix for the {split} dataset "
                            "(expands to PREFIX.<view>.ddig + "
                            "PREFIX.manifest.jsonl)")
    for key in _DATASET_KEYS:
        suffix = "manifest.jsonl" if key == "manifest" else f"{key}.ddig"
        group.add_argument(f"--{split}-{key}", metavar="PATH",
                           help=f"explicit {split} {suffix} path")


def _resolve_split(args: argparse.Namespace, split: str) -> dict[str, Path]:
    prefix = getattr(args, split)
    explicit = {key: getattr(args, f"{split}_{key}") for key in _DATASET_KEYS}
    if prefix and any(explicit.values()):
        raise ConfigError(f"--{split} and --{split}-* flags are mutually "
                          "exclusive")
    if prefix:
        paths = _dataset_paths(prefix)
    else:
        missing = [key for key, value in explicit.items() if not value]
        if len(missing) == len(_DATASET_KEYS):
            raise ConfigError(f"no {split} inputs given (use --{split} PREFIX "
                              f"or the --{split}-* flags)")
        if missing:
            raise ConfigError(f"incomplete {split} inputs, missing: "
                              + ", ".join(f"--{split}-{key}" for key in missing))
        paths = {key: Path(value) for key, value in explicit.items()}
    if not paths["manifest"].exists():
        raise ManifestNotFound(f"manifest not found: {paths['manifest']}")
    for key in VIEWS:
        if not paths[key].exists():
            raise ConfigError(f"{split} {key} file not found: {paths[key]}")
    return paths


def _load_split(args: argparse.Namespace, split: str):
    paths = _resolve_split(args, split)
    return paths, load_dataset(paths["manifest"], full=paths["full"],
                               object=paths["object"],
                               background=paths["background"])


def _parse_views(value: str | None) -> tuple[str, ...] | None:
    if value is None:
        return None
    requested = [v.strip() for v in value.split(",") if v.strip()]
    unknown = [v for v in requested if v not in VIEWS]
    if unknown:
        raise ConfigError(f"unknown views {unknown}; valid: {list(VIEWS)}")
    if not requested:
        raise ConfigError("--views given but empty")
    return tuple(v for v in VIEWS if v in requested)


def _check_k(k: int) -> int:
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    return k


def _default_run_id(args: argparse.Namespace,
                    path_groups: list[dict[str, Path]]) -> str:
    """Content hash of all inputs and settings; no paths, no timestamps,
    so identical inputs name the run identically anywhere."""
    h = hashlib.sha256()
    for paths in path_groups:
        for key in _DATASET_KEYS:
            h.update(hashlib.sha256(paths[key].read_bytes()).digest())
    config = {
        "k": args.k,
        "views": args.views,
        "group_by": args.group_by,
        "prompt_template": args.prompt_template,
    }
    h.update(json.dumps(config, sort_keys=True).encode())
    return h.hexdigest()[:16]


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _plot_csv(report) -> str:
    lines = ["view,region,precision,coverage"]
    for view in report.views:
        for region in report.view_regions(view):
            cell = report.cells[(region, view)]
            lines.append(f"{view},{region},{cell.precision!r},{cell.coverage!r}")
    return "\n".join(lines) + "\n"


def _computed_run(args: argparse.Namespace):
    _check_k(args.k)
    views = _parse_views(args.views)
    real_paths, real = _load_split(args, "real")
    gen_paths, generated = _load_split(args, "generated")
    run_id = args.run_id or _default_run_id(args, [real_paths, gen_paths])
    return compute_run_details(real, generated, k=args.k, views=views,
                               group_by=args.group_by,
                               prompt_template=args.prompt_template,
                               run_id=run_id)


def cmd_compute(args: argparse.Namespace) -> int:
    report, _ = _computed_run(args)
    _write_text(report_dumps(report), args.out)
    if args.plot_csv:
        Path(args.plot_csv).write_text(_plot_csv(report), encoding="utf-8")
    return 0


def cmd_mine(args: argparse.Namespace) -> int:
    _, membership = _computed_run(args)
    modes = args.mode or list(FAILURE_MODES)
    hits = mine_failure_modes(membership, modes)
    if args.sample is not None:
        if args.sample < 0:
            raise ConfigError(f"--sample must be >= 0, got {args.sample}")
        hits = sorted(sample_hits(hits, args.sample, args.seed),
                      key=lambda h: (h.region, h.object_class, h.item_id,
                                     h.mode))
    lines = "".join(json.dumps(h.to_json()) + "\n" for h in hits)
    _write_text(lines, args.out)
    return 0


def _load_report(path: str):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"report not found: {p}")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{p}: not valid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise ConfigMismatch(f"{p}: not a run report")
    return report_from_json(obj)


def cmd_compare(args: argparse.Namespace) -> int:
    original = _load_report(args.original)
    new = _load_report(args.new)
    table = compare_runs(original, new)
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(comparison_to_json(table), indent=2) + "\n",
                       encoding="utf-8")
        csv_path = args.out_csv or out.with_suffix(".csv")
        Path(csv_path).write_text(comparison_to_csv(table), encoding="utf-8")
    else:
        sys.stdout.write(comparison_to_csv(table))
        if args.out_csv:
            Path(args.out_csv).write_text(comparison_to_csv(table),
                                          encoding="utf-8")
    return 0


def cmd_partition(args: argparse.Namespace) -> int:
    path = Path(args.mask)
    if not path.exists():
        raise ConfigError(f"mask not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic != b"P5":
        # wrong file type on the command line is a usage problem
        raise ConfigError(f"{path} is not a P5 PGM file")
    mask = read_pgm(path)
    partition = partition_mask(mask, image_size=args.image_size,
                               patch_size=args.patch_size)
    spec = to_attention_spec(partition, args.view)
    _write_text(spec.dumps() + "\n", args.out)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    _check_min(args.min_per_cell)
    for prefix in args.prefix:
        name = prefix
        if name.endswith(".manifest.jsonl"):
            name = name[: -len(".manifest.jsonl")]
        paths = _dataset_paths(name)
        if not paths["manifest"].exists():
            raise ManifestNotFound(f"manifest not found: {paths['manifest']}")
        for view in VIEWS:
            if not paths[view].exists():
                raise ConfigError(f"file not found: {paths[view]}")
        dataset = load_dataset(paths["manifest"], full=paths["full"],
                               object=paths["object"],
                               background=paths["background"])
        n_items = len(dataset.item_ids())
        print(f"ok: {Path(name).name}: {n_items} items, {len(dataset)} rows, "
              f"dimension {dataset.dimension}")
        if args.min_per_cell:
            for deficit in validate_class_balance(dataset, args.min_per_cell):
                print(f"deficit: region={deficit.region} "
                      f"class={deficit.object_class} count={deficit.count}")
    return 0


def _check_min(value: int | None) -> None:
    if value is not None and value < 1:
        raise ConfigError(f"--min-per-cell must be >= 1, got {value}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddig",
        description="Precision and coverage of generated-image embeddings "
                    "over k-NN hypersphere manifolds, per region and view.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        _add_split_args(p, "real")
        _add_split_args(p, "generated")
        p.add_argument("--k", type=int, default=3,
                       help="neighborhood size for hypersphere radii "
                            "(default 3)")
        p.add_argument("--views", default=None,
                       help="comma-separated subset of full,object,background "
                            "(default: all)")
        p.add_argument("--group-by", default="region",
                       choices=("region", "object_class"),
                       help="record field to disaggregate by (default region)")
        p.add_argument("--prompt-template", default="",
                       help="free-text label stored in the report")
        p.add_argument("--run-id", default=None,
                       help="override the content-derived run id")
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("compute", help="compute per-(region, view) metrics")
    add_run_flags(p)
    p.add_argument("--plot-csv", default=None, metavar="PATH",
                   help="also write a per-region metric series CSV")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("mine", help="list failure-mode hits as JSONL")
    add_run_flags(p)
    p.add_argument("--mode", action="append", choices=FAILURE_MODES,
                   help="failure mode to mine (repeatable; default: all)")
    p.add_argument("--sample", type=int, default=None, metavar="N",
                   help="emit a seeded sample of at most N hits")
    p.add_argument("--seed", type=int, default=0,
                   help="sampling seed (default 0)")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("compare", help="diff two run reports")
    p.add_argument("original", help="baseline report JSON")
    p.add_argument("new", help="candidate report JSON")
    p.add_argument("--out", default=None,
                   help="write comparison JSON here and CSV alongside "
                        "(default: CSV to stdout)")
    p.add_argument("--out-csv", default=None, help="explicit CSV output path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("partition",
                       help="patch-partition a P5 PGM segmentation mask")
    p.add_argument("mask", help="binary P5 PGM mask (0=background, 255=object)")
    p.add_argument("--image-size", type=int, default=224)
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--view", required=True, choices=("object", "background"),
                   help="which view's attention spec to emit")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("validate", help="validate embedding datasets")
    p.add_argument("prefix", nargs="+",
                   help="dataset prefix (or its manifest path)")
    p.add_argument("--min-per-cell", type=int, default=None, metavar="N",
                   help="also report region x class cells with fewer than N "
                        "items")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DdigError as exc:
        print(f"error: {exc.oneline()}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: IoFailure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
