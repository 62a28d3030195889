"""Headless batch interface over the same core modules the service uses.

Subcommands: ``validate`` prints the pre-run console report, ``run``
executes the model and writes the result JSON next to the delimited
tables and rendered SVG figures, ``oracle`` recomputes the posterior by
exhaustive enumeration in the same output layout for diffing, and
``bench`` emits machine-readable timings (optionally with a queue-scaling
measurement).

Exit codes: 0 success, 2 pedigree validation failure, 1 any other error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import tempfile
import time
from pathlib import Path

from famrisk.engine import RunSettings, run_model
from famrisk.engine.runner import oracle_posterior
from famrisk.errors import FamriskError, ValidationFailed
from famrisk.fixtures import example_pedigree
from famrisk.kb import KnowledgeBase, ensure_synth_bundle, load_bundle
from famrisk.pedigree import (
    Pedigree,
    pedigree_from_json,
    pedigree_from_table,
    table_from_csv,
    validate_pedigree,
)
from famrisk.report import write_run_files

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2

SYNTH_BUNDLE_NAME = "kb-synth-1"


def load_kb(spec: str) -> KnowledgeBase:
    """Load a bundle directory; the shipped synthetic bundle by name."""
    if spec == SYNTH_BUNDLE_NAME:
        return load_bundle(ensure_synth_bundle())
    return load_bundle(Path(spec))


def load_pedigree(path: str | Path, kb: KnowledgeBase) -> Pedigree:
    """Pedigree JSON or flat model-table CSV, decided by suffix."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        table = table_from_csv(text, kb)
        return pedigree_from_table(table, pedigree_id=path.stem)
    return pedigree_from_json(text)


def settings_from_args(args: argparse.Namespace) -> RunSettings:
    data = {
        "model_name": args.model_name,
        "max_carried": args.max_carried,
        "risk_intervals": tuple(args.risk_intervals),
        "default_race": args.default_race,
        "default_ancestry": args.default_ancestry,
        "imputations": args.imputations,
        "penetrance_mode": args.penetrance_mode,
        "apply_prophylactic": args.apply_prophylactic,
        "use_proband_germline": args.use_proband_germline,
        "brca_multi_variant": args.brca_multi_variant,
        "auto_break_loops": args.auto_break_loops,
        "seed": args.seed,
    }
    if args.genes:
        data["genes"] = tuple(args.genes.split(","))
    if args.cancers:
        data["cancers"] = tuple(args.cancers.split(","))
    return RunSettings.from_dict(data)


def _comma_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _add_settings_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--model-name", default="fam3pro22")
    sub.add_argument("--genes", help="comma-separated gene subset")
    sub.add_argument("--cancers", help="comma-separated cancer subset")
    sub.add_argument("--max-carried", type=int, default=2,
                     help="paring bound on simultaneously carried genes")
    sub.add_argument("--risk-intervals", type=_comma_ints, default=[1, 5, 10],
                     help="comma-separated year offsets, e.g. 1,5,10")
    sub.add_argument("--default-race")
    sub.add_argument("--default-ancestry")
    sub.add_argument("--imputations", type=int, default=3,
                     help="completed age tables per run (K)")
    sub.add_argument("--penetrance-mode", choices=("crude", "net"),
                     default="crude")
    sub.add_argument("--apply-prophylactic",
                     action=argparse.BooleanOptionalAction, default=True)
    sub.add_argument("--use-proband-germline",
                     action=argparse.BooleanOptionalAction, default=True)
    sub.add_argument("--brca-multi-variant",
                     action=argparse.BooleanOptionalAction, default=False)
    sub.add_argument("--auto-break-loops",
                     action=argparse.BooleanOptionalAction, default=True)
    sub.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="famrisk",
        description="hereditary cancer risk workbench, batch interface",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = dict(default=SYNTH_BUNDLE_NAME,
                  help="bundle directory or the shipped synthetic bundle name")

    v = sub.add_parser("validate", help="print the pre-run pedigree report")
    v.add_argument("--pedigree", required=True)
    v.add_argument("--bundle", **common)

    r = sub.add_parser("run", help="run the model and write result files")
    r.add_argument("--pedigree", required=True)
    r.add_argument("--bundle", **common)
    r.add_argument("--out", required=True, help="output directory")
    _add_settings_flags(r)

    o = sub.add_parser("oracle", help="brute-force posterior for diffing")
    o.add_argument("--pedigree", required=True)
    o.add_argument("--bundle", **common)
    o.add_argument("--out", help="output directory (stdout when omitted)")
    o.add_argument("--joint-cap", type=int, default=10_000_000,
                   help="refuse enumerations beyond this many joint states")
    _add_settings_flags(o)

    b = sub.add_parser("bench", help="timing report on the example family")
    b.add_argument("--bundle", **common)
    b.add_argument("--out", help="output file (stdout when omitted)")
    b.add_argument("--repeat", type=int, default=3)
    b.add_argument("--queue", type=int, default=0,
                   help="also measure total queue time for 1..N jobs")
    b.add_argument("--seed", type=int, default=0)

    return parser


def cmd_validate(args) -> int:
    kb = load_kb(args.bundle)
    pedigree = load_pedigree(args.pedigree, kb)
    report = validate_pedigree(pedigree, kb)
    for line in report.lines():
        print(line)
    return EXIT_VALIDATION if report.blocking else EXIT_OK


def cmd_run(args) -> int:
    kb = load_kb(args.bundle)
    pedigree = load_pedigree(args.pedigree, kb)
    settings = settings_from_args(args)
    result = run_model(pedigree, kb, settings)
    for line in result.console_log:
        print(line)
    written = write_run_files(result, pedigree, kb, args.out)
    print(f"wrote {len(written)} file(s) to {args.out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    kb = load_kb(args.bundle)
    pedigree = load_pedigree(args.pedigree, kb)
    settings = settings_from_args(args)
    space, peeled, enumerated = oracle_posterior(
        pedigree, kb, settings, joint_cap=args.joint_cap
    )
    carrier = {}
    for gi, gene in enumerate(space.genes):
        non = float(enumerated[space.levels[:, gi] == 0].sum())
        carrier[gene] = min(1.0, max(0.0, 1.0 - non))
    payload = {
        "schema": 1,
        "carrier_posterior": carrier,
        "non_carrier_probability": float(enumerated[0]),
        "joint_posterior": {
            space.labels[i]: float(p) for i, p in enumerate(enumerated)
        },
        "max_abs_difference_vs_peeling": float(
            abs(peeled - enumerated).max()
        ),
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.json").write_text(text)
        print(f"wrote {out / 'oracle.json'}")
    else:
        print(text)
    return EXIT_OK


def linear_fit(points: list[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares slope, intercept, and R^2 for (x, y) pairs."""
    n = len(points)
    mean_x = sum(x for x, _ in points) / n
    mean_y = sum(y for _, y in points) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in points)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in points)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in points)
    ss_tot = sum((y - mean_y) ** 2 for _, y in points)
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r_squared


def _bench_queue(kb: KnowledgeBase, upto: int, seed: int) -> dict:
    # measured, not simulated: n identical jobs through a 1-worker queue
    from famrisk.service.queue import RunQueue
    from famrisk.service.storage import FileStore
    from famrisk.pedigree import pedigree_to_dict

    doc = pedigree_to_dict(example_pedigree(kb))
    settings = RunSettings(imputations=2, seed=seed)
    points = []
    for n in range(1, upto + 1):
        store = FileStore(tempfile.mkdtemp(prefix="famrisk-bench-"))
        queue = RunQueue(store, kb, workers=1, job_quota=upto + 1)
        started = time.perf_counter()
        for _ in range(n):
            queue.enqueue("bench-user", doc, settings)
        queue.drain(timeout=600)
        points.append((float(n), time.perf_counter() - started))
        queue.stop()
    slope, intercept, r_squared = linear_fit(points)
    return {
        "points": [[n, t] for n, t in points],
        "slope_seconds_per_job": slope,
        "intercept_seconds": intercept,
        "r_squared": r_squared,
    }


def cmd_bench(args) -> int:
    kb = load_kb(args.bundle)
    pedigree = example_pedigree(kb)
    settings = RunSettings(imputations=2, seed=args.seed)
    runs = []
    for _ in range(max(1, args.repeat)):
        result = run_model(pedigree, kb, settings)
        runs.append({
            "result_sha256": hashlib.sha256(
                result.canonical_json()
            ).hexdigest(),
            "timing": result.timing,
        })
    payload = {
        "schema": 1,
        "pedigree_members": len(pedigree.members),
        "settings": {"imputations": settings.imputations,
                     "max_carried": settings.max_carried,
                     "seed": settings.seed},
        "runs": runs,
        "identical_hashes": len({r["result_sha256"] for r in runs}) == 1,
    }
    if args.queue > 0:
        payload["queue_scaling"] = _bench_queue(kb, args.queue, args.seed)
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "oracle": cmd_oracle,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationFailed as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        if exc.report is not None:
            for line in exc.report.lines():
                print(line, file=sys.stderr)
        return EXIT_VALIDATION
    except FamriskError as exc:
        print(f"error: {exc.wire_code}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
