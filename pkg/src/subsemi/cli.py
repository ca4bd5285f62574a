"""Command-line entry point: ``subsemi <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from .classify import census, format_rows, report_rows, to_dot
from .errors import SubsemiError, ValidationError
from .files import RunManifest, format_sets, read_sets, write_sets
from .pipeline import TIERS, merged_sets, run_pipeline, run_shards
from .report import census_tables
from .search import (
    DEFAULT_BRUTE_CAP,
    PROPERTIES,
    EnumerationResult,
    SearchOptions,
    enumerate_brute,
    enumerate_min_extensions,
    enumerate_mingen,
    torso_enumerate,
    upper_torso_keys,
)
from .symmetry import parse_symmetry
from .table import CayleyTable, IndexSet, format_table, read_table, validate
from .transform import (
    DEFAULT_DEGREE_CAP,
    ElementIndexing,
    cached_full_table,
    check_ideal,
    full_transformation_table,
    ideal_elements,
    image_rank,
    parse_transformation,
    rees_quotient,
    symmetric_group,
)

log = logging.getLogger("subsemi")

STRATEGIES = ("brute", "mingen", "minext-dfs", "minext-bfs")
REPORTS = ("size", "rank", "classes", "nilpotent", "commutative", "band", "regular", "all")

_BUILTIN = re.compile(
    r"^(?:(?P<kind>[TS])(?P<d>\d+)"
    r"|K(?P<kd>\d+)_(?P<ki>\d+)"
    r"|(?:T(?P<qd>\d+)|K(?P<qd1>\d+)_(?P<qj>\d+))/K(?P<qd2>\d+)_(?P<qi>\d+))$"
)


# --- tables ------------------------------------------------------------------


def _induced(t: CayleyTable, members: IndexSet) -> CayleyTable:
    idx = np.array(members.members, dtype=np.int64) - 1
    pos = np.full(t.n, -1, dtype=np.int64)
    pos[idx] = np.arange(len(idx))
    sub = pos[t.array[np.ix_(idx, idx)]]
    labels = [t.labels[i] for i in idx] if t.labels else None
    return validate(sub + 1, labels)


def _full(d: int, cap: int):
    if d <= min(cap, 4):
        return cached_full_table(d)
    return full_transformation_table(d, cap)


def builtin_table(spec: str, cap: int = DEFAULT_DEGREE_CAP) -> tuple[CayleyTable, ElementIndexing | None]:
    """``Tn``, ``Sn``, ``Kn_i``, ``Tn/Kn_i`` or ``Kn_j/Kn_i``."""
    m = _BUILTIN.match(spec)
    if not m:
        raise ValidationError(f"unknown builtin {spec!r} (expected Tn, Sn, Kn_i, Tn/Kn_i or Kn_j/Kn_i)")
    if m["kind"]:
        d = int(m["d"])
        t, idx = _full(d, cap)
        if m["kind"] == "T":
            return t, idx
        group = symmetric_group(idx)
        return _induced(t, group), ElementIndexing(d, [idx.element(i) for i in group])
    if m["kd"]:
        d, i = int(m["kd"]), int(m["ki"])
        if not 1 <= i <= d:
            raise ValidationError(f"rank {i} out of range for degree {d}")
        t, idx = _full(d, cap)
        ideal = ideal_elements(idx, i)
        return _induced(t, ideal), ElementIndexing(d, [idx.element(k) for k in ideal])
    d = int(m["qd"] or m["qd1"])
    j = int(m["qj"]) if m["qj"] else d
    i = int(m["qi"])
    if d != int(m["qd2"]) or not 1 <= i < j <= d:
        raise ValidationError(f"bad quotient {spec!r}")
    t, idx = _full(d, cap)
    if j < d:
        outer = ideal_elements(idx, j)
        t = _induced(t, outer)
        idx = ElementIndexing(d, [idx.element(k) for k in outer])
    return rees_quotient(t, ideal_elements(idx, i)).table, None


def load_table(args) -> tuple[CayleyTable, ElementIndexing | None, str]:
    """Resolve ``--degree`` or ``--table`` (a file or a builtin name)."""
    if getattr(args, "degree", None) is not None:
        t, idx = builtin_table(f"T{args.degree}")
        return t, idx, f"T{args.degree}"
    spec = args.table
    if spec is None:
        raise ValidationError("give --degree or --table")
    if Path(spec).exists():
        return read_table(spec), None, spec
    return (*builtin_table(spec), spec)


def _ideal_from_labels(t: CayleyTable, rank: int) -> IndexSet:
    if t.labels is None:
        raise ValidationError("--ideal-rank needs a table with transformation labels")
    members = [
        i + 1 for i, lab in enumerate(t.labels)
        if lab == "0" or image_rank(parse_transformation(lab)) <= rank
    ]
    ideal = IndexSet(t.n, members)
    check_ideal(t, ideal)
    return ideal


def _ideal(t, idx, rank) -> IndexSet:
    if idx is not None and len(idx) == t.n and t.labels == idx.labels():
        return ideal_elements(idx, rank)
    return _ideal_from_labels(t, rank)


def _symmetry(args, t, idx):
    spec = args.symmetry
    if spec in (None, "none"):
        return None
    if idx is not None and len(idx) == t.n:
        return parse_symmetry(spec, idx)
    return parse_symmetry(spec, None, t)


def _jobs(value) -> int:
    jobs = value if value is not None else int(os.environ.get("SUBSEMI_JOBS", "1"))
    if jobs < 1:
        raise ValidationError("--jobs must be positive")
    return jobs


# --- commands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.degree is not None:
        t, _ = builtin_table(f"T{args.degree}", args.cap)
    elif args.builtin:
        t, _ = builtin_table(args.builtin, args.cap)
    else:
        raise ValidationError("give --degree or --builtin")
    text = format_table(t)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _options(args, act) -> SearchOptions:
    return SearchOptions(
        strategy="bfs" if args.strategy == "minext-bfs" else "dfs",
        symmetry=act,
        use_equiv_generators=not args.no_equiv,
        use_normalizer_pruning=not args.no_normalizer,
        max_size=args.max_size,
        property_filter=args.property,
    )


def _post_filter(res: EnumerationResult, t, opts: SearchOptions) -> None:
    """Apply size and property limits to strategies that do not prune."""
    keep = set()
    prop = PROPERTIES.get(opts.property_filter)
    for s in res.found:
        if opts.max_size is not None and len(s) > opts.max_size:
            continue
        if prop is not None and s and not prop(t.array, s.to_mask()):
            continue
        keep.add(s)
    res.found = keep


def _header(args, t, spec, idx) -> dict:
    header = {}
    if idx is not None:
        header["degree"] = idx.degree
    header["table"] = spec
    header["symmetry"] = args.symmetry or "none"
    header["universe"] = t.n
    return header


def _emit_sets(args, sets, header, manifest: RunManifest | None) -> None:
    if args.out:
        digest = write_sets(args.out, sets, header, args.format)
        if manifest is not None:
            manifest.record_output(args.out, digest)
            manifest.finish()
            manifest.save(args.manifest or f"{args.out}.manifest.json")
    else:
        sys.stdout.write(format_sets(sets, header, args.format))


def _manifest(command, args, spec) -> RunManifest:
    opts = {k: v for k, v in vars(args).items() if k not in ("func",)}
    m = RunManifest(command, opts, jobs=_jobs(getattr(args, "jobs", None)))
    if Path(spec).exists():
        m.record_input(spec)
    return m


def cmd_enumerate(args) -> int:
    t, idx, spec = load_table(args)
    act = _symmetry(args, t, idx)
    opts = _options(args, act)
    jobs = _jobs(args.jobs)
    manifest = _manifest("enumerate", args, spec)
    if args.ideal_rank is not None:
        res = torso_enumerate(t, _ideal(t, idx, args.ideal_rank), opts, jobs)
    elif args.strategy == "brute":
        res = enumerate_brute(t, act, args.brute_cap)
        _post_filter(res, t, opts)
    elif args.strategy == "mingen":
        res = enumerate_mingen(t, opts)
        _post_filter(res, t, opts)
    else:
        res = enumerate_min_extensions(t, t.empty(), opts)
    manifest.metrics = dict(res.stats, count=len(res))
    log.info("%d subsemigroups; %s", len(res), res.stats)
    header = _header(args, t, spec, idx)
    header["strategy"] = "torso" if args.ideal_rank is not None else args.strategy
    _emit_sets(args, res.found, header, manifest)
    if args.out:
        print(f"{len(res)} subsemigroups -> {args.out}", file=sys.stderr)
    return 0


def cmd_torso(args) -> int:
    t, idx, spec = load_table(args)
    act = _symmetry(args, t, idx)
    opts = _options(args, act)
    jobs = _jobs(args.jobs)
    workdir = Path(args.workdir)
    if args.resume:
        manifest_path = Path(args.resume)
        workdir = manifest_path.parent
        manifest = RunManifest.load(manifest_path)
    else:
        workdir.mkdir(parents=True, exist_ok=True)
        manifest_path = workdir / "manifest.json"
        manifest = _manifest("torso", args, spec)
    manifest.jobs = jobs
    ideal = _ideal(t, idx, args.ideal_rank)
    check_ideal(t, ideal)
    ukeys = upper_torso_keys(t, ideal, opts)
    batch = max(1, args.batch)
    tasks = [(f"u-{i // batch:06d}", ukeys[i:i + batch]) for i in range(0, len(ukeys), batch)]
    recs = run_shards(t, ideal, opts, tasks, workdir, manifest, manifest_path, jobs)
    sets = merged_sets(workdir, recs)
    header = _header(args, t, spec, idx)
    header["strategy"] = "torso"
    out = args.out or str(workdir / "merged.subs")
    digest = write_sets(out, sets, header, args.format)
    manifest.record_output(out, digest)
    manifest.metrics = {"upper_torsos": len(ukeys), "count": len(sets),
                        "closures": sum(r["closures"] for r in recs.values())}
    manifest.finish()
    manifest.save(manifest_path)
    print(f"{len(ukeys)} upper torsos, {len(sets)} subsemigroups -> {out}")
    return 0


def cmd_pipeline(args) -> int:
    report, manifest = run_pipeline(
        args.degree, args.tier, _jobs(args.jobs), args.workdir, args.resume, args.batch
    )
    print("\n".join(report.lines()))
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def _load_results(args) -> tuple[CayleyTable, EnumerationResult, object]:
    header, sets = read_sets(args.input)
    if args.table is None and "table" in header:
        args.table = header["table"]
    args.degree = None
    t, idx, _ = load_table(args)
    if int(header["universe"]) != t.n:
        raise ValidationError(f"set file universe {header['universe']} does not match the table ({t.n})")
    args.symmetry = args.symmetry or header.get("symmetry", "none")
    act = _symmetry(args, t, idx)
    return t, EnumerationResult(t.n, set(sets)), act


def cmd_classify(args) -> int:
    t, res, act = _load_results(args)
    kinds = REPORTS[:-1] if args.report == "all" else (args.report,)
    need_rank = "rank" in kinds
    need_iso = any(k in kinds for k in ("size", "rank", "classes"))
    rep = census(t, res, act, with_iso=need_iso, with_rank=need_rank, with_predicates=True)
    if args.mode == "iso":
        rep.totals.pop("anti", None)
        for row in rep.by_size.values():
            row.pop("anti", None)
    csv_rows = []
    for kind in kinds:
        head, rows = report_rows(rep, kind)
        print(f"# {kind}")
        sys.stdout.write(format_rows(head, rows))
        csv_rows.extend([kind, *r] for r in [head, *rows])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(csv_rows)
    return 0


def cmd_lattice(args) -> int:
    header, sets = read_sets(args.input)
    labels = None
    if args.labels:
        args.table = header.get("table")
        args.degree = None
        t, _, _ = load_table(args)
        labels = t.labels
    sets = sorted(sets, key=IndexSet.sort_key)
    text = to_dot(sets, labels)
    if args.dot:
        Path(args.dot).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args) -> int:
    t4 = None
    if args.t4_manifest:
        from .pipeline import PipelineReport

        m = RunManifest.load(args.t4_manifest)
        if not m.metrics.get("complete"):
            raise ValidationError(f"{args.t4_manifest} is not a completed pipeline run")
        t4 = PipelineReport.from_dict(m.metrics["report"])
    elif not args.skip_t4:
        t4, _ = run_pipeline(4, "desk", _jobs(args.jobs), args.workdir)
    sys.stdout.write(census_tables(t4))
    return 0


# --- parser ------------------------------------------------------------------


def _add_source(p, degree=True):
    g = p.add_mutually_exclusive_group(required=degree)
    if degree:
        g.add_argument("--degree", type=int, help="use the full transformation semigroup T_d")
    g.add_argument("--table", help="table file or builtin (Tn, Sn, Kn_i, Tn/Kn_i, Kn_j/Kn_i)")


def _add_search(p):
    p.add_argument("--symmetry", default="none", help="none, full, or generators like [2,1,3],[2,3,1]")
    p.add_argument("--max-size", type=int)
    p.add_argument("--property", choices=sorted(PROPERTIES))
    p.add_argument("--no-equiv", action="store_true", help="disable equivalent-generator reduction")
    p.add_argument("--no-normalizer", action="store_true", help="disable normalizer orbit pruning")
    p.add_argument("--jobs", type=int, help="worker processes (default $SUBSEMI_JOBS or 1)")
    p.add_argument("--format", choices=("list", "bits"), default="list")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subsemi", description="Enumerate subsemigroups of finite semigroups.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a Cayley table")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--degree", type=int)
    g.add_argument("--builtin")
    p.add_argument("--cap", type=int, default=DEFAULT_DEGREE_CAP, help="largest allowed degree")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("enumerate", help="enumerate subsemigroups")
    _add_source(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="minext-dfs")
    p.add_argument("--ideal-rank", type=int, help="split by the ideal of transformations of rank <= i")
    p.add_argument("--brute-cap", type=int, default=DEFAULT_BRUTE_CAP)
    p.add_argument("--manifest", help="manifest path (default OUT.manifest.json)")
    _add_search(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("torso", help="sharded enumeration over upper torsos")
    _add_source(p)
    p.add_argument("--ideal-rank", type=int, required=True)
    p.add_argument("--workdir", default="subsemi-torso")
    p.add_argument("--resume", metavar="MANIFEST")
    p.add_argument("--batch", type=int, default=64, help="upper torsos per shard")
    p.set_defaults(strategy="minext-dfs")
    _add_search(p)
    p.set_defaults(func=cmd_torso)

    p = sub.add_parser("pipeline-t4", help="staged census of T_4 (or T_d)")
    p.add_argument("--tier", choices=TIERS, default="desk")
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--jobs", type=int)
    p.add_argument("--workdir")
    p.add_argument("--resume", metavar="MANIFEST")
    p.add_argument("--batch", type=int, default=2000, help="upper torsos per shard (full tier)")
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("classify", help="census of a subsemigroup file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--table", help="override the #table header")
    p.add_argument("--symmetry", help="override the #symmetry header")
    p.add_argument("--report", choices=REPORTS, default="all")
    p.add_argument("--mode", choices=("iso", "iso_anti"), default="iso_anti")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("lattice", help="Hasse diagram of a subsemigroup file as DOT")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--dot")
    p.add_argument("--labels", action="store_true", help="label nodes with transformations")
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("report-paper-tables", help="regenerate the census tables")
    p.add_argument("--t4-manifest", help="completed pipeline manifest to read T4 cells from")
    p.add_argument("--skip-t4", action="store_true", help="do not run the T4 desk tier")
    p.add_argument("--jobs", type=int)
    p.add_argument("--workdir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SubsemiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
