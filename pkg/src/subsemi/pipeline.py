"""The staged census of a full transformation semigroup T_d.

Stages, with K = K_{d,d-1} (the singular part) and J = K_{d,d-2}:

1. upper torsos of K with respect to J, one per S_d-orbit
2. their lower torsos inside J, giving Sub_{S_d}(K)
3. the same sets with the identity adjoined
4. Sub_{S_d}(S_d), the subgroups up to conjugacy
5. lower torsos in K of every nontrivial subgroup (the set P)
6. union and counting

The desk tier runs stages 4 and 5 plus the hereditary property censuses;
the full tier runs everything, writing one shard per batch of upper
torsos and recording each finished shard in a manifest so that an
interrupted run can be resumed.
"""

from __future__ import annotations

import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import ValidationError
from .files import RunManifest, read_shard, write_shard
from .search import (
    SearchOptions,
    enumerate_min_extensions,
    key_to_set,
    lower_torso_keys,
    mask_of,
    set_to_key,
    upper_torso_keys,
)
from .symmetry import ConjugationAction, full_action, orbit_size_fast
from .table import CayleyTable, IndexSet
from .transform import cached_full_table, ideal_elements, symmetric_group

log = logging.getLogger(__name__)

TIERS = ("desk", "full")
HEREDITARY = ("nilpotent", "commutative", "band")


@dataclass
class PipelineReport:
    degree: int
    tier: str
    subgroups: int = 0
    subgroup_classes: int = 0
    lower_torsos: dict[str, int] = field(default_factory=dict)
    p_total: int = 0
    properties: dict[str, dict] = field(default_factory=dict)
    singular_uppers: int | None = None
    singular_classes: int | None = None
    total_classes: int | None = None
    total_raw: int | None = None
    regular: int | None = None
    size_distribution: dict[int, list[int]] | None = None
    metrics: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        d = self.degree
        out = [
            f"degree {d}, tier {self.tier}",
            f"Sub(S{d}) nonempty: {self.subgroups} subgroups / {self.subgroup_classes} conjugacy classes",
        ]
        for label, count in self.lower_torsos.items():
            out.append(f"  lower torsos of {label}: {count}")
        out.append(f"|P| = {self.p_total}")
        names = [p for p in HEREDITARY if p in self.properties]
        names += sorted(set(self.properties) - set(HEREDITARY))
        for name in names:
            info = self.properties[name]
            extra = ""
            if "by_degree" in info:
                split = ", ".join(f"k={k}: {v}" for k, v in info["by_degree"].items())
                extra = f" ({split})"
            out.append(f"#{name} conjugacy classes = {info['classes']}{extra}")
        if self.tier == "full":
            out.append(f"upper torsos of K{d}_{d-1}/K{d}_{d-2}: {self.singular_uppers}")
            out.append(f"Sub_S{d}(K{d}_{d-1}) = {self.singular_classes}")
            out.append(f"Sub_S{d}(T{d}) = {self.total_classes}")
            out.append(f"Sub(T{d}) = {self.total_raw}")
            out.append(f"#regular conjugacy classes = {self.regular}")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineReport":
        data = dict(data)
        data["lower_torsos"] = dict(data.get("lower_torsos", []))
        if data.get("size_distribution") is not None:
            data["size_distribution"] = {int(k): v for k, v in data["size_distribution"].items()}
        for info in data.get("properties", {}).values():
            if "by_degree" in info:
                info["by_degree"] = {int(k): v for k, v in info["by_degree"].items()}
        return cls(**data)

    def to_dict(self) -> dict:
        data = dict(self.__dict__)
        # a list keeps the subgroup order through sorted-key JSON
        data["lower_torsos"] = [[k, v] for k, v in self.lower_torsos.items()]
        if self.size_distribution is not None:
            data["size_distribution"] = {str(k): v for k, v in sorted(self.size_distribution.items())}
        return data


def subgroup_reps(t: CayleyTable, group: IndexSet, act: ConjugationAction) -> list[IndexSet]:
    """Nonempty subgroup class representatives, sorted."""
    opts = SearchOptions(symmetry=act, restrict_extensions_to=group)
    res = enumerate_min_extensions(t, t.empty(), opts)
    return [s for s in res.sorted() if s]


def group_label(g: IndexSet, labels: list[str]) -> str:
    return "<" + ",".join(labels[i - 1] for i in g) + ">"


def hereditary_census(t: CayleyTable, act: ConjugationAction, prop: str) -> dict:
    """Nonempty conjugacy classes with a hereditary property."""
    res = enumerate_min_extensions(t, t.empty(), SearchOptions(symmetry=act, property_filter=prop))
    reps = [s for s in res.found if s]
    info: dict = {"classes": len(reps), "closures": res.stats["closures"]}
    if prop == "nilpotent":
        degrees = Counter(int(K.nilpotency_degree(t.array, s.to_mask())) for s in reps)
        info["by_degree"] = {k: degrees[k] for k in sorted(degrees)}
    return info


# --- shard tasks -------------------------------------------------------------

_CTX: dict = {}


def _init_ctx(t, ideal, opts, perms, identity):
    _CTX.update(t=t, ideal=ideal, opts=opts, perms=perms, identity=identity)


def _summarize(masks: list[np.ndarray], arr, perms, identity: int | None) -> dict:
    """Per-size class and raw counts plus regularity, optionally with id adjoined."""
    order = perms.shape[0]
    stats = {"count": 0, "regular": 0, "by_size": {}}
    for mask in masks:
        variants = [mask]
        if identity is not None:
            plus = mask.copy()
            plus[identity] = 1
            variants.append(plus)
        for m in variants:
            size = int(m.sum())
            raw = order // len(K.stabilizer_rows(m, perms))
            row = stats["by_size"].setdefault(str(size), [0, 0])
            row[0] += 1
            row[1] += raw
            stats["count"] += 1
            if size and K.is_regular(arr, m):
                stats["regular"] += 1
    return stats


def _shard_task(task: str, uppers: list[bytes], path: str, summarize: bool) -> dict:
    t, ideal, opts = _CTX["t"], _CTX["ideal"], _CTX["opts"]
    sections = []
    masks = []
    closures = 0
    for ukey in uppers:
        upper = key_to_set(ukey, t.n)
        keys, st = lower_torso_keys(t, upper, ideal, opts)
        closures += st["closures"]
        sections.append((ukey.hex(), [key_to_set(k, t.n) for k in keys]))
        if summarize:
            masks.extend(mask_of(k, t.n) for k in keys)
    header = {"universe": t.n, "task": task}
    digest = write_shard(path, header, sections)
    rec = {
        "path": Path(path).name,
        "digest": digest,
        "uppers": len(uppers),
        "sets": sum(len(s) for _, s in sections),
        "closures": closures,
        "sections": {k: len(s) for k, s in sections},
    }
    if summarize:
        rec["stats"] = _summarize(masks, t.array, _CTX["perms"], _CTX["identity"])
    return rec


def run_shards(
    t: CayleyTable,
    ideal: IndexSet,
    opts: SearchOptions,
    tasks: list[tuple[str, list[bytes]]],
    workdir: Path,
    manifest: RunManifest,
    manifest_path: Path,
    jobs: int = 1,
    summarize: bool = False,
    identity: int | None = None,
) -> dict[str, dict]:
    """Run the shard tasks not yet recorded in the manifest.

    Every finished shard is recorded (with its digest) before the next
    result is consumed, so a crash loses at most the shards in flight.
    """
    todo = []
    for name, uppers in tasks:
        if manifest.completed_shard(name, workdir) is None:
            todo.append((name, uppers, str(workdir / f"{name}.shard"), summarize))
    log.info("%d of %d shard tasks to run", len(todo), len(tasks))
    perms = (opts.symmetry or ConjugationAction.trivial(t.n)).perms
    init = (t, ideal, opts, perms, identity)
    if jobs <= 1:
        _init_ctx(*init)
        results = (_shard_task(*job) for job in todo)
        pool = None
    else:
        pool = ProcessPoolExecutor(jobs, initializer=_init_ctx, initargs=init)
        results = pool.map(_shard_task, *zip(*todo)) if todo else iter(())
    try:
        for (name, *_), rec in zip(todo, results):
            manifest.shards[name] = rec
            manifest.save(manifest_path)
    finally:
        if pool is not None:
            pool.shutdown()
    return {name: manifest.shards[name] for name, _ in tasks}


def merged_sets(workdir: Path, records: dict[str, dict]) -> list[IndexSet]:
    """All sets of the given shards, sorted (checks each shard on the way)."""
    out = []
    for name, rec in records.items():
        _, sections = read_shard(workdir / rec["path"])
        for sets in sections.values():
            out.extend(sets)
    return sorted(out, key=IndexSet.sort_key)


def _batches(keys: list[bytes], size: int, prefix: str) -> list[tuple[str, list[bytes]]]:
    return [(f"{prefix}-{i // size:06d}", keys[i:i + size]) for i in range(0, len(keys), size)]


# --- the pipeline ----------------------------------------------------------


def run_pipeline(
    degree: int = 4,
    tier: str = "desk",
    jobs: int = 1,
    workdir=None,
    resume=None,
    batch: int = 2000,
    properties: tuple[str, ...] = HEREDITARY,
) -> tuple[PipelineReport, RunManifest]:
    """Run the staged census; see the module docstring for the stages."""
    if tier not in TIERS:
        raise ValidationError(f"unknown tier {tier!r}")
    if degree < 2:
        raise ValidationError("the staged census needs degree >= 2")
    if resume:
        manifest_path = Path(resume)
        workdir = manifest_path.parent
        manifest = RunManifest.load(manifest_path)
        if manifest.options.get("degree") != degree or manifest.options.get("tier") != tier:
            raise ValidationError("the manifest was written for a different run")
        if manifest.metrics.get("complete"):
            for name in manifest.shards:
                manifest.completed_shard(name, workdir)
            return PipelineReport.from_dict(manifest.metrics["report"]), manifest
    else:
        workdir = Path(workdir or f"subsemi-T{degree}-{tier}")
        workdir.mkdir(parents=True, exist_ok=True)
        manifest_path = workdir / "manifest.json"
        manifest = RunManifest(
            "pipeline", {"degree": degree, "tier": tier, "batch": batch}, jobs=jobs
        )
    manifest.jobs = jobs
    started = time.time()

    t, idx = cached_full_table(degree)
    act = full_action(idx)
    labels = idx.labels()
    singular = ideal_elements(idx, degree - 1)
    report = PipelineReport(degree, tier)

    # stage 4
    groups = subgroup_reps(t, symmetric_group(idx), act)
    report.subgroup_classes = len(groups)
    report.subgroups = sum(orbit_size_fast(g.to_mask(), act) for g in groups)

    # stage 5: one shard per nontrivial subgroup class
    opts = SearchOptions(symmetry=act)
    nontrivial = [g for g in groups if len(g) > 1]
    tasks = [(f"p-{set_to_key(g).hex()}", [set_to_key(g)]) for g in nontrivial]
    recs = run_shards(t, singular, opts, tasks, workdir, manifest, manifest_path, jobs,
                      summarize=tier == "full")
    for g, (name, _) in zip(nontrivial, tasks):
        report.lower_torsos[group_label(g, labels)] = recs[name]["sets"]
    report.p_total = sum(r["sets"] for r in recs.values())

    for prop in properties:
        report.properties[prop] = hereditary_census(t, act, prop)

    if tier == "full":
        _full_tier(t, idx, act, singular, report, recs, workdir, manifest, manifest_path, jobs, batch)

    report.metrics["wall_time"] = round(time.time() - started, 3)
    manifest.metrics["report"] = report.to_dict()
    manifest.metrics["complete"] = True
    manifest.finish()
    manifest.save(manifest_path)
    return report, manifest


def _full_tier(t, idx, act, singular, report, p_recs, workdir, manifest, manifest_path, jobs, batch):
    d = idx.degree
    lower = ideal_elements(idx, d - 2)
    opts = SearchOptions(symmetry=act)
    # stage 1
    ukeys_path = workdir / "uppers.keys"
    if "uppers" in manifest.metrics.get("stages", {}) and ukeys_path.exists():
        raw = ukeys_path.read_bytes()
        nb = (t.n + 7) // 8
        ukeys = [raw[i:i + nb] for i in range(0, len(raw), nb)]
    else:
        ukeys = upper_torso_keys(t, lower, opts, within=singular)
        ukeys_path.write_bytes(b"".join(ukeys))
        manifest.metrics.setdefault("stages", {})["uppers"] = len(ukeys)
        manifest.save(manifest_path)
    report.singular_uppers = len(ukeys)
    # stages 2 and 3
    identity = idx.index(list(range(1, d + 1))) - 1
    recs = run_shards(t, lower, opts, _batches(ukeys, batch, "k"), workdir, manifest,
                      manifest_path, jobs, summarize=True, identity=identity)
    # stage 6
    dist: dict[int, list[int]] = {}
    regular = 0
    singular_classes = 0
    for rec in list(recs.values()) + list(p_recs.values()):
        st = rec["stats"]
        regular += st["regular"]
        for size, (classes, raw) in st["by_size"].items():
            row = dist.setdefault(int(size), [0, 0])
            row[0] += classes
            row[1] += raw
    singular_classes = sum(r["sets"] for r in recs.values())
    report.singular_classes = singular_classes
    report.total_classes = sum(v[0] for v in dist.values())
    report.total_raw = sum(v[1] for v in dist.values())
    report.regular = regular
    report.size_distribution = dict(sorted(dist.items()))
