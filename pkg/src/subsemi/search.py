"""Subsemigroup enumeration strategies.

Sets travel through the search as packed keys (see ``_kernels``); results
are handed back as :class:`IndexSet` values.
"""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from . import _kernels as K
from .errors import SeedNotClosed, SymmetryMismatch, TooLarge, ValidationError
from .symmetry import ConjugationAction, equiv_generator_classes
from .table import CayleyTable, IndexSet, is_closed
from .transform import check_ideal, rees_quotient

log = logging.getLogger(__name__)

DEFAULT_BRUTE_CAP = 20
DEFAULT_MINGEN_CAP = 32

PROPERTIES = {
    "band": K.is_band,
    "commutative": K.is_commutative,
    "nilpotent": lambda table, mask: K.nilpotency_degree(table, mask) > 0,
}


def key_of(mask: np.ndarray) -> bytes:
    return np.packbits(mask).tobytes()


def mask_of(key: bytes, n: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(key, dtype=np.uint8))[:n].copy()


def key_to_set(key: bytes, n: int) -> IndexSet:
    return IndexSet.from_mask(mask_of(key, n))


def set_to_key(a: IndexSet) -> bytes:
    return key_of(a.to_mask())


def canonical_key(a: IndexSet | np.ndarray, perms: np.ndarray) -> bytes:
    mask = a.to_mask() if isinstance(a, IndexSet) else a
    return K.canonical_key(mask, perms).tobytes()


@dataclass
class SearchOptions:
    strategy: str = "dfs"
    symmetry: ConjugationAction | None = None
    use_equiv_generators: bool = True
    use_normalizer_pruning: bool = True
    restrict_extensions_to: IndexSet | None = None
    max_size: int | None = None
    property_filter: str | None = None

    def __post_init__(self):
        if self.strategy not in ("dfs", "bfs"):
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if self.max_size is not None and self.max_size < 0:
            raise ValidationError("max_size must be non-negative")
        if self.property_filter not in (None, *PROPERTIES):
            raise ValidationError(f"unknown property {self.property_filter!r}")

    def describe(self) -> dict:
        return {
            "strategy": self.strategy,
            "symmetry": None if self.symmetry is None else len(self.symmetry),
            "use_equiv_generators": self.use_equiv_generators,
            "use_normalizer_pruning": self.use_normalizer_pruning,
            "restricted": self.restrict_extensions_to is not None,
            "max_size": self.max_size,
            "property_filter": self.property_filter,
        }


@dataclass
class EnumerationResult:
    universe: int
    found: set[IndexSet]
    stats: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    ranks: dict[IndexSet, int] | None = None

    def __len__(self) -> int:
        return len(self.found)

    def sorted(self) -> list[IndexSet]:
        return sorted(self.found, key=IndexSet.sort_key)


def _perms(act: ConjugationAction | None, n: int) -> np.ndarray:
    return (act or ConjugationAction.trivial(n)).perms


def _extension_reps(t: CayleyTable, xmask: np.ndarray, use_equiv: bool) -> np.ndarray:
    """Per element: least allowed member of its class, or -1."""
    n = t.n
    xrep = np.full(n, -1, dtype=np.int64)
    if use_equiv:
        for cls in equiv_generator_classes(t).classes:
            allowed = [x - 1 for x in cls if xmask[x - 1]]
            for x in allowed:
                xrep[x] = allowed[0]
    else:
        xrep[xmask.astype(bool)] = np.flatnonzero(xmask)
    return xrep


class _MinimalExtensions:
    """State for one run of the minimal-extension search from a seed."""

    def __init__(self, t: CayleyTable, opts: SearchOptions):
        self.t = t
        self.opts = opts
        n = t.n
        self.n = n
        self.perms = _perms(opts.symmetry, n)
        x = opts.restrict_extensions_to
        self.xmask = np.ones(n, np.uint8) if x is None else x.to_mask()
        if opts.symmetry is not None and x is not None:
            if len(K.stabilizer_rows(self.xmask, self.perms)) != len(self.perms):
                raise SymmetryMismatch("extension set is not invariant under the symmetry group")
        self.xrep = _extension_reps(t, self.xmask, opts.use_equiv_generators)
        self.prop: Callable | None = PROPERTIES.get(opts.property_filter)
        self.stats = {"nodes": 0, "closures": 0, "peak_frontier": 0, "rejected": 0}

    def admissible(self, key: bytes, size: int) -> bool:
        if self.opts.max_size is not None and size > self.opts.max_size:
            return False
        if self.prop is not None:
            return bool(self.prop(self.t.array, mask_of(key, self.n)))
        return True

    def run(self, seed_mask: np.ndarray, on_level=None) -> dict[bytes, int]:
        """Return every reachable canonical key mapped to its search level."""
        if len(K.stabilizer_rows(seed_mask, self.perms)) != len(self.perms):
            raise SymmetryMismatch("seed is not invariant under the symmetry group")
        arr = self.t.array
        nb = (self.n + 7) // 8
        seed = key_of(seed_mask)
        found = {seed: 0}
        rejected: set[bytes] = set()
        frontier = deque([(seed, 0)])
        bfs = self.opts.strategy == "bfs"
        stats = self.stats
        use_norm = self.opts.use_normalizer_pruning and len(self.perms) > 1
        while frontier:
            key, level = frontier.popleft() if bfs else frontier.pop()
            stats["nodes"] += 1
            mask = mask_of(key, self.n)
            cands = K.candidates(mask, self.xrep, self.perms, use_norm)
            if not len(cands):
                continue
            keys, sizes = K.expand(arr, mask, cands, self.perms)
            stats["closures"] += len(cands)
            buf = keys.tobytes()
            for c in range(len(cands)):
                k = buf[c * nb:(c + 1) * nb]
                if k in found or k in rejected:
                    continue
                if not self.admissible(k, int(sizes[c])):
                    rejected.add(k)
                    continue
                found[k] = level + 1
                frontier.append((k, level + 1))
            if len(frontier) > stats["peak_frontier"]:
                stats["peak_frontier"] = len(frontier)
        stats["rejected"] = len(rejected)
        return found


def _result(t, keys: Iterable[bytes], stats, provenance, ranks=None) -> EnumerationResult:
    n = t.n
    found = {}
    for k in keys:
        found[k] = key_to_set(k, n)
    rank_map = None
    if ranks is not None:
        rank_map = {found[k]: r for k, r in ranks.items()}
    return EnumerationResult(n, set(found.values()), stats, provenance, rank_map)


def enumerate_min_extensions(
    t: CayleyTable, seed: IndexSet | None = None, opts: SearchOptions | None = None
) -> EnumerationResult:
    """All ``<seed | Y>`` with Y drawn from the extension set.

    A stack gives depth-first order, a queue breadth-first.  Each discovered
    subsemigroup is stored once (as its canonical representative when a
    symmetry group is given) and extended by single elements; already known
    closures are not extended again.  In breadth-first mode the level at
    which a set is first found is its rank relative to the seed.
    """
    opts = opts or SearchOptions()
    seed = seed if seed is not None else t.empty()
    if not is_closed(t, seed):
        raise SeedNotClosed(f"seed {seed} is not closed")
    engine = _MinimalExtensions(t, opts)
    levels = engine.run(seed.to_mask())
    prov = {"method": "min-extensions", **opts.describe()}
    return _result(t, levels.keys(), engine.stats, prov, levels if opts.strategy == "bfs" else None)


def enumerate_brute(
    t: CayleyTable, symmetry: ConjugationAction | None = None, cap: int = DEFAULT_BRUTE_CAP
) -> EnumerationResult:
    """Check every subset for closure."""
    if t.n > cap or t.n > 62:
        raise TooLarge(f"brute force over {t.n} elements exceeds the cap {min(cap, 62)}")
    bitmasks = K.closed_bitmasks(t.array)
    sets = {IndexSet.from_bits(t.n, int(b)) for b in bitmasks}
    if symmetry is not None:
        perms = symmetry.perms
        keys = {canonical_key(s, perms) for s in sets}
        sets = {key_to_set(k, t.n) for k in keys}
    stats = {"subsets_checked": 1 << t.n, "closed": len(bitmasks)}
    return EnumerationResult(t.n, sets, stats, {"method": "brute", "symmetry": symmetry is not None})


def enumerate_mingen(
    t: CayleyTable, opts: SearchOptions | None = None, cap: int = DEFAULT_MINGEN_CAP
) -> EnumerationResult:
    """Level-wise generating sets: level k closes every k-subset.

    Stops at the first level that produces nothing new; a subsemigroup's rank
    is the level where it first appears.
    """
    opts = opts or SearchOptions()
    if t.n > cap:
        raise TooLarge(f"level-wise subset search over {t.n} elements exceeds the cap {cap}")
    perms = _perms(opts.symmetry, t.n)
    if opts.use_equiv_generators:
        gens = np.array([r - 1 for r in equiv_generator_classes(t).reps()], dtype=np.int64)
    else:
        gens = np.arange(t.n, dtype=np.int64)
    nb = (t.n + 7) // 8
    ranks = {key_of(np.zeros(t.n, np.uint8)): 0}
    stats = {"levels": 0, "closures": 0}
    k = 0
    while True:
        k += 1
        keys = K.level_keys(t.array, gens, k, perms)
        stats["closures"] += len(keys)
        buf = keys.tobytes()
        new = {buf[i * nb:(i + 1) * nb] for i in range(len(keys))} - ranks.keys()
        if not new:
            break
        for key in new:
            ranks[key] = k
        stats["levels"] = k
    prov = {"method": "mingen", **opts.describe()}
    return _result(t, ranks.keys(), stats, prov, ranks)


# --- ideal decomposition --------------------------------------------------


def upper_torso_keys(
    t: CayleyTable, ideal: IndexSet, opts: SearchOptions, within: IndexSet | None = None
) -> list[bytes]:
    """Canonical keys of the distinct upper torsos ``U \\ {0}``, U in Sub(W/I).

    ``W`` is ``within`` (a subsemigroup of ``t`` containing ``ideal`` as an
    ideal), defaulting to the whole table.  One key per orbit.
    """
    q = rees_quotient(t, ideal)
    qopts = replace(opts, restrict_extensions_to=None, max_size=None, property_filter=None)
    if within is not None:
        qopts.restrict_extensions_to = q.lower(within)
    if opts.symmetry is not None:
        from .symmetry import induced_quotient_action

        qopts.symmetry = induced_quotient_action(q, opts.symmetry)
    engine = _MinimalExtensions(q.table, qopts)
    found = engine.run(np.zeros(q.table.n, np.uint8))
    perms = _perms(opts.symmetry, t.n)
    src = np.array(q.to_source, dtype=np.int64) - 1
    m = q.table.n
    out = set()
    lifted = np.zeros(t.n, np.uint8)
    for k in found:
        lifted[:] = 0
        lifted[src] = mask_of(k, m)[: m - 1]
        out.add(K.canonical_key(lifted, perms).tobytes())
    return sorted(out)


def upper_torsos(
    t: CayleyTable, ideal: IndexSet, opts: SearchOptions, within: IndexSet | None = None
) -> list[IndexSet]:
    """Distinct upper torsos, one per orbit, sorted by (size, members)."""
    keys = upper_torso_keys(t, ideal, opts, within)
    return sorted((key_to_set(k, t.n) for k in keys), key=IndexSet.sort_key)


def lower_torso_keys(
    t: CayleyTable, upper: IndexSet, ideal: IndexSet, opts: SearchOptions
) -> tuple[list[bytes], dict]:
    """Canonical keys of all subsemigroups whose part outside ``ideal`` is ``upper``.

    The search starts from ``<upper>`` and extends only by ideal elements,
    using the stabilizer of ``upper`` as the symmetry group; keys are then
    canonicalized under the full group.
    """
    seed = K.close_mask(t.array, np.zeros(t.n, np.uint8), upper.to_mask())
    full = opts.symmetry
    sub = full.stabilizer(upper) if full is not None else None
    lopts = replace(opts, symmetry=sub, restrict_extensions_to=ideal)
    engine = _MinimalExtensions(t, lopts)
    if not engine.admissible(key_of(seed), int(seed.sum())):
        return [], engine.stats
    found = engine.run(seed)
    if full is None:
        return sorted(found), engine.stats
    perms = full.perms
    out = sorted(K.canonical_key(mask_of(k, t.n), perms).tobytes() for k in found)
    return out, engine.stats


_WORKER: dict = {}


def _init_worker(t, ideal, opts):
    _WORKER.update(t=t, ideal=ideal, opts=opts)


def _lower_task(upper: IndexSet):
    keys, stats = lower_torso_keys(_WORKER["t"], upper, _WORKER["ideal"], _WORKER["opts"])
    return upper, keys, stats


def map_lower_torsos(t, uppers, ideal, opts, jobs: int = 1):
    """Yield ``(upper, keys, stats)`` per upper torso, in input order."""
    if jobs <= 1:
        _init_worker(t, ideal, opts)
        for u in uppers:
            yield _lower_task(u)
        return
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(t, ideal, opts)) as ex:
        yield from ex.map(_lower_task, uppers, chunksize=8)


def torso_enumerate(
    t: CayleyTable, ideal: IndexSet, opts: SearchOptions | None = None, jobs: int = 1
) -> EnumerationResult:
    """Sub(S) assembled from upper torsos in S/I and their lower torsos in I."""
    opts = opts or SearchOptions()
    check_ideal(t, ideal)
    uppers = upper_torsos(t, ideal, opts)
    keys: set[bytes] = set()
    stats = {"upper_torsos": len(uppers), "closures": 0, "nodes": 0}
    for _, part, s in map_lower_torsos(t, uppers, ideal, opts, jobs):
        keys.update(part)
        stats["closures"] += s["closures"]
        stats["nodes"] += s["nodes"]
    prov = {"method": "torso", "ideal_size": len(ideal), **opts.describe()}
    return _result(t, keys, stats, prov)
