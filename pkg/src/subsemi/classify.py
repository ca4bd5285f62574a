"""Predicates, ranks, isomorphism invariants and census aggregation."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import EmptySemigroup, TooLargeForCanonicalization, ValidationError
from .search import EnumerationResult
from .symmetry import ConjugationAction, orbit_size_fast
from .table import CayleyTable, IndexSet, is_closed, validate

CANONICAL_CAP = 32


class SubTable:
    """A closed subset re-indexed 1..|T| as a standalone table."""

    def __init__(self, parent: CayleyTable, members: IndexSet):
        if not is_closed(parent, members):
            raise ValidationError(f"{members} is not closed")
        self.parent = parent
        self.members = members.members
        pos = np.full(parent.n, -1, dtype=np.int64)
        idx = np.array(self.members, dtype=np.int64) - 1
        pos[idx] = np.arange(len(idx))
        sub = pos[parent.array[np.ix_(idx, idx)]] if len(idx) else np.zeros((0, 0), np.int64)
        self.table = validate(sub + 1)

    @property
    def array(self) -> np.ndarray:
        return self.table.array

    def __len__(self) -> int:
        return len(self.members)


def is_commutative(st: SubTable) -> bool:
    return bool(np.array_equal(st.array, st.array.T))


def is_band(st: SubTable) -> bool:
    return bool((np.diag(st.array) == np.arange(len(st))).all())


def is_regular(st: SubTable) -> bool:
    """Every a has some x with a*x*a = a."""
    a = st.array
    for i in range(len(st)):
        if not (a[a[i, :], i] == i).any():
            return False
    return True


def nilpotency(st: SubTable) -> tuple[bool, int | None]:
    """Decide k-nilpotency by scanning k-fold products.

    The zero candidate is the product of the first k-tuple; any other tuple
    with a different product refutes k.  Tuples sharing a prefix product
    share all completions, so each (depth, prefix product) pair is expanded
    once.
    """
    m = len(st)
    if m == 0:
        raise EmptySemigroup("the empty semigroup is not nilpotent")
    rows = st.table.rows
    for k in range(1, m + 1):
        zero = 0
        for _ in range(k - 1):
            zero = rows[zero][0]
        if all(rows[zero][x] == zero and rows[x][zero] == zero for x in range(m)):
            if _all_products_equal(rows, m, k, zero):
                return True, k
    return False, None


def _all_products_equal(rows, m, k, zero) -> bool:
    seen = [set() for _ in range(k + 1)]
    stack = [(x, 1) for x in range(m - 1, -1, -1)]
    while stack:
        p, depth = stack.pop()
        if depth == k:
            if p != zero:
                return False
            continue
        if p in seen[depth]:
            continue
        seen[depth].add(p)
        row = rows[p]
        stack.extend((row[x], depth + 1) for x in range(m - 1, -1, -1))
    return True


def nilpotency_by_powers(st: SubTable) -> tuple[bool, int | None]:
    """Compute S, S^2, ... directly; nilpotent iff the chain reaches a singleton."""
    m = len(st)
    if m == 0:
        raise EmptySemigroup("the empty semigroup is not nilpotent")
    rows = st.table.rows
    power = set(range(m))
    k = 1
    while len(power) > 1:
        nxt = {rows[p][x] for p in power for x in range(m)}
        if nxt == power:
            return False, None
        power = nxt
        k += 1
    return True, k


def semigroup_rank(st: SubTable) -> int:
    """Least size of a generating set.

    Elements that are not products of two elements must be generators; the
    rest is found by subset search over equivalent-generator representatives.
    """
    m = len(st)
    if m == 0:
        return 0
    arr = st.array
    products = np.zeros(m, np.uint8)
    products[arr.ravel()] = 1
    forced = 1 - products
    base = K.close_mask(arr, np.zeros(m, np.uint8), forced)
    nforced = int(forced.sum())
    if base.all():
        return nforced
    reps = {}
    empty = np.zeros(m, np.uint8)
    for x in range(m):
        if not base[x]:
            reps.setdefault(K.extend_closure(arr, empty, x).tobytes(), x)
    cands = sorted(reps.values())
    for k in range(1, len(cands) + 1):
        if _generates(arr, base, cands, k):
            return nforced + k
    raise AssertionError("unreachable: the candidates generate everything")


def _generates(arr, base, cands, k) -> bool:
    def rec(mask, start, left):
        if left == 0:
            return bool(mask.all())
        for i in range(start, len(cands) - left + 1):
            c = cands[i]
            if mask[c]:
                continue
            if rec(K.extend_closure(arr, mask, c), i + 1, left - 1):
                return True
        return False

    return rec(base, 0, k)


# --- canonical forms -----------------------------------------------------


@dataclass(frozen=True, order=True)
class CanonicalForm:
    size: int
    table: tuple[int, ...]
    dual: bool = field(default=False, compare=False)


def _element_invariants(rows: list[list[int]]) -> list[tuple]:
    m = len(rows)
    inv = []
    for x in range(m):
        powers = [x]
        seen = {x: 0}
        while True:
            p = rows[powers[-1]][x]
            if p in seen:
                index, period = seen[p], len(powers) - seen[p]
                break
            seen[p] = len(powers)
            powers.append(p)
        row, col = rows[x], [rows[y][x] for y in range(m)]
        inv.append((
            rows[x][x] == x,
            index,
            period,
            len(set(row)),
            len(set(col)),
            sum(row[y] == y for y in range(m)),
            sum(col[y] == y for y in range(m)),
            row.count(x),
            col.count(x),
            sum(rows[y][y] == x for y in range(m)),
        ))
    return inv


def _refine(rows, cells):
    m = len(rows)
    while True:
        cell_of = [0] * m
        for ci, c in enumerate(cells):
            for x in c:
                cell_of[x] = ci
        out = []
        changed = False
        for c in cells:
            if len(c) == 1:
                out.append(c)
                continue
            sig: dict[tuple, list[int]] = {}
            for x in c:
                row = rows[x]
                s = tuple(sorted((cell_of[y], cell_of[row[y]], cell_of[rows[y][x]]) for y in range(m)))
                sig.setdefault(s, []).append(x)
            if len(sig) > 1:
                changed = True
            out.extend(sig[s] for s in sorted(sig))
        cells = out
        if not changed:
            return cells


def _canonical_table(rows) -> tuple[int, ...]:
    """Least relabeled table over the leaves of an individualize-refine tree."""
    m = len(rows)
    if m == 0:
        return ()
    inv = _element_invariants(rows)
    groups: dict[tuple, list[int]] = defaultdict(list)
    for x in range(m):
        groups[inv[x]].append(x)
    start = [groups[k] for k in sorted(groups)]
    best = None
    stack = [start]
    while stack:
        cells = _refine(rows, stack.pop())
        target = next((i for i, c in enumerate(cells) if len(c) > 1), None)
        if target is None:
            order = [c[0] for c in cells]
            pos = [0] * m
            for i, x in enumerate(order):
                pos[x] = i
            flat = tuple(pos[rows[a][b]] for a in order for b in order)
            if best is None or flat < best:
                best = flat
            continue
        cell = cells[target]
        for x in reversed(cell):
            rest = [y for y in cell if y != x]
            stack.append(cells[:target] + [[x], rest] + cells[target + 1:])
    return best


def canonical_form(st: SubTable, mode: str = "iso", cap: int = CANONICAL_CAP) -> CanonicalForm:
    """Isomorphism-invariant table; ``iso_anti`` also identifies the dual."""
    if mode not in ("iso", "iso_anti"):
        raise ValidationError(f"unknown mode {mode!r}")
    m = len(st)
    if m > cap:
        raise TooLargeForCanonicalization(f"{m} elements exceeds the cap {cap}")
    rows = st.table.rows
    form = _canonical_table(rows)
    if mode == "iso":
        return CanonicalForm(m, form)
    dual = _canonical_table([list(col) for col in zip(*rows)]) if m else ()
    if dual < form:
        return CanonicalForm(m, dual, True)
    return CanonicalForm(m, form)


# --- census ----------------------------------------------------------------


LEVELS = ("raw", "conjugacy", "iso", "anti")


@dataclass
class CensusReport:
    by_size: dict[int, dict[str, int]] = field(default_factory=dict)
    by_rank: dict[int, dict[str, int]] = field(default_factory=dict)
    totals: dict[str, int] = field(default_factory=dict)
    nilpotent_by_degree: dict[int, int] = field(default_factory=dict)
    predicates: dict[str, int] = field(default_factory=dict)

    def size_row(self, level: str, upto: int) -> list[int]:
        return [self.by_size.get(s, {}).get(level, 0) for s in range(upto + 1)]

    def rank_row(self, level: str) -> list[int]:
        top = max(self.by_rank, default=-1)
        return [self.by_rank.get(r, {}).get(level, 0) for r in range(top + 1)]


def census(
    t: CayleyTable,
    results: EnumerationResult,
    act: ConjugationAction | None = None,
    with_iso: bool = True,
    with_rank: bool = True,
    with_predicates: bool = True,
) -> CensusReport:
    """Aggregate counts over class representatives.

    Raw counts are recovered through orbit sizes; predicate counts are over
    nonempty conjugacy classes.
    """
    report = CensusReport()
    iso_sets: dict[int, set] = defaultdict(set)
    anti_sets: dict[int, set] = defaultdict(set)
    rank_iso: dict[int, set] = defaultdict(set)
    by_size: dict[int, Counter] = defaultdict(Counter)
    by_rank: dict[int, Counter] = defaultdict(Counter)
    preds: Counter = Counter()
    nil: Counter = Counter()
    for rep in results.sorted():
        size = len(rep)
        orbit = 1 if act is None else orbit_size_fast(rep.to_mask(), act)
        by_size[size]["raw"] += orbit
        by_size[size]["conjugacy"] += 1
        st = SubTable(t, rep) if (with_iso or with_predicates or with_rank) else None
        form = None
        if with_iso:
            form = canonical_form(st, "iso")
            iso_sets[size].add(form)
            anti_sets[size].add(canonical_form(st, "iso_anti"))
        if with_rank:
            r = results.ranks[rep] if results.ranks is not None else semigroup_rank(st)
            by_rank[r]["raw"] += orbit
            by_rank[r]["conjugacy"] += 1
            if form is not None:
                rank_iso[r].add(form)
        if with_predicates and size:
            ok, k = nilpotency(st)
            if ok:
                preds["nilpotent"] += 1
                nil[k] += 1
            preds["commutative"] += is_commutative(st)
            preds["band"] += is_band(st)
            preds["regular"] += is_regular(st)
            preds["nonempty"] += 1
    for size, c in by_size.items():
        if with_iso:
            c["iso"] = len(iso_sets[size])
            c["anti"] = len(anti_sets[size])
        report.by_size[size] = dict(c)
    for r, c in by_rank.items():
        if with_iso:
            c["iso"] = len(rank_iso[r])
        report.by_rank[r] = dict(c)
    for level in LEVELS:
        if level in ("iso", "anti") and not with_iso:
            continue
        report.totals[level] = sum(c.get(level, 0) for c in report.by_size.values())
    report.predicates = dict(preds)
    report.nilpotent_by_degree = dict(sorted(nil.items()))
    return report


# --- emitters ----------------------------------------------------------------


def hasse_edges(sets: list[IndexSet]) -> list[tuple[int, int]]:
    """Covering pairs ``(lower, upper)`` of the containment order, as list positions."""
    bits = [s.bits for s in sets]
    order = sorted(range(len(sets)), key=lambda i: (len(sets[i]), sets[i].members))
    edges = []
    for pos, a in enumerate(order):
        below = [b for b in order[:pos] if bits[b] & bits[a] == bits[b] and bits[b] != bits[a]]
        maximal: list[int] = []
        # larger sets first, so anything strictly between is already kept
        for b in reversed(below):
            if not any(bits[b] & bits[c] == bits[b] for c in maximal):
                maximal.append(b)
                edges.append((b, a))
    return sorted(edges)


def to_dot(sets: list[IndexSet], labels: list[str] | None = None) -> str:
    lines = ["digraph subsemigroups {", "  rankdir=BT;", "  node [shape=box];"]
    for i, s in enumerate(sets):
        text = ",".join(map(str, s.members)) if s else "{}"
        if labels is not None and s:
            text = " ".join(labels[m - 1] for m in s)
        lines.append(f'  n{i} [label="{text}"];')
    for b, a in hasse_edges(sets):
        lines.append(f"  n{b} -> n{a};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def report_rows(report: CensusReport, kind: str) -> tuple[list[str], list[list]]:
    """Header and rows for one report kind, shared by text and CSV output."""
    levels = [lv for lv in LEVELS if lv in report.totals] or ["raw", "conjugacy"]
    if kind == "size":
        top = max(report.by_size, default=0)
        rows = [[s] + [report.by_size.get(s, {}).get(lv, 0) for lv in levels] for s in range(top + 1)]
        rows.append(["total"] + [report.totals.get(lv, 0) for lv in levels])
        return ["size", *levels], rows
    if kind == "rank":
        rlevels = [lv for lv in levels if lv != "anti"]
        rows = [[r] + [report.by_rank.get(r, {}).get(lv, 0) for lv in rlevels] for r in sorted(report.by_rank)]
        return ["rank", *rlevels], rows
    if kind == "classes":
        return ["level", "count"], [[lv, report.totals[lv]] for lv in levels if lv in report.totals]
    if kind == "nilpotent":
        rows = [[k, v] for k, v in report.nilpotent_by_degree.items()]
        rows.append(["total", report.predicates.get("nilpotent", 0)])
        return ["degree", "classes"], rows
    if kind in ("commutative", "band", "regular"):
        return ["predicate", "classes"], [[kind, report.predicates.get(kind, 0)]]
    raise ValidationError(f"unknown report {kind!r}")


def format_rows(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[str(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells) + "\n"
