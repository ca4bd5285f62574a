"""Cayley tables, index sets and the closure algorithm.

All public indices are 1-based.  Internally a table is a read-only numpy
array of 0-based entries, so ``t.array[i - 1, j - 1] + 1 == t.entry(i, j)``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EntryOutOfRange,
    NonAssociative,
    NotSquare,
    PreconditionViolated,
    ValidationError,
)


class IndexSet:
    """Immutable subset of ``{1..universe}`` stored as an integer bitmask.

    Bit ``i - 1`` of ``bits`` is set when element ``i`` is a member.
    Iteration is always in ascending index order.
    """

    __slots__ = ("universe", "bits")

    def __init__(self, universe: int, members: Iterable[int] = ()):
        bits = 0
        for m in members:
            if not 1 <= m <= universe:
                raise ValidationError(f"index {m} outside 1..{universe}")
            bits |= 1 << (m - 1)
        self.universe = universe
        self.bits = bits

    @classmethod
    def from_bits(cls, universe: int, bits: int) -> "IndexSet":
        if bits >> universe:
            raise ValidationError(f"bitmask has members beyond {universe}")
        obj = cls.__new__(cls)
        obj.universe = universe
        obj.bits = bits
        return obj

    @classmethod
    def full(cls, universe: int) -> "IndexSet":
        return cls.from_bits(universe, (1 << universe) - 1)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "IndexSet":
        packed = np.packbits(np.asarray(mask, dtype=np.uint8), bitorder="little")
        return cls.from_bits(len(mask), int.from_bytes(packed.tobytes(), "little"))

    def to_mask(self) -> np.ndarray:
        nbytes = (self.universe + 7) // 8
        raw = np.frombuffer(self.bits.to_bytes(nbytes, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.universe].copy()

    @property
    def members(self) -> tuple[int, ...]:
        s = bin(self.bits)[:1:-1]
        return tuple(i + 1 for i, c in enumerate(s) if c == "1")

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __bool__(self) -> bool:
        return self.bits != 0

    def __contains__(self, i: int) -> bool:
        return 1 <= i <= self.universe and bool(self.bits >> (i - 1) & 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexSet):
            return NotImplemented
        return self.universe == other.universe and self.bits == other.bits

    def __hash__(self) -> int:
        return hash((self.universe, self.bits))

    def _check(self, other: "IndexSet") -> None:
        if other.universe != self.universe:
            raise ValidationError("index sets over different universes")

    def __or__(self, other: "IndexSet") -> "IndexSet":
        self._check(other)
        return IndexSet.from_bits(self.universe, self.bits | other.bits)

    def __and__(self, other: "IndexSet") -> "IndexSet":
        self._check(other)
        return IndexSet.from_bits(self.universe, self.bits & other.bits)

    def __sub__(self, other: "IndexSet") -> "IndexSet":
        self._check(other)
        return IndexSet.from_bits(self.universe, self.bits & ~other.bits)

    def __le__(self, other: "IndexSet") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def __lt__(self, other: "IndexSet") -> bool:
        return self <= other and self.bits != other.bits

    issubset = __le__

    def complement(self) -> "IndexSet":
        return IndexSet.from_bits(self.universe, ~self.bits & ((1 << self.universe) - 1))

    def add(self, *items: int) -> "IndexSet":
        return self | IndexSet(self.universe, items)

    def sort_key(self) -> tuple:
        """Order by cardinality, then by the ascending member sequence."""
        return (len(self), self.members)

    def __repr__(self) -> str:
        return f"IndexSet({self.universe}, {{{','.join(map(str, self.members))}}})"


class CayleyTable:
    """A validated multiplication table.  Construct via :func:`validate`."""

    __slots__ = ("n", "array", "labels", "_rows")

    def __init__(self, array: np.ndarray, labels: Sequence[str] | None = None):
        self.n = int(array.shape[0])
        arr = np.ascontiguousarray(array, dtype=np.int32)
        arr.setflags(write=False)
        self.array = arr
        self.labels = tuple(labels) if labels is not None else None
        self._rows = None

    def entry(self, i: int, j: int) -> int:
        return int(self.array[i - 1, j - 1]) + 1

    @property
    def rows(self) -> list[list[int]]:
        """0-based nested lists; faster than numpy for scalar lookups."""
        if self._rows is None:
            self._rows = self.array.tolist()
        return self._rows

    def to_lists(self) -> list[list[int]]:
        return [[v + 1 for v in row] for row in self.rows]

    def universe(self) -> IndexSet:
        return IndexSet.full(self.n)

    def empty(self) -> IndexSet:
        return IndexSet(self.n)

    def subset(self, members: Iterable[int]) -> IndexSet:
        return IndexSet(self.n, members)

    def __eq__(self, other) -> bool:
        return isinstance(other, CayleyTable) and np.array_equal(self.array, other.array)

    def __hash__(self):
        return hash(self.array.tobytes())

    def __repr__(self) -> str:
        return f"CayleyTable(n={self.n})"


def _magma_generators(rows: list[list[int]], n: int) -> list[int]:
    # greedy: smallest element not yet generated, until everything is generated
    inside = [False] * n
    members: list[int] = []
    gens = []
    for g in range(n):
        if inside[g]:
            continue
        gens.append(g)
        inside[g] = True
        work = [g]
        while work:
            y = work.pop()
            members.append(y)
            row = rows[y]
            for z in members:
                for p in (row[z], rows[z][y]):
                    if not inside[p]:
                        inside[p] = True
                        work.append(p)
    return gens


def validate(raw, labels: Sequence[str] | None = None) -> CayleyTable:
    """Check range and associativity of a 1-based square matrix.

    Associativity uses Light's test against a generating set of the magma,
    which costs O(|gens| * n^2) instead of O(n^3) and still returns a
    genuine failing triple.
    """
    arr = np.asarray(raw, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NotSquare(f"table shape {arr.shape} is not square")
    n = arr.shape[0]
    bad = np.argwhere((arr < 1) | (arr > n))
    if len(bad):
        i, j = bad[0]
        raise EntryOutOfRange(int(i) + 1, int(j) + 1, int(arr[i, j]), n)
    t = arr - 1
    if labels is not None and len(labels) != n:
        raise ValidationError(f"{len(labels)} labels for {n} elements")
    for a in _magma_generators(t.tolist(), n):
        lhs = t[t[:, a], :]  # (x a) y
        rhs = t[:, t[a, :]]  # x (a y)
        diff = np.argwhere(lhs != rhs)
        if len(diff):
            x, y = diff[0]
            raise NonAssociative(int(x) + 1, a + 1, int(y) + 1)
    return CayleyTable(t, labels)


def read_table(path) -> CayleyTable:
    return parse_table(Path(path).read_text())


def parse_table(text: str) -> CayleyTable:
    lines = text.splitlines()
    if not lines:
        raise ValidationError("empty table file")
    try:
        n = int(lines[0].strip())
        body = [list(map(int, lines[1 + i].split())) for i in range(n)]
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"malformed table file: {exc}") from None
    if any(len(r) != n for r in body):
        raise NotSquare("table rows have the wrong length")
    labels = {}
    for line in lines[1 + n:]:
        if not line.strip():
            continue
        if not line.startswith("# "):
            raise ValidationError(f"unexpected trailing line {line!r}")
        _, idx, label = line.split(" ", 2)
        labels[int(idx)] = label
    label_list = None
    if labels:
        if sorted(labels) != list(range(1, n + 1)):
            raise ValidationError("label lines must cover every index exactly once")
        label_list = [labels[i] for i in range(1, n + 1)]
    return validate(np.array(body, dtype=np.int64).reshape(n, n), label_list)


def format_table(t: CayleyTable) -> str:
    out = [str(t.n)]
    out.extend(" ".join(map(str, row)) for row in t.to_lists())
    if t.labels is not None:
        out.extend(f"# {i} {lab}" for i, lab in enumerate(t.labels, 1))
    return "\n".join(out) + "\n"


def write_table(t: CayleyTable, path) -> None:
    Path(path).write_text(format_table(t))


def missing_elements(t: CayleyTable, a: IndexSet) -> IndexSet:
    """Products of members of ``a`` that are not themselves in ``a``."""
    rows = t.rows
    members = [m - 1 for m in a]
    bits = 0
    for i in members:
        row = rows[i]
        for j in members:
            bits |= 1 << row[j]
    return IndexSet.from_bits(t.n, bits & ~a.bits)


def is_closed(t: CayleyTable, a: IndexSet) -> bool:
    return not missing_elements(t, a)


def closure_naive(t: CayleyTable, a: IndexSet) -> IndexSet:
    """Iterate ``A -> A | m(A)`` until nothing is missing."""
    current = a
    while True:
        m = missing_elements(t, current)
        if not m:
            return current
        current = current | m


@dataclass
class ClosureTrace:
    result: IndexSet
    steps: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)
    entries_checked: int = 0


def closure_incremental(
    t: CayleyTable, base: IndexSet, adds: IndexSet, strict: bool = True
) -> ClosureTrace:
    """Extend a closed ``base`` by ``adds`` one element at a time.

    Only the row and column of each newly admitted element are scanned
    against the current set, so each table cell is read at most once.
    Pending elements are admitted in ascending order.
    """
    if strict:
        if not is_closed(t, base):
            raise PreconditionViolated("base is not closed")
        if adds & base:
            raise PreconditionViolated("adds intersects base")
    rows = t.rows
    flag = [False] * t.n
    members = []
    for m in base:
        flag[m - 1] = True
        members.append(m - 1)
    heap = []
    for m in adds:
        if not flag[m - 1]:
            flag[m - 1] = True
            heap.append(m - 1)
    heapq.heapify(heap)
    trace = ClosureTrace(result=base)
    checked = 0
    while heap:
        y = heapq.heappop(heap)
        members.append(y)
        row = rows[y]
        forced = []
        for z in members:
            checked += 1
            p = row[z]
            if not flag[p]:
                flag[p] = True
                forced.append(p)
            if z != y:
                checked += 1
                p = rows[z][y]
                if not flag[p]:
                    flag[p] = True
                    forced.append(p)
        for p in forced:
            heapq.heappush(heap, p)
        trace.steps.append((y + 1, tuple(sorted(p + 1 for p in forced))))
    bits = 0
    for m in members:
        bits |= 1 << m
    trace.result = IndexSet.from_bits(t.n, bits)
    trace.entries_checked = checked
    return trace


def closure(t: CayleyTable, a: IndexSet) -> IndexSet:
    """Subsemigroup generated by ``a``."""
    return closure_incremental(t, IndexSet(t.n), a, strict=False).result
