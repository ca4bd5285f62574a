"""Full transformation semigroups, their rank ideals and Rees quotients.

Transformations act on the right: ``compose(s, t)`` applies ``s`` first,
then ``t``, so the image of point ``i`` is ``t[s[i]]``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegreeMismatch,
    DegreeTooLarge,
    NotAnIdeal,
    NotAPermutation,
    RankOutOfRange,
    ValidationError,
)
from .table import CayleyTable, IndexSet, validate

DEFAULT_DEGREE_CAP = 5


@dataclass(frozen=True)
class Transformation:
    images: tuple[int, ...]

    def __post_init__(self):
        d = len(self.images)
        if d < 1:
            raise ValidationError("a transformation needs degree >= 1")
        if any(not 1 <= v <= d for v in self.images):
            raise ValidationError(f"images {self.images} outside 1..{d}")

    @classmethod
    def of(cls, images: Iterable[int]) -> "Transformation":
        return cls(tuple(int(v) for v in images))

    @classmethod
    def identity(cls, degree: int) -> "Transformation":
        return cls(tuple(range(1, degree + 1)))

    @property
    def degree(self) -> int:
        return len(self.images)

    def is_permutation(self) -> bool:
        return len(set(self.images)) == len(self.images)

    def inverse(self) -> "Transformation":
        if not self.is_permutation():
            raise NotAPermutation(f"{self} is not bijective")
        inv = [0] * self.degree
        for i, v in enumerate(self.images, 1):
            inv[v - 1] = i
        return Transformation(tuple(inv))

    def __mul__(self, other: "Transformation") -> "Transformation":
        return compose(self, other)

    def __str__(self) -> str:
        return "[" + ",".join(map(str, self.images)) + "]"


_LITERAL = re.compile(r"^\s*\[\s*\d+(\s*,\s*\d+)*\s*\]\s*$")


def parse_transformation(text: str) -> Transformation:
    if not _LITERAL.match(text):
        raise ValidationError(f"not a transformation literal: {text!r}")
    return Transformation.of(int(v) for v in text.strip()[1:-1].split(","))


def parse_transformation_list(text: str) -> list[Transformation]:
    """Parse ``[2,1,3],[1,3,2]`` (optionally wrapped in another bracket)."""
    return [parse_transformation(m) for m in re.findall(r"\[[\d\s,]+\]", text)]


def compose(s: Transformation, t: Transformation) -> Transformation:
    if s.degree != t.degree:
        raise DegreeMismatch(f"degrees {s.degree} and {t.degree} differ")
    ti = t.images
    return Transformation(tuple(ti[v - 1] for v in s.images))


def image_rank(t: Transformation) -> int:
    return len(set(t.images))


def conjugate(t: Transformation, g: Transformation) -> Transformation:
    """``g^-1 t g``."""
    if t.degree != g.degree:
        raise DegreeMismatch(f"degrees {t.degree} and {g.degree} differ")
    return compose(compose(g.inverse(), t), g)


class ElementIndexing:
    """Bijection between 1-based element indices and transformations."""

    def __init__(self, degree: int, elements: Sequence[Transformation]):
        self.degree = degree
        self.elements = tuple(elements)
        self._lookup = {e.images: i for i, e in enumerate(self.elements, 1)}
        if len(self._lookup) != len(self.elements):
            raise ValidationError("duplicate elements in indexing")
        if any(e.degree != degree for e in self.elements):
            raise DegreeMismatch("element degrees differ from the declared degree")

    @classmethod
    def full(cls, degree: int) -> "ElementIndexing":
        elements = [
            Transformation(p)
            for p in itertools.product(range(1, degree + 1), repeat=degree)
        ]
        return cls(degree, elements)

    def __len__(self) -> int:
        return len(self.elements)

    def element(self, i: int) -> Transformation:
        return self.elements[i - 1]

    def index(self, t: Transformation | Sequence[int]) -> int:
        images = t.images if isinstance(t, Transformation) else tuple(t)
        try:
            return self._lookup[images]
        except KeyError:
            raise ValidationError(f"{list(images)} is not an indexed element") from None

    def find(self, t: Transformation) -> int | None:
        return self._lookup.get(t.images)

    def indices(self, ts: Iterable[Transformation | Sequence[int]]) -> IndexSet:
        return IndexSet(len(self), (self.index(t) for t in ts))

    def labels(self) -> list[str]:
        return [str(e) for e in self.elements]


def _check_degree(d: int, cap: int) -> None:
    if d < 1:
        raise ValidationError("degree must be at least 1")
    if d > cap:
        raise DegreeTooLarge(f"degree {d} exceeds the cap {cap}")


def full_transformation_table(
    d: int, cap: int = DEFAULT_DEGREE_CAP
) -> tuple[CayleyTable, ElementIndexing]:
    """Cayley table of T_d over lexicographically ordered image lists."""
    _check_degree(d, cap)
    idx = ElementIndexing.full(d)
    n = len(idx)
    elems = np.array([e.images for e in idx.elements], dtype=np.int64) - 1
    # product(i, j)[k] = elems[j, elems[i, k]]
    prod = np.zeros((n, n), dtype=np.int64)
    et = elems.T
    for k in range(d):
        prod = prod * d + et[elems[:, k], :]
    return validate(prod + 1, idx.labels()), idx


_table_cache: dict[int, tuple[CayleyTable, ElementIndexing]] = {}


def cached_full_table(d: int) -> tuple[CayleyTable, ElementIndexing]:
    if d not in _table_cache:
        _table_cache[d] = full_transformation_table(d)
    return _table_cache[d]


def ideal_elements(idx: ElementIndexing, i: int) -> IndexSet:
    """Elements of rank at most ``i``."""
    if not 1 <= i <= idx.degree:
        raise RankOutOfRange(f"rank bound {i} outside 1..{idx.degree}")
    return IndexSet(len(idx), (k for k, e in enumerate(idx.elements, 1) if image_rank(e) <= i))


def symmetric_group(idx: ElementIndexing) -> IndexSet:
    return IndexSet(len(idx), (k for k, e in enumerate(idx.elements, 1) if e.is_permutation()))


def check_ideal(t: CayleyTable, ideal: IndexSet) -> None:
    if not ideal:
        return
    inside = ideal.to_mask().astype(bool)
    cols = np.flatnonzero(inside)
    for block, transpose in ((t.array[:, cols], False), (t.array[cols, :].T, True)):
        bad = np.argwhere(~inside[block])
        if len(bad):
            s, k = bad[0]
            raise NotAnIdeal(int(s) + 1, int(cols[k]) + 1)


@dataclass(frozen=True)
class QuotientMap:
    """Rees quotient ``S/I``; the zero is the last quotient index."""

    source: CayleyTable
    ideal: IndexSet
    table: CayleyTable
    zero: int
    to_source: tuple[int, ...]

    def lift(self, q: IndexSet) -> IndexSet:
        """Quotient subset minus the zero, as source indices."""
        return IndexSet(self.source.n, (self.to_source[i - 1] for i in q if i != self.zero))

    def lower(self, s: IndexSet) -> IndexSet:
        """Source subset as quotient indices; ideal members collapse to zero."""
        pos = {v: k for k, v in enumerate(self.to_source, 1)}
        return IndexSet(self.table.n, (pos.get(i, self.zero) for i in s))


def rees_quotient(t: CayleyTable, ideal: IndexSet) -> QuotientMap:
    check_ideal(t, ideal)
    keep = [i - 1 for i in (t.universe() - ideal)]
    m = len(keep)
    pos = np.full(t.n, m, dtype=np.int64)
    pos[keep] = np.arange(m)
    q = np.full((m + 1, m + 1), m, dtype=np.int64)
    if m:
        q[:m, :m] = pos[t.array[np.ix_(keep, keep)]]
    labels = None
    if t.labels is not None:
        labels = [t.labels[i] for i in keep] + ["0"]
    qt = validate(q + 1, labels)
    return QuotientMap(t, ideal, qt, m + 1, tuple(i + 1 for i in keep))
