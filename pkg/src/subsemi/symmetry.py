"""Conjugation symmetry on element indices.

A permutation g of the points acts on a transformation semigroup by
``x -> g^-1 x g``; on element indices this is a table automorphism.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import ActionNotClosed, NotAPermutation, ValidationError
from .table import CayleyTable, IndexSet
from .transform import (
    ElementIndexing,
    Transformation,
    compose,
    conjugate,
    parse_transformation,
)


class ConjugationAction:
    """Induced index permutations, one row per group element.

    ``perms[g, x - 1] + 1`` is the index of ``group[g]^-1 * x * group[g]``.
    Row 0 is always the identity.
    """

    def __init__(self, group: Sequence[Transformation | None], perms: np.ndarray):
        self.group = tuple(group)
        perms = np.ascontiguousarray(perms, dtype=np.int32)
        perms.setflags(write=False)
        self.perms = perms
        self.n = perms.shape[1]

    @classmethod
    def trivial(cls, n: int) -> "ConjugationAction":
        return cls([None], np.arange(n, dtype=np.int32)[None, :])

    def __len__(self) -> int:
        return len(self.group)

    def image(self, g: int, a: IndexSet) -> IndexSet:
        row = self.perms[g]
        return IndexSet(self.n, (int(row[i - 1]) + 1 for i in a))

    def images(self, a: IndexSet) -> set[IndexSet]:
        return {self.image(g, a) for g in range(len(self))}

    def subaction(self, rows: Iterable[int]) -> "ConjugationAction":
        rows = sorted(set(rows) | {0})
        return ConjugationAction([self.group[r] for r in rows], self.perms[rows])

    def stabilizer(self, *sets: IndexSet) -> "ConjugationAction":
        """Subgroup fixing every given set setwise."""
        rows = [g for g in range(len(self)) if all(self.image(g, s) == s for s in sets)]
        return self.subaction(rows)

    def is_automorphism_group_of(self, t: CayleyTable, sample: int | None = None, seed=0) -> bool:
        arr = t.array
        rng = np.random.default_rng(seed)
        for row in self.perms:
            if sample is None:
                i = np.arange(t.n)[:, None]
                j = np.arange(t.n)[None, :]
            else:
                i = rng.integers(0, t.n, sample)
                j = rng.integers(0, t.n, sample)
            if not np.array_equal(row[arr[i, j]], arr[row[i], row[j]]):
                return False
        return True


def _group_closure(generators: list[Transformation], degree: int) -> list[Transformation]:
    ident = Transformation.identity(degree)
    group = [ident]
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for h in frontier:
            for g in generators:
                x = compose(h, g)
                if x not in seen:
                    seen.add(x)
                    group.append(x)
                    nxt.append(x)
        frontier = nxt
    return group


def build_action(idx: ElementIndexing, generators: Iterable[Transformation]) -> ConjugationAction:
    """Action of the permutation group generated by ``generators``."""
    gens = list(generators)
    for g in gens:
        if g.degree != idx.degree or not g.is_permutation():
            raise NotAPermutation(f"{g} is not a permutation of degree {idx.degree}")
    group = _group_closure(gens, idx.degree)
    perms = np.empty((len(group), len(idx)), dtype=np.int32)
    for r, g in enumerate(group):
        for k, x in enumerate(idx.elements):
            j = idx.find(conjugate(x, g))
            if j is None:
                raise ActionNotClosed(f"{x} conjugated by {g} is not an indexed element")
            perms[r, k] = j - 1
    return ConjugationAction(group, perms)


def symmetric_generators(degree: int) -> list[Transformation]:
    if degree < 2:
        return []
    gens = [Transformation((2, 1) + tuple(range(3, degree + 1)))]
    if degree > 2:
        gens.append(Transformation(tuple(range(2, degree + 1)) + (1,)))
    return gens


def full_action(idx: ElementIndexing) -> ConjugationAction:
    return build_action(idx, symmetric_generators(idx.degree))


def action_from_labels(t: CayleyTable, generators: Iterable[Transformation] | None) -> ConjugationAction:
    """Conjugation action on a table whose labels are transformation literals.

    A label ``0`` (the zero of a Rees quotient) is fixed by every element.
    """
    if t.labels is None:
        raise ValidationError("symmetry on a table file needs transformation labels")
    zero = None
    elems = []
    for i, lab in enumerate(t.labels):
        if lab == "0":
            zero = i
        else:
            elems.append(parse_transformation(lab))
    if not elems:
        return ConjugationAction.trivial(t.n)
    degree = elems[0].degree
    sub = ElementIndexing(degree, elems)
    gens = symmetric_generators(degree) if generators is None else list(generators)
    inner = build_action(sub, gens)
    positions = [i for i in range(t.n) if i != zero]
    perms = np.empty((len(inner), t.n), dtype=np.int32)
    for r in range(len(inner)):
        for k, p in enumerate(positions):
            perms[r, p] = positions[inner.perms[r, k]]
        if zero is not None:
            perms[r, zero] = zero
    act = ConjugationAction(inner.group, perms)
    if not act.is_automorphism_group_of(t):
        raise ActionNotClosed("conjugation does not preserve the table")
    return act


def induced_quotient_action(q, act: ConjugationAction) -> ConjugationAction:
    """Action on the Rees quotient ``q`` (a QuotientMap); zero is fixed."""
    m = q.table.n
    pos = np.full(act.n, m - 1, dtype=np.int64)
    src = np.array(q.to_source, dtype=np.int64) - 1
    pos[src] = np.arange(len(src))
    perms = np.empty((len(act), m), dtype=np.int32)
    for r in range(len(act)):
        img = act.perms[r][src]
        if len(src) and (pos[img] == m - 1).any():
            raise ActionNotClosed("the ideal is not invariant under the group")
        perms[r, : m - 1] = pos[img]
        perms[r, m - 1] = m - 1
    return ConjugationAction(act.group, perms)


def canonical_rep(a: IndexSet, act: ConjugationAction) -> IndexSet:
    """Lexicographically least ascending member sequence in the orbit of ``a``."""
    best = min(tuple(sorted(int(row[i - 1]) + 1 for i in a)) for row in act.perms)
    return IndexSet(a.universe, best)


def orbit_count(a: IndexSet, act: ConjugationAction) -> int:
    return len(act.images(a))


def orbit_size_fast(mask: np.ndarray, act: ConjugationAction) -> int:
    return len(act) // len(K.stabilizer_rows(mask, act.perms))


@dataclass(frozen=True)
class EquivClasses:
    """Partition by generated cyclic subsemigroup; ``rep[x]`` is 1-based."""

    classes: tuple[tuple[int, ...], ...]
    rep: tuple[int, ...]

    def reps(self) -> list[int]:
        return [c[0] for c in self.classes]


_EQUIV_CACHE: dict[bytes, EquivClasses] = {}


def _table_digest(t: CayleyTable) -> bytes:
    return hashlib.sha1(t.array.tobytes()).digest() + t.n.to_bytes(4, "little")


def equiv_generator_classes(t: CayleyTable) -> EquivClasses:
    """Group elements by the cyclic subsemigroup they generate."""
    digest = _table_digest(t)
    if digest in _EQUIV_CACHE:
        return _EQUIV_CACHE[digest]
    groups: dict[bytes, list[int]] = {}
    empty = np.zeros(t.n, np.uint8)
    for x in range(t.n):
        key = K.extend_closure(t.array, empty, x).tobytes()
        groups.setdefault(key, []).append(x + 1)
    classes = tuple(sorted(tuple(c) for c in groups.values()))
    rep = [0] * t.n
    for c in classes:
        for x in c:
            rep[x - 1] = c[0]
    result = EquivClasses(classes, tuple(rep))
    _EQUIV_CACHE[digest] = result
    return result


def normalizer_orbit_reps(tset: IndexSet, candidates: IndexSet, act: ConjugationAction) -> IndexSet:
    """Least member of each orbit of ``candidates`` under the stabilizer of ``tset``."""
    stab = act.stabilizer(tset)
    covered: set[int] = set()
    reps = []
    for c in candidates:
        if c in covered:
            continue
        reps.append(c)
        covered.update(int(row[c - 1]) + 1 for row in stab.perms)
    return IndexSet(candidates.universe, reps)


def parse_symmetry(spec: str | None, idx: ElementIndexing | None, t: CayleyTable | None = None):
    """Resolve ``full``, ``none`` or a generator list like ``[2,1,3],[1,3,2]``."""
    from .transform import parse_transformation_list

    if spec is None or spec == "none":
        return None
    gens = None if spec == "full" else parse_transformation_list(spec)
    if spec != "full" and not gens:
        raise ValidationError(f"bad symmetry spec {spec!r}")
    if idx is not None:
        return full_action(idx) if gens is None else build_action(idx, gens)
    if t is None:
        raise ValidationError("symmetry needs a table")
    return action_from_labels(t, gens)
