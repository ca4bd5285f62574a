"""Regenerate the published census tables for T_0 .. T_4.

Cells that need the long full-tier run of T_4 are marked SKIPPED unless a
completed full-tier report is supplied.
"""

from __future__ import annotations

import numpy as np

from .classify import CensusReport, census
from .pipeline import PipelineReport
from .search import SearchOptions, enumerate_min_extensions
from .symmetry import full_action
from .table import validate
from .transform import cached_full_table

SKIPPED = "SKIPPED"
PREDICATES = ("nilpotent", "commutative", "band", "regular")


def degree_census(d: int) -> CensusReport:
    """Census of T_d (d <= 3) from a breadth-first symmetric run."""
    if d == 0:
        t = validate(np.zeros((0, 0), dtype=np.int64))
        act = None
    else:
        t, idx = cached_full_table(d)
        act = full_action(idx)
    res = enumerate_min_extensions(t, t.empty(), SearchOptions(strategy="bfs", symmetry=act))
    return census(t, res, act)


def _row(label, cells) -> str:
    return f"{label:<24}" + "".join(f"{c!s:>14}" for c in cells)


def census_tables(t4: PipelineReport | None = None, small: dict[int, CensusReport] | None = None) -> str:
    small = small if small is not None else {d: degree_census(d) for d in range(4)}
    out = ["Subsemigroups of T_n", _row("", ["subsemigroups", "conjugacy", "iso", "anti"])]
    for d, rep in sorted(small.items()):
        out.append(_row(f"T{d}", [rep.totals[lv] for lv in ("raw", "conjugacy", "iso", "anti")]))
    full = t4 is not None and t4.tier == "full"
    t4_cells = [t4.total_raw, t4.total_classes] if full else [SKIPPED, SKIPPED]
    out.append(_row("T4", t4_cells + [SKIPPED, SKIPPED]))

    out += ["", "Conjugacy classes by property (nonempty)",
            _row("", [f"T{d}" for d in sorted(small) if d] + ["T4"])]
    for pred in PREDICATES:
        cells = [small[d].predicates.get(pred, 0) for d in sorted(small) if d]
        if t4 is not None and pred in t4.properties:
            cells.append(t4.properties[pred]["classes"])
        elif pred == "regular" and full:
            cells.append(t4.regular)
        else:
            cells.append(SKIPPED)
        out.append(_row(f"#{pred}", cells))
    cells = [small[d].predicates.get("nonempty", 0) for d in sorted(small) if d]
    cells.append(t4.total_classes - 1 if full else SKIPPED)
    out.append(_row("#subsemigroups", cells))

    if 3 in small:
        rep = small[3]
        out += ["", "T3 by size"]
        top = max(rep.by_size)
        out.append(f"{'size':<24} " + " ".join(f"{s:>4}" for s in range(top + 1)))
        for lv in ("raw", "conjugacy", "iso", "anti"):
            out.append(f"{lv:<24} " + " ".join(f"{v:>4}" for v in rep.size_row(lv, top)))
        out += ["", "T3 by rank"]
        out.append(f"{'rank':<24} " + " ".join(f"{r:>4}" for r in range(len(rep.rank_row('raw')))))
        for lv in ("raw", "conjugacy", "iso"):
            out.append(f"{lv:<24} " + " ".join(f"{v:>4}" for v in rep.rank_row(lv)))

    if t4 is not None:
        out += ["", "T4 staged census"] + [f"  {line}" for line in t4.lines()]
        if not full:
            out.append("  Sub_S4(K4_3/K4_2), Sub_S4(K4_3), size distribution: SKIPPED (full tier)")
    return "\n".join(out) + "\n"
