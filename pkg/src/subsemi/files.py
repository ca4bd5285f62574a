"""Line-oriented files for subsemigroup sets, shards and run manifests.

A set file starts with ``#key value`` header lines, then holds one set per
line: ascending 1-based indices joined by commas, ``-`` for the empty set,
or a fixed-width hex bitmask when ``#format bits`` is declared.  A shard
file holds one or more ``#shard <key>`` sections and ends with
``#end <count>``; a missing or wrong end line marks a partial write.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import CorruptShard, ValidationError
from .table import IndexSet


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def format_set(s: IndexSet, fmt: str = "list") -> str:
    if fmt == "bits":
        return format(s.bits, f"0{max(1, (s.universe + 3) // 4)}x")
    return ",".join(map(str, s.members)) if s else "-"


def parse_set(line: str, universe: int, fmt: str = "list") -> IndexSet:
    line = line.strip()
    if fmt == "bits":
        return IndexSet.from_bits(universe, int(line, 16))
    if line == "-":
        return IndexSet(universe)
    members = [int(v) for v in line.split(",")]
    if members != sorted(set(members)):
        raise ValidationError(f"members not strictly ascending: {line!r}")
    return IndexSet(universe, members)


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def format_sets(sets: Iterable[IndexSet], header: dict, fmt: str = "list") -> str:
    lines = [f"#{k} {v}" for k, v in header.items()]
    if fmt == "bits":
        lines.append("#format bits")
    lines.extend(format_set(s, fmt) for s in sorted(sets, key=IndexSet.sort_key))
    return "\n".join(lines) + "\n"


def write_sets(path, sets: Iterable[IndexSet], header: dict, fmt: str = "list") -> str:
    """Write sorted by (size, members); return the sha256 digest."""
    _atomic_write(path, format_sets(sets, header, fmt))
    return file_digest(path)


def read_sets(path) -> tuple[dict, list[IndexSet]]:
    header: dict[str, str] = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(" ")
            header[key] = value
        elif line.strip():
            body.append(line)
    if "universe" not in header:
        raise ValidationError(f"{path}: missing #universe header")
    n = int(header["universe"])
    fmt = header.get("format", "list")
    return header, [parse_set(line, n, fmt) for line in body]


def write_shard(path, header: dict, sections: list[tuple[str, list[IndexSet]]]) -> str:
    lines = [f"#{k} {v}" for k, v in header.items()]
    count = 0
    for key, sets in sections:
        lines.append(f"#shard {key}")
        lines.extend(format_set(s) for s in sorted(sets, key=IndexSet.sort_key))
        count += len(sets)
    lines.append(f"#end {count}")
    _atomic_write(path, "\n".join(lines) + "\n")
    return file_digest(path)


def read_shard(path) -> tuple[dict, dict[str, list[IndexSet]]]:
    """Parse a shard; raises :class:`CorruptShard` on any inconsistency."""
    path = Path(path)
    if not path.exists():
        raise CorruptShard(path.name, "file is missing")
    header: dict[str, str] = {}
    sections: dict[str, list[IndexSet]] = {}
    current = None
    end = None
    lines = path.read_text().splitlines()
    try:
        for line in lines:
            if line.startswith("#shard "):
                current = line[7:]
                if current in sections:
                    raise ValueError(f"duplicate section {current}")
                sections[current] = []
            elif line.startswith("#end "):
                end = int(line[5:])
            elif line.startswith("#"):
                key, _, value = line[1:].partition(" ")
                header[key] = value
            elif line.strip():
                if current is None or end is not None:
                    raise ValueError("set line outside a section")
                sections[current].append(parse_set(line, int(header["universe"])))
    except (ValueError, KeyError, ValidationError) as exc:
        raise CorruptShard(current or path.name, str(exc)) from None
    if end is None:
        raise CorruptShard(current or path.name, "truncated (no #end line)")
    if end != sum(len(v) for v in sections.values()):
        raise CorruptShard(current or path.name, "line count does not match #end")
    return header, sections


@dataclass
class RunManifest:
    command: str
    options: dict = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    shards: dict[str, dict] = field(default_factory=dict)
    wall_time: float = 0.0
    jobs: int = 1
    metrics: dict = field(default_factory=dict)
    _started: float = field(default_factory=time.time, repr=False)

    def record_input(self, path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def record_output(self, path, digest: str | None = None) -> None:
        self.outputs[str(path)] = digest or file_digest(path)

    def finish(self) -> None:
        self.wall_time = round(time.time() - self._started, 3)

    def save(self, path) -> None:
        data = asdict(self)
        data.pop("_started")
        _atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(**data)

    def completed_shard(self, task: str, base: Path) -> dict | None:
        """Shard record for ``task`` if its file is intact; raise if corrupted."""
        rec = self.shards.get(task)
        if rec is None:
            return None
        path = base / rec["path"]
        if not path.exists() or file_digest(path) != rec["digest"]:
            raise CorruptShard(task, "digest does not match the manifest")
        return rec
