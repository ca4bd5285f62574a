import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from subsemi.errors import CorruptShard, ValidationError
from subsemi.files import (
    RunManifest,
    file_digest,
    format_set,
    parse_set,
    read_sets,
    read_shard,
    write_sets,
    write_shard,
)
from subsemi.table import IndexSet

N = 40


@given(st.sets(st.integers(1, N)), st.sampled_from(["list", "bits"]))
def test_set_roundtrip(members, fmt):
    s = IndexSet(N, members)
    assert parse_set(format_set(s, fmt), N, fmt) == s


def test_empty_token():
    assert format_set(IndexSet(5)) == "-"
    assert parse_set("-", 5) == IndexSet(5)
    with pytest.raises(ValidationError):
        parse_set("3,1", 5)


@pytest.mark.parametrize("fmt", ["list", "bits"])
def test_set_file_roundtrip_sorted(tmp_path, fmt):
    sets = [IndexSet(6, m) for m in [(1, 2, 3), (), (4,), (1, 5), (2,)]]
    path = tmp_path / "x.subs"
    digest = write_sets(path, sets, {"table": "T", "universe": 6}, fmt)
    assert digest == file_digest(path)
    header, back = read_sets(path)
    assert header["universe"] == "6"
    assert back == sorted(sets, key=IndexSet.sort_key)
    assert [len(s) for s in back] == [0, 1, 1, 2, 3]


def test_set_file_needs_universe(tmp_path):
    p = tmp_path / "bad.subs"
    p.write_text("1,2\n")
    with pytest.raises(ValidationError):
        read_sets(p)


def write_example_shard(path):
    sections = [("aa", [IndexSet(5, [1]), IndexSet(5, [1, 2])]), ("bb", [IndexSet(5, [3])])]
    return write_shard(path, {"universe": 5}, sections)


def test_shard_roundtrip(tmp_path):
    p = tmp_path / "a.shard"
    write_example_shard(p)
    header, sections = read_shard(p)
    assert list(sections) == ["aa", "bb"]
    assert sections["aa"] == [IndexSet(5, [1]), IndexSet(5, [1, 2])]


@pytest.mark.parametrize("damage", ["truncate", "count", "garbage", "missing"])
def test_corrupt_shard_names_its_key(tmp_path, damage):
    p = tmp_path / "a.shard"
    write_example_shard(p)
    text = p.read_text()
    if damage == "truncate":
        p.write_text(text[: text.index("#end")])
    elif damage == "count":
        p.write_text(text.replace("#end 3", "#end 4"))
    elif damage == "garbage":
        p.write_text(text.replace("1,2\n", "1,x\n"))
    else:
        p.unlink()
    with pytest.raises(CorruptShard) as info:
        read_shard(p)
    assert info.value.exit_code == 4
    if damage != "missing":
        assert "aa" in str(info.value) or "bb" in str(info.value)


def test_manifest_roundtrip_and_digest_check(tmp_path):
    shard = tmp_path / "s.shard"
    digest = write_example_shard(shard)
    m = RunManifest("torso", {"x": 1})
    m.shards["s"] = {"path": "s.shard", "digest": digest}
    m.record_output(shard)
    m.finish()
    m.save(tmp_path / "m.json")
    again = RunManifest.load(tmp_path / "m.json")
    assert again.shards == m.shards and again.outputs == m.outputs
    assert json.loads((tmp_path / "m.json").read_text())["command"] == "torso"
    assert again.completed_shard("s", tmp_path)["digest"] == digest
    assert again.completed_shard("other", tmp_path) is None
    shard.write_text(shard.read_text() + "\n")
    with pytest.raises(CorruptShard):
        again.completed_shard("s", tmp_path)
