import json

import pytest

from subsemi.errors import ValidationError
from subsemi.files import read_shard
from subsemi.pipeline import run_pipeline
from subsemi.transform import cached_full_table, ideal_elements


@pytest.fixture(scope="module")
def full3(tmp_path_factory):
    work = tmp_path_factory.mktemp("full3")
    return run_pipeline(3, "full", jobs=1, workdir=work, batch=7), work


def test_desk_tier_degree3(tmp_path):
    report, manifest = run_pipeline(3, "desk", workdir=tmp_path)
    assert (report.subgroups, report.subgroup_classes) == (6, 4)
    assert report.p_total == 37
    assert report.properties["nilpotent"]["classes"] == 4
    assert report.properties["commutative"]["classes"] == 18
    assert report.properties["band"]["classes"] == 41
    assert report.total_classes is None


def test_full_tier_degree3(full3):
    (report, manifest), _ = full3
    assert report.total_classes == 283 and report.total_raw == 1299
    assert report.singular_classes * 2 + report.p_total == 283
    assert report.regular == 116
    dist = report.size_distribution
    assert [dist.get(s, [0, 0])[1] for s in range(28)] == [
        1, 10, 45, 86, 136, 192, 206, 186, 144, 109, 63, 51, 30, 9, 3, 9, 6, 6, 0, 0, 0, 1, 1, 3, 1, 0, 0, 1]


def test_full_tier_shards_are_disjoint_and_match_uppers(full3, t3_classes):
    (report, manifest), work = full3
    t, idx = cached_full_table(3)
    seen = set()
    for name, rec in manifest.shards.items():
        _, sections = read_shard(work / rec["path"])
        for sets in sections.values():
            for s in sets:
                assert s not in seen
                seen.add(s)
    singular = {s for s in t3_classes.found if s <= ideal_elements(idx, 2)}
    from_k = set()
    for name, rec in manifest.shards.items():
        if name.startswith("k-"):
            _, sections = read_shard(work / rec["path"])
            for sets in sections.values():
                from_k.update(sets)
    assert from_k == singular


def test_jobs_do_not_change_shards(full3, tmp_path):
    (_, m1), _ = full3
    _, m2 = run_pipeline(3, "full", jobs=2, workdir=tmp_path, batch=7)
    assert {k: v["digest"] for k, v in m1.shards.items()} == {k: v["digest"] for k, v in m2.shards.items()}


def test_interrupted_run_resumes(full3, tmp_path):
    (report, m1), _ = full3
    _, partial = run_pipeline(3, "full", workdir=tmp_path, batch=7)
    # forget half of the shards and the completion flag, as if the run had died
    data = json.loads((tmp_path / "manifest.json").read_text())
    names = sorted(data["shards"])
    for name in names[::2]:
        del data["shards"][name]
        (tmp_path / f"{name}.shard").unlink()
    data["metrics"].pop("complete")
    (tmp_path / "manifest.json").write_text(json.dumps(data))
    again, m3 = run_pipeline(3, "full", workdir=tmp_path, resume=tmp_path / "manifest.json", batch=7)
    assert again.total_classes == report.total_classes
    assert {k: v["digest"] for k, v in m3.shards.items()} == {k: v["digest"] for k, v in m1.shards.items()}


def test_resume_rejects_other_runs(full3):
    (_, _), work = full3
    with pytest.raises(ValidationError):
        run_pipeline(3, "desk", resume=work / "manifest.json")


def test_bad_tier():
    with pytest.raises(ValidationError):
        run_pipeline(3, "huge")
