"""Smoke test for the `moqd` Python extension.

Build and install first:
    pip install -e crates/python --no-build-isolation
then run:
    python python/smoke_test.py
"""

import math
import tempfile
from pathlib import Path

import moqd


def check_pareto():
    pts = [[1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [1.0, 1.0]]
    assert moqd.dominates([2.0, 2.0], [1.0, 1.0])
    assert not moqd.dominates([1.0, 3.0], [3.0, 1.0])
    assert moqd.extract_front(pts) == [0, 1, 2]
    assert moqd.non_dominated_sort(pts) == [[0, 1, 2], [3]]
    volume, below = moqd.hypervolume_2d(pts[:3], [0.0, 0.0])
    assert volume == 6.0 and below == []
    est, se = moqd.hypervolume_mc(pts[:3], [0.0, 0.0], [3.0, 3.0], samples=200_000, seed=1)
    assert abs(est - 6.0) <= 4 * se
    d = moqd.crowding_distances(pts[:3], mode="replacement")
    assert math.isinf(d[0]) and math.isinf(d[2]) and d[1] == 2.0


def check_archive():
    a = moqd.Archive(8, 3, [(0.0, 1.0), (0.0, 1.0)], policy="crowding", cvt_samples=2000, seed=0)
    assert a.insert([1.0, 1.0], [0.2, 0.2])
    assert not a.insert([0.5, 0.5], [0.2, 0.2])  # dominated in the same cell
    assert a.insert([2.0, 0.5], [0.2, 0.2])
    assert len(a) == 2
    m = a.metrics([0.0, 0.0])
    assert m["moqd_score"] == 1.5 and m["coverage"] == 1 / 8
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "archive.jsonl"
        a.save(str(path))
        b = moqd.Archive.load(str(path))
        assert b.metrics([0.0, 0.0]) == m


def check_walker():
    w = moqd.PointWalker(episode_length=20, policy_hidden=[8])
    g = w.random_genotype(seed=3)
    assert len(g) == w.genotype_len
    scores, desc = w.rollout(g)
    assert len(scores) == 2 and all(0.0 <= x <= 1.0 for x in desc)
    assert w.rollout(g) == (scores, desc)


CONFIG = """
algorithm = "mome"
iterations = 3
batch_size = 8

[archive]
num_centroids = 8
cvt_samples = 2000

[env]
kind = "bisphere"
"""


def check_run():
    with tempfile.TemporaryDirectory() as tmp:
        out = moqd.run(CONFIG, seed=5, out=tmp)
        rows = out["metrics"]
        assert [r["evals"] for r in rows] == [8, 16, 24, 32]
        assert (Path(tmp) / "metrics.csv").read_text().startswith("evals,moqd_score")
        again = moqd.run(CONFIG, seed=5)
        assert again["metrics"] == rows
        assert len(out["archive"]) > 0
    try:
        moqd.run(CONFIG.replace('"mome"', '"moem"'))
    except ValueError as e:
        assert "algorithm" in str(e)
    else:
        raise AssertionError("bad config accepted")


if __name__ == "__main__":
    check_pareto()
    check_archive()
    check_walker()
    check_run()
    print(f"moqd {moqd.__version__}: python smoke test passed")
