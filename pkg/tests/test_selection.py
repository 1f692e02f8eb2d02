import numpy as np
import pytest

from hfsltool.moea.pareto import hypervolume, nondominated_sort
from hfsltool.moea.selection import (associate, elite, niching_select,
                                     reference_rays)


def test_rays():
    rays = reference_rays(5)
    assert rays.shape == (5, 2)
    assert np.allclose(rays.sum(axis=1), 1)
    assert reference_rays(1).tolist() == [[0.5, 0.5]]


def test_association():
    rays = reference_rays(3)
    N = np.array([[0.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
    nearest, dist = associate(N, rays)
    assert nearest.tolist() == [0, 1, 2]
    assert np.allclose(dist, 0, atol=1e-6)


def test_first_level_exactly_fills():
    R = 6
    front = np.stack([np.arange(R), R - np.arange(R)], axis=1).astype(float)
    worse = front + 10
    F = np.vstack([worse, front])
    keep = niching_select(F, R, np.random.default_rng(0))
    assert sorted(keep.tolist()) == list(range(R, 2 * R))


def test_overfull_level_keeps_extremes():
    R = 10
    theta = np.linspace(0, np.pi / 2, 2 * R)
    F = np.stack([1 - np.sin(theta), 1 - np.cos(theta)], axis=1)
    for seed in range(5):
        keep = niching_select(F, R, np.random.default_rng(seed))
        assert len(keep) == R
        assert np.argmin(F[:, 0]) in keep
        assert np.argmin(F[:, 1]) in keep


def test_single_survivor_is_nondominated():
    rng = np.random.default_rng(1)
    for _ in range(20):
        F = rng.random((8, 2))
        keep = niching_select(F, 1, rng)
        assert keep.tolist()[0] in nondominated_sort(F)[0].tolist()


def test_survivors_contain_first_level():
    rng = np.random.default_rng(2)
    for _ in range(100):
        R = int(rng.integers(1, 60))
        F = rng.random((2 * R, 2))
        if rng.random() < 0.5:
            F = np.round(F * 5) / 5
        keep = niching_select(F, R, rng)
        assert len(keep) == R
        assert len(set(keep.tolist())) == R
        first = nondominated_sort(F)[0]
        if len(first) <= R:
            assert set(first.tolist()) <= set(keep.tolist())


def test_too_few_candidates():
    with pytest.raises(ValueError):
        niching_select(np.zeros((3, 2)), 4, np.random.default_rng(0))


def test_truncated_first_level_keeps_parent_hypervolume():
    rng = np.random.default_rng(3)
    ref = (2.0, 2.0)
    overflowed = 0
    for _ in range(200):
        R = int(rng.integers(2, 30))
        theta = rng.uniform(0, np.pi / 2, 2 * R)
        radius = rng.uniform(1.0, 1.002, 2 * R)
        F = np.stack([1 - radius * np.sin(theta),
                      1 - radius * np.cos(theta)], axis=1)
        if len(nondominated_sort(F)[0]) <= R:
            continue
        overflowed += 1
        keep = niching_select(F, R, rng, parents=R)
        assert len(set(keep.tolist())) == R
        assert hypervolume(F[keep], ref) >= (
            hypervolume(F[:R], ref) * (1 - 1e-12))
    assert overflowed > 50


def test_elite_covers_dominated_parents():
    # parent 0 is beaten by offspring 2, parent 1 sits on the front
    F = np.array([[1.0, 3.0], [3.0, 1.0], [0.5, 2.5], [2.0, 2.0],
                  [0.2, 4.0]])
    level = nondominated_sort(F)[0]
    assert level.tolist() == [1, 2, 3, 4]
    assert elite(F, level, parents=2).tolist() == [2, 1, 4]
    assert elite(F, level).tolist() == [4, 1]
