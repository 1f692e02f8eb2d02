import numpy as np
import pytest

from hfsltool.moea.pareto import (Dominance, ParetoFront, dominates,
                                  hypervolume, nondominated,
                                  nondominated_sort, strictly_dominates)


def peel(F):
    '''Non-domination levels by repeated pairwise comparison.'''
    left = list(range(len(F)))
    levels = []
    while left:
        level = [i for i in left
                 if not any(np.all(F[j] <= F[i]) and np.any(F[j] < F[i])
                            for j in left)]
        levels.append(level)
        left = [i for i in left if i not in level]
    return levels


def sweep(F, ref):
    '''Dominated area of a 2-D point set by a left-to-right sweep.'''
    F = sorted(map(tuple, F))
    area, best = 0.0, ref[1]
    xs = [p[0] for p in F] + [ref[0]]
    for (x, y), nxt in zip(F, xs[1:]):
        best = min(best, y)
        area += (nxt - x) * (ref[1] - best)
    return area


@pytest.mark.parametrize('a,b,expected', [
    ((1, 2), (2, 2), Dominance.DOMINATES),
    ((2, 2), (1, 2), Dominance.DOMINATED),
    ((1, 3), (3, 1), Dominance.INCOMPARABLE),
    ((2, 2), (2, 2), Dominance.EQUAL),
])
def test_dominates(a, b, expected):
    assert dominates(a, b) is expected


def test_strictly_dominates_broadcasts():
    F = np.array([[1, 2], [2, 2], [3, 1]])
    table = strictly_dominates(F[:, None], F[None, :])
    assert table.tolist() == [[False, True, False],
                              [False, False, False],
                              [False, False, False]]


def test_sort_examples():
    levels = nondominated_sort([(1, 2), (2, 1), (2, 2), (3, 3)])
    assert [lv.tolist() for lv in levels] == [[0, 1], [2], [3]]
    assert [lv.tolist() for lv in nondominated_sort([(1, 1)] * 4)] == [
        [0, 1, 2, 3]]
    chain = nondominated_sort([(3, 3), (1, 1), (2, 2)])
    assert [lv.tolist() for lv in chain] == [[1], [2], [0]]
    assert nondominated_sort(np.zeros((0, 2))) == []


def test_sort_matches_pairwise_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 201))
        # a coarse grid makes ties and duplicates common
        F = rng.integers(0, 12, size=(n, 2)).astype(float)
        levels = [lv.tolist() for lv in nondominated_sort(F)]
        assert levels == peel(F)


def test_hypervolume_examples():
    assert hypervolume([(1, 3), (2, 2), (3, 1)], (4, 4)) == 6.0
    assert hypervolume(np.zeros((0, 2)), (4, 4)) == 0.0
    assert hypervolume([(5, 1)], (4, 4)) == 0.0
    assert hypervolume([(4, 1)], (4, 4)) == 0.0


def test_hypervolume_matches_sweep():
    rng = np.random.default_rng(1)
    for _ in range(50):
        F = rng.random((int(rng.integers(1, 40)), 2))
        ref = (1.1, 1.2)
        assert hypervolume(F, ref) == pytest.approx(sweep(F, ref), rel=1e-9)


def test_front_of():
    F = [(3, 1), (1, 3), (2, 2), (2, 2), (3, 3)]
    front = ParetoFront.of(F, payloads='abcde')
    assert front.points.tolist() == [[1, 3], [2, 2], [3, 1]]
    assert front.payloads == ('b', 'c', 'a')
    assert len(front) == 3
    assert front.hypervolume((4, 4)) == 6.0
    assert nondominated(F).tolist() == [0, 1, 2, 3]


def test_weak_dominance_of_point():
    front = ParetoFront.of([(1, 3), (3, 1)])
    assert front.weakly_dominates((3, 1))
    assert front.weakly_dominates((5, 5))
    assert not front.weakly_dominates((2, 2))
    assert not ParetoFront(np.zeros((0, 2))).weakly_dominates((1, 1))
