'''Mining dominance pairs to supervise the discriminator.

For every solution of the new population, look for compared solutions it
strictly dominates within objective distance gamma. When more than kappa
qualify, keep the kappa closest to the line from the population's ideal
point through the dominating solution's objective.

>>> F = np.array([[0.0, 0.0]])
>>> C = np.array([[1.0, 1.0], [50.0, 50.0], [100.0, 100.0]])
>>> find_pairs(F, C, gamma=80, kappa=6).pairs.tolist()
[[0, 0], [0, 1]]
'''
import typing as t

import attr
import numpy as np

from ..moea.pareto import strictly_dominates

GAMMA = 80.0
KAPPA = 6


@attr.s(auto_attribs=True, frozen=True, eq=False)
class DominancePairSet:
    '''`pairs` rows are (dominating index, dominated index) into the
    population and the compared set; `retained` lists the compared indices
    that appear in some pair, in order of first appearance.'''
    pairs: np.ndarray
    retained: np.ndarray

    def __len__(self):
        return len(self.pairs)


def line_distance(points: np.ndarray, origin: np.ndarray, through: np.ndarray
                  ) -> np.ndarray:
    '''Perpendicular distance of `points` to the line origin -> through.'''
    direction = through - origin
    rel = points - origin
    norm = np.linalg.norm(direction)
    if norm == 0:
        return np.linalg.norm(rel, axis=1)
    cross = direction[0] * rel[:, 1] - direction[1] * rel[:, 0]
    return np.abs(cross) / norm


def find_pairs(F_pop: np.ndarray, F_compared: np.ndarray,
               gamma: float = GAMMA, kappa: int = KAPPA) -> DominancePairSet:
    if gamma <= 0 or kappa < 1:
        raise ValueError('need gamma > 0 and kappa >= 1')
    F_pop = np.asarray(F_pop, dtype=float).reshape(-1, 2)
    F_cmp = np.asarray(F_compared, dtype=float).reshape(-1, 2)
    empty = DominancePairSet(np.zeros((0, 2), dtype=int),
                             np.zeros(0, dtype=int))
    if not len(F_pop) or not len(F_cmp):
        return empty
    ideal = F_pop.min(axis=0)
    dom = strictly_dominates(F_pop[:, None, :], F_cmp[None, :, :])
    dist = np.linalg.norm(F_pop[:, None, :] - F_cmp[None, :, :], axis=2)
    ok = dom & (dist <= gamma)
    pairs: t.List[t.Tuple[int, int]] = []
    for i in range(len(F_pop)):
        cand = np.flatnonzero(ok[i])
        if len(cand) > kappa:
            d = line_distance(F_cmp[cand], ideal, F_pop[i])
            cand = cand[np.argsort(d, kind='stable')[:kappa]]
        pairs.extend((i, int(c)) for c in cand)
    if not pairs:
        return empty
    pairs_arr = np.array(pairs, dtype=int)
    _, first = np.unique(pairs_arr[:, 1], return_index=True)
    return DominancePairSet(pairs_arr, pairs_arr[np.sort(first), 1])
