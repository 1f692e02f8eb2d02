'''NSGA-III environmental selection for two objectives.

With two objectives the reference directions are R evenly spaced rays from
the ideal point through the segment between (0, 1) and (1, 0).

>>> reference_rays(3)
array([[0. , 1. ],
       [0.5, 0.5],
       [1. , 0. ]])
'''
import logging
import typing as t

import numpy as np

from .pareto import nondominated_sort

log = logging.getLogger(__name__)


def reference_rays(R: int) -> np.ndarray:
    w = np.array([0.5]) if R == 1 else np.linspace(0.0, 1.0, R)
    return np.stack([w, 1 - w], axis=1)


def associate(N: np.ndarray, rays: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    '''Nearest ray of every normalised point and the perpendicular distance.'''
    u = rays / np.linalg.norm(rays, axis=1, keepdims=True)
    proj = N @ u.T
    sq = np.maximum(np.sum(N ** 2, axis=1, keepdims=True) - proj ** 2, 0.0)
    dist = np.sqrt(sq)
    nearest = np.argmin(dist, axis=1)
    return nearest, dist[np.arange(len(N)), nearest]


def elite(F: np.ndarray, level: np.ndarray, parents: int = 0) -> np.ndarray:
    '''Members of the first level that must survive its truncation.

    For each nondominated point among the first `parents` rows of F, one
    member of `level` weakly dominating it; then the level's two extremes.
    With these kept the front's hypervolume can only grow.

    >>> F = np.array([[1.0, 3.0], [3.0, 1.0], [0.5, 2.5], [2.0, 2.0]])
    >>> elite(F, np.array([1, 2, 3]), parents=2).tolist()
    [2, 1]
    '''
    picks: t.List[int] = []
    if parents:
        for p in nondominated_sort(F[:parents])[0]:
            if p in level:
                picks.append(int(p))
            else:
                covers = level[np.all(F[level] <= F[p], axis=1)]
                picks.append(int(covers[0]))
    Fl = F[level]
    picks.append(int(level[np.lexsort((Fl[:, 1], Fl[:, 0]))[0]]))
    picks.append(int(level[np.lexsort((Fl[:, 0], Fl[:, 1]))[0]]))
    return np.array(list(dict.fromkeys(picks)), dtype=int)


def niching_select(F: np.ndarray, R: int, rng: np.random.Generator,
                   parents: int = 0) -> np.ndarray:
    '''Indices of the R survivors among the points F.

    Whole non-domination levels are taken while they fit; the level that
    overflows is thinned by niche count, least crowded ray first, and within
    a ray by smallest perpendicular distance. When the first level overflows,
    its `elite` members go in before any niching; the first `parents` rows
    of F are the previous population.
    '''
    F = np.asarray(F, dtype=float)
    if len(F) < R:
        raise ValueError(f'cannot select {R} from {len(F)} candidates')
    chosen: t.List[int] = []
    last = np.zeros(0, dtype=int)
    for level in nondominated_sort(F):
        if len(chosen) + len(level) <= R:
            chosen.extend(level.tolist())
            if len(chosen) == R:
                return np.array(chosen, dtype=int)
        else:
            last = level
            break
    need = R - len(chosen)

    cand = np.concatenate([np.array(chosen, dtype=int), last])
    ideal = F[cand].min(axis=0)
    span = F[cand].max(axis=0) - ideal
    span[span <= 0] = 1.0
    rays = reference_rays(R)
    nearest, dist = associate((F[cand] - ideal) / span, rays)
    rho = np.bincount(nearest[:len(chosen)], minlength=len(rays)).astype(float)

    n_chosen = len(chosen)
    taken = np.zeros(len(last), dtype=bool)
    if not n_chosen:
        where = {v: i for i, v in enumerate(last.tolist())}
        forced = [where[v] for v in elite(F, last, parents)[:need].tolist()]
        taken[forced] = True
        np.add.at(rho, nearest[forced], 1)
        need -= len(forced)
    open_rays = np.ones(len(rays), dtype=bool)
    while need:
        live = np.flatnonzero(open_rays)
        least = live[rho[live] == rho[live].min()]
        j = least[rng.integers(len(least))]
        members = np.flatnonzero(~taken & (nearest[n_chosen:] == j))
        if not len(members):
            open_rays[j] = False
            continue
        pick = members[np.argmin(dist[n_chosen + members])]
        taken[pick] = True
        rho[j] += 1
        need -= 1
    return np.concatenate([np.array(chosen, dtype=int), last[taken]])


def select(parents, offspring, rng: np.random.Generator):
    '''P_{j+1}: R survivors of the union of R parents and R offspring.'''
    if len(parents) != len(offspring):
        raise ValueError(f'{len(parents)} parents but {len(offspring)} '
                         'offspring')
    union = parents + offspring
    R = len(parents)
    return union.take(niching_select(union.F, R, rng, parents=R))
