'''Pareto dominance, non-dominated sorting, fronts and hypervolume.

Both objectives are minimised.

>>> dominates((1, 2), (2, 2))
<Dominance.DOMINATES: 'strictly-dominates'>
>>> dominates((1, 3), (3, 1)).value
'incomparable'
>>> [level.tolist() for level in nondominated_sort([(1, 2), (2, 1), (2, 2), (3, 3)])]
[[0, 1], [2], [3]]
>>> hypervolume([(1, 3), (2, 2), (3, 1)], (4, 4))
6.0
'''
import enum
import typing as t

import attr
import numpy as np
from pymoo.indicators.hv import HV
from pymoo.util.nds.non_dominated_sorting import NonDominatedSorting

Point = t.Union[t.Sequence[float], np.ndarray]


class Dominance(enum.Enum):
    DOMINATES = 'strictly-dominates'
    DOMINATED = 'dominated'
    INCOMPARABLE = 'incomparable'
    EQUAL = 'equal'


def dominates(a: Point, b: Point) -> Dominance:
    '''How `a` relates to `b` under Pareto dominance.'''
    a, b = np.asarray(tuple(a), dtype=float), np.asarray(tuple(b), dtype=float)
    if np.array_equal(a, b):
        return Dominance.EQUAL
    if np.all(a <= b):
        return Dominance.DOMINATES
    if np.all(b <= a):
        return Dominance.DOMINATED
    return Dominance.INCOMPARABLE


def strictly_dominates(a, b) -> np.ndarray:
    '''Vectorised a < b; broadcasts over leading axes.'''
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.all(a <= b, axis=-1) & np.any(a < b, axis=-1)


def as_points(F) -> np.ndarray:
    F = np.asarray([tuple(p) for p in F] if not isinstance(F, np.ndarray)
                   else F, dtype=float)
    return F.reshape(-1, 2)


def nondominated_sort(F) -> t.List[np.ndarray]:
    '''Split point indices into non-domination levels X_1, X_2, ...

    Equal points share a level. Indices within a level are ascending.
    '''
    F = as_points(F)
    if not len(F):
        return []
    levels = NonDominatedSorting().do(F)
    return [np.sort(np.asarray(level, dtype=int)) for level in levels]


def nondominated(F) -> np.ndarray:
    '''Indices of the first level.'''
    levels = nondominated_sort(F)
    return levels[0] if levels else np.zeros(0, dtype=int)


def hypervolume(front, ref: Point) -> float:
    '''Area dominated by `front` and bounded by `ref`.

    Points that do not strictly improve on `ref` in both objectives add
    nothing.
    '''
    if isinstance(front, ParetoFront):
        front = front.points
    F = as_points(front)
    ref = np.asarray(tuple(ref), dtype=float)
    F = F[np.all(F < ref, axis=1)]
    if not len(F):
        return 0.0
    return float(HV(ref_point=ref)(F))


@attr.s(frozen=True, eq=False)
class ParetoFront:
    '''Nondominated points sorted by ascending v1, each with an optional payload.

    Duplicated points are kept once.
    '''
    points: np.ndarray = attr.ib()
    payloads: t.Tuple[t.Any, ...] = attr.ib(default=(), converter=tuple)

    @classmethod
    def of(cls, F, payloads: t.Optional[t.Sequence[t.Any]] = None
           ) -> 'ParetoFront':
        F = as_points(F)
        idx = nondominated(F)
        idx = idx[np.lexsort((F[idx, 1], F[idx, 0]))]
        _, first = np.unique(F[idx], axis=0, return_index=True)
        idx = idx[np.sort(first)]
        kept = tuple(payloads[i] for i in idx) if payloads is not None else ()
        return cls(F[idx], kept)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def hypervolume(self, ref: Point) -> float:
        return hypervolume(self.points, ref)

    def weakly_dominates(self, point: Point) -> bool:
        '''True when some front point is no worse than `point` in both.'''
        if not len(self):
            return False
        return bool(np.any(np.all(self.points <= np.asarray(tuple(point)),
                                  axis=1)))
