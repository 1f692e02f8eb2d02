'''Simulated binary crossover and polynomial mutation on the unit box.

Both operators work on single genotypes or on stacks of them (rows).

>>> rng = np.random.default_rng(0)
>>> a = np.array([0.2, 0.4, 0.6])
>>> c1, c2 = sbx_crossover(a, a, rng)
>>> bool(np.array_equal(c1, a) and np.array_equal(c2, a))
True
>>> bool(np.array_equal(poly_mutation(a, rng, prob=0.0), a))
True
'''
import typing as t

import numpy as np

ETA_C = 20.0
ETA_M = 20.0


def sbx_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
                  eta_c: float = ETA_C) -> t.Tuple[np.ndarray, np.ndarray]:
    '''Two children of `a` and `b`, crossed on every component.'''
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f'parents differ in shape: {a.shape} vs {b.shape}')
    u = rng.random(a.shape)
    beta = spread_factor(u, eta_c)
    # exact when a == b: half is zero and mid is a
    mid = 0.5 * (a + b)
    half = 0.5 * beta * (b - a)
    c1, c2 = mid - half, mid + half
    return np.clip(c1, 0.0, 1.0), np.clip(c2, 0.0, 1.0)


def spread_factor(u, eta_c: float = ETA_C):
    '''Inverse CDF of the SBX spread factor for uniform draws `u`.'''
    u = np.asarray(u, dtype=float)
    e = 1.0 / (eta_c + 1.0)
    with np.errstate(divide='ignore'):
        return np.where(u <= 0.5, (2 * u) ** e, (1 / (2 * (1 - u))) ** e)


def poly_mutation(g: np.ndarray, rng: np.random.Generator,
                  eta_m: float = ETA_M, prob: t.Optional[float] = None
                  ) -> np.ndarray:
    '''Bounded polynomial mutation; `prob` defaults to one over the length.'''
    g = np.asarray(g, dtype=float)
    if prob is None:
        prob = 1.0 / g.shape[-1]
    mask = rng.random(g.shape) < prob
    u = rng.random(g.shape)
    e = eta_m + 1.0
    # distance to the lower and upper bound of [0, 1]
    lo, hi = g, 1.0 - g
    down = (2 * u + (1 - 2 * u) * (1 - lo) ** e) ** (1 / e) - 1
    up = 1 - (2 * (1 - u) + 2 * (u - 0.5) * (1 - hi) ** e) ** (1 / e)
    delta = np.where(u < 0.5, down, up)
    return np.clip(np.where(mask, g + delta, g), 0.0, 1.0)


def genetic_offspring(parents: np.ndarray, rng: np.random.Generator,
                      count: int, eta_c: float = ETA_C, eta_m: float = ETA_M,
                      prob: t.Optional[float] = None) -> np.ndarray:
    '''`count` children from randomly paired parents: SBX, then PM.'''
    parents = np.asarray(parents, dtype=float)
    n, d = parents.shape
    pairs = (count + 1) // 2
    first = rng.integers(n, size=pairs)
    second = rng.integers(n, size=pairs)
    c1, c2 = sbx_crossover(parents[first], parents[second], rng, eta_c)
    children = np.stack([c1, c2], axis=1).reshape(-1, d)[:count]
    return poly_mutation(children, rng, eta_m, prob)
