'''Genotype <-> SplitPlan.

A genotype is a vector in [0,1]^{4K}: one block [S, H, server share,
bandwidth share] per worker. Decoding always yields a feasible plan, so the
genetic operators and the generator can work on the plain unit box.

>>> from hfsltool.scenario import load_scenario, builtin
>>> sc = load_scenario(builtin('desk'))
>>> plan = decode(np.full(4 * sc.K, 0.5), sc)
>>> bool(np.allclose(plan.B, sc.system.bandwidth / sc.K))
True
'''
import numpy as np

from ..cost import SplitPlan
from ..scenario import Scenario

SHARE_FLOOR = 1e-3


def _layer(x, L):
    return np.clip(1 + np.floor(x * (L - 1)).astype(int), 1, L - 1)


def decode(x: np.ndarray, scenario: Scenario,
           floor: float = SHARE_FLOOR) -> SplitPlan:
    '''Map a genotype onto a plan that meets every budget with equality.

    Cut layers are swapped when S would exceed H. Server frequency only goes
    to workers that split.
    '''
    K, L = scenario.K, scenario.L
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0).reshape(K, 4)
    S, H = _layer(x[:, 0], L), _layer(x[:, 1], L)
    S, H = np.minimum(S, H), np.maximum(S, H)
    bw = floor + x[:, 3]
    B = scenario.system.bandwidth * bw / bw.sum()
    split = S < H
    fE = np.zeros(K)
    if split.any():
        fs = floor + x[split, 2]
        fE[split] = scenario.system.server_freq * fs / fs.sum()
    return SplitPlan(S, H, fE, B)


def encode(plan: SplitPlan, scenario: Scenario,
           floor: float = SHARE_FLOOR) -> np.ndarray:
    '''A genotype that decodes back to `plan`.

    Exact for plans that spend both budgets fully and give every worker at
    least the floor share.
    '''
    K, L = scenario.K, scenario.L
    x = np.zeros((K, 4))
    x[:, 0] = (plan.S - 0.5) / (L - 1)
    x[:, 1] = (plan.H - 0.5) / (L - 1)
    x[:, 3] = plan.B / scenario.system.bandwidth - floor
    split = plan.split
    if split.any():
        x[split, 2] = plan.fE[split] / scenario.system.server_freq - floor
    return np.clip(x, 0.0, 1.0).ravel()


def random_genotypes(rng: np.random.Generator, count: int, scenario: Scenario
                     ) -> np.ndarray:
    return rng.random((count, 4 * scenario.K))


def fl_genotype(scenario: Scenario) -> np.ndarray:
    '''The plain FL plan (no splits, equal bandwidth) as a genotype.'''
    return encode(SplitPlan.nonsplit(scenario), scenario)
