'''Plain NSGA-III: the baseline optimizer.

    >>> from hfsltool.scenario import builtin, load_scenario, sample_channels
    >>> sc = load_scenario(builtin('desk'))
    >>> res = run(sc, sample_channels(sc), generations=2, seed=7,
    ...           config=GeneticConfig(pop_size=8))
    >>> len(res.trace), len(res.population)
    (3, 8)
'''
import logging
import math
import typing as t

import attr
import funcy as fy
import pandas as pd

from ..scenario import ChannelDraws, Scenario
from .operators import ETA_C, ETA_M, genetic_offspring
from .population import Population, Problem, RunResult, stream
from .selection import select

log = logging.getLogger(__name__)


@attr.s(auto_attribs=True, frozen=True)
class GeneticConfig:
    pop_size: int = 100
    eta_c: float = ETA_C
    eta_m: float = ETA_M
    # per-component mutation probability; None means 1/(4K)
    mutation_prob: t.Optional[float] = None


def genetic_step(problem: Problem, parents: Population, rng, config
                 ) -> Population:
    X = genetic_offspring(parents.X, rng, len(parents), config.eta_c,
                          config.eta_m, config.mutation_prob)
    return problem.population(X)


def trace_row(generation, pop, ref, branch, pairs=0, loss_d=math.nan,
              loss_g=math.nan) -> t.Dict[str, t.Any]:
    return dict(generation=generation, hypervolume=pop.hypervolume(ref),
                pairs=pairs, loss_d=loss_d, loss_g=loss_g, branch=branch)


def run(scenario: Scenario, draws: ChannelDraws, generations: int,
        seed: int = 0, config: GeneticConfig = GeneticConfig(),
        ref: t.Optional[t.Tuple[float, float]] = None,
        verbose: bool = False) -> RunResult:
    '''Evolve `generations` generations of SBX/PM offspring and NSGA-III
    selection from a random population.'''
    if generations < 1:
        raise ValueError('need at least one generation')
    msg = print if verbose else fy.identity
    problem = Problem(scenario, draws)
    ref = ref or problem.reference_point()
    rng_gen, rng_sel = stream(seed, 'genetic'), stream(seed, 'select')
    P = problem.random(stream(seed, 'init'), config.pop_size)
    rows = [trace_row(0, P, ref, 'init')]
    for j in range(1, generations + 1):
        Q = genetic_step(problem, P, rng_gen, config)
        P = select(P, Q, rng_sel)
        rows.append(trace_row(j, P, ref, 'genetic'))
        log.debug('nsga3 seed=%d gen=%d hv=%.6g', seed, j,
                  rows[-1]['hypervolume'])
        msg(f'[nsga3 {seed}] gen {j}/{generations} '
            f'hv={rows[-1]["hypervolume"]:.6g}')
    return RunResult(P.front(), pd.DataFrame(rows), P, ref)
