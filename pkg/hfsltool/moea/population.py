'''Problems, individuals, populations and the seeded random streams.'''
import typing as t

import attr
import funcy as fy
import numpy as np
import pandas as pd

from ..cost import ObjectiveValue, SplitPlan, evaluate
from ..scenario import ChannelDraws, Scenario
from .genotype import decode, fl_genotype, random_genotypes
from .pareto import ParetoFront, hypervolume

STREAMS = ('init', 'genetic', 'select', 'branch', 'gan', 'noise', 'compared')


def stream(seed: int, name: str) -> np.random.Generator:
    '''An independent generator per (seed, purpose).

    Optimizers that share a seed draw their common steps from the same
    streams, so switching the GAN branch off leaves the genetic trajectory
    untouched.
    '''
    return np.random.default_rng([int(seed), STREAMS.index(name)])


@attr.s(auto_attribs=True, frozen=True)
class Problem:
    scenario: Scenario
    draws: ChannelDraws

    @property
    def dim(self) -> int:
        return 4 * self.scenario.K

    def decode(self, x: np.ndarray) -> SplitPlan:
        return decode(x, self.scenario)

    def evaluate(self, x: np.ndarray) -> ObjectiveValue:
        return evaluate(self.decode(x), self.scenario, self.draws)

    def individual(self, x: np.ndarray) -> 'Individual':
        return Individual(np.asarray(x, dtype=float), self)

    def population(self, X: np.ndarray) -> 'Population':
        return Population([self.individual(x) for x in np.atleast_2d(X)])

    def random(self, rng: np.random.Generator, count: int) -> 'Population':
        return self.population(random_genotypes(rng, count, self.scenario))

    def fl_point(self) -> ObjectiveValue:
        '''Objective of the plain FL plan: no splits, equal bandwidth.'''
        return evaluate(SplitPlan.nonsplit(self.scenario), self.scenario,
                        self.draws)

    def reference_point(self, samples: int = 256, margin: float = 1.1
                        ) -> t.Tuple[float, float]:
        '''The scenario's reference point, or one derived from it.

        Without a configured point, take the componentwise worst of
        `samples` random plans and the FL plan, times `margin`. The draw
        uses a fixed seed so every run of a scenario agrees.
        '''
        if self.scenario.reference_point is not None:
            return self.scenario.reference_point
        pop = self.random(np.random.default_rng(0), samples)
        pop = pop + self.population(fl_genotype(self.scenario))
        worst = pop.F.max(axis=0) * margin
        return float(worst[0]), float(worst[1])


@attr.s(eq=False)
class Individual:
    x: np.ndarray = attr.ib()
    problem: Problem = attr.ib(repr=False)

    @fy.cached_property
    def plan(self) -> SplitPlan:
        return self.problem.decode(self.x)

    @fy.cached_property
    def objective(self) -> ObjectiveValue:
        return evaluate(self.plan, self.problem.scenario, self.problem.draws)


@attr.s(auto_attribs=True)
class Population:
    individuals: t.List[Individual] = attr.Factory(list)

    def __len__(self):
        return len(self.individuals)

    def __iter__(self):
        return iter(self.individuals)

    def __getitem__(self, i):
        return self.individuals[i]

    def __add__(self, other: 'Population') -> 'Population':
        return Population(self.individuals + other.individuals)

    def take(self, idx) -> 'Population':
        return Population([self.individuals[i] for i in idx])

    @property
    def X(self) -> np.ndarray:
        return np.array([ind.x for ind in self.individuals])

    @property
    def F(self) -> np.ndarray:
        if not self.individuals:
            return np.zeros((0, 2))
        return np.array([ind.objective.as_array() for ind in self.individuals])

    def front(self) -> ParetoFront:
        return ParetoFront.of(self.F, [ind.plan for ind in self.individuals])

    def hypervolume(self, ref) -> float:
        return hypervolume(self.front().points, ref)


TRACE_COLUMNS = ['generation', 'hypervolume', 'pairs', 'loss_d', 'loss_g',
                 'branch']


@attr.s(auto_attribs=True)
class RunResult:
    '''Outcome of one optimizer run: the final front and the per-generation
    trace (one row per generation, TRACE_COLUMNS).'''
    front: ParetoFront
    trace: pd.DataFrame
    population: Population
    reference_point: t.Tuple[float, float]

    def __iter__(self):
        return iter((self.front, self.trace))

    @property
    def final_hypervolume(self) -> float:
        return float(self.trace['hypervolume'].iloc[-1])
