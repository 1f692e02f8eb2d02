'''The predictive GAN optimizer.

A discriminator learns to tell, for an ordered pair of genotypes, whether the
first dominates the second; the generator learns to turn Gaussian noise
fitted to the current population into genotypes the discriminator believes
dominate that population. Each generation either breeds offspring
genetically or samples them from the generator, with equal probability,
then applies NSGA-III selection and retrains both networks on freshly mined
dominance pairs.
'''
import logging
import math
import typing as t
from pathlib import Path

import attr
import funcy as fy
import numpy as np
import pandas as pd

from ..moea.nsga3 import GeneticConfig, genetic_step, trace_row
from ..moea.operators import ETA_C, ETA_M
from ..moea.population import Problem, RunResult, stream
from ..moea.selection import niching_select
from ..scenario import ChannelDraws, Scenario
from .nets import MLP, Adam, logistic
from .noise import NoiseModel
from .pairs import GAMMA, KAPPA, find_pairs

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'hfsltool-gan/1'
NOISE_MODES = ('as-written', 'symmetric')
BRANCHES = ('hybrid', 'genetic', 'gan')


@attr.s(auto_attribs=True, frozen=True)
class GanConfig:
    pop_size: int = 100
    iterations: int = 10
    lr: float = 4e-4
    gamma: float = GAMMA
    kappa: int = KAPPA
    # as-written: train the generator on (mu_{j+1}, sigma_j)
    noise_mode: str = 'as-written'
    branch: str = 'hybrid'
    eta_c: float = ETA_C
    eta_m: float = ETA_M
    mutation_prob: t.Optional[float] = None

    def __attrs_post_init__(self):
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f'noise_mode must be one of {NOISE_MODES}')
        if self.branch not in BRANCHES:
            raise ValueError(f'branch must be one of {BRANCHES}')

    @property
    def genetic(self) -> GeneticConfig:
        return GeneticConfig(self.pop_size, self.eta_c, self.eta_m,
                             self.mutation_prob)


@attr.s(eq=False)
class PredGAN:
    '''Generator, discriminator and their optimizers for genotypes of size dim.

    The generator maps dim -> dim through two hidden layers of width dim; the
    discriminator reads two genotypes side by side through one hidden layer
    of width 2 dim.
    '''
    gen: MLP = attr.ib()
    disc: MLP = attr.ib()
    opt_g: Adam = attr.ib()
    opt_d: Adam = attr.ib()

    @classmethod
    def create(cls, dim: int, rng: np.random.Generator, lr: float = 4e-4,
               zero_last: bool = False) -> 'PredGAN':
        gen = MLP.build([dim, dim, dim, dim], rng)
        disc = MLP.build([2 * dim, 2 * dim, 1], rng, zero_last=zero_last)
        return cls(gen, disc, Adam(lr), Adam(lr))

    @property
    def dim(self) -> int:
        return self.gen.sizes[0]

    def _check(self, *arrays):
        for a in arrays:
            if a.shape[-1] != self.dim:
                raise ValueError(f'expected genotypes of length {self.dim}, '
                                 f'got {a.shape[-1]}')

    def disc_forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        '''Probability that each x strictly dominates the matching y.'''
        x, y = np.atleast_2d(x), np.atleast_2d(y)
        self._check(x, y)
        return logistic(self.disc.forward(np.hstack([x, y]))[0])[:, 0]

    def generate(self, z: np.ndarray) -> np.ndarray:
        return logistic(self.gen.forward(z)[0])

    def gen_offspring(self, noise: NoiseModel, rng: np.random.Generator,
                      count: int) -> np.ndarray:
        return self.generate(noise.sample(rng, count))

    # losses

    def disc_loss(self, dominating: np.ndarray, dominated: np.ndarray):
        '''F_D and its gradient w.r.t. the discriminator's params.

        F_D = -mean[ln D(x||y) + ln(1 - D(y||x))] over the pairs (x, y).
        '''
        self._check(dominating, dominated)
        n = len(dominating)
        a, acts_a = self.disc.forward(np.hstack([dominating, dominated]))
        b, acts_b = self.disc.forward(np.hstack([dominated, dominating]))
        loss = float(np.mean(np.logaddexp(0, -a) + np.logaddexp(0, b)))
        ga, _ = self.disc.backward(acts_a, (logistic(a) - 1) / n)
        gb, _ = self.disc.backward(acts_b, logistic(b) / n)
        return loss, [p + q for p, q in zip(ga, gb)]

    def gen_loss(self, z: np.ndarray, targets: np.ndarray):
        '''F_G and its gradient w.r.t. the generator's params.

        F_G = -mean ln D(G(z_i)||phi_i); the discriminator is only read.
        '''
        self._check(targets)
        n = len(targets)
        o, acts_g = self.gen.forward(z)
        y = logistic(o)
        c, acts_d = self.disc.forward(np.hstack([y, targets]))
        loss = float(np.mean(np.logaddexp(0, -c)))
        _, dx = self.disc.backward(acts_d, (logistic(c) - 1) / n)
        grads, _ = self.gen.backward(acts_g, dx[:, :self.dim] * y * (1 - y))
        return loss, grads

    # training

    def train_disc(self, dominating: np.ndarray, dominated: np.ndarray
                   ) -> float:
        '''One Adam step on F_D; NaN (and no step) without pairs.'''
        if not len(dominating):
            log.info('no dominance pairs, discriminator step skipped')
            return math.nan
        loss, grads = self.disc_loss(dominating, dominated)
        self.opt_d.step(self.disc.params, grads)
        return loss

    def train_gen(self, population: np.ndarray, noise: NoiseModel,
                  rng: np.random.Generator) -> float:
        '''One Adam step on F_G with one noise draw per population member.'''
        z = noise.sample(rng, len(population))
        loss, grads = self.gen_loss(z, population)
        self.opt_g.step(self.gen.params, grads)
        return loss


def save_checkpoint(path: t.Union[str, Path], gan: PredGAN,
                    generation: int = 0):
    '''Write the weights to an .npz archive tagged with CHECKPOINT_FORMAT.

    Optimizer moments are not saved.
    '''
    arrays = {}
    for name, net in (('gen', gan.gen), ('disc', gan.disc)):
        for i, p in enumerate(net.params):
            arrays[f'{name}_{i}'] = p
    with open(path, 'wb') as fh:
        np.savez(fh, format=np.array(CHECKPOINT_FORMAT),
                 generation=np.array(generation), **arrays)


def load_checkpoint(path: t.Union[str, Path], lr: float = 4e-4
                    ) -> t.Tuple[PredGAN, int]:
    with np.load(path) as data:
        fmt = str(data['format'])
        if fmt != CHECKPOINT_FORMAT:
            raise ValueError(f'{path}: unsupported checkpoint format {fmt!r}')
        nets = {}
        for name in ('gen', 'disc'):
            params = [data[k] for k in sorted(
                (k for k in data.files if k.startswith(name + '_')),
                key=lambda k: int(k.rsplit('_', 1)[1]))]
            nets[name] = MLP(params[0::2], params[1::2])
        generation = int(data['generation'])
    return PredGAN(nets['gen'], nets['disc'], Adam(lr), Adam(lr)), generation


def run(scenario: Scenario, draws: ChannelDraws, generations: int,
        seed: int = 0, config: GanConfig = GanConfig(),
        ref: t.Optional[t.Tuple[float, float]] = None,
        verbose: bool = False,
        checkpoint: t.Optional[t.Union[str, Path]] = None) -> RunResult:
    '''Run the predictive-GAN optimizer for `generations` generations.'''
    if generations < 1:
        raise ValueError('need at least one generation')
    msg = print if verbose else fy.identity
    problem = Problem(scenario, draws)
    ref = ref or problem.reference_point()
    R = config.pop_size
    rng_gen, rng_sel = stream(seed, 'genetic'), stream(seed, 'select')
    rng_branch, rng_gan = stream(seed, 'branch'), stream(seed, 'gan')
    rng_noise = stream(seed, 'noise')

    P = problem.random(stream(seed, 'init'), R)
    Y = problem.random(stream(seed, 'compared'), R)
    gan = PredGAN.create(problem.dim, rng_gan, config.lr)
    noise = NoiseModel.fit(P.X)
    rows = [trace_row(0, P, ref, 'init')]

    for j in range(1, generations + 1):
        delta = rng_branch.random()
        branch = config.branch
        if branch == 'hybrid':
            branch = 'genetic' if delta >= 0.5 else 'gan'
        if branch == 'genetic':
            Q = genetic_step(problem, P, rng_gen, config.genetic)
        else:
            Q = problem.population(gan.gen_offspring(noise, rng_noise, R))

        union = P + Q
        keep = niching_select(union.F, R, rng_sel, parents=R)
        P_next = union.take(keep)
        dropped = union.take(np.setdiff1d(np.arange(len(union)), keep))
        noise_next = NoiseModel.fit(P_next.X)

        compared = Y + dropped
        Z = find_pairs(P_next.F, compared.F, config.gamma, config.kappa)
        Y = compared.take(Z.retained)
        loss_d = loss_g = math.nan
        if len(Z):
            X_dom = P_next.X[Z.pairs[:, 0]]
            X_sub = compared.X[Z.pairs[:, 1]]
            for _ in range(config.iterations):
                loss_d = gan.train_disc(X_dom, X_sub)
            train_noise = (noise.with_mean(noise_next.mean)
                           if config.noise_mode == 'as-written'
                           else noise_next)
            targets = P_next.X
            for _ in range(config.iterations):
                loss_g = gan.train_gen(targets, train_noise, rng_gan)
        else:
            log.info('gen %d: no dominance pairs, GAN training skipped', j)

        P, noise = P_next, noise_next
        rows.append(trace_row(j, P, ref, branch, len(Z), loss_d, loss_g))
        log.debug('predgan seed=%d gen=%d branch=%s hv=%.6g pairs=%d', seed,
                  j, branch, rows[-1]['hypervolume'], len(Z))
        msg(f'[pred-gan {seed}] gen {j}/{generations} {branch} '
            f'hv={rows[-1]["hypervolume"]:.6g} pairs={len(Z)}')

    if checkpoint is not None:
        save_checkpoint(checkpoint, gan, generations)
    return RunResult(P.front(), pd.DataFrame(rows), P, ref)
