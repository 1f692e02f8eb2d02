'''Command line front end for batch experiments.

    hfsltool optimize --scenario desk --algo nsga3 --gens 50 --seeds 0-4
    hfsltool compare --scenario desk --gens 200 --seeds 0-4
    hfsltool convergence --task scalar --seeds 0,1
    hfsltool sweep --scenario desk --param bandwidth --values 1e6,2e6,3e6

Everything is written below --out, which defaults to $HFSLTOOL_OUT/<command>
(HFSLTOOL_OUT itself defaults to `runs`). Each directory holding CSV files
also holds the manifest.json those files name in their first line.

Exit codes: 0 success, 2 usage or precondition error, 3 invalid or
infeasible scenario, 4 failed property check.
'''
import argparse
import logging
import os
import sys
import typing as t
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import attr
import numpy as np
import pandas as pd

from . import __version__
from .convergence import (PreconditionError, PropertyViolation, check_eta,
                          check_lemma1, check_theorem1, preset_task,
                          rate_match, report, run_lab)
from .convergence import PRESETS as TASK_PRESETS
from .cost import Infeasible, SplitPlan, offload_stats
from .export import (RunManifest, baseline_frame, front_frame, tagged,
                     write_csv, write_manifest)
from .gan import predgan
from .gan.predgan import NOISE_MODES, GanConfig
from .moea import nsga3
from .moea.nsga3 import GeneticConfig
from .moea.population import Problem
from .scenario import (ChannelDraws, InvalidScenario, Scenario, load_scenario,
                       resolve, sample_channels, scenario_hash)

log = logging.getLogger(__name__)

ALGOS = ('pred-gan', 'nsga3')
SWEEP_PARAMS = {'bandwidth': 'bandwidth', 'server-freq': 'server_freq'}
RATE_TOLERANCE = 0.10


# Argument parsing

def parse_seeds(text: str) -> t.Tuple[int, ...]:
    '''Seeds as a comma list with optional inclusive ranges.

    >>> parse_seeds('0-2,7')
    (0, 1, 2, 7)
    '''
    seeds: t.List[int] = []
    try:
        for part in text.split(','):
            part = part.strip()
            if '-' in part[1:]:
                lo, hi = part.split('-', 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            elif part:
                seeds.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f'bad seed list {text!r}')
    if not seeds:
        raise argparse.ArgumentTypeError('need at least one seed')
    return tuple(seeds)


def parse_floats(text: str) -> t.Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f'bad number list {text!r}')


def parse_ref_point(text: str) -> t.Tuple[float, float]:
    values = parse_floats(text)
    if len(values) != 2 or min(values) <= 0:
        raise argparse.ArgumentTypeError(
            'reference point needs two positive numbers, e.g. 36000,10000')
    return values[0], values[1]


def parse_positive_floats(text: str) -> t.Tuple[float, ...]:
    values = parse_floats(text)
    if not values or min(values) <= 0:
        raise argparse.ArgumentTypeError('values must be positive')
    return values


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'not an integer: {text!r}')
    if value < 1:
        raise argparse.ArgumentTypeError('must be at least 1')
    return value


def nonnegative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'not an integer: {text!r}')
    if value < 0:
        raise argparse.ArgumentTypeError('must not be negative')
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for INFO logging, -vv for DEBUG')
    common.add_argument('--seeds', '--seed', type=parse_seeds, default=(0,),
                        help='e.g. 0,1,2 or 0-4 (default 0)')
    common.add_argument('--out', type=Path, default=None,
                        help='output directory (default '
                             '$HFSLTOOL_OUT/<command>)')
    common.add_argument('--jobs', type=positive_int, default=1,
                        help='worker processes for independent seeds')

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument('--scenario', default='desk',
                        help='scenario file or bundled name (default desk)')
    search.add_argument('--gens', type=positive_int, default=100,
                        help='generations per run')
    search.add_argument('--pop', type=positive_int, default=100,
                        help='population size R')
    search.add_argument('--ref-point', type=parse_ref_point, default=None,
                        help='hypervolume reference point v1,v2')
    search.add_argument('--gan-noise-mode', choices=NOISE_MODES,
                        default='as-written')
    search.add_argument('--checkpoint', action='store_true',
                        help='save GAN weights next to each pred-gan front')

    parser = argparse.ArgumentParser(
        prog='hfsltool',
        description='Split/bandwidth optimisation for hybrid federated '
                    'split learning.')
    parser.add_argument('--version', action='version', version=__version__)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('optimize', parents=[common, search],
                       help='run one optimizer over several seeds')
    p.add_argument('--algo', choices=ALGOS, default='pred-gan')
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser('compare', parents=[common, search],
                       help='run several optimizers head to head')
    p.add_argument('--algos', default=','.join(ALGOS),
                   help=f'comma list from {ALGOS}')
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser('convergence', parents=[common],
                       help='check the delayed-gradient bounds')
    p.add_argument('--task', choices=sorted(TASK_PRESETS), default='scalar')
    p.add_argument('--eta', type=float, default=0.05,
                   help='step size as a fraction of 1/L (default 0.05)')
    p.add_argument('--rounds', type=nonnegative_int, default=30)
    p.add_argument('--iterations', type=positive_int, default=10,
                   help='local iterations N_k per round')
    p.add_argument('--delayed', choices=('mixed', 'all', 'none'),
                   default='mixed',
                   help='which workers use delayed gradients; mixed '
                        'alternates')
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser('sweep', parents=[common, search],
                       help='re-optimize over a range of a system parameter')
    p.add_argument('--algo', choices=ALGOS, default='pred-gan')
    p.add_argument('--param', choices=sorted(SWEEP_PARAMS),
                   default='bandwidth')
    p.add_argument('--values', type=parse_positive_floats, required=True,
                   help='comma list, e.g. 1e6,2e6,3e6')
    p.set_defaults(func=cmd_sweep)
    return parser


def out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get('HFSLTOOL_OUT', 'runs')) / args.command


# Optimizer runs

@attr.s(auto_attribs=True, frozen=True)
class Job:
    algo: str
    scenario: Scenario
    draws: ChannelDraws
    generations: int
    seed: int
    pop: int
    ref: t.Tuple[float, float]
    noise_mode: str = 'as-written'
    checkpoint: t.Optional[Path] = None
    verbose: bool = False


def run_job(job: Job):
    '''Run one optimizer; returns (front, trace).'''
    if job.algo == 'nsga3':
        res = nsga3.run(job.scenario, job.draws, job.generations, job.seed,
                        GeneticConfig(pop_size=job.pop), job.ref, job.verbose)
    elif job.algo == 'pred-gan':
        config = GanConfig(pop_size=job.pop, noise_mode=job.noise_mode)
        res = predgan.run(job.scenario, job.draws, job.generations, job.seed,
                          config, job.ref, job.verbose, job.checkpoint)
    else:
        raise PreconditionError(f'unknown algorithm {job.algo!r}')
    return res.front, res.trace


def run_jobs(jobs: t.Sequence[Job], processes: int = 1) -> list:
    '''Results in the order of `jobs`, however many processes run them.'''
    if processes > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=processes) as pool:
            return list(pool.map(run_job, jobs))
    return [run_job(j) for j in jobs]


@attr.s(auto_attribs=True, frozen=True)
class Setup:
    path: Path
    scenario: Scenario
    draws: ChannelDraws
    ref: t.Tuple[float, float]

    @classmethod
    def load(cls, args) -> 'Setup':
        path = resolve(args.scenario)
        scenario = load_scenario(path)
        draws = sample_channels(scenario)
        ref = args.ref_point or Problem(scenario, draws).reference_point()
        return cls(path, scenario, draws, ref)

    def manifest(self, args, out: Path, algo=None, seeds=None,
                 **options) -> RunManifest:
        options = dict(dict(pop=args.pop, ref_point=list(self.ref),
                            gan_noise_mode=args.gan_noise_mode), **options)
        return RunManifest(
            command=args.command, scenario=str(self.path),
            scenario_sha256=scenario_hash(self.path), algo=algo,
            seeds=tuple(seeds if seeds is not None else args.seeds),
            generations=args.gens, out=str(out), version=__version__,
            options=options)


def search_jobs(args, setup: Setup, algo: str, root: Path) -> t.List[Job]:
    jobs = []
    for seed in args.seeds:
        ckpt = None
        if args.checkpoint and algo == 'pred-gan':
            ckpt = root / f'seed-{seed}' / 'gan.npz'
            ckpt.parent.mkdir(parents=True, exist_ok=True)
        jobs.append(Job(algo, setup.scenario, setup.draws,
                        args.gens, seed, args.pop, setup.ref,
                        args.gan_noise_mode, ckpt, args.verbose > 0))
    return jobs


def write_seed(args, setup: Setup, root: Path, algo: str, seed: int, front,
               trace, **options):
    seed_dir = root / f'seed-{seed}'
    manifest = setup.manifest(args, seed_dir, algo, (seed,), **options)
    write_manifest(seed_dir, manifest)
    write_csv(seed_dir / 'front.csv', front_frame(front), manifest)
    write_csv(seed_dir / 'trace.csv', trace, manifest)


# Commands

def cmd_optimize(args) -> int:
    setup = Setup.load(args)
    root = out_dir(args)
    jobs = search_jobs(args, setup, args.algo, root)
    for job, (front, trace) in zip(jobs, run_jobs(jobs, args.jobs)):
        write_seed(args, setup, root, args.algo, job.seed, front, trace)
        print(f'{args.algo} seed {job.seed}: {len(front)} plans on the '
              f'front, hypervolume {trace["hypervolume"].iloc[-1]:.6g}')
    return 0


def cmd_compare(args) -> int:
    algos = [a.strip() for a in args.algos.split(',') if a.strip()]
    bad = [a for a in algos if a not in ALGOS]
    if bad or not algos:
        raise PreconditionError(f'unknown algorithms {bad}; choose from '
                                f'{ALGOS}')
    setup = Setup.load(args)
    root = out_dir(args)
    problem = Problem(setup.scenario, setup.draws)
    fl_point = problem.fl_point()

    jobs = [j for algo in algos
            for j in search_jobs(args, setup, algo, root / algo)]
    rows, traces, fronts = [], [], []
    for job, (front, trace) in zip(jobs, run_jobs(jobs, args.jobs)):
        rows.append(dict(algo=job.algo, seed=job.seed,
                         final_hypervolume=float(trace['hypervolume'].iloc[-1]),
                         front_size=len(front),
                         fl_dominated=front.weakly_dominates(fl_point)))
        traces.append(tagged(trace, algo=job.algo, seed=job.seed))
        fronts.append(tagged(front_frame(front), algo=job.algo,
                             seed=job.seed))

    manifest = setup.manifest(args, root, args.algos)
    write_manifest(root, manifest)
    table = pd.DataFrame(rows)
    write_csv(root / 'compare.csv', table, manifest)
    write_csv(root / 'traces.csv', pd.concat(traces, ignore_index=True),
              manifest)
    write_csv(root / 'fronts.csv', pd.concat(fronts, ignore_index=True),
              manifest)
    write_csv(root / 'baseline.csv',
              baseline_frame(fl_point, SplitPlan.nonsplit(setup.scenario)),
              manifest)

    print(f'FL baseline: {fl_point.v1:.6g} s, {fl_point.v2:.6g} J')
    summary = table.groupby('algo', sort=False).agg(
        median_hypervolume=('final_hypervolume', 'median'),
        fl_dominated=('fl_dominated', 'sum'),
        runs=('seed', 'count'))
    for algo, row in summary.iterrows():
        print(f'{algo}: median hypervolume {row.median_hypervolume:.6g}, '
              f'FL dominated in {int(row.fl_dominated)}/{int(row.runs)} runs')
    return 0


def delayed_mask(mode: str, workers: int) -> np.ndarray:
    if mode == 'all':
        return np.ones(workers, dtype=bool)
    if mode == 'none':
        return np.zeros(workers, dtype=bool)
    return np.arange(workers) % 2 == 0


def check_properties(task, eta, args) -> t.Tuple[pd.DataFrame,
                                                 t.Dict[str, str]]:
    '''Report table and a pass/fail/skipped verdict per property.'''
    run = run_lab(task, eta, args.iterations,
                  delayed_mask(args.delayed, task.K), args.rounds)
    verdicts = {}
    for name, check in (('lemma', check_lemma1), ('theorem', check_theorem1)):
        try:
            check(run, strict=True)
            verdicts[name] = 'pass' if run.rounds else 'skipped'
        except PropertyViolation as e:
            log.warning('%s', e)
            verdicts[name] = 'fail'
    try:
        match = rate_match(task, eta, args.iterations, args.rounds)
    except PreconditionError as e:
        log.info('rate match skipped: %s', e)
        verdicts['rate-match'] = 'skipped'
    else:
        ok = match.relative_gap <= RATE_TOLERANCE
        verdicts['rate-match'] = 'pass' if ok else 'fail'
        log.info('decay rates: plain %.6g, delayed %.6g (%.2f%% apart)',
                 match.plain, match.delayed, 100 * match.relative_gap)
    return report(run), verdicts


def cmd_convergence(args) -> int:
    root = out_dir(args)
    summary = []
    for seed in args.seeds:
        task = preset_task(args.task, seed)
        eta = args.eta / task.L
        check_eta(task, eta)
        table, verdicts = check_properties(task, eta, args)
        seed_dir = root / f'seed-{seed}'
        manifest = RunManifest(
            command='convergence', scenario=None, scenario_sha256=None,
            algo=None, seeds=(seed,), generations=None, out=str(seed_dir),
            version=__version__,
            options=dict(task=args.task, eta=args.eta, rounds=args.rounds,
                         iterations=args.iterations, delayed=args.delayed))
        write_manifest(seed_dir, manifest)
        write_csv(seed_dir / 'convergence.csv', table, manifest)
        print(f'seed {seed}: ' + ', '.join(f'{k} {v}'
                                           for k, v in verdicts.items()))
        summary.extend(dict(seed=seed, property=k, verdict=v)
                       for k, v in verdicts.items())
    failed = [row for row in summary if row['verdict'] == 'fail']
    return 4 if failed else 0


def cmd_sweep(args) -> int:
    setup = Setup.load(args)
    root = out_dir(args)
    field = SWEEP_PARAMS[args.param]
    rows = []
    for value in args.values:
        scenario = setup.scenario.with_system(**{field: value})
        # each value gets its own reference point unless one was given
        ref = args.ref_point or Problem(scenario,
                                        setup.draws).reference_point()
        at_value = attr.evolve(setup, scenario=scenario, ref=ref)
        value_dir = root / f'{args.param}-{value:g}'
        jobs = search_jobs(args, at_value, args.algo, value_dir)
        for job, (front, trace) in zip(jobs, run_jobs(jobs, args.jobs)):
            write_seed(args, at_value, value_dir, args.algo, job.seed, front,
                       trace, **{field: value})
            stats = pd.DataFrame([offload_stats(plan, scenario.profile)
                                  for plan in front.payloads])
            rows.append(dict(
                param=args.param, value=value, seed=job.seed,
                front_size=len(front),
                hypervolume=float(trace['hypervolume'].iloc[-1]),
                offloaded_layers=float(stats['offloaded_layers'].mean()),
                offloaded_flops=float(stats['offloaded_flops'].mean()),
                ref_v1=ref[0], ref_v2=ref[1]))
            print(f'{args.param}={value:g} seed {job.seed}: offloaded '
                  f'{rows[-1]["offloaded_layers"]:.3g} layers, '
                  f'{rows[-1]["offloaded_flops"]:.4g} FLOPs per datum')
    shared = list(args.ref_point) if args.ref_point else 'per value'
    manifest = setup.manifest(args, root, args.algo, param=args.param,
                              values=list(args.values), ref_point=shared)
    write_manifest(root, manifest)
    write_csv(root / 'sweep.csv', pd.DataFrame(rows), manifest)
    return 0


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except PreconditionError as e:
        print(f'hfsltool: error: {e}', file=sys.stderr)
        return 2
    except (InvalidScenario, Infeasible) as e:
        print(f'hfsltool: error: {e}', file=sys.stderr)
        return 3
    except PropertyViolation as e:
        print(f'hfsltool: property check failed: {e}', file=sys.stderr)
        return 4
