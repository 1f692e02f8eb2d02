'''Experiment configuration: workers, server, radio, layer profiles, channels.

A Scenario bundles a SystemConfig, one WorkerConfig per worker and a
LayerProfile. Scenarios are read from YAML or JSON files (JSON is valid YAML,
so both go through the same loader):

    system:
      bandwidth_hz: 3.0e6          # B_max
      server_freq_hz: 6.0e9        # f^{E,max}
      server_flops_per_cycle: 2    # n^E
      server_power_w: 0.5          # p_0
      noise_dbm_per_hz: -140       # N_0, converted to W/Hz at load
      carrier_ghz: 2.6
      rounds: 50                   # tau
      seed: 0                      # channel draws
    workers:                       # a list of worker tables, or
      generate: {count: 16, seed: 1}
    profile:                       # `layers: [...]`, `uniform: {...}`, or
      preset: mobilenet-like
      seed: 0
    reference_point: [36000, 10000]

Worker tables use the keys data_size, batch, epochs, f_max_hz,
flops_per_cycle, capacitance, power_w and distance_m. Layer tables use cf, cb
(FLOPs per datum), of, ob (bits per datum) and g (parameter bits).

Scenario objects are immutable, so one scenario (and one set of channel
draws) can be shared by every candidate evaluation in a run.

>>> round(float(path_loss_db(1.0, 1.0)), 6)
32.4
>>> round(float(mean_gain(1.0, 1.0)), 5)
0.02399
>>> WorkerConfig(3200, 16, 3, 1e9, 1, 2e-28, 0.05, 10.0).iterations
600
>>> WorkerConfig(3216, 16, 3, 1e9, 1, 2e-28, 0.05, 10.0).iterations
604
'''
import hashlib
import logging
import math
import typing as t
from pathlib import Path

import attr
import funcy as fy
import numpy as np
import yaml

log = logging.getLogger(__name__)

here = Path(__file__).parent


class InvalidScenario(ValueError):
    '''A scenario file or object breaks the schema or one of its invariants.

    `field` names the offending entry and `rule` the requirement it broke.
    '''

    def __init__(self, field: str, rule: str):
        super().__init__(f'{field}: {rule}')
        self.field = field
        self.rule = rule


def _check(ok, field, rule):
    if not ok:
        raise InvalidScenario(field, rule)


@attr.s(frozen=True, eq=False)
class LayerProfile:
    '''Per-layer costs of the trained network, one array entry per layer.

    Layers are numbered 1..L in the formulas; the arrays are 0-indexed, so
    layer l lives at index l-1. The prefix sums let the cost model read off
    "sum over l <= s" in O(1).
    '''
    cf: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    cb: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    of: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    ob: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    g: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float))

    def __attrs_post_init__(self):
        n = len(self.cf)
        for name in ('cb', 'of', 'ob', 'g'):
            _check(len(getattr(self, name)) == n, f'profile.{name}',
                   'all layer columns must have the same length')
        _check(n >= 3, 'profile', 'split constraint infeasible (need L >= 3)')
        for name in ('cf', 'cb', 'of', 'ob', 'g'):
            arr = getattr(self, name)
            _check(np.all(np.isfinite(arr)) and np.all(arr >= 0),
                   f'profile.{name}', 'must be finite and nonnegative')
        _check(np.all(self.cf + self.cb > 0), 'profile',
               'every layer needs cf + cb > 0')

    @classmethod
    def from_layers(cls, layers: t.Sequence[t.Mapping[str, float]]):
        try:
            cols = {k: [float(layer[k]) for layer in layers]
                    for k in ('cf', 'cb', 'of', 'ob', 'g')}
        except KeyError as e:
            raise InvalidScenario('profile.layers', f'missing key {e}')
        return cls(**cols)

    @property
    def L(self) -> int:
        return len(self.cf)

    @property
    def layers(self) -> t.List[t.Dict[str, float]]:
        return [dict(cf=a, cb=b, of=c, ob=d, g=e) for a, b, c, d, e
                in zip(self.cf, self.cb, self.of, self.ob, self.g)]

    @fy.cached_property
    def cum_cf(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.cf)])

    @fy.cached_property
    def cum_cb(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.cb)])

    @fy.cached_property
    def cum_g(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.g)])

    @property
    def total_flops(self) -> float:
        '''Sum over all layers of C^F + C^B, per datum.'''
        return float(self.cum_cf[-1] + self.cum_cb[-1])

    @property
    def total_param_bits(self) -> float:
        return float(self.cum_g[-1])


@attr.s(auto_attribs=True, frozen=True)
class WorkerConfig:
    data_size: int
    batch: int
    epochs: int
    f_max: float
    flops_per_cycle: float
    capacitance: float
    power: float
    distance: float

    @property
    def iterations(self) -> int:
        '''N_k = ceil(e_k D_k / b_k), bumped by one minibatch when odd.'''
        n = math.ceil(self.epochs * self.data_size / self.batch)
        return n + n % 2

    def validate(self, i: int = 0):
        for name, value in attr.asdict(self).items():
            _check(np.isfinite(value) and value > 0, f'workers[{i}].{name}',
                   'must be positive')


@attr.s(auto_attribs=True, frozen=True)
class SystemConfig:
    workers: int
    bandwidth: float
    server_freq: float
    server_flops_per_cycle: float
    server_power: float
    noise: float
    carrier_ghz: float
    rounds: int
    seed: int = 0

    def validate(self):
        _check(self.workers >= 1, 'system.workers', 'K >= 1')
        for name in ('bandwidth', 'server_freq', 'server_flops_per_cycle',
                     'server_power', 'noise', 'carrier_ghz'):
            value = getattr(self, name)
            _check(np.isfinite(value) and value > 0, f'system.{name}',
                   'must be positive')
        _check(self.rounds >= 1, 'system.rounds', 'tau >= 1')


@attr.s(frozen=True, eq=False)
class Scenario:
    system: SystemConfig = attr.ib()
    workers: t.Tuple[WorkerConfig, ...] = attr.ib(converter=tuple)
    profile: LayerProfile = attr.ib()
    reference_point: t.Optional[t.Tuple[float, float]] = attr.ib(default=None)

    def __attrs_post_init__(self):
        self.system.validate()
        _check(len(self.workers) == self.system.workers, 'workers',
               f'expected {self.system.workers} workers, '
               f'got {len(self.workers)}')
        for i, w in enumerate(self.workers):
            w.validate(i)

    @property
    def K(self) -> int:
        return self.system.workers

    @property
    def L(self) -> int:
        return self.profile.L

    @fy.cached_property
    def columns(self) -> t.Dict[str, np.ndarray]:
        '''Worker fields as arrays indexed by worker.'''
        names = [f.name for f in attr.fields(WorkerConfig)]
        cols = {n: np.array([getattr(w, n) for w in self.workers], dtype=float)
                for n in names}
        cols['iterations'] = np.array([w.iterations for w in self.workers],
                                      dtype=float)
        return cols

    def with_system(self, **changes) -> 'Scenario':
        return attr.evolve(self, system=attr.evolve(self.system, **changes))

    def with_workers(self, **changes) -> 'Scenario':
        return attr.evolve(
            self, workers=[attr.evolve(w, **changes) for w in self.workers])


@attr.s(frozen=True, eq=False)
class ChannelDraws:
    '''K x tau matrix of channel amplitude gains g_{k,t}.'''
    g: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float))

    def __attrs_post_init__(self):
        _check(self.g.ndim == 2, 'channels', 'gain matrix must be K x tau')
        _check(np.all(np.isfinite(self.g)) and np.all(self.g > 0),
               'channels', 'gains must be strictly positive')

    @property
    def rounds(self) -> int:
        return self.g.shape[1]

    @classmethod
    def constant(cls, scenario: Scenario, value=1e-3) -> 'ChannelDraws':
        value = np.broadcast_to(np.asarray(value, dtype=float),
                                (scenario.K,)).reshape(-1, 1)
        return cls(np.repeat(value, scenario.system.rounds, axis=1))


def path_loss_db(distance_m, carrier_ghz):
    '''PL(d) = 32.4 + 20 log10(f_carrier / GHz) + 20 log10(d / m).'''
    return 32.4 + 20 * np.log10(carrier_ghz) + 20 * np.log10(distance_m)


def mean_gain(distance_m, carrier_ghz):
    return 10 ** (-path_loss_db(distance_m, carrier_ghz) / 20)


def sample_channels(scenario: Scenario, seed: t.Optional[int] = None
                    ) -> ChannelDraws:
    '''Draw i.i.d. Rayleigh gains with mean 10^{-PL(d_k)/20} per worker.

    The same (scenario, seed) pair always gives the same matrix; the
    scenario's own seed is used when none is given.
    '''
    if seed is None:
        seed = scenario.system.seed
    rng = np.random.default_rng(seed)
    mean = mean_gain(scenario.columns['distance'], scenario.system.carrier_ghz)
    scale = mean / np.sqrt(np.pi / 2)
    g = rng.rayleigh(scale[:, None], size=(scenario.K, scenario.system.rounds))
    return ChannelDraws(np.maximum(g, np.finfo(float).tiny))


# Profile synthesis

PRESETS = {
    # Shaped like a small-image MobileNetV3-Large: FLOPs peak mid-network,
    # activations shrink with depth, parameters concentrate near the head.
    'mobilenet-like': dict(
        kind='convnet', n_layers=20, forward_flops=2.0e6, backward_ratio=2.0,
        param_bits=1.344e8, input_bits=98304, first_output_bits=131072,
        last_output_bits=320, jitter=0.1),
    'mobilenet-small': dict(
        kind='convnet', n_layers=12, forward_flops=1.0e6, backward_ratio=2.0,
        param_bits=3.2e7, input_bits=98304, first_output_bits=65536,
        last_output_bits=320, jitter=0.1),
}


def _uniform(n_layers, cf, cb, of, ob, g, **_):
    ones = np.ones(int(n_layers))
    return LayerProfile(cf * ones, cb * ones, of * ones, ob * ones, g * ones)


def _convnet(rng, n_layers, forward_flops, backward_ratio, param_bits,
             input_bits, first_output_bits, last_output_bits, jitter=0.0,
             **_):
    n = int(n_layers)
    _check(n >= 3, 'profile.n_layers', 'split constraint infeasible')
    pos = (np.arange(n) + 0.5) / n

    def noisy(w):
        if jitter:
            w = w * rng.lognormal(0.0, jitter, size=n)
        return w / w.sum()

    cf = forward_flops * noisy(np.sin(np.pi * pos) + 0.2)
    cb = backward_ratio * cf
    g = param_bits * noisy(pos ** 2 + 0.02)
    of = np.geomspace(first_output_bits, last_output_bits, n)
    # the backward output of layer l is the gradient w.r.t. its input
    ob = np.concatenate([[input_bits], of[:-1]])
    return LayerProfile(cf, cb, of, ob, g)


def synth_profile(desc: t.Union[str, t.Mapping[str, t.Any]], seed: int = 0
                  ) -> LayerProfile:
    '''Build a deterministic synthetic LayerProfile.

    `desc` is a preset name or a dict with `kind` set to `uniform` or
    `convnet`:

    >>> p = synth_profile(dict(kind='uniform', n_layers=3, cf=1e6, cb=1e6,
    ...                        of=1e4, ob=1e4, g=1e5))
    >>> p.L, p.layers[0] == p.layers[2]
    (3, True)
    '''
    if isinstance(desc, str):
        if desc not in PRESETS:
            raise InvalidScenario('profile.preset', f'unknown preset {desc!r}')
        desc = PRESETS[desc]
    desc = dict(desc)
    kind = desc.pop('kind', 'convnet')
    _check(int(desc.get('n_layers', 0)) >= 3, 'profile',
           'split constraint infeasible (need L >= 3)')
    if kind == 'uniform':
        return _uniform(**desc)
    if kind == 'convnet':
        return _convnet(np.random.default_rng(seed), **desc)
    raise InvalidScenario('profile.kind', f'unknown kind {kind!r}')


# Worker synthesis

DEFAULT_WORKER_RANGES = dict(
    distance_m=(2.0, 50.0),
    f_max_hz=(0.8e9, 1.0e9, 1.2e9),
    data_size=(2400, 3200, 4000),
    batch=16, epochs=3, flops_per_cycle=1, capacitance=2e-28, power_w=0.05,
)


def generate_workers(count: int, seed: int = 0, **ranges
                     ) -> t.List[WorkerConfig]:
    '''Draw workers the way the reference simulation does.

    Distances are uniform over `distance_m`, while `f_max_hz` and
    `data_size` are picked from their listed choices.
    '''
    r = dict(DEFAULT_WORKER_RANGES, **ranges)
    rng = np.random.default_rng(seed)
    lo, hi = r['distance_m']
    dist = rng.uniform(lo, hi, size=count)
    fmax = rng.choice(np.asarray(r['f_max_hz'], dtype=float), size=count)
    data = rng.choice(np.asarray(r['data_size'], dtype=int), size=count)
    return [WorkerConfig(data_size=int(data[i]), batch=int(r['batch']),
                         epochs=int(r['epochs']), f_max=float(fmax[i]),
                         flops_per_cycle=float(r['flops_per_cycle']),
                         capacitance=float(r['capacitance']),
                         power=float(r['power_w']), distance=float(dist[i]))
            for i in range(count)]


# Loading

def dbm_to_watts(dbm):
    return 10 ** ((dbm - 30) / 10)


def _need(table, key, where):
    if key not in table:
        raise InvalidScenario(f'{where}.{key}', 'missing')
    return table[key]


def _table(value, where):
    if not isinstance(value, dict):
        raise InvalidScenario(where, 'must be a table')
    return value


def _worker(table, i):
    where = f'workers[{i}]'
    try:
        return WorkerConfig(
            data_size=int(_need(table, 'data_size', where)),
            batch=int(_need(table, 'batch', where)),
            epochs=int(_need(table, 'epochs', where)),
            f_max=float(_need(table, 'f_max_hz', where)),
            flops_per_cycle=float(_need(table, 'flops_per_cycle', where)),
            capacitance=float(_need(table, 'capacitance', where)),
            power=float(_need(table, 'power_w', where)),
            distance=float(_need(table, 'distance_m', where)))
    except (TypeError, ValueError) as e:
        if isinstance(e, InvalidScenario):
            raise
        raise InvalidScenario(where, f'bad value ({e})')


def _profile(table):
    _table(table, 'profile')
    if 'layers' in table:
        return LayerProfile.from_layers(table['layers'])
    if 'uniform' in table:
        return synth_profile(dict(table['uniform'], kind='uniform'))
    if 'preset' in table:
        desc = dict(PRESETS.get(table['preset']) or {})
        if not desc:
            raise InvalidScenario('profile.preset',
                                  f'unknown preset {table["preset"]!r}')
        desc.update(table.get('overrides', {}))
        return synth_profile(desc, seed=int(table.get('seed', 0)))
    raise InvalidScenario('profile', 'need one of layers, uniform, preset')


def parse_scenario(doc: t.Mapping[str, t.Any]) -> Scenario:
    '''Validate a parsed scenario document into a Scenario.'''
    _table(doc, '<root>')
    system = _table(_need(doc, 'system', '<root>'), 'system')
    workers = _need(doc, 'workers', '<root>')
    if isinstance(workers, dict) and 'generate' in workers:
        gen = dict(_table(workers['generate'], 'workers.generate'))
        count = int(_need(gen, 'count', 'workers.generate'))
        workers = generate_workers(count, int(gen.pop('seed', 0)),
                                   **fy.omit(gen, ['count']))
    elif isinstance(workers, list):
        workers = [_worker(w, i) for i, w in enumerate(workers)]
    else:
        raise InvalidScenario('workers', 'need a list or a generate table')
    try:
        sys_cfg = SystemConfig(
            workers=int(system.get('workers', len(workers))),
            bandwidth=float(_need(system, 'bandwidth_hz', 'system')),
            server_freq=float(_need(system, 'server_freq_hz', 'system')),
            server_flops_per_cycle=float(
                _need(system, 'server_flops_per_cycle', 'system')),
            server_power=float(_need(system, 'server_power_w', 'system')),
            noise=dbm_to_watts(
                float(_need(system, 'noise_dbm_per_hz', 'system'))),
            carrier_ghz=float(_need(system, 'carrier_ghz', 'system')),
            rounds=int(_need(system, 'rounds', 'system')),
            seed=int(system.get('seed', 0)))
    except (TypeError, ValueError) as e:
        if isinstance(e, InvalidScenario):
            raise
        raise InvalidScenario('system', f'bad value ({e})')
    ref = doc.get('reference_point')
    if ref is not None:
        try:
            ref = tuple(float(r) for r in ref) if isinstance(
                ref, (list, tuple)) else ()
        except (TypeError, ValueError):
            ref = ()
        _check(len(ref) == 2 and min(ref) > 0, 'reference_point',
               'need two positive numbers')
    scenario = Scenario(sys_cfg, workers, _profile(_need(doc, 'profile',
                                                         '<root>')), ref)
    for i, w in enumerate(scenario.workers):
        raw = math.ceil(w.epochs * w.data_size / w.batch)
        if raw != w.iterations:
            log.info('worker %d: N_k=%d is odd, using %d', i, raw,
                     w.iterations)
    return scenario


def load_scenario(path: t.Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise InvalidScenario(str(path), f'does not parse ({e})')
    return parse_scenario(doc)


def builtin(name: str) -> Path:
    '''Path of a bundled scenario file, e.g. builtin("full").'''
    for ext in ('.yaml', '.json'):
        p = here / 'scenarios' / f'{name}{ext}'
        if p.exists():
            return p
    raise InvalidScenario('scenario', f'no bundled scenario named {name!r}')


def resolve(name_or_path: t.Union[str, Path]) -> Path:
    '''Accept either a file path or the name of a bundled scenario.'''
    p = Path(name_or_path)
    if p.exists():
        return p
    return builtin(str(name_or_path))


def scenario_hash(path: t.Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()

