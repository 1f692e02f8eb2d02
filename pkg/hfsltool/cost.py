'''Per-round time and energy of one HFSL training round, and the objectives.

Every worker either keeps the whole model (S_k == H_k, "non-split") or splits
it into part a (layers 1..S_k, worker), part b (S_k+1..H_k, server) and part c
(H_k+1..L, worker). Split workers pipeline two minibatches through four
repeating stages; non-split workers train locally and then slow down to
finish exactly at the round deadline T_max.

All arithmetic is vectorised over rounds: a gain argument may be a scalar, a
length-tau vector for one worker, or a K x tau matrix for the whole plan.

>>> tx_time(2e6, 1e6, 3.0, 1.0, 1e-6)
1.0
>>> server_compute_time(1e9, 2e9, 2)
0.25
'''
import logging
import typing as t

import attr
import numpy as np
import pandas as pd

from .scenario import ChannelDraws, LayerProfile, Scenario

log = logging.getLogger(__name__)

# Budgets are spent with equality by the decoder; allow for float rounding.
BUDGET_RTOL = 1e-9


class Infeasible(ValueError):
    '''A plan violates one of the problem constraints.

    `constraint` is one of "compute budget", "bandwidth budget",
    "split decision", "positive bandwidth", "positive server
    frequency" or "round deadline".
    '''

    def __init__(self, constraint: str, detail: str = ''):
        super().__init__(f'{constraint}: {detail}' if detail else constraint)
        self.constraint = constraint


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


@attr.s(auto_attribs=True, frozen=True)
class ObjectiveValue:
    v1: float  # total time, seconds
    v2: float  # total worker energy, joules

    def __iter__(self):
        return iter((self.v1, self.v2))

    def as_array(self) -> np.ndarray:
        return np.array([self.v1, self.v2])


def _ints(v):
    return np.asarray(v, dtype=int)


def _floats(v):
    return np.asarray(v, dtype=float)


@attr.s(frozen=True, eq=False)
class SplitPlan:
    '''Per-worker cut layers and resource shares.

    S and H are 1-based layer indices; fE (cycles/s) only matters for
    workers with S < H.
    '''
    S: np.ndarray = attr.ib(converter=_ints)
    H: np.ndarray = attr.ib(converter=_ints)
    fE: np.ndarray = attr.ib(converter=_floats)
    B: np.ndarray = attr.ib(converter=_floats)

    @property
    def K(self) -> int:
        return len(self.S)

    @property
    def split(self) -> np.ndarray:
        return self.S < self.H

    @property
    def indicator(self) -> np.ndarray:
        '''I_k: 1 when worker k keeps the whole model.'''
        return (self.S == self.H).astype(int)

    def worker(self, k: int) -> t.Tuple[int, int, float, float]:
        return int(self.S[k]), int(self.H[k]), float(self.fE[k]), float(self.B[k])

    def check(self, scenario: Scenario):
        K, L = scenario.K, scenario.L
        if not all(len(a) == K for a in (self.S, self.H, self.fE, self.B)):
            raise Infeasible('split decision',
                             f'plan covers {len(self.S)} workers, need {K}')
        bad = ~((1 <= self.S) & (self.S <= self.H) & (self.H < L))
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise Infeasible('split decision',
                             f'worker {k} has S={self.S[k]}, H={self.H[k]}, '
                             f'L={L}')
        if not np.all(self.B > 0):
            raise Infeasible('positive bandwidth')
        if not np.all(self.fE[self.split] > 0):
            raise Infeasible('positive server frequency')
        sys = scenario.system
        if self.B.sum() > sys.bandwidth * (1 + BUDGET_RTOL):
            raise Infeasible('bandwidth budget',
                             f'{self.B.sum():g} Hz > {sys.bandwidth:g} Hz')
        used = self.fE[self.split].sum()
        if used > sys.server_freq * (1 + BUDGET_RTOL):
            raise Infeasible('compute budget',
                             f'{used:g} cycles/s > {sys.server_freq:g}')

    @classmethod
    def nonsplit(cls, scenario: Scenario) -> 'SplitPlan':
        '''The plain FL plan: nobody splits, bandwidth shared equally.'''
        K = scenario.K
        return cls(S=np.ones(K), H=np.ones(K), fE=np.zeros(K),
                   B=np.full(K, scenario.system.bandwidth / K))

    def flat(self) -> t.Dict[str, float]:
        '''S_1, H_1, fE_1, B_1, S_2, ... as an ordered mapping.'''
        row = {}
        for k in range(self.K):
            for name in ('S', 'H', 'fE', 'B'):
                row[f'{name}_{k + 1}'] = getattr(self, name)[k]
        return row


# Scalar formulas

def tx_time(bits, bandwidth, power, gain, n0):
    '''Seconds to move `bits` over a link of `bandwidth` Hz.

    The rate is B log2(1 + p g^2 / (B N0)); `gain` is an amplitude.
    '''
    bits, bandwidth, power, gain = map(_floats, (bits, bandwidth, power, gain))
    if (np.any(bits < 0) or np.any(bandwidth <= 0) or np.any(power <= 0)
            or np.any(gain <= 0) or n0 <= 0):
        raise ValueError('tx_time needs positive bandwidth, power, gain and '
                         'noise, and nonnegative bits')
    rate = bandwidth * np.log2(1 + power * gain ** 2 / (bandwidth * n0))
    return _out(bits / rate)


def server_compute_time(flops_total, fE, nE):
    fE = _floats(fE)
    if np.any(fE <= 0) or nE <= 0:
        raise ValueError('server frequency and FLOPs/cycle must be positive')
    return _out(_floats(flops_total) / (fE * nE))


def _one(arr, gain):
    '''Row 0 of a per-worker result, as a float when `gain` was a scalar.'''
    row = np.asarray(arr)[..., 0, :]
    return float(row[..., 0]) if np.ndim(gain) == 0 else row


def _cap(f, f_max):
    # a stage that runs at full speed recomputes f_max up to rounding
    return np.where((f > f_max) & (f <= f_max * (1 + 1e-9)), f_max, f)


# Per-worker quantities

def _payloads(scenario: Scenario, plan: SplitPlan) -> t.Dict[str, np.ndarray]:
    '''FLOPs per minibatch and bits per transfer, one entry per worker.'''
    p: LayerProfile = scenario.profile
    S, H = plan.S, plan.H
    b = scenario.columns['batch']
    fb = p.cum_cf + p.cum_cb
    cols = scenario.columns
    return dict(
        part_a=b * fb[S],
        part_c=b * (fb[-1] - fb[H]),
        part_b_f=b * (p.cum_cf[H] - p.cum_cf[S]),
        part_b_b=b * (p.cum_cb[H] - p.cum_cb[S]),
        up_f=b * p.of[S - 1],
        down_f=b * p.of[H - 1],
        up_b=b * p.ob[H],
        down_b=b * p.ob[S],
        params=np.where(S == H, p.total_param_bits,
                        p.cum_g[S] + p.cum_g[-1] - p.cum_g[H]),
        local_flops=cols['epochs'] * cols['data_size'] * p.total_flops,
    )


def _rows(ks, gain):
    ks = np.atleast_1d(np.asarray(ks, dtype=int))
    gain = np.asarray(gain, dtype=float)
    if gain.ndim < 2:
        gain = np.atleast_1d(gain)
        gain = np.broadcast_to(gain, (len(ks), gain.shape[-1]))
    return ks, gain


def _split_terms(scenario, plan, ks, gain, payloads=None):
    '''Transfer, server and stage times of split workers `ks`, shape (len(ks), tau).'''
    ks, gain = _rows(ks, gain)
    if not np.all(plan.split[ks]):
        raise ValueError('stage schedule is only defined for split workers')
    pl = payloads or _payloads(scenario, plan)
    sys, cols = scenario.system, scenario.columns

    def col(a):
        return np.asarray(a)[ks][:, None]

    B, fE = col(plan.B), col(plan.fE)
    pk, n, fmax = col(cols['power']), col(cols['flops_per_cycle']), col(cols['f_max'])
    p0, n0 = sys.server_power, sys.noise
    out = dict(
        T_UF=tx_time(col(pl['up_f']), B, pk, gain, n0),
        T_DF=tx_time(col(pl['down_f']), B, p0, gain, n0),
        T_UB=tx_time(col(pl['up_b']), B, pk, gain, n0),
        T_DB=tx_time(col(pl['down_b']), B, p0, gain, n0),
        T_ParD=tx_time(col(pl['params']), B, p0, gain, n0),
        T_ParU=tx_time(col(pl['params']), B, pk, gain, n0),
    )
    out['T_EF'] = np.broadcast_to(server_compute_time(
        col(pl['part_b_f']), fE, sys.server_flops_per_cycle), gain.shape)
    out['T_EB'] = np.broadcast_to(server_compute_time(
        col(pl['part_b_b']), fE, sys.server_flops_per_cycle), gain.shape)
    fwd = out['T_UF'] + out['T_EF'] + out['T_DF']
    bwd = out['T_UB'] + out['T_EB'] + out['T_DB']
    part_a, part_c = col(pl['part_a']), col(pl['part_c'])
    # (stage, server round trip, local FLOPs of the overlapped part)
    stages = [(1, fwd, part_c), (2, bwd, part_c), (3, bwd, part_a),
              (4, fwd, part_a)]
    for s, comm, flops in stages:
        T = np.maximum(comm, flops / (fmax * n))
        out[f'T{s}'] = T
        out[f'f{s}'] = _cap(flops / (T * n), fmax)
    return out


def _split_totals(terms, iterations, power, capacitance):
    half = iterations / 2
    stage_T = sum(terms[f'T{s}'] for s in range(1, 5))
    stage_E = sum(capacitance * terms[f'f{s}'] ** 3 * terms[f'T{s}']
                  for s in range(1, 5))
    T_sp = half * stage_T + terms['T_ParD'] + terms['T_ParU']
    E_sp = (half * (stage_E + 2 * power * (terms['T_UF'] + terms['T_UB']))
            + power * terms['T_ParU'])
    return T_sp, E_sp


def _nonsplit_terms(scenario, plan, ks, gain, payloads=None):
    ks, gain = _rows(ks, gain)
    if np.any(plan.split[ks]):
        raise ValueError('non-split costs asked for a split worker')
    pl = payloads or _payloads(scenario, plan)
    sys, cols = scenario.system, scenario.columns

    def col(a):
        return np.asarray(a)[ks][:, None]

    B, pk = col(plan.B), col(cols['power'])
    out = dict(T_ParD=tx_time(col(pl['params']), B, sys.server_power, gain,
                              sys.noise),
               T_ParU=tx_time(col(pl['params']), B, pk, gain, sys.noise))
    compute = col(pl['local_flops']) / (col(cols['f_max'])
                                        * col(cols['flops_per_cycle']))
    out['T_local'] = compute + out['T_ParD'] + out['T_ParU']
    return out


def _nonsplit_energy(scenario, ks, terms, t_max, payloads):
    cols = scenario.columns
    ks = np.atleast_1d(ks)

    def col(a):
        return np.asarray(a)[ks][:, None]

    budget = t_max - terms['T_ParD'] - terms['T_ParU']
    if np.any(budget <= 0):
        raise Infeasible('round deadline',
                         'T_max leaves no time for local training')
    f = _cap(col(payloads['local_flops']) / (budget * col(cols['flops_per_cycle'])),
             col(cols['f_max']))
    E = (col(cols['capacitance']) * f ** 3 * budget
         + col(cols['power']) * terms['T_ParU'])
    return f, E


# Public per-worker operations

@attr.s(auto_attribs=True, frozen=True)
class Stages:
    '''Stage durations T[s] and local frequencies f[s] for s = 1..4.

    Row s-1 holds stage s; columns are rounds.
    '''
    T: np.ndarray
    f: np.ndarray


def stage_schedule(scenario: Scenario, plan: SplitPlan, k: int, gain
                   ) -> Stages:
    terms = _split_terms(scenario, plan, k, gain)
    T = np.stack([terms[f'T{s}'][0] for s in range(1, 5)])
    f = np.stack([terms[f'f{s}'][0] for s in range(1, 5)])
    if np.ndim(gain) == 0:
        T, f = T[:, 0], f[:, 0]
    return Stages(T, f)


def split_round_cost(scenario: Scenario, plan: SplitPlan, k: int, gain,
                     iterations: t.Optional[int] = None):
    '''(T_sp, E_sp) of split worker k; `iterations` overrides N_k.'''
    w = scenario.workers[k]
    N = w.iterations if iterations is None else iterations
    if N < 0 or N % 2:
        raise ValueError(f'iteration count must be even, got {N}')
    terms = _split_terms(scenario, plan, k, gain)
    T_sp, E_sp = _split_totals(terms, N, w.power, w.capacitance)
    return _one(T_sp, gain), _one(E_sp, gain)


def round_time(scenario: Scenario, plan: SplitPlan, gains) -> np.ndarray:
    '''T_max per round: the slowest worker at full local speed.'''
    return _round(scenario, plan, gains)['T_max']


def nonsplit_cost(scenario: Scenario, plan: SplitPlan, k: int, t_max, gain):
    '''(f_nsp, E_nsp): the frequency that finishes exactly at t_max.'''
    pl = _payloads(scenario, plan)
    terms = _nonsplit_terms(scenario, plan, k, gain, pl)
    f, E = _nonsplit_energy(scenario, k, terms, np.asarray(t_max, dtype=float),
                            pl)
    return _one(f, gain), _one(E, gain)


def round_energy(scenario: Scenario, plan: SplitPlan, gains, t_max=None
                 ) -> np.ndarray:
    '''E_sum per round. Uses round_time on the same gains when t_max is None.'''
    return _round(scenario, plan, gains, t_max)['E_sum']


def _round(scenario, plan, gains, t_max=None):
    gains = np.asarray(gains, dtype=float)
    if gains.ndim == 1:
        gains = gains[:, None]
    if gains.shape[0] != scenario.K:
        raise ValueError(f'gains cover {gains.shape[0]} workers, '
                         f'need {scenario.K}')
    pl = _payloads(scenario, plan)
    cols = scenario.columns
    sp_k = np.flatnonzero(plan.split)
    ns_k = np.flatnonzero(~plan.split)
    out = dict(split_k=sp_k, nonsplit_k=ns_k)
    worst = np.zeros(gains.shape[1])
    energy = np.zeros(gains.shape[1])
    if len(sp_k):
        sp = _split_terms(scenario, plan, sp_k, gains[sp_k], pl)
        T_sp, E_sp = _split_totals(sp, cols['iterations'][sp_k][:, None],
                                   cols['power'][sp_k][:, None],
                                   cols['capacitance'][sp_k][:, None])
        sp.update(T_total=T_sp, energy=E_sp)
        worst = np.maximum(worst, T_sp.max(axis=0))
        energy = energy + E_sp.sum(axis=0)
        out['split'] = sp
    if len(ns_k):
        ns = _nonsplit_terms(scenario, plan, ns_k, gains[ns_k], pl)
        worst = np.maximum(worst, ns['T_local'].max(axis=0))
    if t_max is None:
        t_max = worst
    t_max = np.broadcast_to(np.asarray(t_max, dtype=float), worst.shape)
    if len(ns_k):
        f, E = _nonsplit_energy(scenario, ns_k, ns, t_max, pl)
        ns.update(T_total=ns['T_local'], f_nsp=f, energy=E)
        energy = energy + E.sum(axis=0)
        out['nonsplit'] = ns
    out.update(T_max=t_max, E_sum=energy)
    return out


def _check_draws(scenario: Scenario, draws: ChannelDraws) -> np.ndarray:
    tau = scenario.system.rounds
    g = draws.g
    if g.shape[0] != scenario.K or g.shape[1] < tau:
        raise ValueError(f'channel draws are {g.shape}, need '
                         f'({scenario.K}, >= {tau})')
    return g[:, :tau]


def evaluate(plan: SplitPlan, scenario: Scenario, draws: ChannelDraws
             ) -> ObjectiveValue:
    '''(V1, V2): total time and total worker energy over tau rounds.'''
    plan.check(scenario)
    r = _round(scenario, plan, _check_draws(scenario, draws))
    return ObjectiveValue(float(r['T_max'].sum()), float(r['E_sum'].sum()))


# Reporting

BREAKDOWN_COLUMNS = [
    'worker', 'round', 'split', 'S', 'H',
    'T1', 'T2', 'T3', 'T4', 'f1', 'f2', 'f3', 'f4',
    'T_UF', 'T_DF', 'T_UB', 'T_DB', 'T_EF', 'T_EB', 'T_ParD', 'T_ParU',
    'T_total', 'f_nsp', 'energy', 'T_max', 'E_sum',
]


def round_breakdown(plan: SplitPlan, scenario: Scenario, draws: ChannelDraws
                    ) -> pd.DataFrame:
    '''One row per (worker, round) with every intermediate quantity.

    Columns that do not apply to a worker's branch are NaN.
    '''
    plan.check(scenario)
    r = _round(scenario, plan, _check_draws(scenario, draws))
    tau = scenario.system.rounds
    frames = []
    for key, ks in (('split', r['split_k']), ('nonsplit', r['nonsplit_k'])):
        if not len(ks):
            continue
        terms = r[key]
        df = pd.DataFrame({
            'worker': np.repeat(ks, tau) + 1,
            'round': np.tile(np.arange(1, tau + 1), len(ks)),
            'split': key == 'split',
        })
        for name, arr in terms.items():
            if name in BREAKDOWN_COLUMNS:
                df[name] = np.broadcast_to(arr, (len(ks), tau)).ravel()
        frames.append(df)
    df = pd.concat(frames, ignore_index=True)
    w = df['worker'].to_numpy() - 1
    rnd = df['round'].to_numpy() - 1
    df['S'] = plan.S[w]
    df['H'] = plan.H[w]
    df['T_max'] = r['T_max'][rnd]
    df['E_sum'] = r['E_sum'][rnd]
    df = df.reindex(columns=BREAKDOWN_COLUMNS)
    return df.sort_values(['round', 'worker'], kind='stable'
                          ).reset_index(drop=True)


def offload_stats(plan: SplitPlan, profile: LayerProfile
                  ) -> t.Dict[str, float]:
    '''Mean layers and mean FLOPs per datum handed to the server per worker.'''
    fb = profile.cum_cf + profile.cum_cb
    return dict(offloaded_layers=float(np.mean(plan.H - plan.S)),
                offloaded_flops=float(np.mean(fb[plan.H] - fb[plan.S])))
