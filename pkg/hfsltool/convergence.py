'''A laboratory for local SGD with delayed gradients on quadratic tasks.

Each worker k owns F_k(w) = 1/2 (w - c_k)^T A_k (w - c_k) and a weight
p_k = D_k / D. In every round the workers start from the global model W,
take N_k full-gradient steps and the server averages the results. Workers
that split their model pipeline two minibatches, so their step uses the
gradient from two iterations back.

Everything here is deterministic, so the expected values in the bounds are
exact and the checks either hold or fail.

>>> task = SyntheticTask(A=[[[1.0]]], c=[[0.0]], weights=[1.0])
>>> w = np.array([1.0])
>>> w1 = local_step(task, 0, w, w, 0.1, delayed=True)
>>> w2 = local_step(task, 0, w1, w, 0.1, delayed=True)
>>> round(float(w1[0]), 10), round(float(w2[0]), 10)
(0.9, 0.8)
>>> rounds_to_epsilon(0.9, 0.1, 10)
3
'''
import logging
import math
import typing as t

import attr
import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

# Inflation applied to the largest gradient norm seen on a trajectory.
G_MARGIN = 1.05


class PreconditionError(ValueError):
    '''The requested experiment is outside the regime the bounds cover.'''


class PropertyViolation(AssertionError):
    '''A bound failed on a recorded trajectory.

    `where` is a dict naming the round and, for per-iteration checks, the
    worker and iteration.
    '''

    def __init__(self, message: str, **where):
        super().__init__(message)
        self.where = where


def _arr(v):
    return np.asarray(v, dtype=float)


@attr.s(frozen=True, eq=False)
class SyntheticTask:
    A: np.ndarray = attr.ib(converter=_arr)
    c: np.ndarray = attr.ib(converter=_arr)
    weights: np.ndarray = attr.ib(converter=_arr)

    def __attrs_post_init__(self):
        K, d = self.c.shape
        if self.A.shape != (K, d, d) or self.weights.shape != (K,):
            raise ValueError('A must be K x d x d and weights length K')
        if np.any(self.weights <= 0):
            raise ValueError('worker weights must be positive')
        if np.any(np.linalg.eigvalsh(self.A) <= 0):
            raise ValueError('every A_k must be positive definite')

    @property
    def K(self) -> int:
        return len(self.c)

    @property
    def dim(self) -> int:
        return self.c.shape[1]

    @property
    def p(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    @property
    def hessian(self) -> np.ndarray:
        return np.einsum('k,kij->ij', self.p, self.A)

    @property
    def L(self) -> float:
        '''Smoothness constant shared by every F_k.'''
        return float(np.linalg.eigvalsh(self.A)[:, -1].max())

    @property
    def mu(self) -> float:
        '''Strong convexity constant of the global loss.'''
        return float(np.linalg.eigvalsh(self.hessian)[0])

    @property
    def w_star(self) -> np.ndarray:
        rhs = np.einsum('k,kij,kj->i', self.p, self.A, self.c)
        return np.linalg.solve(self.hessian, rhs)

    def grad(self, k: int, w: np.ndarray) -> np.ndarray:
        return self.A[k] @ (w - self.c[k])

    def loss(self, w: np.ndarray) -> float:
        diff = w[None, :] - self.c
        per = 0.5 * np.einsum('ki,kij,kj->k', diff, self.A, diff)
        return float(self.p @ per)

    def gap(self, w: np.ndarray) -> float:
        '''F(w) - F(w*), never negative.'''
        d = np.asarray(w, dtype=float) - self.w_star
        return max(0.5 * float(d @ self.hessian @ d), 0.0)


PRESETS = {
    'scalar': dict(workers=4, dim=1, spectrum=(0.05, 1.0), heterogeneity=1e-4),
    'quadratic': dict(workers=4, dim=4, spectrum=(0.05, 1.0),
                      heterogeneity=1e-4),
}


def _rotation(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def make_task(workers: int = 4, dim: int = 2, seed: int = 0,
              spectrum: t.Tuple[float, float] = (0.05, 1.0),
              heterogeneity: float = 1e-4,
              data_sizes: t.Optional[t.Sequence[int]] = None
              ) -> SyntheticTask:
    '''Random quadratic task whose Hessians have eigenvalues in `spectrum`.

    Every A_k has both ends of the spectrum, so L equals the upper end.
    Worker optima scatter around a shared point by `heterogeneity`.
    '''
    lo, hi = spectrum
    if not 0 < lo <= hi:
        raise ValueError('spectrum must satisfy 0 < lo <= hi')
    rng = np.random.default_rng(seed)
    if dim == 1:
        eig = rng.uniform(lo, hi, size=(workers, 1))
        eig[0, 0] = hi
        A = eig[:, :, None]
    else:
        # one eigenbasis for every worker, so L and mu are the spectrum ends
        Q = _rotation(rng, dim)
        A = Q @ np.diag(np.linspace(lo, hi, dim)) @ Q.T
        A = np.repeat(0.5 * (A + A.T)[None], workers, axis=0)
    center = rng.standard_normal(dim)
    c = center + heterogeneity * rng.standard_normal((workers, dim))
    if data_sizes is None:
        data_sizes = rng.choice([2400, 3200, 4000], size=workers)
    return SyntheticTask(A, c, np.asarray(data_sizes, dtype=float))


def preset_task(name: str, seed: int = 0, **overrides) -> SyntheticTask:
    if name not in PRESETS:
        raise PreconditionError(f'unknown task preset {name!r}')
    return make_task(seed=seed, **dict(PRESETS[name], **overrides))


# Training

def local_step(task: SyntheticTask, k: int, w_prev: np.ndarray,
               w_prev2: np.ndarray, eta: float, delayed: bool = False
               ) -> np.ndarray:
    '''w^n from w^{n-1} (and w^{n-2} when the gradient is delayed).'''
    at = w_prev2 if delayed else w_prev
    return w_prev - eta * task.grad(k, at)


def aggregate(finals: np.ndarray, weights: np.ndarray) -> np.ndarray:
    '''Weighted average of the workers' final parameters.'''
    weights = np.asarray(weights, dtype=float)
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f'aggregation weights sum to {weights.sum()!r}')
    return weights @ np.asarray(finals, dtype=float)


@attr.s(auto_attribs=True, eq=False)
class LabRun:
    task: SyntheticTask
    eta: float
    iterations: np.ndarray
    delayed: np.ndarray
    W: np.ndarray  # (rounds + 1, dim)
    gaps: np.ndarray  # (rounds + 1,)
    # trajectories[t][k]: (N_k + 1, dim) local iterates of round t + 1
    trajectories: t.List[t.List[np.ndarray]]
    grad_max: float

    @property
    def rounds(self) -> int:
        return len(self.gaps) - 1

    @property
    def G(self) -> float:
        return G_MARGIN * self.grad_max

    @property
    def n_max(self) -> int:
        return int(self.iterations.max())

    @property
    def indicator(self) -> np.ndarray:
        '''I_k: 1 for workers on plain (non-delayed) updates.'''
        return (~self.delayed).astype(float)


def _per_worker(value, K, dtype):
    arr = np.asarray(value, dtype=dtype)
    return np.full(K, arr, dtype=dtype) if arr.ndim == 0 else arr


def run_lab(task: SyntheticTask, eta: float, iterations, delayed, rounds: int,
            w0: t.Optional[np.ndarray] = None) -> LabRun:
    '''Train for `rounds` rounds and record every local iterate.

    `iterations` (N_k) and `delayed` (True for split workers) take a scalar
    for all workers or one value per worker.
    '''
    K = task.K
    N = _per_worker(iterations, K, int)
    late = _per_worker(delayed, K, bool)
    if rounds < 0 or np.any(N < 0):
        raise PreconditionError('rounds and iterations must be nonnegative')
    W = np.zeros(task.dim) if w0 is None else np.asarray(w0, dtype=float)
    Ws, gaps, trajs = [W], [task.gap(W)], []
    grad_max = 0.0
    for _ in range(rounds):
        round_traj = []
        for k in range(K):
            xs = [W]
            prev2 = W
            for n in range(1, N[k] + 1):
                at = prev2 if late[k] else xs[-1]
                g = task.grad(k, at)
                grad_max = max(grad_max, float(np.linalg.norm(g)))
                prev2 = xs[-1]
                xs.append(xs[-1] - eta * g)
            round_traj.append(np.array(xs))
        W = aggregate([x[-1] for x in round_traj], task.p)
        Ws.append(W)
        gaps.append(task.gap(W))
        trajs.append(round_traj)
    return LabRun(task, eta, N, late, np.array(Ws), np.array(gaps), trajs,
                  grad_max)


# Bounds

def check_eta(task: SyntheticTask, eta: float):
    if not 0 < eta <= 1.0 / task.L * (1 + 1e-12):
        raise PreconditionError(
            f'eta={eta:g} exceeds 1/L={1.0 / task.L:g}; the bounds only '
            'cover 0 < eta <= 1/L')


def check_lemma1(run: LabRun, strict: bool = True) -> pd.DataFrame:
    '''Distances of every worker to the running average, against the bounds.

    With w_bar^n the weighted average of the workers' n-th iterates (a worker
    past N_k stays at its last iterate):

        |w_bar^n - w_k^n|^2       <= 4 eta^2 n^2 G^2
        |w_bar^n - w_k^{n-1}|^2   <= 2 eta^2 (n^2 + (n-1)^2) G^2

    One row per (round, worker, n). With `strict`, the first violation
    raises PropertyViolation.
    '''
    eta, G, p = run.eta, run.G, run.task.p
    n_max = run.n_max
    n = np.arange(n_max + 1)
    rhs1 = 4 * eta ** 2 * n ** 2 * G ** 2
    rhs2 = 2 * eta ** 2 * (n ** 2 + (n - 1) ** 2) * G ** 2
    frames = []
    for t_idx, traj in enumerate(run.trajectories):
        pos = np.stack([x[np.minimum(n, len(x) - 1)] for x in traj])
        prev = np.stack([x[np.clip(n - 1, 0, len(x) - 1)] for x in traj])
        wbar = np.einsum('k,knd->nd', p, pos)
        lhs1 = np.sum((wbar[None] - pos) ** 2, axis=2)
        lhs2 = np.sum((wbar[None] - prev) ** 2, axis=2)
        K = len(traj)
        frames.append(pd.DataFrame({
            'round': t_idx + 1,
            'worker': np.repeat(np.arange(1, K + 1), n_max + 1),
            'n': np.tile(n, K),
            'lhs1': lhs1.ravel(), 'rhs1': np.tile(rhs1, K),
            'lhs2': lhs2.ravel(), 'rhs2': np.tile(rhs2, K),
        }))
    cols = ['round', 'worker', 'n', 'lhs1', 'rhs1', 'lhs2', 'rhs2', 'slack']
    if not frames:
        return pd.DataFrame(columns=cols)
    df = pd.concat(frames, ignore_index=True)
    tol = 1e-12 * np.maximum(df['rhs1'], df['rhs2']) + 1e-20
    df['slack'] = np.minimum(df['rhs1'] - df['lhs1'], df['rhs2'] - df['lhs2'])
    if strict:
        bad = df[df['slack'] < -tol]
        if len(bad):
            row = bad.iloc[0]
            raise PropertyViolation(
                f'lemma bound fails at round {int(row["round"])}, '
                f'worker {int(row["worker"])}, n={int(row["n"])}',
                round=int(row['round']), worker=int(row['worker']),
                n=int(row['n']))
    return df[cols]


def alpha(n, eta: float, G: float, L: float, p: np.ndarray,
          indicator: np.ndarray) -> float:
    '''Per-iteration error term of the averaged iterate.'''
    I = np.asarray(indicator, dtype=float)
    inner = 2 * I * (n - 1) ** 2 + (1 - I) * ((n - 1) ** 2 + (n - 2) ** 2)
    return float(eta ** 3 * G ** 2 * L ** 2 * np.dot(p, inner))


def _round_alpha(run: LabRun, rho: float) -> float:
    N = run.n_max
    return sum(rho ** n * alpha(N - n, run.eta, run.G, run.task.L, run.task.p,
                                run.indicator) for n in range(N))


def alpha_hat(run: LabRun, t: t.Optional[int] = None) -> float:
    '''Accumulated bias after t rounds; t=None gives the infinite horizon.'''
    rho = 1 - run.task.mu * run.eta
    per_round = _round_alpha(run, rho)
    q = rho ** run.n_max
    if t is None:
        return per_round / (1 - q)
    return per_round * sum(q ** s for s in range(t))


def theorem1_bound(run: LabRun) -> np.ndarray:
    '''Upper bound on F(W_t) - F(w*) for t = 0..rounds.'''
    check_eta(run.task, run.eta)
    rho = 1 - run.task.mu * run.eta
    ts = np.arange(run.rounds + 1)
    return np.array([rho ** (run.n_max * t) * run.gaps[0] + alpha_hat(run, t)
                     for t in ts])


def check_theorem1(run: LabRun, strict: bool = True) -> pd.DataFrame:
    '''Measured gap against the bound, one row per round t >= 1.'''
    bound = theorem1_bound(run)
    df = pd.DataFrame({'round': np.arange(1, run.rounds + 1),
                       'gap': run.gaps[1:], 'bound': bound[1:]})
    df['margin'] = df['bound'] - df['gap']
    if strict:
        bad = df[df['margin'] < -1e-12 * df['bound']]
        if len(bad):
            t_bad = int(bad['round'].iloc[0])
            raise PropertyViolation(f'gap exceeds the bound at round {t_bad}',
                                    round=t_bad)
    return df


def rounds_to_epsilon(rho: float, phi: float, n_max: int) -> int:
    '''Fewest rounds with rho^(n_max tau) <= phi.'''
    if not 0 < rho < 1:
        raise PreconditionError('rho must lie in (0, 1)')
    if phi <= 0:
        raise PreconditionError('target below bias floor')
    if phi >= 1:
        return 0
    return math.ceil(math.log(phi) / math.log(rho) / n_max)


def rounds_for_target(epsilon: float, run: LabRun) -> int:
    '''Rounds needed to bring the bound below epsilon, from run's start.'''
    check_eta(run.task, run.eta)
    floor = alpha_hat(run)
    if epsilon <= floor:
        raise PreconditionError(f'target below bias floor ({floor:g})')
    rho = 1 - run.task.mu * run.eta
    return rounds_to_epsilon(rho, (epsilon - floor) / run.gaps[0], run.n_max)


# Rates

def decay_rate(gaps: np.ndarray, floor_factor: float = 100.0) -> float:
    '''Least-squares slope of ln(gap) per round.

    Round 0 is skipped and the fit stops at the last round whose gap is
    still `floor_factor` times the final one, so a plateau does not bend
    the slope.
    '''
    gaps = np.asarray(gaps, dtype=float)
    ok = np.flatnonzero(gaps >= floor_factor * gaps[-1])
    stop = ok[-1] if len(ok) else len(gaps) - 1
    ts = np.arange(1, stop + 1)
    ts = ts[gaps[ts] > 0]
    if len(ts) < 2:
        raise PreconditionError('not enough rounds above the floor to fit')
    slope, _ = np.polyfit(ts, np.log(gaps[ts]), 1)
    return float(slope)


@attr.s(auto_attribs=True, frozen=True)
class RateMatch:
    plain: float
    delayed: float

    @property
    def relative_gap(self) -> float:
        return abs(self.delayed - self.plain) / abs(self.plain)


def rate_match(task: SyntheticTask, eta: float, iterations: int, rounds: int,
               w0: t.Optional[np.ndarray] = None) -> RateMatch:
    '''Fitted decay rates of an all-plain and an all-delayed run.'''
    check_eta(task, eta)
    plain = run_lab(task, eta, iterations, False, rounds, w0)
    late = run_lab(task, eta, iterations, True, rounds, w0)
    return RateMatch(decay_rate(plain.gaps), decay_rate(late.gaps))


def report(run: LabRun) -> pd.DataFrame:
    '''Per-round table: gap, bound, worst lemma slack.'''
    thm = check_theorem1(run, strict=False)
    lem = check_lemma1(run, strict=False)
    worst = lem.groupby('round')['slack'].min() if len(lem) else pd.Series(
        dtype=float)
    thm['lemma_slack'] = thm['round'].map(worst)
    return thm[['round', 'gap', 'bound', 'lemma_slack']]
