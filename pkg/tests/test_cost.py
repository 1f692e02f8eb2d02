import math

import numpy as np
import pytest

from conftest import small_scenario, worker
from hfsltool.cost import (BREAKDOWN_COLUMNS, Infeasible, SplitPlan,
                           evaluate, nonsplit_cost, offload_stats,
                           round_breakdown, round_energy, round_time,
                           server_compute_time, split_round_cost,
                           stage_schedule, tx_time)
from hfsltool.moea.genotype import decode
from hfsltool.scenario import (ChannelDraws, LayerProfile, Scenario,
                               SystemConfig, generate_workers, synth_profile)


# Straight-line recomputation of one round, worker by worker.

def _rate(B, p, g, n0):
    return B * math.log2(1 + p * g * g / (B * n0))


def oracle(scenario, plan, gains):
    prof = scenario.profile
    sys = scenario.system
    cf, cb, of, ob, gp = (list(map(float, a)) for a in
                          (prof.cf, prof.cb, prof.of, prof.ob, prof.g))
    V1 = V2 = 0.0
    for t in range(sys.rounds):
        totals, split_E, locals_ = [], 0.0, []
        for k, w in enumerate(scenario.workers):
            S, H = int(plan.S[k]), int(plan.H[k])
            B, g = float(plan.B[k]), float(gains[k][t])
            up = _rate(B, w.power, g, sys.noise)
            down = _rate(B, sys.server_power, g, sys.noise)
            if S == H:
                params = sum(gp)
                par = params / down + params / up
                flops = w.epochs * w.data_size * (sum(cf) + sum(cb))
                totals.append(flops / (w.f_max * w.flops_per_cycle) + par)
                locals_.append((w, flops, params / down, params / up))
                continue
            b = w.batch
            fE = float(plan.fE[k])
            nE = sys.server_flops_per_cycle
            t_uf = b * of[S - 1] / up
            t_df = b * of[H - 1] / down
            t_ub = b * ob[H] / up
            t_db = b * ob[S] / down
            t_ef = b * sum(cf[S:H]) / (fE * nE)
            t_eb = b * sum(cb[S:H]) / (fE * nE)
            params = sum(gp[:S]) + sum(gp[H:])
            t_pard, t_paru = params / down, params / up
            part_a = b * (sum(cf[:S]) + sum(cb[:S]))
            part_c = b * (sum(cf[H:]) + sum(cb[H:]))
            fwd = t_uf + t_ef + t_df
            bwd = t_ub + t_eb + t_db
            stage_T, stage_E = 0.0, 0.0
            for comm, flops in ((fwd, part_c), (bwd, part_c),
                                (bwd, part_a), (fwd, part_a)):
                T = max(comm, flops / (w.f_max * w.flops_per_cycle))
                f = min(flops / (T * w.flops_per_cycle), w.f_max)
                stage_T += T
                stage_E += w.capacitance * f ** 3 * T
            N = w.iterations
            totals.append(N / 2 * stage_T + t_pard + t_paru)
            split_E += (N / 2 * (stage_E + 2 * w.power * (t_uf + t_ub))
                        + w.power * t_paru)
        T_max = max(totals)
        E = split_E
        for w, flops, t_pard, t_paru in locals_:
            budget = T_max - t_pard - t_paru
            f = min(flops / (budget * w.flops_per_cycle), w.f_max)
            E += w.capacitance * f ** 3 * budget + w.power * t_paru
        V1 += T_max
        V2 += E
    return V1, V2


PLANS_2 = [
    dict(S=[1, 2], H=[3, 2], fE=[4e9, 0], B=[1.2e6, 0.8e6]),
    dict(S=[1, 2], H=[3, 3], fE=[1e9, 3e9], B=[1e6, 1e6]),
    dict(S=[2, 1], H=[2, 1], fE=[0, 0], B=[0.5e6, 1.5e6]),
    dict(S=[3, 1], H=[3, 2], fE=[0, 2.5e9], B=[1.9e6, 0.1e6]),
]


@pytest.mark.parametrize('plan', PLANS_2)
def test_evaluate_matches_oracle(plan, gains):
    sc = small_scenario(2)
    plan = SplitPlan(**plan)
    v1, v2 = evaluate(plan, sc, gains)
    o1, o2 = oracle(sc, plan, gains.g)
    assert v1 == pytest.approx(o1, rel=1e-9)
    assert v2 == pytest.approx(o2, rel=1e-9)


def test_evaluate_matches_oracle_three_workers():
    sc = small_scenario(3, rounds=1)
    draws = ChannelDraws([[7e-4], [1.5e-3], [3e-4]])
    plan = SplitPlan(S=[1, 1, 2], H=[1, 3, 3], fE=[0, 1e9, 3e9],
                     B=[0.6e6, 0.7e6, 0.7e6])
    v1, v2 = evaluate(plan, sc, draws)
    o1, o2 = oracle(sc, plan, draws.g)
    assert v1 == pytest.approx(o1, rel=1e-9)
    assert v2 == pytest.approx(o2, rel=1e-9)


def test_tx_time():
    assert tx_time(2e6, 1e6, 3.0, 1.0, 1e-6) == pytest.approx(1.0)
    assert tx_time(0, 1e6, 3.0, 1.0, 1e-6) == 0.0
    assert tx_time(1e6, 2e6, 3.0, 1.0, 1e-6) < tx_time(1e6, 1e6, 3.0, 1.0,
                                                        1e-6)
    with pytest.raises(ValueError):
        tx_time(1e6, 0, 3.0, 1.0, 1e-6)
    with pytest.raises(ValueError):
        tx_time(1e6, 1e6, 3.0, -1.0, 1e-6)


def test_server_compute_time():
    assert server_compute_time(1e9, 2e9, 2) == pytest.approx(0.25)
    assert server_compute_time(0, 2e9, 2) == 0.0
    with pytest.raises(ValueError):
        server_compute_time(1e9, 0, 2)


def stage_scenario():
    '''One worker, nothing to transmit; the server takes 2 s each way.'''
    prof = LayerProfile(cf=[2e9, 4e9, 5e8], cb=[2e9, 4e9, 5e8],
                        of=[0, 0, 0], ob=[0, 0, 0], g=[1e3, 1e3, 1e3])
    w = worker(data_size=2, batch=1, epochs=1, f_max=1e9)
    sys = SystemConfig(workers=1, bandwidth=1e6, server_freq=1e9,
                       server_flops_per_cycle=2, server_power=0.5,
                       noise=1e-17, carrier_ghz=2.6, rounds=1)
    plan = SplitPlan(S=[1], H=[2], fE=[1e9], B=[1e6])
    return Scenario(sys, [w], prof), plan


def test_stage_schedule_branches():
    sc, plan = stage_scenario()
    st = stage_schedule(sc, plan, 0, 1e-3)
    # part c needs 1e9 FLOPs: 1 s at full speed, so the 2 s round trip wins
    assert st.T[0] == pytest.approx(2.0)
    assert st.f[0] == pytest.approx(5e8)
    # part a needs 4e9 FLOPs: 4 s at f_max beats the 2 s round trip
    assert st.T[2] == pytest.approx(4.0)
    assert st.f[2] == 1e9
    assert st.T[0] == pytest.approx(st.T[1])
    assert st.T[2] == pytest.approx(st.T[3])


def test_stage_schedule_rejects_nonsplit_worker():
    sc, _ = stage_scenario()
    with pytest.raises(ValueError):
        stage_schedule(sc, SplitPlan(S=[1], H=[1], fE=[0], B=[1e6]), 0, 1e-3)


def test_split_cost_without_iterations():
    sc, plan = stage_scenario()
    gain = 1e-3
    T, E = split_round_cost(sc, plan, 0, gain, iterations=0)
    bits = 2e3
    t_down = tx_time(bits, 1e6, 0.5, gain, 1e-17)
    t_up = tx_time(bits, 1e6, 0.05, gain, 1e-17)
    assert T == pytest.approx(t_down + t_up)
    assert E == pytest.approx(0.05 * t_up)
    with pytest.raises(ValueError):
        split_round_cost(sc, plan, 0, gain, iterations=3)


def test_split_cost_uses_worker_iterations():
    sc, plan = stage_scenario()
    T0, E0 = split_round_cost(sc, plan, 0, 1e-3, iterations=0)
    T2, E2 = split_round_cost(sc, plan, 0, 1e-3)
    st = stage_schedule(sc, plan, 0, 1e-3)
    assert T2 - T0 == pytest.approx(st.T.sum())
    assert E2 > E0


def test_nonsplit_frequency_fills_deadline():
    prof = LayerProfile(cf=[3.125e7] * 3, cb=[3.125e7] * 3, of=[1e3] * 3,
                        ob=[1e3] * 3, g=[0, 0, 0])
    w = worker(data_size=16, batch=16, epochs=3, f_max=2e9)
    sys = SystemConfig(workers=1, bandwidth=1e6, server_freq=1e9,
                       server_flops_per_cycle=2, server_power=0.5,
                       noise=1e-17, carrier_ghz=2.6, rounds=1)
    sc = Scenario(sys, [w], prof)
    plan = SplitPlan.nonsplit(sc)
    f, E = nonsplit_cost(sc, plan, 0, 9.0, 1e-3)
    assert f == pytest.approx(1e9)
    assert E == pytest.approx(2e-28 * 1e27 * 9.0)
    with pytest.raises(Infeasible) as info:
        nonsplit_cost(sc, plan, 0, 0.0, 1e-3)
    assert info.value.constraint == 'round deadline'


def test_slowest_nonsplit_worker_runs_at_full_speed():
    sc = small_scenario(1)
    plan = SplitPlan.nonsplit(sc)
    t_max = round_time(sc, plan, [[1e-3]])
    f, _ = nonsplit_cost(sc, plan, 0, t_max[0], 1e-3)
    assert f == pytest.approx(sc.workers[0].f_max, rel=1e-12)
    assert f <= sc.workers[0].f_max


def test_round_time_is_slowest_worker(gains):
    sc = small_scenario(2)
    plan = SplitPlan(**PLANS_2[0])
    df = round_breakdown(plan, sc, gains)
    per_round = df.groupby('round')['T_total'].max().to_numpy()
    assert np.allclose(round_time(sc, plan, gains.g), per_round, rtol=1e-12)


def test_round_energy_branches(gains):
    sc = small_scenario(2)
    both = SplitPlan(**PLANS_2[1])
    E = round_energy(sc, both, gains.g)
    parts = [split_round_cost(sc, both, k, gains.g[k])[1] for k in range(2)]
    assert np.allclose(E, parts[0] + parts[1], rtol=1e-12)

    mixed = SplitPlan(**PLANS_2[0])
    t_max = round_time(sc, mixed, gains.g)
    E = round_energy(sc, mixed, gains.g)
    _, e_split = split_round_cost(sc, mixed, 0, gains.g[0])
    _, e_local = nonsplit_cost(sc, mixed, 1, t_max, gains.g[1])
    assert np.allclose(E, e_split + e_local, rtol=1e-12)


def test_constant_gains_scale_with_rounds():
    one = small_scenario(2, rounds=1)
    many = small_scenario(2, rounds=50)
    plan = SplitPlan(**PLANS_2[0])
    a = evaluate(plan, one, ChannelDraws.constant(one, 1e-3))
    b = evaluate(plan, many, ChannelDraws.constant(many, 1e-3))
    assert b.v1 == pytest.approx(50 * a.v1, rel=1e-12)
    assert b.v2 == pytest.approx(50 * a.v2, rel=1e-12)


@pytest.mark.parametrize('plan,constraint', [
    (dict(S=[1, 2], H=[3, 2], fE=[4e9, 0], B=[1.5e6, 1e6]),
     'bandwidth budget'),
    (dict(S=[1, 1], H=[3, 2], fE=[3e9, 3e9], B=[1e6, 1e6]),
     'compute budget'),
    (dict(S=[3, 1], H=[2, 1], fE=[1e9, 0], B=[1e6, 1e6]),
     'split decision'),
    (dict(S=[1, 1], H=[4, 1], fE=[1e9, 0], B=[1e6, 1e6]),
     'split decision'),
    (dict(S=[1, 1], H=[1, 1], fE=[0, 0], B=[2e6, 0]),
     'positive bandwidth'),
    (dict(S=[1, 1], H=[2, 1], fE=[0, 0], B=[1e6, 1e6]),
     'positive server frequency'),
])
def test_infeasible_plans(plan, constraint, gains):
    with pytest.raises(Infeasible) as info:
        evaluate(SplitPlan(**plan), small_scenario(2), gains)
    assert info.value.constraint == constraint


def test_nonsplit_workers_use_no_server_frequency(gains):
    sc = small_scenario(2)
    plan = SplitPlan(S=[2, 2], H=[2, 2], fE=[1e12, 1e12], B=[1e6, 1e6])
    plan.check(sc)
    assert evaluate(plan, sc, gains) == evaluate(
        SplitPlan(S=[2, 2], H=[2, 2], fE=[0, 0], B=[1e6, 1e6]), sc, gains)


def test_draws_must_cover_every_worker(gains):
    with pytest.raises(ValueError):
        evaluate(SplitPlan(**PLANS_2[0]), small_scenario(3), gains)


def test_breakdown_layout(gains):
    sc = small_scenario(2)
    df = round_breakdown(SplitPlan(**PLANS_2[0]), sc, gains)
    assert list(df.columns) == BREAKDOWN_COLUMNS
    assert len(df) == 2 * sc.system.rounds
    local = df[~df['split']]
    assert local['T1'].isna().all()
    assert local['f_nsp'].notna().all()
    assert df[df['split']]['f_nsp'].isna().all()
    v1, v2 = evaluate(SplitPlan(**PLANS_2[0]), sc, gains)
    assert df.groupby('round')['T_max'].first().sum() == pytest.approx(v1)
    assert df['energy'].sum() == pytest.approx(v2)


def test_frequencies_stay_under_cap():
    rng = np.random.default_rng(0)
    for seed in range(5):
        workers = generate_workers(4, seed=seed)
        sys = SystemConfig(workers=4, bandwidth=3e6, server_freq=6e9,
                           server_flops_per_cycle=2, server_power=0.5,
                           noise=1e-17, carrier_ghz=2.6, rounds=3)
        sc = Scenario(sys, workers, synth_profile('mobilenet-small', seed))
        draws = ChannelDraws(rng.rayleigh(1e-3, size=(4, 3)) + 1e-9)
        f_max = np.array([w.f_max for w in workers])
        for x in rng.random((100, 16)):
            df = round_breakdown(decode(x, sc), sc, draws)
            cap = f_max[df['worker'].to_numpy() - 1]
            for col in ('f1', 'f2', 'f3', 'f4', 'f_nsp'):
                vals = df[col].to_numpy()
                ok = ~np.isnan(vals)
                assert np.all(vals[ok] > 0)
                assert np.all(vals[ok] <= cap[ok])


def test_offload_stats():
    prof = synth_profile(dict(kind='uniform', n_layers=4, cf=1e6, cb=2e6,
                              of=1, ob=1, g=1))
    plan = SplitPlan(S=[1, 2], H=[3, 2], fE=[1e9, 0], B=[1, 1])
    stats = offload_stats(plan, prof)
    assert stats['offloaded_layers'] == pytest.approx(1.0)
    assert stats['offloaded_flops'] == pytest.approx(3e6)


def test_nonsplit_plan():
    sc = small_scenario(3)
    plan = SplitPlan.nonsplit(sc)
    assert not plan.split.any()
    assert np.all(plan.indicator == 1)
    assert np.allclose(plan.B, sc.system.bandwidth / 3)
    assert list(plan.flat())[:4] == ['S_1', 'H_1', 'fE_1', 'B_1']
