import numpy as np
import pandas as pd
import pytest

from hfsltool.gan import predgan
from hfsltool.gan.predgan import GanConfig
from hfsltool.moea import nsga3
from hfsltool.moea.nsga3 import GeneticConfig
from hfsltool.moea.population import (STREAMS, TRACE_COLUMNS, Problem,
                                      stream)
from hfsltool.moea.selection import select


def test_streams_are_independent():
    a = stream(3, 'init').random(4)
    assert np.array_equal(a, stream(3, 'init').random(4))
    assert not np.array_equal(a, stream(3, 'genetic').random(4))
    assert not np.array_equal(a, stream(4, 'init').random(4))
    with pytest.raises(ValueError):
        stream(0, 'nope')
    assert len(set(STREAMS)) == len(STREAMS)


def test_problem(desk, desk_draws):
    problem = Problem(desk, desk_draws)
    assert problem.dim == 4 * desk.K
    pop = problem.random(np.random.default_rng(0), 5)
    assert pop.X.shape == (5, problem.dim)
    assert pop.F.shape == (5, 2)
    assert np.all(pop.F > 0)
    ref = problem.reference_point()
    assert ref == problem.reference_point()
    fl = problem.fl_point()
    assert fl.v1 < ref[0] and fl.v2 < ref[1]


def test_select_keeps_size(desk, desk_draws):
    problem = Problem(desk, desk_draws)
    rng = np.random.default_rng(1)
    P, Q = problem.random(rng, 6), problem.random(rng, 6)
    nxt = select(P, Q, rng)
    assert len(nxt) == 6
    with pytest.raises(ValueError):
        select(P, problem.random(rng, 5), rng)


def test_nsga3_minimal_run(desk, desk_draws):
    res = nsga3.run(desk, desk_draws, 1, seed=7,
                    config=GeneticConfig(pop_size=8))
    assert list(res.trace.columns) == TRACE_COLUMNS
    assert res.trace['generation'].tolist() == [0, 1]
    assert len(res.population) == 8
    assert len(res.front) >= 1
    assert res.final_hypervolume == res.trace['hypervolume'].iloc[-1]
    pop_points = {tuple(p) for p in res.population.F}
    assert all(tuple(p) in pop_points for p in res.front.points)


def test_zero_generations_rejected(desk, desk_draws):
    with pytest.raises(ValueError):
        nsga3.run(desk, desk_draws, 0)
    with pytest.raises(ValueError):
        predgan.run(desk, desk_draws, 0)


def test_predgan_is_deterministic(desk, desk_draws):
    config = GanConfig(pop_size=8, iterations=2)
    a = predgan.run(desk, desk_draws, 3, seed=5, config=config)
    b = predgan.run(desk, desk_draws, 3, seed=5, config=config)
    pd.testing.assert_frame_equal(a.trace, b.trace)
    assert np.array_equal(a.front.points, b.front.points)
    assert set(a.trace['branch'][1:]) <= {'genetic', 'gan'}


def test_genetic_branch_reproduces_nsga3(desk, desk_draws):
    ref = Problem(desk, desk_draws).reference_point()
    gan = predgan.run(desk, desk_draws, 3, seed=4, ref=ref,
                      config=GanConfig(pop_size=8, branch='genetic'))
    base = nsga3.run(desk, desk_draws, 3, seed=4, ref=ref,
                     config=GeneticConfig(pop_size=8))
    assert np.array_equal(gan.population.X, base.population.X)
    assert np.array_equal(gan.trace['hypervolume'].to_numpy(),
                          base.trace['hypervolume'].to_numpy())


def test_gan_only_branch_runs(desk, desk_draws, tmp_path):
    config = GanConfig(pop_size=8, iterations=1, branch='gan',
                       noise_mode='symmetric')
    res = predgan.run(desk, desk_draws, 2, seed=1, config=config,
                      checkpoint=tmp_path / 'gan.npz')
    assert res.trace['branch'].tolist() == ['init', 'gan', 'gan']
    gan, generation = predgan.load_checkpoint(tmp_path / 'gan.npz')
    assert generation == 2
    assert gan.dim == 4 * desk.K


def test_bad_config():
    with pytest.raises(ValueError):
        GanConfig(noise_mode='other')
    with pytest.raises(ValueError):
        GanConfig(branch='other')


@pytest.mark.parametrize('seed', [0, 1, 2])
@pytest.mark.parametrize('algo', ['nsga3', 'pred-gan'])
def test_hypervolume_never_drops(desk, desk_draws, algo, seed):
    if algo == 'nsga3':
        res = nsga3.run(desk, desk_draws, 60, seed, GeneticConfig(pop_size=20))
    else:
        res = predgan.run(desk, desk_draws, 60, seed, GanConfig(pop_size=20))
    hv = res.trace['hypervolume'].to_numpy()
    drops = np.flatnonzero(np.diff(hv) < -1e-9 * hv[1:])
    assert not len(drops), f'hypervolume drops after generations {drops}'
