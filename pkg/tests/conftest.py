import pytest

from hfsltool.scenario import (ChannelDraws, LayerProfile, Scenario,
                               SystemConfig, WorkerConfig, builtin,
                               load_scenario, sample_channels)


def worker(**changes):
    base = dict(data_size=32, batch=16, epochs=1, f_max=1e9,
                flops_per_cycle=1, capacitance=2e-28, power=0.05,
                distance=10.0)
    base.update(changes)
    return WorkerConfig(**base)


def system(workers, **changes):
    base = dict(workers=workers, bandwidth=2e6, server_freq=4e9,
                server_flops_per_cycle=2, server_power=0.5, noise=1e-17,
                carrier_ghz=2.6, rounds=2)
    base.update(changes)
    return SystemConfig(**base)


def profile():
    return LayerProfile(cf=[2e6, 5e6, 3e6, 1e6], cb=[4e6, 9e6, 6e6, 2e6],
                        of=[8e4, 4e4, 2e4, 320], ob=[3e4, 8e4, 4e4, 2e4],
                        g=[1e5, 4e5, 2e6, 6e5])


def small_scenario(K=2, **sys_changes):
    workers = [worker(f_max=(0.8 + 0.2 * k) * 1e9, distance=5.0 + 7 * k,
                      power=0.05 + 0.01 * k)
               for k in range(K)]
    return Scenario(system(K, **sys_changes), workers, profile())


@pytest.fixture
def small():
    return small_scenario


@pytest.fixture(scope='session')
def desk():
    return load_scenario(builtin('desk'))


@pytest.fixture(scope='session')
def desk_draws(desk):
    return sample_channels(desk)


@pytest.fixture
def gains():
    return ChannelDraws([[1e-3, 2e-3], [5e-4, 8e-4]])
