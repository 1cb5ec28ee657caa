from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pimsim.archconfig import node_totals
from pimsim.energy import EnergyError, append_energy_csv, run_energy
from pimsim.mapping import plan
from pimsim.pipeline import SimStats, simulate
from pimsim.workload import build_vgg


def make_stats(config, activity, cycles=1000, images=1, seconds=None):
    seconds = seconds or config.seconds_per_logical_cycle
    fps = images / (cycles * seconds)
    return SimStats(
        network="x", noc="ideal", scenario=1, images_completed=images, cycles_total=cycles,
        issue_interval=cycles, steady_interval=cycles, image_latency=cycles, stretch=1.0,
        seconds_per_logical_cycle=seconds, network_ops=10**9, fps=fps, tops=fps * 1e9 / 1e12,
        activity=activity,
    )


def test_zero_activity(config):
    rep = run_energy(make_stats(config, {}), config)
    assert rep.total_energy == 0 and rep.avg_power == 0


def test_everything_on_is_peak_power(config):
    cycles = 500
    act = {c.name: config.instances(c) * cycles for c in config.components}
    rep = run_energy(make_stats(config, act, cycles), config)
    assert rep.avg_power == pytest.approx(node_totals(config).peak_power, rel=1e-12)
    assert rep.avg_power == pytest.approx(108.26944, rel=1e-12)


def test_unknown_counter(config):
    with pytest.raises(EnergyError):
        run_energy(make_stats(config, {"flux_capacitor": 3}), config)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=2, max_size=2), st.lists(st.integers(0, 10**6), min_size=2, max_size=2))
def test_additive_over_windows(config, a, b):
    names = [c.name for c in config.components[:2]]
    ea = run_energy(make_stats(config, dict(zip(names, a))), config).total_energy
    eb = run_energy(make_stats(config, dict(zip(names, b))), config).total_energy
    eab = run_energy(make_stats(config, {n: x + y for n, x, y in zip(names, a, b)}), config).total_energy
    assert eab == pytest.approx(ea + eb, rel=1e-12, abs=1e-18)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10))
def test_time_rescaling(config, k):
    # energy and run time both scale with the cycle time, so average power does
    # not move; ops per second scale inversely, so TOPS/W scales by 1/k
    act = {c.name: 7 * config.instances(c) for c in config.components}
    s = config.seconds_per_logical_cycle
    a = run_energy(make_stats(config, act, seconds=s), config)
    b = run_energy(make_stats(config, act, seconds=s * k), config)
    assert b.avg_power == pytest.approx(a.avg_power, rel=1e-9)
    assert b.tops_per_watt == pytest.approx(a.tops_per_watt / k, rel=1e-9)


def test_real_run_below_peak(config):
    net = build_vgg("E")
    stats = simulate(net, plan(net, config, True), 4, "smart", 2, config)
    rep = run_energy(stats, config)
    assert 0 < rep.avg_power <= node_totals(config).peak_power
    assert rep.tops_per_watt == pytest.approx(stats.tops / rep.avg_power)


def test_leakage_adds_energy(config):
    act = {c.name: config.instances(c) for c in config.components}
    leaky = replace(config, timing=replace(config.timing, leakage_fraction=0.1))
    assert run_energy(make_stats(leaky, act), leaky).total_energy > run_energy(make_stats(config, act), config).total_energy


def test_csv_append(config, tmp_path):
    stats = make_stats(config, {})
    rep = run_energy(stats, config)
    path = tmp_path / "energy.csv"
    append_energy_csv(path, stats, rep)
    append_energy_csv(path, stats, rep)
    lines = path.read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("net,noc,scenario")
