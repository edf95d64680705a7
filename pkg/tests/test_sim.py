from dataclasses import replace

import numpy as np
import pytest

from rvzhomotopy.cw import H_POS
from rvzhomotopy.sim import (
    CLOSED_LOOP,
    HISTORY_COLUMNS,
    AnomalyConfig,
    ConfigError,
    ScenarioConfig,
    SimulationError,
    compare_controllers,
    fuel_penalty,
    generate_measurement,
    run,
    run_closed_loop,
    run_many,
    run_open_loop,
)

QUIET = AnomalyConfig(t_start=0.0, t_end=0.0)
BASE = ScenarioConfig()


# --- measurements -------------------------------------------------------------

def test_nominal_measurement_statistics():
    rng = np.random.default_rng(0)
    x = np.array([1.0, 2.0, 3.0, 0, 0, 0])
    res = np.array([generate_measurement(x, 10.0, QUIET, (1e-6,) * 3, rng)[0] - H_POS @ x
                    for _ in range(10_000)])
    cov = np.cov(res.T)
    np.testing.assert_allclose(np.diag(cov), 1e-6, rtol=0.2)
    assert np.abs(cov - np.diag(np.diag(cov))).max() < 0.2e-6
    assert np.abs(res.mean(axis=0)).max() < 5 * 1e-3 / np.sqrt(10_000)


def test_bias_inside_window_without_noise():
    rng = np.random.default_rng(0)
    x = np.array([1.0, 2.0, 3.0, 0, 0, 0])
    an = AnomalyConfig()
    y_in, _ = generate_measurement(x, 400.0, an, (1e-6,) * 3, rng, noise_on=False)
    y_out, _ = generate_measurement(x, 100.0, an, (1e-6,) * 3, rng, noise_on=False)
    np.testing.assert_allclose(y_in, [1.05, 2.0, 3.0], atol=1e-15)
    np.testing.assert_array_equal(y_out, [1.0, 2.0, 3.0])


def test_anomaly_only_touches_masked_axes():
    x = np.zeros(6)
    an = AnomalyConfig(outlier_prob=1.0)
    a = generate_measurement(x, 400.0, an, (1e-6,) * 3, np.random.default_rng(3))[1]
    b = generate_measurement(x, 400.0, QUIET, (1e-6,) * 3, np.random.default_rng(3))[1]
    np.testing.assert_array_equal(a[1:], b[1:])
    assert a[0] != b[0]


def test_measurement_sequence_is_seeded():
    def seq(seed):
        rng = np.random.default_rng(seed)
        return np.array([generate_measurement(np.zeros(6), float(t), AnomalyConfig(), (1e-6,) * 3, rng)[0]
                         for t in range(600)])
    np.testing.assert_array_equal(seq(5), seq(5))
    assert not np.array_equal(seq(5), seq(6))


# --- configuration ------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(controller="nope"), dict(tf=800.5), dict(t_resolve=2.5), dict(dt=0.0),
    dict(anomaly=AnomalyConfig(t_start=500.0, t_end=300.0)), dict(anomaly=AnomalyConfig(outlier_prob=2.0)),
    dict(R_nominal=(0.0, 1e-6, 1e-6)), dict(n=-1.0), dict(x0=(0.0,) * 5),
])
def test_invalid_configs_rejected(kw):
    with pytest.raises(ConfigError):
        replace(BASE, **kw).validate()


def test_wrong_runner_for_variant():
    with pytest.raises(ConfigError):
        run_closed_loop(replace(BASE, controller="open_fuel"))
    with pytest.raises(ConfigError):
        run_open_loop(replace(BASE, controller="mtf_adaptive"))


# --- open loop ------------------------------------------------------------------

@pytest.fixture(scope="module")
def open_runs():
    cfg = replace(BASE, measurement_noise=False, initial_error=False)
    return {m: run_open_loop(cfg, m) for m in ("energy", "fuel")}


def test_open_loop_negligible_miss(open_runs):
    for m in open_runs.values():
        assert m.terminal_miss <= 1e-6
        assert m.solve_attempts == 0


def test_open_loop_fuel_cheaper(open_runs):
    assert open_runs["fuel"].total_delta_v < open_runs["energy"].total_delta_v


def test_open_loop_unconvergeable_raises():
    cfg = replace(BASE, controller="open_fuel", max_iters=1)
    with pytest.raises(SimulationError):
        run(cfg)


def test_fuel_penalty_arithmetic():
    assert fuel_penalty(0.15, 0.12) == pytest.approx(25.0)
    assert fuel_penalty(0.12, 0.12) == 0.0


# --- closed loop ------------------------------------------------------------------

@pytest.fixture(scope="module")
def default_run():
    return run(BASE)


def test_history_shape(default_run):
    assert default_run.history.shape == (801, len(HISTORY_COLUMNS))
    np.testing.assert_array_equal(default_run.column("t"), np.arange(801.0))


def test_control_bound(default_run):
    assert default_run.column("u_norm").max() <= BASE.u_max + 1e-12


def test_cumulative_delta_v_monotone(default_run):
    cum = default_run.column("cum_delta_v")
    assert np.all(np.diff(cum) >= 0.0)
    assert cum[-1] + default_run.column("u_norm")[-1] == pytest.approx(default_run.total_delta_v)


def test_resolve_cadence(default_run):
    expected = (BASE.tf - BASE.t_min_rem) // BASE.t_resolve
    assert abs(default_run.solve_attempts - expected) <= 1


def test_eps_within_bounds(default_run):
    eps = default_run.column("eps")
    assert eps.min() >= BASE.sched.eps_min and eps.max() <= BASE.sched.eps_max
    assert np.all(np.abs(np.diff(eps)) <= BASE.sched.alpha_eps * (BASE.sched.eps_max - BASE.sched.eps_min) + 1e-15)


def test_summary_flat_numbers(default_run):
    s = default_run.summary()
    assert all(isinstance(v, (int, float)) for v in s.values())
    assert 0.0 <= s["solve_success_rate"] <= 1.0 and s["terminal_miss"] >= 0.0


def test_bit_identical_reruns(default_run):
    again = run(BASE)
    np.testing.assert_array_equal(again.history, default_run.history)


def test_noise_free_closed_loop_is_near_perfect():
    cfg = replace(BASE, measurement_noise=False, initial_error=False, anomaly=QUIET)
    m = run(cfg)
    assert m.terminal_miss <= 1e-5
    assert m.solve_success_rate == 1.0


@pytest.mark.parametrize("variant", CLOSED_LOOP)
def test_every_variant_respects_bound(variant):
    m = run(replace(BASE, controller=variant, seed=3))
    assert m.column("u_norm").max() <= BASE.u_max + 1e-12
    assert np.all(np.diff(m.column("cum_delta_v")) >= 0.0)
    if variant in ("kf_fixed_eps", "mtfkf_fixed_eps"):
        assert np.all(m.column("eps") == BASE.fixed_eps)
    if variant in ("kf_fixed_eps", "plain_adaptive"):
        assert np.all(m.column("rho_mtf") == 0.0)


def test_truth_process_noise_changes_truth_only():
    a = run(replace(BASE, controller="open_fuel"))
    b = run(replace(BASE, controller="open_fuel", truth_process_noise=True))
    np.testing.assert_array_equal(a.noise_log, b.noise_log)
    assert not np.array_equal(a.history[:, 1:7], b.history[:, 1:7])


def test_shared_noise_across_variants():
    comp = compare_controllers(BASE, ["open_energy", "kf_fixed_eps", "mtf_adaptive"], [1, 2])
    for s in (1, 2):
        logs = [comp.runs[(v, s)].noise_log for v in comp.variants]
        for log in logs[1:]:
            np.testing.assert_array_equal(log, logs[0])
    assert not np.array_equal(comp.runs[("kf_fixed_eps", 1)].noise_log, comp.runs[("kf_fixed_eps", 2)].noise_log)
    m = comp.runs[("kf_fixed_eps", 1)]
    assert m.fuel_penalty_pct == pytest.approx(fuel_penalty(m.total_delta_v, comp.fuel_baseline))
    rows = comp.rows()
    assert [r["variant"] for r in rows] == comp.variants
    assert "terminal_miss_mean" in rows[0] and "terminal_miss_std" in rows[0]


def test_run_many_parallel_matches_serial():
    cfgs = [replace(BASE, controller="open_fuel", seed=s) for s in (0, 1)]
    serial = run_many(cfgs, workers=1)
    parallel = run_many(cfgs, workers=2)
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.history, b.history)


def test_run_many_safe_collects_failures():
    cfgs = [replace(BASE, controller="open_fuel", max_iters=1), replace(BASE, controller="open_energy")]
    out = run_many(cfgs, safe=True)
    assert isinstance(out[0], SimulationError) and not isinstance(out[1], SimulationError)
