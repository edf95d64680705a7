"""Closed-loop rendezvous simulation and controller comparison.

One run is a strictly sequential loop at the filter step: measure, filter,
update the scheduler, re-solve the guidance problem on its cadence, apply
the held control, propagate the truth.  Truth and filter share the exact
discretization, so model mismatch never enters.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import estimation as est
from .cw import H_POS, CwModel, costate_transition, discretize
from .scheduler import SchedulerConfig, SchedulerState, scheduler_step
from .solver import (
    RECEDING_TOL,
    OcpProblem,
    SolverFailure,
    continuation_solve,
    energy_optimal_solution,
)

logger = logging.getLogger(__name__)

NOMINAL_X0 = (0.03031809, 0.0, 31.16639, -0.02963377, 0.04570523, 0.0)

CLOSED_LOOP = ("kf_fixed_eps", "mtfkf_fixed_eps", "plain_adaptive", "mtf_adaptive")
OPEN_LOOP = ("open_energy", "open_fuel")
VARIANTS = OPEN_LOOP + CLOSED_LOOP

HISTORY_COLUMNS = (
    "t",
    "x", "y", "z", "vx", "vy", "vz",
    "x_hat", "y_hat", "z_hat", "vx_hat", "vy_hat", "vz_hat",
    "ux", "uy", "uz", "u_norm",
    "nu_norm", "nis", "rho_mtf", "s_comp", "s_bar", "eps",
    "pos_err", "est_err", "cum_delta_v",
)


class ConfigError(ValueError):
    """Inconsistent scenario configuration."""


class SimulationError(RuntimeError):
    """A run aborted on a numerical failure."""

    def __init__(self, stage: str, t: float, detail: str):
        super().__init__(f"{stage} failed at t={t:g} s: {detail}")
        self.stage = stage
        self.t = t


@dataclass(frozen=True)
class AnomalyConfig:
    """Measurement degradation window.

    Inside ``[t_start, t_end]`` the masked axes get a constant bias, their
    noise standard deviation is multiplied by ``noise_scale``, and with
    probability ``outlier_prob`` the axis noise is replaced by a spike of
    ``outlier_scale`` nominal standard deviations.
    """

    t_start: float = 300.0
    t_end: float = 500.0
    bias: tuple = (0.05, 0.0, 0.0)
    noise_scale: float = 10.0
    outlier_prob: float = 0.2
    outlier_scale: float = 20.0
    axes: tuple = (True, False, False)

    def active(self, t: float) -> bool:
        return self.t_start <= t <= self.t_end and self.t_end > self.t_start


@dataclass(frozen=True)
class ScenarioConfig:
    x0: tuple = NOMINAL_X0
    x_target: tuple = (0.0,) * 6
    tf: float = 800.0
    dt: float = 1.0
    u_max: float = 8e-4
    n: float = 1.06e-3
    R_nominal: tuple = (1e-6, 1e-6, 1e-6)
    Q: tuple = (1e-12, 1e-12, 1e-12, 1e-14, 1e-14, 1e-14)
    P0: tuple = (1e-6, 1e-6, 1e-6, 1e-10, 1e-10, 1e-10)
    sched: SchedulerConfig = field(default_factory=SchedulerConfig)
    t_resolve: float = 10.0
    t_min_rem: float = 20.0
    anomaly: AnomalyConfig = field(default_factory=AnomalyConfig)
    controller: str = "mtf_adaptive"
    fixed_eps: float = 1e-3
    eps_floor: float = 1e-3
    seed: int = 0
    measurement_noise: bool = True
    initial_error: bool = True
    truth_process_noise: bool = False
    max_iters: int = 50

    def validate(self):
        if self.controller not in VARIANTS:
            raise ConfigError(f"unknown controller {self.controller!r}; choose from {VARIANTS}")
        if not self.dt > 0.0 or not self.tf > 0.0:
            raise ConfigError("tf and dt must be positive")
        for name in ("tf", "t_resolve"):
            ratio = getattr(self, name) / self.dt
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigError(f"{name} must be a positive multiple of dt")
        if self.t_min_rem < 0.0:
            raise ConfigError("t_min_rem must be non-negative")
        if len(self.x0) != 6 or len(self.x_target) != 6:
            raise ConfigError("x0 and x_target must have 6 components")
        if len(self.R_nominal) != 3 or len(self.Q) != 6 or len(self.P0) != 6:
            raise ConfigError("R_nominal, Q, P0 take 3, 6 and 6 diagonal entries")
        if min(self.R_nominal) <= 0.0 or min(self.Q) < 0.0 or min(self.P0) < 0.0:
            raise ConfigError("noise covariances must be positive (R) or non-negative (Q, P0)")
        a = self.anomaly
        if not (0.0 <= a.t_start <= a.t_end <= self.tf):
            raise ConfigError("anomaly window must satisfy 0 <= t_start <= t_end <= tf")
        if a.noise_scale < 0.0 or a.outlier_scale < 0.0 or not 0.0 <= a.outlier_prob <= 1.0:
            raise ConfigError("anomaly scales must be >= 0 and outlier_prob in [0, 1]")
        if len(a.bias) != 3 or len(a.axes) != 3:
            raise ConfigError("anomaly bias and axes take 3 entries")
        if self.fixed_eps < 0.0 or self.eps_floor < 0.0:
            raise ConfigError("fixed_eps and eps_floor must be non-negative")
        try:
            CwModel(self.n, self.u_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    @property
    def model(self) -> CwModel:
        return CwModel(self.n, self.u_max)

    @property
    def noise(self) -> est.NoiseConfig:
        return est.NoiseConfig(np.diag(self.R_nominal), np.diag(self.Q))

    @property
    def n_steps(self) -> int:
        return int(round(self.tf / self.dt))


@dataclass
class RunMetrics:
    controller: str
    seed: int
    terminal_miss: float
    terminal_vel_err: float
    total_delta_v: float
    solve_attempts: int
    solve_failures: int
    solve_time_mean: float
    solve_time_max: float
    history: np.ndarray
    noise_log: np.ndarray
    fuel_penalty_pct: float | None = None

    @property
    def solve_success_rate(self) -> float:
        if self.solve_attempts == 0:
            return 1.0
        return 1.0 - self.solve_failures / self.solve_attempts

    def column(self, name: str) -> np.ndarray:
        return self.history[:, HISTORY_COLUMNS.index(name)]

    def summary(self) -> dict:
        out = {
            "terminal_miss": self.terminal_miss,
            "terminal_vel_err": self.terminal_vel_err,
            "total_delta_v": self.total_delta_v,
            "delta_v": self.total_delta_v,
            "solve_attempts": self.solve_attempts,
            "solve_failures": self.solve_failures,
            "solve_success_rate": self.solve_success_rate,
            "solve_time_mean": self.solve_time_mean,
            "solve_time_max": self.solve_time_max,
            "seed": self.seed,
        }
        if self.fuel_penalty_pct is not None:
            out["fuel_penalty_pct"] = self.fuel_penalty_pct
        return out


def generate_measurement(x_true, t: float, anomaly: AnomalyConfig, R_nominal, rng,
                         noise_on: bool = True):
    """Position measurement with Gaussian noise and optional window anomaly.

    The same number of variates is drawn every call, so the noise sequence
    depends only on the seed and the step index.  Returns ``(y, v)`` with
    ``v`` the additive error actually applied.
    """
    std = np.sqrt(np.diag(np.asarray(R_nominal, dtype=float))) if np.ndim(R_nominal) == 2 \
        else np.sqrt(np.asarray(R_nominal, dtype=float))
    z = rng.standard_normal(3)
    pick = rng.random(3)
    spike = rng.standard_normal(3)
    v = std * z if noise_on else np.zeros(3)
    if anomaly.active(t):
        mask = np.asarray(anomaly.axes, dtype=bool)
        scaled = v * anomaly.noise_scale
        if noise_on:
            outlier = pick < anomaly.outlier_prob
            scaled = np.where(outlier, anomaly.outlier_scale * std * spike, scaled)
        v = np.where(mask, scaled + np.asarray(anomaly.bias, dtype=float), v)
    return H_POS @ np.asarray(x_true, dtype=float) + v, v


class _Guidance:
    """Receding-horizon indirect guidance with a held fallback profile."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.model = cfg.model
        self.psi = costate_transition(self.model, cfg.dt)
        self.profile = None  # rows indexed from profile_start
        self.profile_start = 0
        self.lam = None
        self.lam_step = 0
        self.attempts = 0
        self.failures = 0
        self.times = []

    def resolve(self, k: int, x_hat, eps: float):
        cfg = self.cfg
        remaining = cfg.n_steps - k
        problem = OcpProblem(np.array(x_hat), np.array(cfg.x_target), remaining * cfg.dt,
                             self.model, eps=max(eps, cfg.eps_floor), dt=cfg.dt)
        warm = None
        if self.lam is not None:
            warm = np.linalg.matrix_power(self.psi, k - self.lam_step) @ self.lam
        self.attempts += 1
        try:
            sol = continuation_solve(problem, warm_start=warm, tol=RECEDING_TOL,
                                     max_iters=cfg.max_iters)
        except SolverFailure:
            sol = None
        if sol is not None:
            self.times.append(sol.solve_time)
        if sol is None or not sol.converged:
            self.failures += 1
            return False
        self.profile = sol.control_profile
        self.profile_start = k
        self.lam = sol.lambda0
        self.lam_step = k
        return True

    def control(self, k: int) -> np.ndarray:
        if self.profile is None:
            return np.zeros(3)
        i = k - self.profile_start
        if 0 <= i < len(self.profile):
            return self.profile[i]
        return np.zeros(3)


def _open_loop_profile(cfg: ScenarioConfig, mode: str) -> np.ndarray:
    x0 = np.array(cfg.x0)
    xt = np.array(cfg.x_target)
    if mode == "energy":
        return energy_optimal_solution(x0, xt, cfg.tf, cfg.model, dt=cfg.dt, hold=True).control_profile
    if mode == "fuel":
        problem = OcpProblem(x0, xt, cfg.tf, cfg.model, eps=max(cfg.fixed_eps, cfg.eps_floor), dt=cfg.dt)
        sol = continuation_solve(problem, max_iters=cfg.max_iters)
        if not sol.converged:
            raise SimulationError("open-loop solve", 0.0,
                                  f"fuel solve did not converge (residual {sol.residual_norm:.3e})")
        return sol.control_profile
    raise ValueError(f"unknown open-loop mode {mode!r}")


def _simulate(cfg: ScenarioConfig, open_profile=None) -> RunMetrics:
    cfg.validate()
    dm = discretize(cfg.model, cfg.dt)
    noise = cfg.noise
    N = cfg.n_steps
    resolve_every = int(round(cfg.t_resolve / cfg.dt))
    variant = cfg.controller
    mtf_on = variant in ("mtfkf_fixed_eps", "mtf_adaptive")
    adaptive = variant in ("plain_adaptive", "mtf_adaptive")

    seq = np.random.SeedSequence(cfg.seed)
    meas_rng, init_rng, proc_rng = (np.random.default_rng(s) for s in seq.spawn(3))

    x_true = np.array(cfg.x0, dtype=float)
    P0 = np.diag(cfg.P0)
    x_hat0 = x_true + (np.sqrt(cfg.P0) * init_rng.standard_normal(6) if cfg.initial_error else 0.0)
    fs = est.FilterState(x_hat0, P0)
    sstate = SchedulerState(s_bar=0.0, eps_current=cfg.sched.eps_min)
    guidance = _Guidance(cfg) if open_profile is None else None
    q_std = np.sqrt(np.asarray(cfg.Q))

    history = np.zeros((N + 1, len(HISTORY_COLUMNS)))
    noise_log = np.zeros((N + 1, 3))
    u_prev = np.zeros(3)
    cum_dv = 0.0
    target = np.array(cfg.x_target)

    for k in range(N + 1):
        t = k * cfg.dt
        y, v = generate_measurement(x_true, t, cfg.anomaly, cfg.R_nominal, meas_rng,
                                    noise_on=cfg.measurement_noise)
        noise_log[k] = v
        try:
            prior = fs if k == 0 else est.predict(fs, u_prev, dm, noise)
            diag = est.mtf_inflate(est.innovation(prior, y, noise), enabled=mtf_on)
            fs = est.update(prior, diag)
            sstate_new, (nis, rho, s_comp) = scheduler_step(sstate, diag.nu, diag.S_k,
                                                            diag.S_mtf, cfg.sched)
        except (est.FilterFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise SimulationError("filter", t, str(exc)) from exc
        if adaptive:
            sstate = sstate_new
            eps = sstate.eps_current
        else:
            eps = cfg.fixed_eps
            sstate = SchedulerState(sstate_new.s_bar, eps)

        u = np.zeros(3)
        if k < N:
            if guidance is not None:
                if k % resolve_every == 0 and cfg.tf - t >= cfg.t_min_rem - 1e-9:
                    guidance.resolve(k, fs.x_hat, eps)
                u = guidance.control(k)
            else:
                u = open_profile[k]

        history[k] = (
            t, *x_true, *fs.x_hat, *u, np.linalg.norm(u),
            np.linalg.norm(diag.nu), nis, rho, s_comp, sstate.s_bar,
            eps,
            np.linalg.norm(x_true[:3] - target[:3]), np.linalg.norm(fs.x_hat[:3] - x_true[:3]),
            cum_dv,
        )
        if k < N:
            cum_dv += float(np.linalg.norm(u)) * cfg.dt
            x_true = dm.phi @ x_true + dm.gamma @ u
            if cfg.truth_process_noise:
                x_true = x_true + q_std * proc_rng.standard_normal(6)
            u_prev = u
            if not np.all(np.isfinite(x_true)):
                raise SimulationError("truth propagation", t, "non-finite state")

    err = x_true - target
    times = guidance.times if guidance is not None else []
    return RunMetrics(
        controller=variant,
        seed=cfg.seed,
        terminal_miss=float(np.linalg.norm(err[:3])),
        terminal_vel_err=float(np.linalg.norm(err[3:])),
        total_delta_v=cum_dv,
        solve_attempts=guidance.attempts if guidance else 0,
        solve_failures=guidance.failures if guidance else 0,
        solve_time_mean=float(np.mean(times)) if times else 0.0,
        solve_time_max=float(np.max(times)) if times else 0.0,
        history=history,
        noise_log=noise_log,
    )


def run_closed_loop(cfg: ScenarioConfig) -> RunMetrics:
    if cfg.controller not in CLOSED_LOOP:
        raise ConfigError(f"{cfg.controller!r} is not a closed-loop controller")
    return _simulate(cfg)


def run_open_loop(cfg: ScenarioConfig, mode: str | None = None) -> RunMetrics:
    """Solve once from ``x0`` over the full horizon and fly it without feedback."""
    if mode is None:
        if cfg.controller not in OPEN_LOOP:
            raise ConfigError(f"{cfg.controller!r} is not an open-loop controller")
        mode = cfg.controller.removeprefix("open_")
    cfg = replace(cfg, controller=f"open_{mode}").validate()
    return _simulate(cfg, open_profile=_open_loop_profile(cfg, mode))


def run(cfg: ScenarioConfig) -> RunMetrics:
    if cfg.controller in OPEN_LOOP:
        return run_open_loop(cfg)
    return run_closed_loop(cfg)


def fuel_penalty(delta_v: float, delta_v_fuel: float) -> float:
    return (delta_v / delta_v_fuel - 1.0) * 100.0


def _run_job(cfg):
    t0 = time.perf_counter()
    m = run(cfg)
    logger.info("%s seed=%d miss=%.3e dv=%.4e (%.1fs)", cfg.controller, cfg.seed,
                m.terminal_miss, m.total_delta_v, time.perf_counter() - t0)
    return m


def _run_job_safe(cfg):
    try:
        return _run_job(cfg)
    except SimulationError as exc:
        return exc


def run_many(cfgs, workers: int = 1, safe: bool = False) -> list:
    """Run independent scenarios, optionally in worker processes; order is preserved.

    With ``safe=True`` a failed run yields its ``SimulationError`` in place
    of metrics instead of aborting the batch.
    """
    cfgs = list(cfgs)
    job = _run_job_safe if safe else _run_job
    if workers <= 1 or len(cfgs) <= 1:
        return [job(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, cfgs))


@dataclass
class Comparison:
    variants: list
    seeds: list
    runs: dict  # (variant, seed) -> RunMetrics
    fuel_baseline: float

    def metric(self, variant: str, name: str) -> np.ndarray:
        vals = []
        for s in self.seeds:
            m = self.runs[(variant, s)]
            vals.append(m.solve_success_rate if name == "solve_success_rate" else getattr(m, name))
        return np.array(vals, dtype=float)

    def median(self, variant: str, name: str) -> float:
        return float(np.median(self.metric(variant, name)))

    def rows(self) -> list:
        """One aggregated row per variant (mean/std columns when several seeds)."""
        out = []
        names = ("terminal_miss", "terminal_vel_err", "total_delta_v", "fuel_penalty_pct",
                 "solve_success_rate", "solve_time_mean", "solve_time_max")
        for v in self.variants:
            row = {"variant": v, "n_seeds": len(self.seeds)}
            for name in names:
                vals = self.metric(v, name)
                row[name] = float(np.median(vals)) if len(vals) > 1 else float(vals[0])
                if len(self.seeds) > 1:
                    row[f"{name}_mean"] = float(np.mean(vals))
                    row[f"{name}_std"] = float(np.std(vals))
            out.append(row)
        return out


def compare_controllers(cfg_base: ScenarioConfig, variants, seeds, workers: int = 1) -> Comparison:
    """Run every variant on every seed.

    Variants sharing a seed see the same noise and anomaly draws.  Fuel
    penalties are relative to an open-loop fuel run made here.
    """
    variants = list(variants)
    seeds = list(seeds)
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown controller {v!r}")
    baseline = run_open_loop(replace(cfg_base, controller="open_fuel"))
    dv_fuel = baseline.total_delta_v
    jobs = [replace(cfg_base, controller=v, seed=s) for v in variants for s in seeds]
    results = run_many(jobs, workers)
    runs = {}
    for job, m in zip(jobs, results):
        m.fuel_penalty_pct = fuel_penalty(m.total_delta_v, dv_fuel)
        runs[(job.controller, job.seed)] = m
    return Comparison(variants, seeds, runs, dv_fuel)
