"""Indirect minimum-fuel guidance on the CW model.

The fuel-optimal problem is solved by single shooting on the initial
costate.  The bang-bang thrust law is regularized by a homotopy width
``eps``; ``eps = 0`` is the pure bang-bang law and ``eps = 1`` is, inside
the unsaturated band, a linear (energy-like) law.  Controls are held
constant over each simulation step, so the shooting prediction of the
terminal state is exactly what the discrete truth model produces.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad

from . import kernels
from .cw import CwModel, continuous_matrices, costate_transition, discretize, transition_matrix

SINGULAR_NORM = 1e-12
OPEN_LOOP_TOL = 1e-9
RECEDING_TOL = 1e-7


class SingularDirection(ValueError):
    """Velocity costate too small to define a thrust direction."""


class SolverFailure(RuntimeError):
    """Non-finite values appeared while integrating the shooting problem."""


class IllConditionedHorizon(ValueError):
    """Reachability Gramian too ill-conditioned to invert."""


@dataclass(frozen=True)
class OcpProblem:
    x0: np.ndarray
    x_target: np.ndarray
    tf: float
    model: CwModel
    eps: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if not self.tf > 0.0:
            raise ValueError(f"horizon must be positive, got {self.tf}")
        if self.eps < 0.0:
            raise ValueError(f"homotopy parameter must be >= 0, got {self.eps}")
        steps = self.tf / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"horizon {self.tf} is not a multiple of dt {self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.tf / self.dt))


@dataclass
class ShootingSolution:
    lambda0: np.ndarray
    converged: bool
    residual_norm: float
    control_profile: np.ndarray
    delta_v: float
    solve_time: float
    iterations: int
    eps: float
    x_final: np.ndarray
    eps_path: list = field(default_factory=list)


@dataclass
class EnergySolution:
    control_profile: np.ndarray
    delta_v: float
    lambda0: np.ndarray
    max_accel: float


def costate_derivative(model: CwModel, lam) -> np.ndarray:
    """Adjoint dynamics ``-A^T lam``."""
    A, _ = continuous_matrices(model)
    return -A.T @ np.asarray(lam, dtype=float)


def thrust_direction(lambda_v) -> np.ndarray:
    """Unit thrust direction opposite the velocity costate."""
    lv = np.asarray(lambda_v, dtype=float)
    norm = np.linalg.norm(lv)
    if norm < SINGULAR_NORM:
        raise SingularDirection(f"|lambda_v| = {norm:.3e} below {SINGULAR_NORM}")
    return -lv / norm


def switching_value(lambda_v) -> float:
    return 1.0 - float(np.linalg.norm(lambda_v))


def smoothed_control(lambda_v, eps: float, u_max: float) -> np.ndarray:
    """Homotopy-smoothed bang-bang thrust law.

    Off when the switching function exceeds ``eps``, full thrust below
    ``-eps`` and a linear ramp in between.  With ``eps == 0`` this is the
    bang-bang law; a tie on the switching surface coasts.
    """
    if u_max <= 0.0:
        raise ValueError("u_max must be positive")
    try:
        alpha = thrust_direction(lambda_v)
    except SingularDirection:
        return np.zeros(3)
    S = switching_value(lambda_v)
    if eps > 0.0:
        if S > eps:
            return np.zeros(3)
        if S < -eps:
            return u_max * alpha
        return (eps - S) / (2.0 * eps) * u_max * alpha
    return u_max * alpha if S < 0.0 else np.zeros(3)


def delta_v_of(profile, dt: float, rule: str = "hold") -> float:
    """Integral of the control magnitude over a uniformly sampled profile.

    ``rule="hold"`` treats each row as held over one step (exact for the
    zero-order-hold actuation used in simulation); ``rule="trapezoid"``
    treats rows as point samples.
    """
    profile = np.asarray(profile, dtype=float).reshape(-1, 3)
    if profile.shape[0] == 0:
        return 0.0
    mags = np.linalg.norm(profile, axis=1)
    if rule == "hold":
        return float(mags.sum() * dt)
    if rule == "trapezoid":
        return float(np.trapezoid(mags, dx=dt)) if hasattr(np, "trapezoid") else float(np.trapz(mags, dx=dt))
    raise ValueError(f"unknown integration rule {rule!r}")


def residual_weights(model: CwModel, tf: float) -> np.ndarray:
    # velocities scaled to km-equivalents by 1/n; tf stands in when n == 0
    vscale = 1.0 / model.n if model.n > 0.0 else tf
    return np.array([1.0, 1.0, 1.0, vscale, vscale, vscale])


class _Shooter:
    """Evaluates the weighted terminal residual for one problem."""

    def __init__(self, problem: OcpProblem):
        self.problem = problem
        dm = discretize(problem.model, problem.dt)
        self.phi = dm.phi
        self.gamma = dm.gamma
        self.psi = costate_transition(problem.model, problem.dt)
        self.w = residual_weights(problem.model, problem.tf)
        self.x0 = np.asarray(problem.x0, dtype=float)
        self.xt = np.asarray(problem.x_target, dtype=float)
        self.n_steps = problem.n_steps

    def __call__(self, lam, want_jac=True):
        xf, jac, u = kernels.evaluate(lam, self.x0, self.phi, self.gamma, self.psi,
                                      self.n_steps, self.problem.eps,
                                      self.problem.model.u_max, want_jac)
        r = self.w * (xf - self.xt)
        if not np.all(np.isfinite(r)):
            raise SolverFailure("non-finite terminal state during shooting")
        if want_jac:
            jac = self.w[:, None] * jac
        return r, jac, u, xf


def _lm_step(J, r, mu):
    JtJ = J.T @ J
    d = np.diag(JtJ).copy()
    d[d <= 0.0] = 1.0
    try:
        return np.linalg.solve(JtJ + mu * np.diag(d), -J.T @ r)
    except np.linalg.LinAlgError:
        return np.zeros_like(r)


def shoot(problem: OcpProblem, lambda0_guess, tol: float = OPEN_LOOP_TOL,
          max_iters: int = 50) -> ShootingSolution:
    """Single shooting on the initial costate.

    Damped Newton with a backtracking line search (factor 0.5, at most 8
    halvings).  When the line search cannot reduce the residual a
    Levenberg-Marquardt step with Marquardt scaling is tried, starting from
    damping 1e-3.  Returns the best iterate whether or not it converged.
    """
    t_start = time.perf_counter()
    fn = _Shooter(problem)
    lam = np.array(lambda0_guess, dtype=float)
    if lam.shape != (6,) or not np.all(np.isfinite(lam)):
        raise ValueError("costate guess must be a finite 6-vector")

    r, J, u, xf = fn(lam)
    rn = float(np.linalg.norm(r))
    iters = 0
    mu = 1e-3
    while rn > tol and iters < max_iters:
        iters += 1
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        accepted = False
        a = 1.0
        for _ in range(9):
            trial = lam + a * step
            r_t, _, _, _ = fn(trial, want_jac=False)
            rn_t = float(np.linalg.norm(r_t))
            if rn_t < rn:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            for _ in range(8):
                trial = lam + _lm_step(J, r, mu)
                r_t, _, _, _ = fn(trial, want_jac=False)
                rn_t = float(np.linalg.norm(r_t))
                if rn_t < rn:
                    accepted = True
                    mu = max(mu / 10.0, 1e-12)
                    break
                mu *= 10.0
        if not accepted:
            break
        lam = trial
        r, J, u, xf = fn(lam)
        rn = float(np.linalg.norm(r))

    return ShootingSolution(
        lambda0=lam,
        converged=rn <= tol,
        residual_norm=rn,
        control_profile=u,
        delta_v=delta_v_of(u, problem.dt),
        solve_time=time.perf_counter() - t_start,
        iterations=iters,
        eps=problem.eps,
        x_final=xf,
        eps_path=[problem.eps],
    )


def continuation_ladder(target: float, eps_max: float = 1.0, ratio: float = 0.5) -> list:
    """Geometric sequence from ``eps_max`` down to (and ending at) ``target``."""
    rungs = []
    e = eps_max
    while e > target * (1.0 + 1e-12) and e > 0.0:
        rungs.append(e)
        e *= ratio
        if e < 1e-12:
            break
    rungs.append(target)
    return rungs


def energy_seed(problem: OcpProblem) -> np.ndarray:
    """Initial costate for the smoothed law derived from the minimum-energy solution."""
    energy = energy_optimal_solution(problem.x0, problem.x_target, problem.tf,
                                     problem.model, dt=problem.dt, warn=False)
    # with eps = 1 the unsaturated smoothed law is u = -u_max * lam_v / 2
    return energy.lambda0 * (2.0 / problem.model.u_max)


def continuation_solve(problem: OcpProblem, warm_start=None, tol: float = OPEN_LOOP_TOL,
                       max_iters: int = 50, eps_max: float = 1.0,
                       ratio: float = 0.5) -> ShootingSolution:
    """Reach the target ``eps`` by homotopy continuation.

    A warm start is tried directly at the target; if that fails (or there
    is no warm start) the ladder is walked from ``eps_max`` seeded by the
    energy-optimal costate.  ``converged`` refers to the target rung.
    """
    t_start = time.perf_counter()
    tried = []
    total_iters = 0
    if warm_start is not None:
        sol = shoot(problem, warm_start, tol=tol, max_iters=max_iters)
        tried.append(problem.eps)
        total_iters += sol.iterations
        if sol.converged:
            sol.eps_path = tried
            sol.solve_time = time.perf_counter() - t_start
            return sol

    lam = energy_seed(problem)
    sol = None
    for e in continuation_ladder(problem.eps, max(eps_max, problem.eps), ratio):
        rung = OcpProblem(problem.x0, problem.x_target, problem.tf, problem.model, e, problem.dt)
        sol = shoot(rung, lam, tol=tol, max_iters=max_iters)
        tried.append(e)
        total_iters += sol.iterations
        lam = sol.lambda0
    sol.eps_path = tried
    sol.iterations = total_iters
    sol.solve_time = time.perf_counter() - t_start
    return sol


def reachability_gramian(model: CwModel, tf: float) -> np.ndarray:
    """``int_0^tf exp(A s) B B^T exp(A^T s) ds`` via Van Loan's block exponential."""
    A, B = continuous_matrices(model)
    M = np.zeros((12, 12))
    M[:6, :6] = -A
    M[:6, 6:] = B @ B.T
    M[6:, 6:] = A.T
    E = sla.expm(M * tf)
    F22 = E[6:, 6:]
    F12 = E[:6, 6:]
    W = F22.T @ F12
    return 0.5 * (W + W.T)


def energy_optimal_solution(x0, x_target, tf: float, model: CwModel, dt: float = 1.0,
                            hold: bool = False, warn: bool = True) -> EnergySolution:
    """Unconstrained minimum-energy transfer, used as a baseline and seed.

    With ``hold=False`` this is the continuous-time optimum sampled at the
    step boundaries.  With ``hold=True`` it is the exact optimum among
    step-wise constant controls, so applying it to the discrete model lands
    on the target.  Saturation is not applied.
    """
    if not tf > 0.0:
        raise ValueError("horizon must be positive")
    x0 = np.asarray(x0, dtype=float)
    x_target = np.asarray(x_target, dtype=float)
    n_steps = int(round(tf / dt))
    A, B = continuous_matrices(model)
    drift = x_target - transition_matrix(model.n, tf) @ x0

    if hold:
        dm = discretize(model, dt)
        blocks = np.empty((n_steps, 6, 3))
        g = dm.gamma
        for j in range(n_steps):
            blocks[j] = g
            g = dm.phi @ g
        W = np.einsum("kij,klj->il", blocks, blocks)
        c = _solve_gramian(W, drift)
        profile = np.einsum("kji,j->ki", blocks[::-1], c)
        delta_v = delta_v_of(profile, dt)
    else:
        W = reachability_gramian(model, tf)
        c = _solve_gramian(W, drift)

        def control_at(t):
            return B.T @ transition_matrix(model.n, tf - t).T @ c

        times = np.arange(n_steps) * dt
        profile = np.array([control_at(t) for t in times]).reshape(-1, 3)
        if np.any(c):
            delta_v = quad(lambda t: np.linalg.norm(control_at(t)), 0.0, tf,
                           limit=200, epsabs=1e-14, epsrel=1e-12)[0]
        else:
            delta_v = 0.0

    # lam(t) = -exp(A^T (tf - t)) c gives lam_v = -u under the energy Hamiltonian
    lambda0 = -transition_matrix(model.n, tf).T @ c
    max_accel = float(np.linalg.norm(profile, axis=1).max()) if n_steps else 0.0
    if warn and max_accel > model.u_max:
        warnings.warn(f"energy-optimal peak acceleration {max_accel:.3e} exceeds "
                      f"u_max {model.u_max:.3e}", RuntimeWarning, stacklevel=2)
    return EnergySolution(profile, float(delta_v), lambda0, max_accel)


def _solve_gramian(W, rhs):
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditionedHorizon(f"Gramian condition number {cond:.3e}")
    return np.linalg.solve(W, rhs)
