"""Clohessy-Wiltshire relative motion about a circular reference orbit.

State ordering is ``[x, y, z, xdot, ydot, zdot]`` everywhere, with ``x``
radial, ``y`` along-track and ``z`` cross-track.  Units are km, km/s,
km/s^2 and rad/s; nothing in here converts units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MEAN_MOTION = 1.06e-3  # rad/s, roughly a 770 km circular LEO

H_POS = np.hstack([np.eye(3), np.zeros((3, 3))])


@dataclass(frozen=True)
class CwModel:
    """Circular-orbit relative dynamics with a bounded control acceleration."""

    n: float = DEFAULT_MEAN_MOTION
    u_max: float = 8e-4

    def __post_init__(self):
        if not np.isfinite(self.n) or self.n < 0.0:
            raise ValueError(f"mean motion must be finite and >= 0, got {self.n}")
        if not np.isfinite(self.u_max) or self.u_max <= 0.0:
            raise ValueError(f"u_max must be positive, got {self.u_max}")


@dataclass(frozen=True)
class DiscreteModel:
    """Exact zero-order-hold discretization over one step ``dt``."""

    phi: np.ndarray
    gamma: np.ndarray
    dt: float


def continuous_matrices(model: CwModel) -> tuple[np.ndarray, np.ndarray]:
    """Return the continuous-time ``(A, B)`` pair of the CW equations."""
    n = model.n
    A = np.zeros((6, 6))
    A[0:3, 3:6] = np.eye(3)
    A[3, 0] = 3.0 * n * n
    A[3, 4] = 2.0 * n
    A[4, 3] = -2.0 * n
    A[5, 2] = -n * n
    B = np.zeros((6, 3))
    B[3:6, :] = np.eye(3)
    return A, B


def _sinc(theta):
    # sin(theta)/theta
    return np.sinc(theta / np.pi)


def _cosc(theta):
    # (1 - cos(theta))/theta^2, evaluated without cancellation
    return 0.5 * _sinc(0.5 * theta) ** 2


def _sinc3(theta):
    # (theta - sin(theta))/theta^3
    if abs(theta) < 0.1:
        t2 = theta * theta
        return 1.0 / 6.0 - t2 * (1.0 / 120.0 - t2 * (1.0 / 5040.0 - t2 * (1.0 / 362880.0 - t2 / 39916800.0)))
    return (theta - np.sin(theta)) / theta**3


def transition_matrix(n: float, t: float) -> np.ndarray:
    """Closed-form ``exp(A t)``.  Valid for any real ``t`` including negative."""
    th = n * t
    sc = _sinc(th)
    cc = _cosc(th)
    s3 = _sinc3(th)
    c1 = th * th * cc  # 1 - cos
    c = 1.0 - c1
    phi = np.zeros((6, 6))
    phi[0, 0] = 1.0 + 3.0 * c1
    phi[0, 3] = t * sc
    phi[0, 4] = 2.0 * n * t * t * cc
    phi[1, 0] = -6.0 * th**3 * s3
    phi[1, 1] = 1.0
    phi[1, 3] = -2.0 * n * t * t * cc
    phi[1, 4] = t - 4.0 * n * n * t**3 * s3
    phi[2, 2] = c
    phi[2, 5] = t * sc
    phi[3, 0] = 3.0 * n * n * t * sc
    phi[3, 3] = c
    phi[3, 4] = 2.0 * th * sc
    phi[4, 0] = -6.0 * n * th * th * cc
    phi[4, 3] = -2.0 * th * sc
    phi[4, 4] = 1.0 - 4.0 * c1
    phi[5, 2] = -n * n * t * sc
    phi[5, 5] = c
    return phi


def control_matrix(n: float, t: float) -> np.ndarray:
    """Closed-form ``int_0^t exp(A s) B ds``."""
    th = n * t
    sc = _sinc(th)
    cc = _cosc(th)
    s3 = _sinc3(th)
    t2 = t * t
    gam = np.zeros((6, 3))
    gam[0, 0] = t2 * cc
    gam[0, 1] = 2.0 * n * t**3 * s3
    gam[1, 0] = -2.0 * n * t**3 * s3
    gam[1, 1] = (4.0 * cc - 1.5) * t2
    gam[2, 2] = t2 * cc
    gam[3, 0] = t * sc
    gam[3, 1] = 2.0 * n * t2 * cc
    gam[4, 0] = -2.0 * n * t2 * cc
    gam[4, 1] = (4.0 * sc - 3.0) * t
    gam[5, 2] = t * sc
    return gam


def discretize(model: CwModel, dt: float) -> DiscreteModel:
    """Exact discretization of the CW model with the control held over ``dt``."""
    if not dt > 0.0 or not np.isfinite(dt):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    return DiscreteModel(
        phi=transition_matrix(model.n, dt),
        gamma=control_matrix(model.n, dt),
        dt=float(dt),
    )


def costate_transition(model: CwModel, dt: float) -> np.ndarray:
    """``exp(-A^T dt)``: one-step propagator of the adjoint equation."""
    return transition_matrix(model.n, -dt).T


def propagate(x, u, dm: DiscreteModel) -> np.ndarray:
    """One step of ``x+ = phi x + gamma u``."""
    return dm.phi @ np.asarray(x, dtype=float) + dm.gamma @ np.asarray(u, dtype=float)
