"""Linear Kalman filter on the CW model with MTF measurement-noise inflation.

MTF (multiple tuning factors) inflates the measurement covariance on each
axis by the positive part of the excess innovation energy over its nominal
prediction.  Axes with anomalous innovations are de-weighted; quiet axes
are left alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cw import H_POS, DiscreteModel

DEFAULT_R = np.diag([1e-6, 1e-6, 1e-6])
DEFAULT_Q = np.diag([1e-12, 1e-12, 1e-12, 1e-14, 1e-14, 1e-14])
DEFAULT_P0 = np.diag([1e-6, 1e-6, 1e-6, 1e-10, 1e-10, 1e-10])


class FilterFailure(RuntimeError):
    """Innovation covariance could not be inverted."""


@dataclass(frozen=True)
class NoiseConfig:
    R_nominal: np.ndarray = field(default_factory=lambda: DEFAULT_R.copy())
    Q: np.ndarray = field(default_factory=lambda: DEFAULT_Q.copy())


@dataclass(frozen=True)
class FilterState:
    x_hat: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class InnovationDiag:
    nu: np.ndarray
    S_k: np.ndarray
    S_mtf: np.ndarray | None = None
    R_eff: np.ndarray | None = None
    R_nominal: np.ndarray | None = None


def _sym(P):
    return 0.5 * (P + P.T)


def predict(fs: FilterState, u, dm: DiscreteModel, noise: NoiseConfig) -> FilterState:
    x = dm.phi @ fs.x_hat + dm.gamma @ np.asarray(u, dtype=float)
    P = _sym(dm.phi @ fs.P @ dm.phi.T + noise.Q)
    return FilterState(x, P)


def innovation(fs_prior: FilterState, y, noise: NoiseConfig) -> InnovationDiag:
    y = y.y if isinstance(y, Measurement) else np.asarray(y, dtype=float)
    nu = y - H_POS @ fs_prior.x_hat
    S = _sym(H_POS @ fs_prior.P @ H_POS.T + noise.R_nominal)
    return InnovationDiag(nu=nu, S_k=S, R_nominal=noise.R_nominal)


def mtf_inflate(diag: InnovationDiag, enabled: bool = True) -> InnovationDiag:
    """Fill ``S_mtf`` and ``R_eff``; a disabled switch gives the plain filter."""
    if enabled:
        raw = np.outer(diag.nu, diag.nu) - diag.S_k
        S_mtf = np.diag(np.maximum(np.diag(raw), 0.0))
    else:
        S_mtf = np.zeros_like(diag.S_k)
    return InnovationDiag(diag.nu, diag.S_k, S_mtf, diag.R_nominal + S_mtf, diag.R_nominal)


def update(fs_prior: FilterState, diag: InnovationDiag, H=H_POS) -> FilterState:
    """Gain from the effective covariance and Joseph-form covariance update."""
    R_eff = diag.R_eff if diag.R_eff is not None else diag.R_nominal
    P = fs_prior.P
    S_eff = H @ P @ H.T + R_eff
    try:
        K = np.linalg.solve(S_eff.T, (P @ H.T).T).T
    except np.linalg.LinAlgError as exc:
        raise FilterFailure("singular innovation covariance") from exc
    if not np.all(np.isfinite(K)):
        raise FilterFailure("non-finite Kalman gain")
    x = fs_prior.x_hat + K @ diag.nu
    return FilterState(x, joseph(P, K, H, R_eff))


def joseph(P, K, H, R):
    I_KH = np.eye(P.shape[0]) - K @ H
    return _sym(I_KH @ P @ I_KH.T + K @ R @ K.T)


def filter_step(fs: FilterState, u, y, dm: DiscreteModel, noise: NoiseConfig,
                mtf: bool = True) -> tuple[FilterState, FilterState, InnovationDiag]:
    """Predict with the control applied over the last step, then update on ``y``."""
    prior = predict(fs, u, dm, noise)
    diag = mtf_inflate(innovation(prior, y, noise), enabled=mtf)
    return prior, update(prior, diag), diag
