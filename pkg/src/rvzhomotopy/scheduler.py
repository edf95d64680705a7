"""Confidence score from innovation statistics and its map to the homotopy width."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SchedulerConfig:
    beta: float = 0.25
    m_meas: int = 3
    rho_score: float = 0.85
    k_mtf: float = 12.0
    score_max: float = 50.0
    eps_min: float = 0.0
    eps_max: float = 1.0
    alpha_eps: float = 0.10

    def __post_init__(self):
        if not 0.0 <= self.rho_score < 1.0:
            raise ValueError("rho_score must lie in [0, 1)")
        if self.eps_min > self.eps_max:
            raise ValueError("eps_min must not exceed eps_max")
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")
        if self.score_max <= 0.0:
            raise ValueError("score_max must be positive")
        if not 0.0 <= self.alpha_eps <= 1.0:
            raise ValueError("alpha_eps must lie in [0, 1]")


@dataclass
class SchedulerState:
    s_bar: float = 0.0
    eps_current: float = 0.0


def nis_score(nu, S_k) -> float:
    nu = np.asarray(nu, dtype=float)
    try:
        return float(nu @ np.linalg.solve(S_k, nu))
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError("singular innovation covariance") from exc


def mtf_ratio(S_mtf, S_k) -> float:
    return float(np.trace(S_mtf) / np.trace(S_k))


def composite_score(nis: float, rho: float, cfg: SchedulerConfig) -> float:
    s = max(nis - cfg.m_meas, 0.0) + cfg.k_mtf * rho
    return min(max(s, 0.0), cfg.score_max)


def filter_score(s_bar_prev: float, s_comp: float, cfg: SchedulerConfig) -> float:
    s = cfg.rho_score * s_bar_prev + (1.0 - cfg.rho_score) * s_comp
    return min(max(s, 0.0), cfg.score_max)


def epsilon_map(s_bar, cfg: SchedulerConfig):
    """Raw exponential map from filtered score to homotopy width."""
    return cfg.eps_min + (cfg.eps_max - cfg.eps_min) * (1.0 - np.exp(-cfg.beta * np.asarray(s_bar)))


def schedule_epsilon(state: SchedulerState, cfg: SchedulerConfig) -> float:
    """Blend the current width toward the mapped target at rate ``alpha_eps``."""
    target = float(epsilon_map(state.s_bar, cfg))
    eps = (1.0 - cfg.alpha_eps) * state.eps_current + cfg.alpha_eps * target
    return min(max(eps, cfg.eps_min), cfg.eps_max)


def scheduler_step(state: SchedulerState, nu, S_k, S_mtf, cfg: SchedulerConfig):
    """One scheduler update; returns the new state and ``(nis, rho, s_comp)``."""
    nis = nis_score(nu, S_k)
    rho = mtf_ratio(S_mtf, S_k)
    s_comp = composite_score(nis, rho, cfg)
    s_bar = filter_score(state.s_bar, s_comp, cfg)
    new = SchedulerState(s_bar=s_bar, eps_current=state.eps_current)
    new.eps_current = schedule_epsilon(new, cfg)
    return new, (nis, rho, s_comp)
