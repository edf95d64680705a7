"""Pure numpy shooting kernel, used when the compiled extension is missing.

The costate obeys a linear ODE independent of the state, so the velocity
costate at every step is a fixed linear map of the initial costate.  The
terminal state is likewise a fixed linear map of the applied controls.
Both maps are tabulated once per discretization and reused, which turns a
trajectory evaluation into a handful of batched products.
"""

from __future__ import annotations

import numpy as np

SINGULAR_NORM = 1e-12

_tables: dict = {}


class _PowerTables:
    def __init__(self, phi, gamma, psi):
        self.phi = phi
        self.gamma = gamma
        self.psi = psi
        self.phi_pow = np.eye(6)[None]  # phi^k
        self.g_pow = gamma[None].copy()  # phi^k gamma
        self.lam_rows = np.eye(6)[None, 3:6, :].copy()  # (psi^k)[3:6, :]
        self._psi_k = np.eye(6)

    def ensure(self, n_steps):
        have = self.phi_pow.shape[0]
        if have > n_steps:
            return
        extra = n_steps + 1 - have
        phi_pow = np.empty((extra, 6, 6))
        g_pow = np.empty((extra, 6, 3))
        lam_rows = np.empty((extra, 3, 6))
        p = self.phi_pow[-1]
        g = self.g_pow[-1]
        q = self._psi_k
        for i in range(extra):
            p = self.phi @ p
            g = self.phi @ g
            q = self.psi @ q
            phi_pow[i] = p
            g_pow[i] = g
            lam_rows[i] = q[3:6]
        self._psi_k = q
        self.phi_pow = np.concatenate([self.phi_pow, phi_pow])
        self.g_pow = np.concatenate([self.g_pow, g_pow])
        self.lam_rows = np.concatenate([self.lam_rows, lam_rows])


def _get_tables(phi, gamma, psi, n_steps):
    key = (phi.tobytes(), gamma.tobytes(), psi.tobytes())
    tab = _tables.get(key)
    if tab is None:
        if len(_tables) > 16:
            _tables.clear()
        tab = _tables[key] = _PowerTables(phi.copy(), gamma.copy(), psi.copy())
    tab.ensure(n_steps)
    return tab


def control_law(lam_v, eps, u_max, want_jac=True):
    """Vectorized smoothed thrust law over rows of ``lam_v`` (shape (N, 3)).

    Returns the controls and, optionally, d u / d lam_v per row.
    """
    lam_v = np.atleast_2d(lam_v)
    norm = np.linalg.norm(lam_v, axis=1)
    S = 1.0 - norm
    safe = np.where(norm < SINGULAR_NORM, 1.0, norm)
    alpha = -lam_v / safe[:, None]

    if eps > 0.0:
        mag = np.where(S > eps, 0.0, np.where(S < -eps, 1.0, (eps - S) / (2.0 * eps)))
    else:
        mag = np.where(S < 0.0, 1.0, 0.0)
    mag = np.where(norm < SINGULAR_NORM, 0.0, mag)
    u = (u_max * mag)[:, None] * alpha
    if not want_jac:
        return u, None

    # u = -u_max * mag(L) * lam_v / L
    # du/dlam = -u_max [mag/L (I - a a^T) + mag'(L) a a^T]
    aat = alpha[:, :, None] * alpha[:, None, :]
    proj = np.eye(3)[None] - aat
    dmag = np.zeros_like(norm)
    if eps > 0.0:
        dmag = np.where(np.abs(S) <= eps, 1.0 / (2.0 * eps), 0.0)
    dmag = np.where(norm < SINGULAR_NORM, 0.0, dmag)
    du = -u_max * ((mag / safe)[:, None, None] * proj + dmag[:, None, None] * aat)
    return u, du


def evaluate(lam0, x0, phi, gamma, psi, n_steps, eps, u_max, want_jac=True):
    """Propagate state and costate over ``n_steps`` held-control steps.

    Returns ``(x_final, jac, controls)`` where ``jac`` is d x_final / d lam0
    (``None`` when ``want_jac`` is false) and ``controls`` has one row per
    step.
    """
    lam0 = np.asarray(lam0, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n_steps = int(n_steps)
    tab = _get_tables(np.ascontiguousarray(phi, dtype=float),
                      np.ascontiguousarray(gamma, dtype=float),
                      np.ascontiguousarray(psi, dtype=float), n_steps)
    lam_rows = tab.lam_rows[:n_steps]
    lam_v = lam_rows @ lam0
    u, du = control_law(lam_v, eps, u_max, want_jac)
    g_rev = tab.g_pow[n_steps - 1::-1] if n_steps > 0 else tab.g_pow[:0]
    x_final = tab.phi_pow[n_steps] @ x0 + np.einsum("kij,kj->i", g_rev, u)
    jac = None
    if want_jac:
        t = du @ lam_rows
        jac = np.einsum("kij,kjm->im", g_rev, t)
    return x_final, jac, u
