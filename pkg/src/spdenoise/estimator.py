"""Preaveraging estimator ``theta_hat = Z / N`` computed mode by mode.

For mode ``k`` with increments ``y_1..y_n`` on a grid of step ``dt`` the
statistics are double sums over ordered pairs of cells ``j < i = j + l``:

    N_k = mult |ell|^2 kappa  sum P_{j,l} Re(conj(y_j) y_i)
    Z_k = -mult kappa         sum D_{j,l} Re(conj(ell) conj(y_j) y_i)

``P`` samples the triangular hat ``psi`` and ``D`` discretizes
``(d/dv + m) psi``.  Two details matter for the bias of the ratio:

* The hat is read one cell late, ``P_{j,l} = psi((l-1) dt)``, with window
  ``M_j = min(1/|lam_bar|, (n-j-1) dt)``.  Neighbouring cells then carry no
  weight, which removes the first-order bias coming from the jump of
  ``psi'`` at the origin.
* ``(d/dv + m) psi = e^{-mv} d/dv (e^{mv} psi)`` is differenced centrally in
  that form, ``D_l = (e^{m dt} P_{l+1} - e^{-m dt} P_{l-1}) / (2 dt)``.  For a
  stiff ``m`` this keeps the discrete drift term matched to the discrete hat.

With exact increments the expected ratio is then ``theta`` up to a relative
error of order ``(theta |ell| dt)^2``; :func:`expected_statistics` computes the
exact means so this can be checked for any model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .spectral_model import ModeSpec, SpectralModel, clip_inv
from .simulator import ObservationRecord, TimeGrid, _moments

DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class EstimatorResult:
    Z: float
    N: float
    theta_hat: float
    degenerate: bool
    per_mode_N: np.ndarray
    per_mode_Z: np.ndarray | None = None


def _window(s, a_abs, T):
    return T - s if a_abs == 0 else min(1.0 / a_abs, T - s)


def psi(v, s, a_abs, T):
    """Triangular hat ``min(v_+, (M - v)_+)`` with ``M = min(1/a_abs, T - s)``."""
    M = _window(s, a_abs, T)
    return float(max(0.0, min(v, M - v)))


def psi_dt(v, s, a_abs, T):
    """Right derivative in ``v`` of :func:`psi`: +1 on [0, M/2), -1 on [M/2, M), else 0."""
    M = _window(s, a_abs, T)
    if M <= 0 or v < 0 or v >= M:
        return 0.0
    return 1.0 if v < M / 2 else -1.0


def kernel_weight(mode: ModeSpec, theta_bar, eps, T):
    """Per-mode scalar ``kappa`` of the preaveraging kernel."""
    lam_bar = complex(mode.m) + theta_bar * complex(mode.ell)
    return float(kernel_weights(np.array([lam_bar]), np.array([mode.b]), eps, T)[0])


def kernel_weights(lam_bar, b, eps, T):
    lam_bar = np.asarray(lam_bar, dtype=complex)
    b = np.asarray(b, dtype=float)
    r_low = np.maximum(np.abs(lam_bar.real), 1.0 / T)
    denom = eps ** 4 * r_low + b ** 4 * clip_inv(lam_bar, 3, T)
    return b ** 2 / denom * clip_inv(lam_bar, 1, T)


def _hat(v, M):
    return np.maximum(0.0, np.minimum(v, M - v))


def _windows(n, dt, a_abs):
    j = np.arange(1, n + 1)
    width = math.inf if a_abs == 0 else 1.0 / a_abs
    return np.minimum(width, (n - j - 1) * dt)


def _max_lag(Mj, dt, n):
    top = max(float(Mj.max()), 0.0)
    return min(n - 1, int(math.ceil(top / dt)) + 2)


def _mode_sums(y, dt, a_abs, m, prune=True):
    """Return (sum P Re(c), sum D c, sum_l max_j P) for one mode."""
    n = len(y)
    Mj = _windows(n, dt, a_abs)
    L = _max_lag(Mj, dt, n) if prune else n - 1
    em, emi = math.exp(m * dt), math.exp(-m * dt)
    sn, sz, pmax = 0.0, 0j, 0.0
    yc = np.conj(y)
    for l in range(1, L + 1):
        Ml = Mj[: n - l]
        c = yc[: n - l] * y[l:]
        P = _hat((l - 1) * dt, Ml)
        D = (em * _hat(l * dt, Ml) - emi * _hat((l - 2) * dt, Ml)) / (2 * dt)
        sn += float(np.dot(P, c.real))
        sz += complex(np.dot(D, c))
        pmax += float(P.max()) if P.size else 0.0
    return sn, sz, pmax


def estimate(model: SpectralModel, obs: ObservationRecord, prune: bool = True,
             rtol: float = DEGENERACY_RTOL) -> EstimatorResult:
    """Compute ``Z``, ``N`` and ``theta_hat`` from an observation record.

    The kernel uses ``theta_bar = model.theta_hi``; the true parameter of the
    record is never looked at.  ``N`` counts as zero when
    ``|N| <= rtol * bound`` where ``bound`` is the Cauchy-Schwarz bound
    ``sum_k mult |ell|^2 kappa (sum_l max_j P) ||y_k||^2``, a scale-free test.
    """
    if len(obs.dY) != len(model):
        raise ValueError(f"record has {len(obs.dY)} modes, model has {len(model)}")
    T = model.T
    lam_bar = model.lam_bar
    kappa = kernel_weights(lam_bar, model.b, model.eps, T)
    K = len(model)
    Nk = np.zeros(K)
    Zk = np.zeros(K)
    bound = 0.0
    for k in range(K):
        y = np.asarray(obs.dY[k])
        g = obs.grids[k]
        if y.shape != (g.n_steps,):
            raise ValueError(f"mode {k}: expected {g.n_steps} increments, got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError(f"mode {k}: increments contain NaN or inf")
        ell = complex(model.ell[k])
        if ell == 0:
            continue
        sn, sz, pmax = _mode_sums(y, g.dt, abs(lam_bar[k]), model.m[k], prune)
        w = model.mult[k] * kappa[k]
        Nk[k] = w * abs(ell) ** 2 * sn
        Zk[k] = -w * (np.conj(ell) * sz).real
        bound += w * abs(ell) ** 2 * pmax * float(np.vdot(y, y).real)
    N = float(np.sum(Nk))
    Z = float(np.sum(Zk))
    degenerate = not abs(N) > rtol * bound
    theta_hat = 0.0 if degenerate else Z / N
    return EstimatorResult(Z=Z, N=N, theta_hat=theta_hat, degenerate=degenerate,
                           per_mode_N=Nk, per_mode_Z=Zk)


def expected_statistics(model: SpectralModel, theta: float, grids):
    """Exact expectations ``(E[Z], E[N])`` of the discretized statistics.

    Uses the exact increment covariances of the simulator:
    ``E[conj(y_j) y_{j+l}] = b^2 phi a^{l-1} C_j`` with
    ``C_j = E[x_j conj(I_j)]``; the observation noise drops out because only
    distinct cells are paired.
    """
    if isinstance(grids, TimeGrid):
        grids = (grids,) * len(model)
    lam = model.lam(theta)
    lam_bar = model.lam_bar
    kappa = kernel_weights(lam_bar, model.b, model.eps, model.T)
    EZ, EN = 0.0, 0.0
    for k in range(len(model)):
        ell = complex(model.ell[k])
        if ell == 0:
            continue
        g = grids[k]
        n, dt = g.n_steps, g.dt
        a, phi, vx, vI, cov = _moments(complex(lam[k]), dt)
        if model.mult[k] == 1:
            a, phi, cov = a.real, phi.real, cov.real
        # P_j = E|x_j|^2 and C_j = a conj(phi) P_{j-1} + cov
        Pst = lfilter([vx], [1.0, -abs(a) ** 2], np.ones(n))
        Pprev = np.concatenate([[0.0], Pst[:-1]])
        C = a * np.conj(phi) * Pprev + cov
        Mj = _windows(n, dt, abs(lam_bar[k]))
        L = _max_lag(Mj, dt, n)
        em, emi = math.exp(model.m[k] * dt), math.exp(-model.m[k] * dt)
        sn, sz = 0.0, 0j
        for l in range(1, L + 1):
            Ml = Mj[: n - l]
            e = model.b[k] ** 2 * phi * a ** (l - 1) * C[: n - l]
            P = _hat((l - 1) * dt, Ml)
            D = (em * _hat(l * dt, Ml) - emi * _hat((l - 2) * dt, Ml)) / (2 * dt)
            sn += float(np.dot(P, e.real))
            sz += complex(np.dot(D, e))
        w = model.mult[k] * kappa[k]
        EN += w * abs(ell) ** 2 * sn
        EZ += -w * (np.conj(ell) * sz).real
    return float(EZ), float(EN)
