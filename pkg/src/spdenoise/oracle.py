"""Finite-dimensional matrix checks of the operator statements behind the bounds.

The solution operator of one mode, ``(S f)(t) = int_0^t e^{lam (t-s)} f(s) ds``,
is discretized by the left-rectangle rule on a uniform grid.  The result is a
strictly lower-triangular Toeplitz matrix, so products and norms can use its
first column instead of the dense matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.signal import fftconvolve
from scipy.sparse.linalg import LinearOperator, svds

from .simulator import TimeGrid, cov_kernel

DENSE_MAX = 2048
DENSE_SVD_MAX = 256


@dataclass(frozen=True, eq=False)
class DiscreteSolutionOperator:
    lam: complex
    grid: TimeGrid

    @property
    def column(self) -> np.ndarray:
        """First column: ``dt * e^{lam i dt}`` for ``i >= 1`` and 0 on the diagonal."""
        n, dt = self.grid.n_steps, self.grid.dt
        col = dt * np.exp(complex(self.lam) * dt * np.arange(n))
        col[0] = 0.0
        return col

    @property
    def S(self) -> np.ndarray:
        n = self.grid.n_steps
        if n > DENSE_MAX:
            raise ValueError(f"dense operator capped at n <= {DENSE_MAX}")
        return sla.toeplitz(self.column, np.zeros(n, dtype=complex))


def _toeplitz_norm(col: np.ndarray) -> float:
    n = len(col)
    if n <= DENSE_SVD_MAX:
        return float(sla.svdvals(sla.toeplitz(col, np.zeros(n, dtype=col.dtype)))[0])
    row = np.zeros(n, dtype=col.dtype)
    adj_col = np.zeros(n, dtype=col.dtype)
    adj_col[0] = np.conj(col[0])

    def mv(x):
        return sla.matmul_toeplitz((col, row), np.asarray(x).ravel())

    def rmv(x):
        return sla.matmul_toeplitz((adj_col, np.conj(col)), np.asarray(x).ravel())

    op = LinearOperator((n, n), matvec=mv, rmatvec=rmv, dtype=complex)
    v0 = np.ones(n, dtype=complex) / math.sqrt(n)
    return float(svds(op, k=1, return_singular_vectors=False, v0=v0, tol=1e-10)[0])


def check_rs_norm(lam, grid: TimeGrid, C: float = 2.0):
    """Spectral norm of ``max(|Re lam|, 1/T) S`` and its allowed value ``1 + C dt max(|Re lam|, 1/T)``."""
    lam = complex(lam)
    if lam.real > 0:
        raise ValueError("check_rs_norm covers Re(lambda) <= 0 only")
    clip = max(abs(lam.real), 1.0 / grid.T)
    col = DiscreteSolutionOperator(lam, grid).column
    norm = clip * _toeplitz_norm(col)
    return norm, 1.0 + C * grid.dt * clip


def _lower_toeplitz_product(c0, c1):
    n = len(c0)
    if n <= 8192:
        return np.convolve(c0, c1)[:n]
    return fftconvolve(c0, c1)[:n]


def check_perturbation_identity(lam0, lam1, grid: TimeGrid) -> float:
    """Max entry of ``(S1 - S0) - (lam1 - lam0) S0 S1`` over both product orders."""
    lam0, lam1 = complex(lam0), complex(lam1)
    if lam0.real > 0 or lam1.real > 0:
        raise ValueError("both eigenvalues need Re <= 0")
    c0 = DiscreteSolutionOperator(lam0, grid).column
    c1 = DiscreteSolutionOperator(lam1, grid).column
    diff = c1 - c0
    dl = lam1 - lam0
    r01 = np.max(np.abs(diff - dl * _lower_toeplitz_product(c0, c1)))
    r10 = np.max(np.abs(diff - dl * _lower_toeplitz_product(c1, c0)))
    return float(max(r01, r10))


def check_cov_factorization(lam, grid: TimeGrid) -> float:
    """Max entry of ``c(t_i, t_j) - (S S^*)_{ij} / dt`` on the grid points ``t_i = i dt``."""
    lam = complex(lam)
    op = DiscreteSolutionOperator(lam, grid)
    S = op.S
    dt = grid.dt
    t = np.arange(grid.n_steps) * dt
    kern = np.vectorize(lambda a, b: cov_kernel(lam, a, b))(t[:, None], t[None, :])
    return float(np.max(np.abs(kern - S @ S.conj().T / dt)))


def _obs_cov(lam, b, eps, grid):
    S = DiscreteSolutionOperator(lam, grid).S
    return eps ** 2 * np.eye(grid.n_steps) + b ** 2 * (S @ S.conj().T)


def matrix_hellinger(lam0, lam1, b: float, eps: float, grid: TimeGrid, mult: int | None = None) -> float:
    """Exact H^2 between the discretized observation laws of one mode.

    ``Q_i = eps^2 Id + b^2 S_i S_i^*`` (the increment covariance divided by
    ``dt``).  A complex mode (``mult=2``) is a pair of real coordinates, so each
    generalized eigenvalue counts twice in the real law.
    """
    lam0, lam1 = complex(lam0), complex(lam1)
    if mult is None:
        mult = 1 if lam0.imag == 0 and lam1.imag == 0 else 2
    if mult == 1 and (lam0.imag != 0 or lam1.imag != 0):
        raise ValueError("a real (mult=1) mode needs real eigenvalues")
    if eps <= 0:
        raise ValueError("the discretized covariance is singular without observation noise")
    Q0 = _obs_cov(lam0, b, eps, grid)
    Q1 = _obs_cov(lam1, b, eps, grid)
    if mult == 1:
        Q0, Q1 = Q0.real, Q1.real
    tau = sla.eigh(Q1, Q0, eigvals_only=True)
    log_bc = (mult / 2.0) * np.sum(0.5 * (0.5 * np.log(tau) + math.log(2.0) - np.log1p(tau)))
    return float(2.0 - 2.0 * math.exp(log_bc))
