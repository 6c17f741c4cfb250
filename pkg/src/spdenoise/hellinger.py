"""Hellinger distances and bounds for (cylindrical) Gaussian observation laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .information import _decay_fit
from .spectral_model import SpectralModel, clip_inv, clip_low

MINIMAX_RISK = (2.0 - math.sqrt(3.0)) / 4.0
F_OVERFLOW = 700.0


@dataclass(frozen=True)
class HellingerReport:
    h2_bound: float
    variant: str
    equivalent: bool
    h2_exact: float | None = None
    minimax: tuple | None = None
    variants: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def hellinger_scalar(sigma0: float, sigma1: float):
    """Exact squared Hellinger distance of N(0, sigma0^2), N(0, sigma1^2) and its bound."""
    if not (sigma0 > 0 and sigma1 > 0):
        raise ValueError("standard deviations must be positive")
    s = sigma1 / sigma0
    exact = 2.0 - 2.0 * math.sqrt(2.0 * s / (s * s + 1.0))
    bound = 0.25 * (s - 1.0 / s) ** 2
    return exact, bound


def hellinger_diagonal(tau, mult=None) -> float:
    """``1/4 sum mult (sqrt(tau) - 1/sqrt(tau))^2`` for covariance ratios ``tau``."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("covariance ratios must be positive")
    w = np.ones_like(tau) if mult is None else np.asarray(mult, dtype=float)
    return float(0.25 * np.sum(w * (np.sqrt(tau) - 1.0 / np.sqrt(tau)) ** 2))


def hellinger_product(tau, mult=None) -> float:
    """Exact H^2 of centred Gaussian product laws with variance ratios ``tau``."""
    tau = np.asarray(tau, dtype=float)
    w = np.ones_like(tau) if mult is None else np.asarray(mult, dtype=float)
    log_bc = np.sum(w * 0.5 * (0.5 * np.log(tau) + math.log(2.0) - np.log1p(tau)))
    return float(2.0 - 2.0 * math.exp(log_bc))


def f_factor(lam: float) -> float:
    """``((e^lam - 1 - lam) / lam^2)^(1/2)``, with ``f(0) = 1/sqrt(2)``."""
    lam = float(lam)
    if lam > F_OVERFLOW:
        return math.inf
    if abs(lam) < 1e-2:
        # (e^x - 1 - x) / x^2 = sum_k x^k / (k + 2)!
        s, term = 0.0, 0.5
        for k in range(8):
            s += term
            term *= lam / (k + 3)
        return math.sqrt(s)
    return math.sqrt((math.expm1(lam) - lam) / (lam * lam))


def alpha_theta(r_plus_max: float, T: float) -> float:
    """Operator-norm constant ``sqrt(3/4 + e^{2 r T} / 4)``; 1 in the contractive case."""
    if r_plus_max < 0:
        raise ValueError("r_plus_max must be nonnegative")
    if r_plus_max == 0:
        return 1.0
    x = 2.0 * r_plus_max * T
    if x > F_OVERFLOW:
        return math.inf
    return math.sqrt(0.75 + 0.25 * math.exp(x))


def _contractive_terms(model, r0, r1, dl2):
    T = model.T
    q = (model.eps / model.b) ** 2
    g0 = 1.0 / (q * clip_low(r0, 2, T) + 1.0)
    g1 = 1.0 / (q * clip_low(r1, 2, T) + 1.0)
    return 0.25 * T * model.mult * dl2 * (g0 * g1) * (clip_inv(r1, 1, T) + clip_inv(r0, 1, T))


def _general_terms(model, r0, r1, dl2):
    T = model.T
    a0 = alpha_theta(max(float(np.max(r0)), 0.0), T)
    a1 = alpha_theta(max(float(np.max(r1)), 0.0), T)
    e0, e1 = model.eps / a0, model.eps / a1
    gt0 = 1.0 / ((e0 / model.b) ** 2 * r0 ** 2 + 1.0)
    gt1 = 1.0 / ((e1 / model.b) ** 2 * r1 ** 2 + 1.0)
    f1 = np.array([f_factor(2 * T * r) for r in r1]) ** 2
    f0 = np.array([f_factor(2 * T * r) for r in r0]) ** 2
    with np.errstate(invalid="ignore"):
        terms = 0.5 * T * T * model.mult * dl2 * (gt0 * gt1) * (f1 + f0)
    return np.where(dl2 == 0, 0.0, terms)


def _sum_or_inf(terms, mult):
    fit = _decay_fit(terms, mult)
    if fit is not None and fit[0] >= -1.0:
        return math.inf
    return float(np.sum(terms))


def hellinger_bound_commuting(model: SpectralModel, theta0: float, theta1: float) -> HellingerReport:
    """Upper bound on H^2 between the observation laws at ``theta0`` and ``theta1``.

    Both the contractive and the general variant are evaluated mode by mode;
    the report carries the smaller one.
    """
    for th in (theta0, theta1):
        if not model.theta_lo <= th <= model.theta_hi:
            raise ValueError(f"theta={th} outside [{model.theta_lo}, {model.theta_hi}]")
    lam0, lam1 = model.lam(theta0), model.lam(theta1)
    r0, r1 = lam0.real, lam1.real
    dl2 = np.abs((theta1 - theta0) * model.ell) ** 2
    variants = {}
    if np.all(r0 <= 0) and np.all(r1 <= 0):
        variants["commuting_contractive"] = _sum_or_inf(_contractive_terms(model, r0, r1, dl2), model.mult)
    variants["commuting_general"] = _sum_or_inf(_general_terms(model, r0, r1, dl2), model.mult)
    name = min(variants, key=lambda k: variants[k])
    h2 = variants[name]
    return HellingerReport(h2_bound=h2, variant=name, equivalent=math.isfinite(h2), variants=variants)


def equivalence_series(m: float, m1: float, d: int, delta: float, T: float, K_max: int):
    """Partial sum ``T delta^2 sum_{k<=K} k^((2 m1 - m)/d)`` and the equivalence verdict."""
    if not m >= m1 >= 0:
        raise ValueError("need m >= m1 >= 0")
    if not delta > 0:
        raise ValueError("delta must be positive")
    p = (2.0 * m1 - m) / d
    k = np.arange(1, int(K_max) + 1, dtype=float)
    partial = float(T * delta ** 2 * np.sum(k ** p))
    return partial, bool(m1 < (m - d) / 2.0)


def minimax_report(model: SpectralModel, theta0: float, theta1: float) -> HellingerReport:
    """Two-point lower bound: if ``H <= 1`` every estimator has risk at least ``(2 - sqrt 3)/4``."""
    if theta0 == theta1:
        raise ValueError("the two hypotheses must differ")
    rep = hellinger_bound_commuting(model, theta0, theta1)
    if math.sqrt(rep.h2_bound) <= 1.0:
        mm = (abs(theta1 - theta0), MINIMAX_RISK)
        note = (f"P(|theta_hat - theta| >= delta/2) >= {MINIMAX_RISK:.6f} "
                f"for some theta in {{{theta0}, {theta1}}}")
    else:
        mm, note = None, "no conclusion at this separation"
    return HellingerReport(h2_bound=rep.h2_bound, variant=rep.variant, equivalent=rep.equivalent,
                           minimax=mm, variants=rep.variants, note=note)


def largest_separation(model: SpectralModel, theta0: float, direction: float = 1.0, tol: float = 1e-10) -> float:
    """Largest ``delta`` with ``hellinger_bound_commuting(theta0, theta0 + direction*delta) <= 1``."""
    span = (model.theta_hi - theta0) if direction > 0 else (theta0 - model.theta_lo)
    if span <= 0:
        return 0.0

    def ok(delta):
        return hellinger_bound_commuting(model, theta0, theta0 + direction * delta).h2_bound <= 1.0

    if ok(span):
        return span
    lo, hi = 0.0, span
    while hi - lo > tol * span:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
