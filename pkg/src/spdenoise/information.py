"""Information functional, lower-bound rate and closed-form example rates.

Closed-form rates are returned together with an *exponent record*: a dict
mapping each asymptotic parameter (``T``, ``eps``, ``nu``, ``sigma``,
``theta``, ``theta_bar``) to the power it carries, plus ``log_e_eps`` for a
factor ``log(e / eps)``.  Multiplicative constants are not part of the
statements, so tests compare exponents only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .spectral_model import SpectralModel, clip_inv, clip_low

TAIL_MIN_MODES = 8


# ---------------------------------------------------------------------------
# mode sums


def _info_terms(model: SpectralModel, theta: float) -> np.ndarray:
    T = model.T
    lam_bar = model.lam_bar
    q = (model.eps / model.b) ** 4
    noise = q * clip_low(lam_bar.real, 1, T) * clip_low(lam_bar, 3, T)
    r = (model.m + theta * model.ell).real
    return T * model.mult * np.abs(model.ell) ** 2 / (noise + 1.0) * clip_inv(r, 1, T)


def _lower_terms(model: SpectralModel) -> np.ndarray:
    T = model.T
    r_bar = model.lam_bar.real
    q = (model.eps / model.b) ** 4
    return model.mult * np.abs(model.ell) ** 2 / (q * clip_low(r_bar, 4, T) + 1.0) * clip_inv(r_bar, 1, T)


def _decay_fit(terms: np.ndarray, mult: np.ndarray):
    """Fit ``terms_k / mult_k ~ C x_k^p`` over the last quartile of modes.

    ``x_k`` is the running real dimension.  Returns ``(p, density_K, x_K)`` or
    None when there are too few modes or too few nonzero terms.
    """
    K = len(terms)
    if K < TAIL_MIN_MODES:
        return None
    x = np.cumsum(mult)
    dens = terms / mult
    start = K - max(TAIL_MIN_MODES // 2, K // 4)
    sel = slice(start, K)
    xs, ds = x[sel], dens[sel]
    keep = ds > 0
    if keep.sum() < 2:
        # no nonzero terms at the end of the spectrum: treat as fully decayed
        return (-math.inf, 0.0, float(x[-1]))
    lx, ld = np.log(xs[keep]), np.log(ds[keep])
    if np.ptp(lx) == 0:
        return None
    p = float(np.polyfit(lx, ld, 1)[0])
    return p, float(dens[-1]), float(x[-1])


def _diverges(terms, mult) -> bool:
    fit = _decay_fit(terms, mult)
    return fit is not None and fit[0] >= -1.0


def info_In(model: SpectralModel, theta: float, detect_divergence: bool = True) -> float:
    """Information ``I_n(theta)``; ``inf`` when the summands stop decaying."""
    terms = _info_terms(model, theta)
    if detect_divergence and _diverges(terms, model.mult):
        return math.inf
    return float(np.sum(terms))


def lower_bound_rate(model: SpectralModel, detect_divergence: bool = True) -> float:
    """Minimax lower-bound rate ``v_n``; 0 if the mode sum diverges, inf if it is 0."""
    terms = _lower_terms(model)
    if detect_divergence and _diverges(terms, model.mult):
        return 0.0
    s = float(np.sum(terms))
    if s == 0.0:
        return math.inf
    return 1.0 / math.sqrt(model.T * s)


def varn_condition_ratio(model: SpectralModel, theta: float) -> float:
    """Variance-condition left-hand side divided by ``I_n(theta)^2``."""
    T = model.T
    lam_bar = model.lam_bar
    q = (model.eps / model.b) ** 4
    noise = q * clip_low(lam_bar.real, 1, T) * clip_low(lam_bar, 3, T)
    r = (model.m + theta * model.ell).real
    inner = q * clip_low(lam_bar, 1, T) + clip_inv(r, 3, T)
    lhs = T * float(np.sum(model.mult * np.abs(model.ell) ** 4 / (noise + 1.0) ** 2 * inner))
    info = info_In(model, theta, detect_divergence=False)
    if info == 0.0:
        return math.inf
    return lhs / info ** 2


def truncation_tail(model: SpectralModel, theta: float | None = None) -> float:
    """Integral-comparison estimate of the information omitted by truncation.

    Complete one-mode models have no tail.  Otherwise the per-dimension summand
    is fitted as ``C x^p`` on the last quartile and the tail is
    ``density_K x_K / (-p - 1)``; ``inf`` when ``p >= -1`` or the fit is
    impossible (fewer than 8 modes, constant magnitudes).
    """
    if len(model) == 1:
        return 0.0
    theta = model.theta_hi if theta is None else theta
    terms = _info_terms(model, theta)
    fit = _decay_fit(terms, model.mult)
    if fit is None:
        return math.inf
    p, dens, xK = fit
    if p == -math.inf:
        return 0.0
    if p >= -1.0:
        return math.inf
    return dens * xK / (-p - 1.0)


# ---------------------------------------------------------------------------
# exponent records


def _pw(record: dict, values: dict) -> float:
    out = 1.0
    for name, power in record.items():
        if power == 0:
            continue
        if name == "log_e_eps":
            eps = values["eps"]
            base = math.inf if eps == 0 else math.log(math.e / eps)
        else:
            base = values[name]
        out *= base ** float(power)
    return out


def _scale(record: dict, factor) -> dict:
    return {k: v * factor for k, v in record.items()}


def _add(*records) -> dict:
    out: dict = {}
    for rec in records:
        for k, v in rec.items():
            out[k] = out.get(k, 0) + v
    return {k: v for k, v in out.items() if v != 0}


def _frac(x):
    return Fraction(x).limit_denominator(10**6) if not isinstance(x, Fraction) else x


@dataclass(frozen=True)
class ClosedFormRate:
    rate: float
    exponents: dict
    regime: str
    validity: dict = field(default_factory=dict)
    threshold: dict | None = None

    def as_tuple(self):
        return self.rate, self.exponents, self.regime


def _defaults(params, **defaults):
    out = dict(defaults)
    out.update(params)
    return out


def parametric_rate(example_id: str, params: dict) -> ClosedFormRate:
    """Closed-form parametric rate for one of ``ou``, ``frac_laplacian``,
    ``transport``, ``source``.

    ``params`` may hold ``d, rho, beta, T, eps, nu, sigma, theta_bar, theta``.
    When a dimension bound fails the verdict is ``identifiable`` with rate 0.
    """
    p = _defaults(params, d=1, rho=1.0, beta=0.0, T=1.0, eps=0.0, nu=1.0, sigma=1.0, theta_bar=1.0)
    d, beta = int(p["d"]), _frac(p["beta"])
    T, eps, nu = float(p["T"]), float(p["eps"]), float(p["nu"])
    vals = {"T": T, "eps": eps, "nu": nu, "sigma": float(p["sigma"]),
            "theta_bar": float(p["theta_bar"]), "theta": float(p.get("theta", p["theta_bar"]))}
    half = Fraction(1, 2)

    if example_id == "ou":
        th, thb, sig = vals["theta"], vals["theta_bar"], vals["sigma"]
        time_part = {"theta": half, "T": -half} if th * T >= 1 else {"T": Fraction(-1)}
        noisy = eps * thb / sig > 1
        noise_part = {"eps": Fraction(2), "sigma": Fraction(-2), "theta_bar": Fraction(2)} if noisy else {}
        rec = _add(time_part, noise_part)
        regime = ("ergodic" if th * T >= 1 else "null_recurrent") + ("+noise_dominated" if noisy else "")
        rate = max(math.sqrt(th / T), 1 / T) * max(eps ** 2 * thb ** 2 / sig ** 2, 1.0)
        return ClosedFormRate(rate, rec, regime, {"rate_to_zero": rate < 1})

    if example_id == "frac_laplacian":
        rho = _frac(p["rho"])
        ok = d < (6 + 8 * beta) * rho
        if not ok:
            return ClosedFormRate(0.0, {}, "identifiable", {"dimension": False})
        rec = {"T": -half, "eps": (2 * rho + d) / (4 * rho * (1 + beta))}
        return ClosedFormRate(_pw(rec, vals), rec, "minimax", {"dimension": True})

    if example_id == "transport":
        ok = d < 8 + 8 * beta
        premise = nu ** float(3 + 8 * beta) >= eps ** 8 * T ** float(-5 - 8 * beta)
        if not ok:
            return ClosedFormRate(0.0, {}, "identifiable", {"dimension": False, "premise": premise})
        if nu >= eps ** float(1 / (1 + 2 * beta)):
            rec = {"T": -half, "nu": (2 + d + 2 * beta) / (4 + 4 * beta), "eps": Fraction(d) / (4 + 4 * beta)}
            regime = "minimax"
        else:
            rec = {"T": -half, "nu": (5 + d + 8 * beta) / (10 + 16 * beta), "eps": Fraction(2 * d) / (5 + 8 * beta)}
            regime = "upper_bound_only"
        return ClosedFormRate(_pw(rec, vals), rec, regime, {"dimension": True, "premise": premise})

    if example_id == "source":
        ok = d < 10 + 8 * beta
        if not ok:
            return ClosedFormRate(0.0, {}, "identifiable", {"dimension": False})
        rec = _source_par_record(d, beta)
        regime = "d1" if d == 1 else ("d2" if d == 2 else "d>=3")
        return ClosedFormRate(_pw(rec, vals), rec, regime, {"dimension": True})

    raise ValueError(f"unknown parametric example {example_id!r}")


def _source_par_record(d, beta):
    half = Fraction(1, 2)
    if d == 1:
        return {"T": -half, "nu": Fraction(1, 4)}
    if d == 2:
        return {"T": -half, "nu": half, "log_e_eps": -half}
    return {"T": -half, "nu": Fraction(d, 4), "eps": Fraction(d - 2) / (4 + 4 * _frac(beta))}


def _log_ratio(num: dict, den: dict, logs: dict) -> float:
    """Evaluate sum(num[k] * logs[k]) / sum(den[k] * logs[k]).

    ``logs['L'] = log(1/eps)`` may be infinite (eps = 0); the ratio is then
    its limit, the quotient of the ``L`` coefficients.
    """
    if math.isinf(logs.get("L", 0.0)) and den.get("L", 0):
        return num.get("L", 0) / den["L"]
    a = sum(float(c) * logs[k] for k, c in num.items())
    b = sum(float(c) * logs[k] for k, c in den.items())
    if b == 0:
        return math.nan
    return a / b


def nonparametric_rate(example_id: str, alpha: float, d: int, beta: float = 0.0, T: float = 1.0,
                       eps: float = 1.0, nu: float = 1.0) -> ClosedFormRate:
    """Pointwise nonparametric lower-bound rates with their regime switch.

    ``example_id`` is ``diffusivity``, ``transport`` or ``source``.  The
    ``alpha_min`` flags evaluate the limsup conditions at the given finite
    parameters (a finite-n proxy, not a limit statement).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    a = _frac(alpha)
    beta = _frac(beta)
    vals = {"T": T, "eps": eps, "nu": nu}
    L = math.inf if eps == 0 else math.log(1 / eps)
    logs = {"T": math.log(T), "L": L, "N": math.log(1 / nu),
            "LL": math.log(L) if 1 < L < math.inf else (math.inf if L == math.inf else 0.0)}

    if example_id == "diffusivity":
        valid = {"dimension": 1 <= d < 6 + 8 * beta}
        thr = {"eps": (1 - a) / (1 + beta)}
        classical = T <= _pw(thr, vals) if eps > 0 else False
        if classical:
            rec = _scale({"T": Fraction(1), "eps": -Fraction(d + 2) / (2 + 2 * beta)}, -a / (2 * a + d))
        else:
            rec = _scale({"T": Fraction(1), "eps": -(5 + 4 * beta) / (2 + 2 * beta)}, -a / (2 * a + 3 + 4 * beta))
        amin = _log_ratio({"T": 5 + 5 * beta, "L": 5}, {"T": 2 + 2 * beta, "L": 10 + 4 * beta}, logs)
        if math.isnan(amin):
            amin = float(Fraction(5) / (10 + 4 * beta))
        valid["alpha_min"] = float(a) > amin
        valid["alpha_min_value"] = amin
        return ClosedFormRate(_pw(rec, vals), rec, "classical" if classical else "ellbow", valid, thr)

    if example_id == "transport":
        valid = {"dimension": 1 <= d <= 7}
        thr = {"eps": -a, "nu": 1 - a}
        classical = eps > 0 and T <= _pw(thr, vals)
        if classical:
            rec = _scale({"T": Fraction(-1), "eps": Fraction(d, 2), "nu": Fraction(d + 2, 2)}, a / (2 * a + d))
        else:
            rec = {"T": -a / (2 * a + 5), "eps": 5 * a / (4 * a + 10), "nu": 7 * a / (4 * a + 10)}
        return ClosedFormRate(_pw(rec, vals), rec, "classical" if classical else "ellbow", valid, thr)

    if example_id == "source":
        valid = {"dimension": 1 <= d <= 9}
        vpar_rec = _source_par_record(d, 0)
        vpar = _pw(vpar_rec, vals)
        thr = {"eps": -a - Fraction(min(d, 2), 2), "nu": -a}
        classical = vpar >= (nu * eps) ** float((2 * a + d) / 4)
        if classical:
            rec = _scale(vpar_rec, 2 * a / (2 * a + d))
            regime = "classical"
        elif d <= 2:
            rec = _scale(_add(vpar_rec, {"nu": Fraction(1), "eps": Fraction(1)}), 2 * a / (2 * a + d + 4))
            regime = "ellbow"
        else:
            rec = _scale(_add(vpar_rec, {"nu": Fraction(7 - d, 4), "eps": Fraction(7 - d, 4)}), 2 * a / (2 * a + 7))
            regime = "ellbow"
        if classical:
            num = {1: {"T": 1, "L": -2 * d}, 2: {"T": 1, "LL": 1, "L": -2 * d}}.get(d, {"T": 1, "L": -(1.5 * d + 1)})
            den = {1: {"T": 2, "L": 4, "N": d + 1}, 2: {"T": 2, "LL": 2, "L": 4, "N": d + 1}}.get(
                d, {"T": 2, "L": d + 2, "N": d + 1})
        else:
            num = {1: {"T": 1, "L": -(2 * d + 6)}, 2: {"T": 1, "LL": 1, "L": -(2 * d + 6)}}.get(
                d, {"T": 1, "L": -11.5})
            den = {1: {"T": 2, "L": 8, "N": d + 5}, 2: {"T": 2, "LL": 2, "L": 8, "N": d + 5}}.get(
                d, {"T": 2, "L": 9, "N": 8})
        amin = _log_ratio(num, den, logs)
        valid["alpha_min"] = bool(math.isnan(amin) or float(a) > amin)
        valid["alpha_min_value"] = amin
        return ClosedFormRate(_pw(rec, vals), rec, regime, valid, thr)

    raise ValueError(f"unknown nonparametric example {example_id!r}")


def exponents_as_floats(record: dict) -> dict:
    return {k: float(v) for k, v in record.items()}


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class RateReport:
    I_n: float
    v_n_lower: float
    varn_ratio: float
    closed_form_rate: float | None
    regime: str | None
    exponents: dict | None
    validity: dict
    tail_estimate: float

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        if self.exponents is not None:
            out["exponents"] = {k: str(v) for k, v in self.exponents.items()}
        return out


def closed_form_for(model: SpectralModel, theta: float | None = None) -> ClosedFormRate | None:
    """The example rate matching a model built from a recipe, if any."""
    rec = model.recipe
    if rec is None:
        return None
    common = {"d": rec.d, "beta": rec.beta, "T": model.T, "eps": model.eps, "nu": rec.nu}
    if rec.family == "ou":
        return parametric_rate("ou", {"T": model.T, "eps": model.eps, "sigma": rec.sigma,
                                      "theta_bar": model.theta_hi,
                                      "theta": model.theta_hi if theta is None else theta})
    if rec.family in ("heat", "frac_laplacian"):
        rho = 1.0 if rec.family == "heat" else rec.rho
        return parametric_rate("frac_laplacian", dict(common, rho=rho))
    if rec.family in ("transport", "source"):
        return parametric_rate(rec.family, common)
    return None


def rate_report(model: SpectralModel, theta: float | None = None) -> RateReport:
    theta = model.theta_hi if theta is None else theta
    I = info_In(model, theta)
    v = lower_bound_rate(model)
    cf = closed_form_for(model, theta)
    I_bar = info_In(model, model.theta_hi)
    validity = {
        # the two inequalities of the simplified sufficient condition, at face value
        "interval_fits_rate": bool(model.theta_lo + (I_bar ** -0.5 if I_bar > 0 else math.inf) <= model.theta_hi),
        "theta_range_ratio": model.theta_hi / model.theta_lo if model.theta_lo > 0 else math.inf,
    }
    if cf is not None:
        validity.update({f"closed_form_{k}": v_ for k, v_ in cf.validity.items()})
    return RateReport(I_n=I, v_n_lower=v, varn_ratio=varn_condition_ratio(model, theta),
                      closed_form_rate=cf.rate if cf else None, regime=cf.regime if cf else None,
                      exponents=cf.exponents if cf else None, validity=validity,
                      tail_estimate=truncation_tail(model, theta))
