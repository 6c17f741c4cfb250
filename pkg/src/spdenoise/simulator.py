"""Exact-in-distribution simulation of the mode processes and noisy increments.

Each mode ``x`` solves ``dx = lam x dt + dw`` from ``x(0) = 0`` and is observed
through ``dy = b x dt + eps dv``.  Over one grid cell the pair
``(x(t+dt), int_t^{t+dt} x)`` is an exact linear-Gaussian update of
``x(t)``, so sampling it introduces no time-discretization error.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .spectral_model import ModeSpec, ModelRecipe, SpectralModel, assemble_lambda

RNG_ALGO = "philox4x64-splitmix64"

# SplitMix64 constants (Steele, Lea, Flood 2014); fixed for bit-reproducibility.
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_M1 = 0xBF58476D1CE4E5B9
_SM_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + _SM_GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _SM_M1) & _MASK
    z = ((z ^ (z >> 27)) * _SM_M2) & _MASK
    return z ^ (z >> 31)


def stream_key(master_seed: int, replicate: int, mode: int) -> int:
    """128-bit Philox key for the (master_seed, replicate, mode) stream."""
    h = splitmix64(int(master_seed) & _MASK)
    h = splitmix64(h ^ (int(replicate) & _MASK))
    h = splitmix64(h ^ (int(mode) & _MASK))
    lo = splitmix64(h ^ 0x5851F42D4C957F2D)
    return (h << 64) | lo


def mode_generator(master_seed: int, replicate: int, mode: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, replicate, mode)))


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1 or not self.T > 0:
            raise ValueError("a grid needs T > 0 and n_steps >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @classmethod
    def from_dt(cls, T: float, dt: float) -> "TimeGrid":
        return cls(float(T), max(1, int(math.ceil(T / dt - 1e-9))))


@dataclass(frozen=True)
class GridRule:
    """How to choose time grids for a model.

    ``kind`` is one of

    * ``"n_steps"``: every mode uses ``value`` steps,
    * ``"dt"``: every mode uses step ``value``,
    * ``"auto"``: one shared step ``min(dt_max, c / max_k |lam_bar_k|)``,
    * ``"per_mode"``: mode ``k`` uses ``min(dt_max, c / |lam_bar_k|)``.
    """

    kind: str = "auto"
    value: float = 0.2
    dt_max: float = 0.05

    def __post_init__(self):
        if self.kind not in ("n_steps", "dt", "auto", "per_mode"):
            raise ValueError(f"unknown grid rule {self.kind!r}")
        if not self.value > 0:
            raise ValueError("grid rule value must be positive")

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "dt_max": self.dt_max}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def grids(self, model: SpectralModel) -> tuple:
        K, T = len(model), model.T
        if self.kind == "n_steps":
            return (TimeGrid(T, int(self.value)),) * K
        if self.kind == "dt":
            return (TimeGrid.from_dt(T, self.value),) * K
        mag = np.abs(model.lam_bar)
        if self.kind == "auto":
            top = mag.max()
            dt = self.dt_max if top == 0 else min(self.dt_max, self.value / top)
            return (TimeGrid.from_dt(T, dt),) * K
        out = []
        for a in mag:
            dt = self.dt_max if a == 0 else min(self.dt_max, self.value / a)
            out.append(TimeGrid.from_dt(T, dt))
        return tuple(out)


def under_resolved_fraction(model: SpectralModel, grids: Sequence[TimeGrid], min_steps: int = 3) -> float:
    """Fraction of modes whose kernel window ``1/|lam_bar|`` spans fewer than ``min_steps`` cells."""
    mag = np.abs(model.lam_bar)
    count = 0
    for a, g in zip(mag, grids):
        width = min(1.0 / a, g.T) if a > 0 else g.T
        if math.ceil(width / g.dt - 1e-9) < min_steps:
            count += 1
    return count / len(model)


# ---------------------------------------------------------------------------
# one-step moments

_SERIES_TERMS = 24
_SERIES_RADIUS = 0.5


def _phi1(z: complex) -> complex:
    """(e^z - 1) / z, with the removable singularity filled in."""
    if abs(z) < _SERIES_RADIUS:
        term, total = 1.0 + 0j, 0j
        for k in range(1, _SERIES_TERMS + 1):
            total += term
            term *= z / (k + 1)
        return total
    return np.expm1(z) / z


def _double_series(lam: complex, dt: float, p0: int) -> complex:
    """sum_{k>=p0, l>=1} lam^(k-p0) conj(lam)^(l-1) dt^(k+l+1) / (k! l! (k+l+1))."""
    total = 0j
    lk = 1.0 + 0j
    for k in range(p0, p0 + _SERIES_TERMS):
        ll = 1.0 + 0j
        for l in range(1, _SERIES_TERMS + 1):
            total += lk * ll * dt ** (k + l + 1) / (math.factorial(k) * math.factorial(l) * (k + l + 1))
            ll *= np.conj(lam)
        lk *= lam
    return total


@lru_cache(maxsize=65536)
def _moments(lam: complex, dt: float):
    z = lam * dt
    r = lam.real
    var_x = dt * _phi1(2 * r * dt).real
    a = np.exp(z)
    phi = dt * _phi1(z)
    if abs(z) < _SERIES_RADIUS:
        # I = int_0^dt sum_{k>=1} lam^(k-1) u^k / k! dw; expanding the products
        # term by term avoids the cancellation in the closed forms below.
        var_I = _double_series(lam, dt, 1).real
        cov = _double_series(lam, dt, 0)
    else:
        var_I = (var_x - 2 * phi.real + dt) / abs(lam) ** 2
        cov = (var_x - phi) / np.conj(lam)
    return complex(a), complex(phi), float(var_x), float(var_I), complex(cov)


def step_moments(lam: complex, dt: float):
    """Transition matrix and innovation covariance of ``(x, int x)`` over one step.

    Returns ``(A, Sigma)`` with ``A = [[e^{lam dt}, 0], [phi, 1]]`` and ``Sigma``
    the 2x2 Hermitian covariance of ``(x_+, I)`` given ``x = 0``, normalized so
    that ``E|dw|^2 = dt``.
    """
    lam = complex(lam)
    if lam.real > 0:
        raise ValueError(f"step_moments needs Re(lambda) <= 0, got {lam}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    a, phi, vx, vI, cov = _moments(lam, float(dt))
    A = np.array([[a, 0], [phi, 1]], dtype=complex)
    S = np.array([[vx, cov], [np.conj(cov), vI]], dtype=complex)
    return A, S


def cov_kernel(lam, t, s):
    """``E[x(t) conj(x(s))]`` for the mode started at zero."""
    lam = complex(lam)
    r, j = lam.real, lam.imag
    lo, hi = abs(t - s), t + s
    if r == 0:
        integral = (hi - lo) / 2
    else:
        integral = math.exp(r * lo) * math.expm1(r * (hi - lo)) / (2 * r)
    return complex(np.exp(1j * j * (t - s)) * integral)


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True, eq=False)
class ObservationRecord:
    model: SpectralModel
    theta_true: float
    grids: tuple
    dY: tuple
    seed: int
    replicate: int = 0
    rng_algo: str = RNG_ALGO
    states: tuple | None = None

    @property
    def grid(self) -> TimeGrid:
        """The shared grid; raises if modes use different grids."""
        g = self.grids[0]
        if any(h != g for h in self.grids):
            raise ValueError("modes use different grids")
        return g

    def scaled(self, c: float) -> "ObservationRecord":
        return ObservationRecord(self.model, self.theta_true, self.grids,
                                 tuple(c * y for y in self.dY), self.seed, self.replicate,
                                 self.rng_algo, self.states)


def _resolve_grids(model, grid):
    if isinstance(grid, TimeGrid):
        grids = (grid,) * len(model)
    elif isinstance(grid, GridRule):
        grids = grid.grids(model)
    else:
        grids = tuple(grid)
        if len(grids) != len(model):
            raise ValueError("need one grid per mode")
    for g in grids:
        if abs(g.T - model.T) > 1e-9 * model.T:
            raise ValueError(f"grid horizon {g.T} differs from model horizon {model.T}")
    return grids


def _cgauss(gen, n, mult):
    """Standard (E|z|^2 = 1) Gaussians: real for mult 1, circular complex otherwise."""
    if mult == 1:
        return gen.standard_normal(n) + 0j
    g = gen.standard_normal((2, n))
    return (g[0] + 1j * g[1]) * math.sqrt(0.5)


def simulate_mode(lam, b, eps, mult, grid, gen, retain_state=False):
    """Sample the increments of one mode; returns ``(dY, x or None)``."""
    n, dt = grid.n_steps, grid.dt
    a, phi, vx, vI, cov = _moments(complex(lam), dt)
    if mult == 1:
        a, phi, cov = a.real + 0j, phi.real + 0j, cov.real + 0j
    z1 = _cgauss(gen, n, mult)
    z2 = _cgauss(gen, n, mult)
    zeta = _cgauss(gen, n, mult)
    l11 = math.sqrt(vx)
    l21 = np.conj(cov) / l11
    l22 = math.sqrt(max(vI - abs(l21) ** 2, 0.0))
    xi = l11 * z1
    eta = l21 * z1 + l22 * z2
    x = lfilter([1.0], [1.0, -a], xi)
    x_prev = np.empty(n, dtype=complex)
    x_prev[0] = 0.0
    x_prev[1:] = x[:-1]
    I = phi * x_prev + eta
    dY = b * (I + (eps / b) * (zeta * math.sqrt(dt)))
    if mult == 1:
        dY = dY.real + 0j
        x = x.real + 0j
    state = np.concatenate([[0j], x]) if retain_state else None
    return dY, state


def simulate_observations(model: SpectralModel, theta: float, grid, seed: int,
                          replicate: int = 0, retain_state: bool = False) -> ObservationRecord:
    """Simulate every mode of ``model`` at parameter ``theta``.

    ``grid`` is a :class:`TimeGrid` shared by all modes, a :class:`GridRule`, or
    a sequence of per-mode grids.  Mode ``k`` draws from its own stream keyed
    by ``(seed, replicate, k)``, so results do not depend on evaluation order.
    """
    lam, _, _ = assemble_lambda(model, theta)
    grids = _resolve_grids(model, grid)
    dYs, states = [], []
    for k, md in enumerate(model.modes):
        gen = mode_generator(seed, replicate, k)
        dY, x = simulate_mode(lam[k], md.b, model.eps, md.mult, grids[k], gen, retain_state)
        dY.setflags(write=False)
        dYs.append(dY)
        states.append(x)
    return ObservationRecord(model, float(theta), grids, tuple(dYs), int(seed), int(replicate),
                             RNG_ALGO, tuple(states) if retain_state else None)


def empirical_mode_covariance(records: Sequence[ObservationRecord], k: int, t_idx: int, s_idx: int):
    """Monte Carlo estimate of ``E[x_k(t) conj(x_k(s))]`` and its standard error."""
    if len(records) < 2:
        raise ValueError("need at least two records")
    g0 = records[0].grids[k]
    th0 = records[0].theta_true
    prods = []
    for rec in records:
        if rec.states is None:
            raise ValueError("state paths were not retained; simulate with retain_state=True")
        if rec.grids[k] != g0 or rec.theta_true != th0:
            raise ValueError("records use different grids or parameters")
        x = rec.states[k]
        prods.append(x[t_idx] * np.conj(x[s_idx]))
    prods = np.asarray(prods)
    mean = prods.mean()
    se = math.sqrt((np.var(prods.real, ddof=1) + np.var(prods.imag, ddof=1)) / len(prods))
    return complex(mean), se


# ---------------------------------------------------------------------------
# trajectory dump: magic, u64 header length, JSON header, then per mode the
# interleaved (re, im) pairs of dY as little-endian float64 (and the state
# path right after it when retained).

_MAGIC = b"SPDNREC1"


def _model_header(model: SpectralModel) -> dict:
    return {
        "theta_lo": model.theta_lo, "theta_hi": model.theta_hi, "eps": model.eps,
        "T": model.T, "dim": model.dim, "dom_C": model.dom_C,
        "recipe": model.recipe.to_dict() if model.recipe is not None else None,
        "modes": [[complex(md.m).real, complex(md.ell).real, complex(md.ell).imag, md.b, md.mult,
                   _label_to_json(md.label)] for md in model.modes],
    }


def _label_to_json(label):
    return list(label) if isinstance(label, tuple) else label


def _label_from_json(label):
    return tuple(label) if isinstance(label, list) else label


def _model_from_header(h: dict) -> SpectralModel:
    modes = tuple(ModeSpec(m=complex(m), ell=complex(er, ei), b=b, mult=int(mult),
                           label=_label_from_json(lab)) for m, er, ei, b, mult, lab in h["modes"])
    recipe = ModelRecipe.from_dict(h["recipe"]) if h["recipe"] is not None else None
    meta = {"family": recipe.family} if recipe else {}
    return SpectralModel(modes=modes, theta_lo=h["theta_lo"], theta_hi=h["theta_hi"], eps=h["eps"],
                         T=h["T"], dim=h["dim"], meta=meta, dom_C=h["dom_C"], recipe=recipe)


def save_record(path, rec: ObservationRecord) -> None:
    header = {
        "model": _model_header(rec.model), "theta_true": rec.theta_true,
        "grids": [[g.T, g.n_steps] for g in rec.grids], "seed": rec.seed,
        "replicate": rec.replicate, "rng_algo": rec.rng_algo,
        "has_state": rec.states is not None,
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for k, y in enumerate(rec.dY):
            fh.write(np.ascontiguousarray(y, dtype="<c16").tobytes())
            if rec.states is not None:
                fh.write(np.ascontiguousarray(rec.states[k], dtype="<c16").tobytes())


def load_record(path) -> ObservationRecord:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a trajectory dump")
        (size,) = struct.unpack("<Q", fh.read(8))
        h = json.loads(fh.read(size))
        grids = tuple(TimeGrid(T, n) for T, n in h["grids"])
        dYs, states = [], []
        for g in grids:
            dYs.append(np.frombuffer(fh.read(16 * g.n_steps), dtype="<c16").astype(complex))
            if h["has_state"]:
                states.append(np.frombuffer(fh.read(16 * (g.n_steps + 1)), dtype="<c16").astype(complex))
    return ObservationRecord(_model_from_header(h["model"]), h["theta_true"], grids, tuple(dYs),
                             h["seed"], h["replicate"], h["rng_algo"],
                             tuple(states) if h["has_state"] else None)


def write_record_csv(path, rec: ObservationRecord) -> None:
    """Long-format CSV: one row per (mode, step)."""
    with open(path, "w") as fh:
        fh.write("mode,step,t,re,im\n")
        for k, (y, g) in enumerate(zip(rec.dY, rec.grids)):
            t = np.arange(1, g.n_steps + 1) * g.dt
            for i in range(g.n_steps):
                fh.write(f"{k},{i + 1},{t[i]!r},{y[i].real!r},{y[i].imag!r}\n")
