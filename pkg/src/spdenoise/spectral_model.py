"""Diagonal (spectral) representation of the drift family ``A_theta = M + theta * Lambda``.

Every model is a list of modes.  Mode ``k`` carries the eigenvalue ``m`` of the
self-adjoint part ``M``, the eigenvalue ``ell`` of ``Lambda``, the eigenvalue
``b`` of the noise operator and a real multiplicity.  A conjugate pair of
lattice modes is stored once with ``mult=2``; sums over the real Hilbert space
are then ``mult * Re(conj(u) * v)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

MODE_BUDGET = 250_000

FAMILIES = ("ou", "frac_laplacian", "heat", "transport", "source")


def clip_inv(a, p, T):
    """``min(|a|**-p, T**p)``, with the value ``T**p`` at ``a == 0``."""
    mag = np.abs(np.asarray(a, dtype=complex))
    with np.errstate(divide="ignore"):
        inv = np.where(mag > 0, np.power(np.where(mag > 0, mag, 1.0), -p), np.inf)
    out = np.minimum(inv, float(T) ** p)
    return out if np.ndim(out) else float(out)


def clip_low(a, p, T):
    """``max(|a|**p, T**-p)``; the reciprocal of :func:`clip_inv`."""
    mag = np.abs(np.asarray(a))
    out = np.maximum(np.power(mag, p), float(T) ** (-p))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class ModeSpec:
    m: complex
    ell: complex
    b: float
    mult: int
    label: Any = None

    def __post_init__(self):
        m = complex(self.m)
        if m.imag != 0.0:
            raise ValueError(f"mode {self.label}: m must be real, got {m}")
        if m.real > 0.0:
            raise ValueError(f"mode {self.label}: Re(m) must be <= 0, got {m.real}")
        if complex(self.ell).real > 0.0:
            raise ValueError(f"mode {self.label}: Re(ell) must be <= 0, got {self.ell}")
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise ValueError(f"mode {self.label}: b must be positive, got {self.b}")
        if self.mult not in (1, 2):
            raise ValueError(f"mode {self.label}: mult must be 1 or 2, got {self.mult}")
        if self.mult == 1 and complex(self.ell).imag != 0.0:
            # a self-conjugate mode evolves in a real coordinate
            raise ValueError(f"mode {self.label}: mult=1 requires a real ell")


@dataclass(frozen=True)
class ModelRecipe:
    """The serializable description a :class:`SpectralModel` is built from."""

    family: str
    d: int = 1
    nu: float = 1.0
    beta: float = 0.0
    rho: float = 1.0
    xi: tuple = (1.0,)
    sigma: float = 1.0
    eps: float = 0.0
    T: float = 1.0
    theta_lo: float = 0.5
    theta_hi: float = 1.5
    K_lattice: int | None = None
    K_max: int | None = None
    weyl_c: float | None = None
    dom_C: float = 10.0

    KEYS = ("family", "d", "nu", "beta", "rho", "xi", "sigma", "eps", "T",
            "theta_lo", "theta_hi", "K_lattice", "K_max", "weyl_c", "dom_C")

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.KEYS}
        out["xi"] = list(self.xi)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelRecipe":
        unknown = set(data) - set(cls.KEYS)
        if unknown:
            raise ValueError(f"unknown model keys: {sorted(unknown)}")
        if "family" not in data:
            raise ValueError("model description needs a 'family' key")
        kw = dict(data)
        if "xi" in kw and kw["xi"] is not None:
            xi = kw["xi"]
            kw["xi"] = tuple(float(x) for x in (xi if isinstance(xi, (list, tuple)) else [xi]))
        for key in ("d", "K_lattice", "K_max"):
            if kw.get(key) is not None:
                kw[key] = int(kw[key])
        for key in ("nu", "beta", "rho", "sigma", "eps", "T", "theta_lo", "theta_hi", "weyl_c", "dom_C"):
            if kw.get(key) is not None:
                kw[key] = float(kw[key])
        return cls(**kw)

    def with_axis(self, axis: str, value: float) -> "ModelRecipe":
        if axis not in ("T", "eps", "nu"):
            raise ValueError(f"sweep axis must be T, eps or nu, got {axis!r}")
        return replace(self, **{axis: float(value)})

    def build(self) -> "SpectralModel":
        return build_model(self)


def dumps_recipe(recipe: ModelRecipe) -> str:
    return json.dumps(recipe.to_dict(), indent=2, sort_keys=True)


def loads_recipe(text: str) -> ModelRecipe:
    return ModelRecipe.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class SpectralModel:
    modes: tuple
    theta_lo: float
    theta_hi: float
    eps: float
    T: float
    dim: int = 1
    meta: dict = field(default_factory=dict)
    dom_C: float = 10.0
    recipe: ModelRecipe | None = None

    def __post_init__(self):
        if len(self.modes) == 0:
            raise ValueError("a model needs at least one mode")
        if not self.theta_hi > self.theta_lo:
            raise ValueError("theta_hi must exceed theta_lo")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")
        if not self.T >= 1.0:
            raise ValueError(f"T must be at least 1, got {self.T}")
        m, ell, b, mult = self.m, self.ell, self.b, self.mult
        for th in (self.theta_lo, self.theta_hi):
            bad = np.nonzero(m + th * ell.real > 0.0)[0]
            if bad.size:
                k = int(bad[0])
                raise ValueError(
                    f"mode {k} ({self.modes[k].label}) has Re(lambda) > 0 at theta={th}")
        lam_bar = m + self.theta_hi * ell
        dom = np.abs(lam_bar.imag) > self.dom_C * (1.0 + np.abs(lam_bar.real))
        if dom.any():
            k = int(np.nonzero(dom)[0][0])
            raise ValueError(
                f"mode {k} ({self.modes[k].label}) violates |Im| <= C(1+|Re|) with C={self.dom_C}")

    # cached array views; the dataclass is frozen so these never go stale
    def _arr(self, name, fn, dtype):
        cache = self.__dict__.setdefault("_cache", {})
        if name not in cache:
            arr = np.array([fn(md) for md in self.modes], dtype=dtype)
            arr.setflags(write=False)
            cache[name] = arr
        return cache[name]

    @property
    def m(self):
        return self._arr("m", lambda md: complex(md.m).real, float)

    @property
    def ell(self):
        return self._arr("ell", lambda md: complex(md.ell), complex)

    @property
    def b(self):
        return self._arr("b", lambda md: md.b, float)

    @property
    def mult(self):
        return self._arr("mult", lambda md: md.mult, float)

    @property
    def theta_bar(self) -> float:
        return self.theta_hi

    def lam(self, theta) -> np.ndarray:
        return self.m + theta * self.ell

    @property
    def lam_bar(self) -> np.ndarray:
        return self.lam(self.theta_hi)

    def with_eps(self, eps: float) -> "SpectralModel":
        rec = replace(self.recipe, eps=eps) if self.recipe is not None else None
        return replace(self, eps=eps, recipe=rec)

    def __len__(self):
        return len(self.modes)


def assemble_lambda(model: SpectralModel, theta: float):
    """Return ``(lam, r, j)`` arrays for ``lam_k = m_k + theta * ell_k``."""
    if not model.theta_lo <= theta <= model.theta_hi:
        raise ValueError(f"theta={theta} outside [{model.theta_lo}, {model.theta_hi}]")
    lam = model.lam(theta)
    bad = np.nonzero(lam.real > 0.0)[0]
    if bad.size:
        raise ValueError(f"mode {int(bad[0])} has Re(lambda) = {lam.real[bad[0]]} > 0")
    return lam, lam.real.copy(), lam.imag.copy()


# ---------------------------------------------------------------------------
# eigenvalue generators


def _lattice_representatives(d: int, K: int):
    """Integer points with |l| <= K whose first nonzero coordinate is positive, plus 0."""
    rng = range(-K, K + 1)
    reps = []
    for pt in itertools.product(rng, repeat=d):
        n2 = sum(c * c for c in pt)
        if n2 > K * K:
            continue
        nz = [c for c in pt if c != 0]
        if nz and nz[0] < 0:
            continue
        reps.append((n2, pt))
    reps.sort()
    return reps


def eigs_torus_laplacian(d: int, nu: float, K_lattice: int, budget: int = MODE_BUDGET):
    """Laplacian modes on the unit torus, one representative per conjugate pair.

    ``ell`` and ``b`` are placeholders (0 and 1) to be set by the family builders.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"torus generator supports d in {{1, 2, 3}}, got {d}")
    if K_lattice < 0:
        raise ValueError("K_lattice must be nonnegative")
    if nu <= 0:
        raise ValueError("nu must be positive")
    approx = (2 * K_lattice + 1) ** d
    if approx > 2 * budget + 1:
        raise ValueError(f"K_lattice={K_lattice} in d={d} exceeds the mode budget {budget}")
    modes = []
    for n2, pt in _lattice_representatives(d, K_lattice):
        mult = 1 if n2 == 0 else 2
        m = -((2 * math.pi) ** 2) * nu * n2
        modes.append(ModeSpec(m=m + 0j, ell=0j, b=1.0, mult=mult, label=pt))
    if len(modes) > budget:
        raise ValueError(f"{len(modes)} modes exceed the mode budget {budget}")
    return modes


def eigs_weyl_proxy(d: int, c: float, K_max: int) -> np.ndarray:
    """Eigenvalue magnitudes ``c * k**(2/d)`` for ``k = 1..K_max``."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    if c <= 0:
        raise ValueError("c must be positive")
    if K_max < 1:
        raise ValueError("K_max must be at least 1")
    k = np.arange(1, K_max + 1, dtype=float)
    return c * k ** (2.0 / d)


def _base_spectrum(d, base_eigs):
    """Normalize ``base_eigs`` into (mu, mult, label) triples.

    Accepts either torus :class:`ModeSpec` output (``mu = -m``) or a plain
    array of magnitudes (mult 1, labelled by index).
    """
    if len(base_eigs) and isinstance(base_eigs[0], ModeSpec):
        return [(-complex(md.m).real, md.mult, md.label) for md in base_eigs]
    return [(float(mu), 1, k + 1) for k, mu in enumerate(np.asarray(base_eigs, dtype=float))]


def _finish(modes, recipe, eps, T, theta_range, d, meta):
    lo, hi = theta_range
    return SpectralModel(modes=tuple(modes), theta_lo=float(lo), theta_hi=float(hi),
                         eps=float(eps), T=float(T), dim=d, meta=meta,
                         dom_C=recipe.dom_C if recipe else 10.0, recipe=recipe)


def model_fractional_laplacian(d, rho, beta, base_eigs, eps, T, theta_range, recipe=None):
    """Modes ``m=0``, ``ell=-mu**rho``, ``b=(1+mu**rho)**-beta``."""
    if theta_range[0] <= 0:
        raise ValueError("the fractional Laplacian family needs theta_lo > 0")
    if rho <= 0 or beta < 0:
        raise ValueError("need rho > 0 and beta >= 0")
    modes = []
    for mu, mult, label in _base_spectrum(d, base_eigs):
        a = mu ** rho
        modes.append(ModeSpec(m=0j, ell=complex(-a), b=(1.0 + a) ** (-beta), mult=mult, label=label))
    return _finish(modes, recipe, eps, T, theta_range, d,
                   {"family": "frac_laplacian", "rho": rho, "beta": beta})


def model_transport(d, nu, xi, beta, K_lattice, eps, T, theta_range, recipe=None):
    """Torus modes ``m=-(2pi)^2 nu |l|^2``, ``ell=2 pi i <xi, l>``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (d,):
        raise ValueError(f"xi must have length d={d}")
    if not np.any(xi != 0):
        raise ValueError("xi must be nonzero")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    modes = []
    for md in eigs_torus_laplacian(d, nu, K_lattice):
        pt = np.asarray(md.label, dtype=float)
        n2 = float(pt @ pt)
        ell = 2j * math.pi * float(xi @ pt)
        b = (1.0 + (2 * math.pi) ** 2 * n2) ** (-beta)
        modes.append(replace(md, ell=ell, b=b))
    return _finish(modes, recipe, eps, T, theta_range, d,
                   {"family": "transport", "nu": nu, "xi": xi.tolist(), "beta": beta})


def model_source(d, nu, beta, base_eigs, eps, T, theta_range, recipe=None):
    """Modes ``m=-nu*mu``, ``ell=-1``, ``b=(1+nu*mu)**-beta``.

    ``base_eigs`` holds magnitudes of the unscaled Laplacian (torus modes built
    with ``nu=1`` or a Weyl proxy).
    """
    if theta_range[0] <= 0:
        raise ValueError("the source family needs theta_lo > 0")
    if nu <= 0 or beta < 0:
        raise ValueError("need nu > 0 and beta >= 0")
    modes = []
    for mu, mult, label in _base_spectrum(d, base_eigs):
        a = nu * mu
        modes.append(ModeSpec(m=complex(-a), ell=-1 + 0j, b=(1.0 + a) ** (-beta), mult=mult, label=label))
    return _finish(modes, recipe, eps, T, theta_range, d,
                   {"family": "source", "nu": nu, "beta": beta})


def model_ou(sigma, eps, T, theta_range, recipe=None):
    """One mode ``m=0``, ``ell=-1``, ``b=sigma``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if theta_range[0] < 0:
        raise ValueError("the OU family needs theta_lo >= 0")
    modes = [ModeSpec(m=0j, ell=-1 + 0j, b=float(sigma), mult=1, label=0)]
    return _finish(modes, recipe, eps, T, theta_range, 1, {"family": "ou", "sigma": sigma})


def _base_for(recipe: ModelRecipe, scale: float):
    """Unscaled Laplacian magnitudes from the torus lattice or the Weyl proxy."""
    if recipe.weyl_c is not None:
        if recipe.K_max is None:
            raise ValueError("a Weyl-proxy base needs K_max")
        return eigs_weyl_proxy(recipe.d, recipe.weyl_c * scale, recipe.K_max)
    if recipe.K_lattice is None:
        raise ValueError("a torus base needs K_lattice (or weyl_c with K_max)")
    return eigs_torus_laplacian(recipe.d, scale, recipe.K_lattice)


def build_model(recipe: ModelRecipe) -> SpectralModel:
    fam = recipe.family
    rng = (recipe.theta_lo, recipe.theta_hi)
    if fam == "ou":
        return model_ou(recipe.sigma, recipe.eps, recipe.T, rng, recipe=recipe)
    if fam in ("frac_laplacian", "heat"):
        # heat is the rho=1 member; nu scales the Laplacian, (nu * Delta) has magnitudes nu * mu
        rho = 1.0 if fam == "heat" else recipe.rho
        base = _base_for(recipe, recipe.nu)
        return model_fractional_laplacian(recipe.d, rho, recipe.beta, base, recipe.eps,
                                          recipe.T, rng, recipe=recipe)
    if fam == "transport":
        if recipe.K_lattice is None:
            raise ValueError("the transport family needs K_lattice")
        xi = recipe.xi if len(recipe.xi) == recipe.d else tuple([recipe.xi[0]] + [0.0] * (recipe.d - 1))
        return model_transport(recipe.d, recipe.nu, xi, recipe.beta, recipe.K_lattice,
                               recipe.eps, recipe.T, rng, recipe=recipe)
    if fam == "source":
        base = _base_for(recipe, 1.0)
        return model_source(recipe.d, recipe.nu, recipe.beta, base, recipe.eps,
                            recipe.T, rng, recipe=recipe)
    raise ValueError(f"unknown family {fam!r}; expected one of {FAMILIES}")
