import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdenoise.information import (
    info_In, lower_bound_rate, rate_report, truncation_tail, varn_condition_ratio,
)
from spdenoise.spectral_model import ModeSpec, ModelRecipe, SpectralModel


def single(eps=0.0, T=1.0, b=1.0, lo=0.5, hi=1.0):
    return SpectralModel((ModeSpec(m=0.0, ell=-1.0, b=b, mult=1),), lo, hi, eps, T)


def ou(T, eps=0.0, sigma=1.0, lo=0.5, hi=1.0):
    return ModelRecipe(family="ou", eps=eps, T=T, sigma=sigma, theta_lo=lo, theta_hi=hi).build()


def rescaled(model, s):
    modes = tuple(replace(md, b=md.b * s) for md in model.modes)
    return replace(model, modes=modes, eps=model.eps * s, recipe=None)


def random_model(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 30))
    modes = []
    for _ in range(K):
        ell = -rng.uniform(0.1, 50)
        modes.append(ModeSpec(m=-rng.uniform(0, 5), ell=ell, b=rng.uniform(0.2, 2), mult=int(rng.integers(1, 3))))
    lo = rng.uniform(0.2, 1)
    return SpectralModel(tuple(modes), lo, lo * rng.uniform(1.1, 3), rng.uniform(0, 1), rng.uniform(1, 100))


def test_info_single_mode_examples():
    assert info_In(single(), 1.0) == pytest.approx(1.0)
    assert info_In(single(eps=1.0), 1.0) == pytest.approx(0.5)


@pytest.mark.parametrize("T", [1.0, 10.0, 500.0])
@pytest.mark.parametrize("eps", [0.0, 0.3, 1.0])
@pytest.mark.parametrize("sigma", [0.5, 2.0])
def test_info_ou_closed_form(T, eps, sigma):
    tb, th = 1.5, 0.7
    model = ou(T, eps, sigma, lo=0.5, hi=tb)
    want = T / (eps ** 4 * tb ** 4 / sigma ** 4 + 1) * min(1 / th, T)
    assert info_In(model, th) == pytest.approx(want, rel=1e-13)


def test_lower_bound_ou_example():
    assert lower_bound_rate(ou(4.0, 0.0, 1.0, lo=0.5, hi=1.0)) == pytest.approx(0.5)


def test_lower_bound_ou_matches_closed_form_on_grid():
    ratios = []
    for T in (1.0, 10.0, 100.0, 1e4):
        for eps in (0.0, 0.1, 0.5, 0.9, 1.0):
            tb = 1.0 if eps < 0.5 else 3.0
            v = lower_bound_rate(ou(T, eps, 1.0, lo=0.1, hi=tb))
            ref = max(math.sqrt(tb / T), 1 / T) * max(eps ** 2 * tb ** 2, 1.0)
            ratios.append(v / ref)
    assert len(ratios) == 20
    assert 0.25 <= min(ratios) and max(ratios) <= 4


def _transport_v(**kw):
    base = dict(family="transport", d=1, K_lattice=20_000, T=10.0, theta_lo=-1, theta_hi=1)
    base.update(kw)
    return lower_bound_rate(ModelRecipe(**base).build())


def test_transport_lower_bound_scaling():
    grid = np.array([0.1, 0.05, 0.02, 0.01])
    nu_slope = np.polyfit(np.log(grid), np.log([_transport_v(nu=v, eps=1e-4) for v in grid]), 1)[0]
    eps_grid = grid * 1e-3
    eps_slope = np.polyfit(np.log(eps_grid), np.log([_transport_v(nu=0.1, eps=e) for e in eps_grid]), 1)[0]
    T_grid = np.array([10.0, 20.0, 50.0, 100.0])
    T_slope = np.polyfit(np.log(T_grid), np.log([_transport_v(nu=0.1, eps=1e-4, T=t) for t in T_grid]), 1)[0]
    assert nu_slope == pytest.approx(0.75, abs=0.05)
    assert eps_slope == pytest.approx(0.25, abs=0.05)
    assert T_slope == pytest.approx(-0.5, abs=0.05)


def test_lower_bound_inf_without_informative_modes():
    model = ModelRecipe(family="transport", nu=0.1, K_lattice=0, T=2, theta_lo=-1, theta_hi=1).build()
    assert lower_bound_rate(model) == math.inf


def test_divergence_detected():
    # the heat sum in d=3 without observation noise does not converge
    model = ModelRecipe(family="heat", d=3, nu=0.01, K_lattice=8, eps=0.0, T=2, theta_lo=0.5, theta_hi=1.5).build()
    assert info_In(model, 1.0) == math.inf
    assert lower_bound_rate(model) == 0.0
    assert math.isfinite(info_In(model, 1.0, detect_divergence=False))


def test_varn_ratio_ou():
    for T in (1.0, 10.0, 100.0):
        assert varn_condition_ratio(ou(T, lo=0.5, hi=1.0), 1.0) == pytest.approx(1 / T)
    vals = [varn_condition_ratio(ou(T, eps=0.3, lo=0.5, hi=1.0), 1.0) for T in (10, 100, 1e3, 1e4)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("seed", range(5))
def test_scaling_equivalence_exact(seed):
    model = random_model(seed)
    model = replace(model, eps=model.eps / 3)  # keep eps * s inside [0, 1]
    th = model.theta_lo
    for s in (2.0, 0.25):
        other = rescaled(model, s)
        assert info_In(other, th) == info_In(model, th)
        assert lower_bound_rate(other) == lower_bound_rate(model)
        assert varn_condition_ratio(other, th) == varn_condition_ratio(model, th)
    other = rescaled(model, 3.0)
    assert info_In(other, th) == pytest.approx(info_In(model, th), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.9), st.floats(1.01, 5.0))
def test_info_monotone_in_eps_and_T(seed, eps_shift, T_factor):
    model = random_model(seed)
    th = model.theta_lo
    base = info_In(model, th, detect_divergence=False)
    noisier = replace(model, eps=min(1.0, model.eps + eps_shift))
    longer = replace(model, T=model.T * T_factor)
    assert info_In(noisier, th, detect_divergence=False) <= base * (1 + 1e-12)
    assert info_In(longer, th, detect_divergence=False) >= base * (1 - 1e-12)


def test_lower_bound_vs_information_random_suite():
    ratios = []
    for seed in range(50):
        model = random_model(100 + seed)
        v = lower_bound_rate(model, detect_divergence=False)
        info = info_In(model, model.theta_hi, detect_divergence=False)
        ratios.append(v * math.sqrt(info))
    assert 1 / 8 <= min(ratios) and max(ratios) <= 8


def test_truncation_tail():
    total = {}
    tails = {}
    for K in (200, 2000):
        model = ModelRecipe(family="heat", nu=1.0, K_lattice=K, eps=0.1, T=10, theta_lo=0.5, theta_hi=1.5).build()
        total[K] = info_In(model, 1.0)
        tails[K] = truncation_tail(model, 1.0)
    assert tails[200] / total[200] < 1e-2
    assert (total[2000] - total[200]) / total[200] < 1e-2
    assert truncation_tail(single()) == 0.0
    flat = SpectralModel(tuple(ModeSpec(m=0.0, ell=-1.0, b=1.0, mult=1) for _ in range(12)), 0.5, 1.0, 0.1, 5.0)
    assert truncation_tail(flat) == math.inf
    few = ModelRecipe(family="heat", nu=1.0, K_lattice=3, eps=0.1, T=10).build()
    assert truncation_tail(few) == math.inf


def test_rate_report_fields():
    model = ModelRecipe(family="heat", nu=1e-3, K_lattice=50, eps=0.1, T=20, theta_lo=0.5, theta_hi=1.5).build()
    rep = rate_report(model)
    assert rep.regime == "minimax"
    for value in (rep.I_n, rep.v_n_lower, rep.varn_ratio, rep.closed_form_rate, rep.tail_estimate):
        assert value >= 0
    assert rep.v_n_lower == pytest.approx(lower_bound_rate(model))
    assert "interval_fits_rate" in rep.validity and "closed_form_dimension" in rep.validity
    d = rep.to_dict()
    assert d["exponents"]["eps"] == "3/4"
