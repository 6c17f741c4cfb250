import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from spdenoise.simulator import (
    GridRule, TimeGrid, cov_kernel, empirical_mode_covariance, load_record, mode_generator, save_record,
    simulate_mode, simulate_observations, splitmix64, step_moments, stream_key, under_resolved_fraction,
    write_record_csv,
)
from spdenoise.spectral_model import ModeSpec, ModelRecipe, SpectralModel, model_ou

TEST_LAMBDAS = [0.0, -1.0, -10.0, -4 * math.pi ** 2 + 2j * math.pi, -4 * math.pi ** 2 - 2j * math.pi]


def cquad(f, a, b):
    re = quad(lambda s: f(s).real, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    im = quad(lambda s: f(s).imag, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    return complex(re, im)


def moments_by_quadrature(lam, dt):
    def psit(s):
        return dt - s if lam == 0 else (cmath.exp(lam * (dt - s)) - 1) / lam

    vx = cquad(lambda s: abs(cmath.exp(lam * (dt - s))) ** 2 + 0j, 0, dt).real
    vI = cquad(lambda s: abs(psit(s)) ** 2 + 0j, 0, dt).real
    cov = cquad(lambda s: cmath.exp(lam * (dt - s)) * psit(s).conjugate(), 0, dt)
    return vx, vI, cov


def one_mode(lam_ell=-1.0, m=0.0, b=1.0, eps=0.0, T=1.0, lo=0.0, hi=2.0, mult=1):
    return SpectralModel((ModeSpec(m=m, ell=lam_ell, b=b, mult=mult),), lo, hi, eps, T)


def test_splitmix_reference_value():
    # first output of SplitMix64 seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    keys = {stream_key(7, r, k) for r in range(20) for k in range(20)}
    assert len(keys) == 400
    assert stream_key(7, 1, 2) == stream_key(7, 1, 2)


def test_step_moments_brownian():
    dt = 0.3
    A, S = step_moments(0.0, dt)
    np.testing.assert_allclose(A, [[1, 0], [dt, 1]], atol=1e-15)
    np.testing.assert_allclose(S, [[dt, dt ** 2 / 2], [dt ** 2 / 2, dt ** 3 / 3]], rtol=1e-13)


def test_step_moments_ou_dt1():
    _, S = step_moments(-1.0, 1.0)
    assert S[0, 0].real == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-14)
    assert S[0, 0].real == pytest.approx(0.432332, abs=1e-6)


@pytest.mark.parametrize("lam", TEST_LAMBDAS + [-1e-6, -0.3 + 0.2j])
@pytest.mark.parametrize("dt", [1e-3, 0.05, 0.7])
def test_step_moments_against_quadrature(lam, dt):
    _, S = step_moments(lam, dt)
    vx, vI, cov = moments_by_quadrature(complex(lam), dt)
    for got, want in [(S[0, 0], vx), (S[1, 1], vI), (S[0, 1], cov)]:
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want)) + 1e-9 * abs(want)


def test_step_moments_psd_and_rejects_unstable():
    for lam in TEST_LAMBDAS:
        for dt in (1e-4, 0.01, 1.0, 10.0):
            _, S = step_moments(lam, dt)
            assert np.allclose(S, S.conj().T)
            assert np.linalg.eigvalsh(S).min() >= -1e-14 * abs(S).max()
    with pytest.raises(ValueError):
        step_moments(0.1, 0.1)


def test_determinism_and_stream_independence():
    model = ModelRecipe(family="heat", nu=0.01, K_lattice=5, eps=0.2, T=2).build()
    grid = TimeGrid(2.0, 100)
    a = simulate_observations(model, 1.0, grid, seed=11, replicate=3)
    b = simulate_observations(model, 1.0, grid, seed=11, replicate=3)
    assert all(np.array_equal(x, y) for x, y in zip(a.dY, b.dY))
    c = simulate_observations(model, 1.0, grid, seed=11, replicate=4)
    assert not np.array_equal(a.dY[1], c.dY[1])
    assert a.rng_algo == "philox4x64-splitmix64"


def test_mult_one_modes_are_real():
    model = ModelRecipe(family="heat", nu=0.01, K_lattice=3, eps=0.3, T=1).build()
    rec = simulate_observations(model, 1.0, TimeGrid(1.0, 50), seed=1)
    assert model.mult[0] == 1 and np.all(rec.dY[0].imag == 0)
    assert np.any(rec.dY[1].imag != 0)


def test_integrated_brownian_variance():
    T, reps = 2.0, 10_000
    model = one_mode(eps=0.0, T=T, lo=0.0, hi=1.0)
    grid = TimeGrid(T, 8)
    YT = np.array([simulate_observations(model, 0.0, grid, seed=2, replicate=r).dY[0].sum().real
                   for r in range(reps)])
    v = np.mean(YT ** 2)
    se = np.std(YT ** 2, ddof=1) / math.sqrt(reps)
    assert abs(v - T ** 3 / 3) < 3 * se


def test_ou_terminal_variance():
    T, reps = 10.0, 4000
    model = one_mode(T=T)
    grid = TimeGrid(T, 50)
    xT = np.array([simulate_observations(model, 1.0, grid, seed=3, replicate=r, retain_state=True).states[0][-1].real
                   for r in range(reps)])
    se = np.std(xT ** 2, ddof=1) / math.sqrt(reps)
    assert abs(np.mean(xT ** 2) - (1 - math.exp(-20)) / 2) < 3 * se


@pytest.mark.parametrize("lam", TEST_LAMBDAS)
def test_innovations_match_step_moments(lam):
    """The sampled one-step innovations have the covariance returned by step_moments."""
    dt, n = 0.05, 100_000
    mult = 1 if complex(lam).imag == 0 else 2
    A, S = step_moments(lam, dt)
    a, phi = A[0, 0], A[1, 0]
    if mult == 1:
        a, phi = a.real, phi.real
    gen = mode_generator(5, 0, 0)
    dY, x = simulate_mode(lam, 1.0, 0.0, mult, TimeGrid(n * dt, n), gen, retain_state=True)
    xi = x[1:] - a * x[:-1]
    eta = dY - phi * x[:-1]
    for u, v, want in [(xi, xi, S[0, 0]), (eta, eta, S[1, 1]), (xi, eta, S[0, 1])]:
        prod = u * np.conj(v)
        se = math.sqrt((prod.real.var() + prod.imag.var()) / n)
        assert abs(prod.mean() - want) < 4 * se
    for u in (xi, eta):
        assert abs(u.mean()) < 4 * math.sqrt(np.mean(abs(u) ** 2) / n)


def test_cov_kernel_examples():
    assert cov_kernel(0.0, 1.5, 0.7) == pytest.approx(0.7)
    assert cov_kernel(-1.0, 1.0, 1.0) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-14)
    want = 0.5 * cmath.exp(1j) * (math.exp(-1) - math.exp(-3))
    assert cov_kernel(-1 + 1j, 2.0, 1.0) == pytest.approx(want, rel=1e-13)
    # quadrature of the defining integral
    lam = -1 + 1j
    q = cquad(lambda u: cmath.exp(lam * (2.0 - u)) * cmath.exp(lam * (1.0 - u)).conjugate(), 0, 1.0)
    assert cov_kernel(lam, 2.0, 1.0) == pytest.approx(q, rel=1e-10)
    assert abs(cov_kernel(-1e-12, 1.0, 2.0) - 1.0) < 1e-9


def test_state_covariance_matches_kernel():
    T, n, reps = 2.0, 40, 3000
    lam = -1 + 1j
    model = SpectralModel((ModeSpec(m=-1.0, ell=1j, b=1.0, mult=2),), 0.0, 1.0, 0.0, T)
    grid = TimeGrid(T, n)
    recs = [simulate_observations(model, 1.0, grid, seed=8, replicate=r, retain_state=True) for r in range(reps)]
    rng = np.random.default_rng(1)
    for _ in range(5):
        i, j = rng.integers(1, n + 1, size=2)
        mean, se = empirical_mode_covariance(recs, 0, i, j)
        assert abs(mean - cov_kernel(lam, i * grid.dt, j * grid.dt)) < 3 * se


def test_empirical_covariance_examples():
    reps = 4000
    model = one_mode(T=2.0)
    grid = TimeGrid(2.0, 20)
    recs = [simulate_observations(model, 1.0, grid, seed=9, replicate=r, retain_state=True) for r in range(reps)]
    mean, se = empirical_mode_covariance(recs, 0, 10, 10)
    assert abs(mean - 0.432332) < 3 * se
    recs0 = [simulate_observations(model, 0.0, grid, seed=9, replicate=r, retain_state=True) for r in range(reps)]
    mean, se = empirical_mode_covariance(recs0, 0, 10, 20)
    assert abs(mean - 1.0) < 3 * se
    other = simulate_observations(model, 1.0, TimeGrid(2.0, 40), seed=9, retain_state=True)
    with pytest.raises(ValueError):
        empirical_mode_covariance(recs[:5] + [other], 0, 1, 1)
    bare = [simulate_observations(model, 1.0, grid, seed=9, replicate=r) for r in range(3)]
    with pytest.raises(ValueError):
        empirical_mode_covariance(bare, 0, 1, 1)


def test_noise_scaling_invariance_exact():
    grid = TimeGrid(5.0, 100)
    a = simulate_observations(model_ou(2.0, 0.5, 5.0, (0.5, 2.0)), 1.0, grid, seed=4)
    b = simulate_observations(model_ou(1.0, 0.25, 5.0, (0.5, 2.0)), 1.0, grid, seed=4)
    assert np.array_equal(a.dY[0], 2.0 * b.dY[0])


def test_quadratic_form_variance_oracle():
    rng = np.random.default_rng(12)
    G = rng.normal(size=(8, 8))
    Sigma = G @ G.T / 8
    L = rng.normal(size=(8, 8))
    w, V = np.linalg.eigh(Sigma)
    root = V @ np.diag(np.sqrt(w)) @ V.T
    sym = (L + L.T) / 2
    want = 2 * np.linalg.norm(root @ sym @ root, "fro") ** 2
    draws = rng.normal(size=(100_000, 8)) @ root
    q = np.einsum("ni,ij,nj->n", draws, L, draws)
    assert q.var() == pytest.approx(want, rel=0.05)


def test_grid_rules():
    model = ModelRecipe(family="heat", nu=0.01, K_lattice=10, T=2, theta_lo=0.5, theta_hi=1.0).build()
    assert GridRule("n_steps", 64).grids(model)[0] == TimeGrid(2.0, 64)
    assert GridRule("dt", 0.1).grids(model)[3].n_steps == 20
    top = np.abs(model.lam_bar).max()
    auto = GridRule("auto", 0.2).grids(model)
    assert auto[0].dt <= 0.2 / top + 1e-12 and len(set(auto)) == 1
    per = GridRule("per_mode", 0.2).grids(model)
    assert per[0].dt == pytest.approx(0.05)
    assert per[-1].dt <= 0.2 / top + 1e-12
    assert under_resolved_fraction(model, per) == 0.0
    assert under_resolved_fraction(model, GridRule("dt", 0.05).grids(model)) > 0
    with pytest.raises(ValueError):
        GridRule("weird", 1.0)
    assert GridRule.from_dict(GridRule("dt", 0.3).to_dict()) == GridRule("dt", 0.3)


def test_grid_horizon_mismatch():
    with pytest.raises(ValueError):
        simulate_observations(one_mode(T=2.0), 1.0, TimeGrid(3.0, 10), seed=0)


def test_binary_and_csv_dump(tmp_path):
    model = ModelRecipe(family="transport", nu=0.05, K_lattice=3, eps=0.1, T=1.0, theta_lo=-1, theta_hi=1).build()
    rec = simulate_observations(model, 0.5, GridRule("per_mode", 0.2), seed=3, retain_state=True)
    path = tmp_path / "rec.bin"
    save_record(path, rec)
    back = load_record(path)
    assert back.seed == 3 and back.theta_true == 0.5 and back.grids == rec.grids
    assert all(np.array_equal(x, y) for x, y in zip(rec.dY, back.dY))
    assert all(np.array_equal(x, y) for x, y in zip(rec.states, back.states))
    assert np.array_equal(back.model.lam_bar, model.lam_bar)
    assert back.model.recipe == model.recipe
    csv = tmp_path / "rec.csv"
    write_record_csv(csv, rec)
    lines = csv.read_text().splitlines()
    assert lines[0] == "mode,step,t,re,im"
    assert len(lines) == 1 + sum(g.n_steps for g in rec.grids)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_record(bad)
