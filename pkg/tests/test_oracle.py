import numpy as np
import pytest

from spdenoise.hellinger import hellinger_bound_commuting
from spdenoise.oracle import (
    DiscreteSolutionOperator, check_cov_factorization, check_perturbation_identity, check_rs_norm,
    matrix_hellinger,
)
from spdenoise.simulator import TimeGrid
from spdenoise.spectral_model import ModeSpec, SpectralModel


def test_discrete_operator_shape():
    op = DiscreteSolutionOperator(-1.0, TimeGrid(1.0, 4))
    S = op.S
    assert np.allclose(np.triu(S), 0)
    assert S[1, 0] == pytest.approx(0.25 * np.exp(-0.25))
    assert S[3, 1] == pytest.approx(0.25 * np.exp(-0.5))
    with pytest.raises(ValueError):
        DiscreteSolutionOperator(-1.0, TimeGrid(1.0, 5000)).S


def test_rs_norm_examples():
    norm, bound = check_rs_norm(-1.0, TimeGrid(10.0, 2000))
    assert norm <= 1.01 and norm <= bound
    norm, bound = check_rs_norm(0.0, TimeGrid(1.0, 1000))
    assert norm <= bound
    norm, bound = check_rs_norm(-100.0, TimeGrid(1.0, 10_000))
    assert norm <= 1.02
    with pytest.raises(ValueError):
        check_rs_norm(0.5, TimeGrid(1.0, 10))


def test_rs_norm_dense_and_iterative_agree():
    grid = TimeGrid(3.0, 256)
    dense = np.linalg.norm(DiscreteSolutionOperator(-2 + 1j, grid).S, 2) * 2.0
    norm, _ = check_rs_norm(-2 + 1j, grid)
    assert norm == pytest.approx(dense, rel=1e-10)
    # the iterative path on a slightly larger grid is close to the dense value
    norm_big, _ = check_rs_norm(-2 + 1j, TimeGrid(3.0, 512))
    assert norm_big == pytest.approx(np.linalg.norm(DiscreteSolutionOperator(-2 + 1j, TimeGrid(3.0, 512)).S, 2) * 2,
                                     rel=1e-8)


def test_perturbation_identity_zero_for_equal_eigenvalues():
    assert check_perturbation_identity(-1.0, -1.0, TimeGrid(5.0, 500)) == 0.0


@pytest.mark.parametrize("lam1", [-2.0, -1 + 2j])
def test_perturbation_identity_order(lam1):
    r1 = check_perturbation_identity(-1.0, lam1, TimeGrid(5.0, 4000))
    r2 = check_perturbation_identity(-1.0, lam1, TimeGrid(5.0, 8000))
    assert r1 < 5e-3
    assert r2 <= 0.5 * r1 * 1.05
    with pytest.raises(ValueError):
        check_perturbation_identity(0.1, lam1, TimeGrid(5.0, 10))


@pytest.mark.parametrize("lam", [0.0, -1.0, -1 + 1j])
def test_cov_factorization_order(lam):
    ga, gb = TimeGrid(2.0, 200), TimeGrid(2.0, 400)
    ra, rb = check_cov_factorization(lam, ga), check_cov_factorization(lam, gb)
    assert ra < ga.dt
    if lam == 0.0:
        # Brownian motion: the left-rectangle sum reproduces min(t, s) exactly
        assert ra < 1e-12
    else:
        assert rb <= 0.55 * ra


def test_matrix_hellinger_examples():
    grid = TimeGrid(4.0, 512)
    assert matrix_hellinger(-1.0, -1.0, 1.0, 0.1, grid) == pytest.approx(0.0, abs=1e-12)
    h = matrix_hellinger(-1.0, -1.1, 1.0, 0.1, grid)
    model = SpectralModel((ModeSpec(m=0.0, ell=-1.0, b=1.0, mult=1),), 0.5, 2.0, 0.1, 4.0)
    rep = hellinger_bound_commuting(model, 1.0, 1.1)
    assert 0 < h <= rep.variants["commuting_contractive"]
    h2 = matrix_hellinger(-1.0, -1.1, 1.0, 0.1, TimeGrid(4.0, 1024))
    assert abs(h - h2) < 1e-3


def test_matrix_hellinger_symmetric_and_errors():
    grid = TimeGrid(2.0, 128)
    for a, b in [(-1.0, -1.5), (-1 + 1j, -1.2 + 1.5j), (0.0, -0.3)]:
        assert matrix_hellinger(a, b, 1.3, 0.2, grid) == pytest.approx(matrix_hellinger(b, a, 1.3, 0.2, grid),
                                                                        abs=1e-12)
    with pytest.raises(ValueError):
        matrix_hellinger(-1.0, -2.0, 1.0, 0.0, grid)
    with pytest.raises(ValueError):
        matrix_hellinger(-1 + 1j, -2.0, 1.0, 0.1, grid, mult=1)


def test_matrix_hellinger_below_closed_form_bound_random():
    rng = np.random.default_rng(11)
    for _ in range(20):
        is_complex = rng.random() < 0.5
        m = -rng.uniform(0, 2)
        ell = -rng.uniform(0.5, 2) + (1j * rng.uniform(-3, 3) if is_complex else 0)
        b, eps, T = rng.uniform(0.5, 2), rng.uniform(0.05, 1), rng.uniform(1, 6)
        th1 = 1 + rng.uniform(0.02, 0.5)
        md = ModeSpec(m=m, ell=ell, b=b, mult=2 if is_complex else 1)
        model = SpectralModel((md,), 0.5, 2.0, eps, T)
        h = matrix_hellinger(m + ell, m + th1 * ell, b, eps, TimeGrid(T, 256), mult=md.mult)
        rep = hellinger_bound_commuting(model, 1.0, th1)
        for value in rep.variants.values():
            assert h <= value
