"""Discretized operator checks, the same ones `spdenoise oracle-check` runs."""

from spdenoise.oracle import (
    check_cov_factorization, check_perturbation_identity, check_rs_norm, matrix_hellinger,
)
from spdenoise.simulator import TimeGrid

# The scaled solution operator is a contraction, up to a quadrature error of order dt.
norm, allowed = check_rs_norm(-1.0, TimeGrid(10.0, 2000))
print(f"|R| S norm {norm:.5f} (allowed {allowed:.5f})")

# S1 - S0 = (lam1 - lam0) S0 S1 holds up to a residual that shrinks with dt.
for n in (1000, 2000, 4000):
    print(f"n={n}: perturbation residual {check_perturbation_identity(-1.0, -2.0, TimeGrid(5.0, n)):.3e}")

# The covariance kernel factorizes as S S*.
print(f"covariance residual, lam=-1+i: {check_cov_factorization(-1 + 1j, TimeGrid(2.0, 400)):.3e}")

# Exact Hellinger distance of the discretized laws, for comparison with the closed-form bound.
print(f"matrix H^2, OU 1 vs 1.1, eps=0.1: {matrix_hellinger(-1.0, -1.1, 1.0, 0.1, TimeGrid(4.0, 512)):.5f}")
