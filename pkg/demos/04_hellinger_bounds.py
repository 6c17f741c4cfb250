"""Two-point lower bounds via Hellinger distance."""

from spdenoise import (
    ModelRecipe, equivalence_series, hellinger_bound_commuting, hellinger_scalar, largest_separation,
    lower_bound_rate, minimax_report,
)

# For two centred normals the exact distance and its quadratic bound:
exact, bound = hellinger_scalar(1.0, 2.0)
print(f"N(0,1) vs N(0,4): exact H^2 {exact:.6f}, bound {bound:.4f}")

# For a whole model the bound sums over modes.  Two variants are computed
# and the smaller one is reported.
model = ModelRecipe(family="ou", eps=0.0, T=4.0, theta_lo=0.5, theta_hi=2.0).build()
rep = hellinger_bound_commuting(model, 1.0, 1.1)
print("OU T=4, theta 1 vs 1.1:", {k: round(v, 6) for k, v in rep.variants.items()})

# If H <= 1, no estimator can separate the two values reliably.
mm = minimax_report(model, 1.0, 1.1)
print(mm.note)

# The largest indistinguishable separation tracks the lower-bound rate.
for T in (10.0, 100.0, 1000.0):
    m = ModelRecipe(family="ou", eps=0.1, T=T, theta_lo=0.5, theta_hi=2.0).build()
    print(f"T={T:6.0f}  largest separation {largest_separation(m, 1.0):.4f}  v_n {lower_bound_rate(m):.4f}")

# Without measurement noise, laws for different theta can be mutually
# singular.  The series below decides equivalence.
for m_, m1, d in [(2, 0, 1), (2, 1, 1), (4, 1, 1)]:
    partial, equivalent = equivalence_series(m_, m1, d, delta=0.1, T=1.0, K_max=10_000)
    print(f"m={m_} m1={m1} d={d}: partial sum {partial:.4g}, equivalent: {equivalent}")
