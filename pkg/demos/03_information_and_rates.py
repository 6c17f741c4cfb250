"""How fast can theta be learned?  Information, lower bounds and closed forms."""

from spdenoise import ModelRecipe, info_In, lower_bound_rate, nonparametric_rate, parametric_rate, rate_report

# The information functional sums each mode's contribution.  Its inverse
# square root is the rate of the estimator; the lower-bound rate uses the
# same modes at the top of the parameter range.
for eps in (0.4, 0.2, 0.1, 0.05):
    model = ModelRecipe(family="heat", nu=1e-4, K_lattice=100, eps=eps, T=50.0,
                        theta_lo=0.5, theta_hi=1.5).build()
    print(f"heat eps={eps:<5}  I_n={info_In(model, 1.0):10.4g}  v_n={lower_bound_rate(model):.4g}")

# The v_n column above shrinks roughly like eps^(3/4).  The closed-form
# record says the same thing, exactly:
cf = parametric_rate("frac_laplacian", {"d": 1, "rho": 1, "T": 50, "eps": 0.1})
print("closed form:", cf.regime, {k: str(v) for k, v in cf.exponents.items()})

# Transport equations switch branch when nu drops below eps.
for nu in (0.5, 0.001):
    cf = parametric_rate("transport", {"d": 1, "T": 10, "eps": 0.01, "nu": nu})
    print(f"transport nu={nu}: {cf.regime}, exponents {({k: str(v) for k, v in cf.exponents.items()})}")

# Nonparametric rates have their own regime switch, the "ellbow":
for T in (10.0, 1e6):
    cf = nonparametric_rate("diffusivity", alpha=2, d=1, T=T, eps=0.01)
    print(f"diffusivity alpha=2 T={T:g}: {cf.regime}, threshold {({k: str(v) for k, v in cf.threshold.items()})}")

# Everything at once for one model:
report = rate_report(ModelRecipe(family="source", nu=0.1, weyl_c=0.1, K_max=60, T=100.0,
                                 theta_lo=0.5, theta_hi=1.5).build())
for key, value in report.to_dict().items():
    print(f"  {key}: {value}")
