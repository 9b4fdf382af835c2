"""Finite-sample error of the SLD estimator against the concentration bounds."""
import numpy as np

from qtc.estimation import (
    estimation_report,
    exact_error_probability,
    family_by_name,
    sld_fisher,
)

theta, eps = 0.3, 0.5
for name in ("diag", "rotation", "gibbs"):
    fam = family_by_name(name)
    print(f"{name:>8}: J(theta) = {sld_fisher(fam, theta):.4f}")

fam = family_by_name("diag")
print("\n  n   exact P(|err|>eps)   bound (depolarizing)")
for n in (2, 4, 8, 16, 32):
    rep = estimation_report(fam, theta, n, eps, trials=20000, seed=n)
    print(f"{n:3d}   {exact_error_probability(fam, theta, n, eps):.6f}            {rep.bound_depolarizing:.4f}")

# the bound only becomes informative (< 1) at large n
rep = estimation_report(fam, theta, 4000, 0.5, trials=2000, seed=0)
print(f"\nn = 4000: empirical {rep.empirical:.4f}, bound {rep.bound_depolarizing:.3e}")
print(f"bounds hold: {rep.ok}")
