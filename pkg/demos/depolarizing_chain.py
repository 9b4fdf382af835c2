"""Walk through the inequality chain for a generalized depolarizing qubit.

We pick an invariant state, build the semigroup, and check each link:
MLSI -> TC2 -> TC1, TC2 -> Poincare, then the concentration bounds.
"""
import numpy as np

from qtc.entropy import fisher_information, relative_entropy
from qtc.generator import depolarizing_generator, mlsi_constant_depolarizing, spectral_gap
from qtc.inequalities import (
    exp_concentration_bound,
    gauss_concentration_bound,
    kappa,
    tail_probability,
    tc1_check,
    tc2_check,
)
from qtc.sampling import random_density

sigma = np.diag([0.6, 0.4])
gen = depolarizing_generator(sigma)
print(f"spectral gap        {spectral_gap(gen).spectral_gap:.6f}")

a1 = mlsi_constant_depolarizing(sigma)
c2 = 1 / a1
c1 = gen.lip_dim * c2
print(f"alpha_1(sigma)      {a1:.6f}   -> c2 = {c2:.4f}, c1 = {c1:.4f}")

rng = np.random.default_rng(1)
rho = random_density(2, rng)
D = relative_entropy(rho, sigma)
print(f"\nsample state: D = {D:.5f}, entropy production = {fisher_information(gen, rho):.5f}")
print(f"  MLSI margin  I - 2 a1 D          = {fisher_information(gen, rho) - 2 * a1 * D:+.3e}")
print(f"  TC2 margin   sqrt(2 c2 D) - W2up = {tc2_check(gen, rho, c2, K_max=16):+.3e}")
print(f"  TC1 margin   sqrt(2 c1 D) - W1   = {tc1_check(gen, rho, c1):+.3e}")

lo, hi = kappa(gen)
print(f"\nkappa in [{lo:.5f}, {hi:.5f}] -> Poincare constant {1 / (c2 * hi):.4f} <= gap")

# tails of Z under sigma against both bounds
Z = np.diag([1.0, -1.0])
r = np.linspace(0, 3, 7)
tail = tail_probability(sigma, Z, r)
exp_b = exp_concentration_bound(gen, Z, r)
gauss_b = gauss_concentration_bound(gen, Z, r, c1)
print("\n   r    tail    exp bound  gauss bound")
for row in zip(r, tail, exp_b, gauss_b):
    print("  {:.1f}  {:.4f}  {:9.4f}  {:9.4f}".format(*row))
