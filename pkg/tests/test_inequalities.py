import itertools

import cvxpy as cp
import numpy as np
import pytest

from qtc.entropy import relative_entropy
from qtc.errors import DegenerateObservableError, InvalidInputError
from qtc.generator import (
    DBGenerator,
    depolarizing_generator,
    embed_observable,
    mlsi_constant_depolarizing,
    random_generator,
    site_sum,
    spectral_gap,
    tensorize,
)
from qtc.inequalities import (
    NAMES,
    alpha1,
    center,
    chain_check,
    depolarizing_gauss_bound,
    exp_concentration_bound,
    exp_constant,
    gauss_concentration_bound,
    kappa,
    kappa_multiplier,
    log_sobolev_denominator,
    mixing_check,
    mlsi_estimate,
    mlsi_margin,
    mlsi_ratio,
    pinsker_check,
    poincare_margin,
    product_concentration_bound,
    reports_to_json,
    schur_norm_lower,
    schur_norm_upper,
    tail_probability,
    tc1_check,
    tc2_check,
)
from qtc.sampling import random_density

from conftest import rand_herm, rand_state

Z = np.diag([1.0, -1.0]).astype(complex)
R = np.round(np.arange(0, 3.0 + 1e-12, 0.1), 12)


# ------------------------------------------------------------------ MLSI

def test_mlsi_maximally_mixed_qubit(rng):
    gen = depolarizing_generator(np.eye(2) / 2)
    est = mlsi_estimate(gen, [random_density(2, rng) for _ in range(500)])
    assert est >= 1 - 1e-3
    assert est < 1.1
    assert mlsi_margin(gen, gen.sigma, 1.0) == pytest.approx(0, abs=1e-14)
    with pytest.raises(InvalidInputError):
        mlsi_ratio(gen, gen.sigma)


def test_mlsi_classical_ratio():
    q, p = 0.7, 0.25
    gen = depolarizing_generator(np.diag([q, 1 - q]))
    D = p * np.log(p / q) + (1 - p) * np.log((1 - p) / (1 - q))
    I = (p - q) * (np.log(p / q) - np.log((1 - p) / (1 - q)))
    assert mlsi_ratio(gen, np.diag([p, 1 - p])) == pytest.approx(I / (2 * D), rel=1e-12)


def test_alpha1_labels(rng):
    gen = depolarizing_generator(np.diag([0.6, 0.4]))
    a, lab = alpha1(gen)
    assert a == pytest.approx(mlsi_constant_depolarizing(gen.sigma)) and "closed" in lab
    g2 = random_generator(2, rng)
    with pytest.raises(InvalidInputError):
        alpha1(g2)
    a2, lab2 = alpha1(g2, [random_density(2, rng) for _ in range(20)])
    assert a2 > 0 and "estimate" in lab2


def test_mlsi_holds_depolarizing(rng):
    for d in (2, 3):
        gen = depolarizing_generator(rand_state(d, rng))
        a = mlsi_constant_depolarizing(gen.sigma)
        for _ in range(30):
            assert mlsi_margin(gen, random_density(d, rng), a) >= -1e-10


# ------------------------------------------------------- transport costs

def test_tc_at_sigma():
    gen = depolarizing_generator(np.eye(2) / 2)
    assert tc2_check(gen, gen.sigma, 1.0) == pytest.approx(0, abs=1e-12)
    assert tc1_check(gen, gen.sigma, 2.0) == pytest.approx(0, abs=1e-12)


def test_tc_depolarizing_qubit(rng):
    gen = depolarizing_generator(np.eye(2) / 2)
    for _ in range(15):
        rho = random_density(2, rng)
        m2, up = tc2_check(gen, rho, 1.0, return_result=True)
        assert m2 >= -1e-6
        assert up.value >= 0
        assert tc1_check(gen, rho, 2.0) >= -1e-6


# ------------------------------------------------------------------ kappa

def test_kappa_trivial_cases(rng):
    gen = depolarizing_generator(np.eye(3) / 3)
    assert kappa(gen) == (1.0, 1.0)
    g2 = depolarizing_generator(rand_state(3, rng))
    assert kappa(g2, commutative=True) == (1.0, 1.0)
    m = kappa_multiplier(np.diag([0.7, 0.3]), 0.0)
    assert np.allclose(m, 1)


def _grid_schur_norm(m, n=61):
    """Brute force over 2x2 unitaries (extreme points of the unit ball)."""
    best = 0.0
    ang = np.linspace(0, np.pi, n)
    ph = np.linspace(0, 2 * np.pi, n, endpoint=False)
    for th, a, b in itertools.product(ang, ph, ph):
        c, s = np.cos(th / 2), np.sin(th / 2)
        U = np.array([[c, -np.exp(1j * b) * s], [np.exp(1j * a) * s, np.exp(1j * (a + b)) * c]])
        best = max(best, np.linalg.norm(m * U, 2))
    return best


def test_kappa_qubit_against_grid():
    sigma = np.diag([0.7, 0.3])
    gen = depolarizing_generator(sigma)
    lo, hi = kappa(gen)
    ref = max(_grid_schur_norm(kappa_multiplier(sigma, w)) for w in set(np.round(gen.omega, 12)) if w != 0)
    assert lo <= hi
    assert lo == pytest.approx(ref, rel=0.05) and hi == pytest.approx(ref, rel=0.05)
    assert lo >= ref - 1e-9


def _schur_sdp(m):
    """Haagerup: ||S_m|| = min max(diag X, diag Y) over [[X, m],[m*, Y]] >= 0."""
    n = m.shape[0]
    P = cp.Variable((2 * n, 2 * n), hermitian=True)
    t = cp.Variable()
    cons = [P >> 0, P[:n, n:] == m, cp.real(cp.diag(P)) <= t]
    cp.Problem(cp.Minimize(t), cons).solve(solver="CLARABEL")
    return t.value


def test_schur_norm_bracket_against_sdp(rng):
    for d in (2, 3):
        sigma = rand_state(d, rng)
        for w in (0.7, -1.3):
            m = kappa_multiplier(sigma, w)
            ref = _schur_sdp(m)
            lo, _ = schur_norm_lower(m, rng)
            hi = schur_norm_upper(m)
            assert lo <= ref + 1e-6 and ref <= hi + 1e-6
            assert hi == pytest.approx(ref, rel=1e-4)


# --------------------------------------------------------------- Poincare

def test_poincare_equality_at_gap():
    gen = depolarizing_generator(np.diag([0.6, 0.4]))
    f = center(gen.sigma, Z)
    assert poincare_margin(gen, f, 1.0) == pytest.approx(0, abs=1e-12)
    with pytest.raises(InvalidInputError):
        poincare_margin(gen, Z, 1.0)


def test_poincare_gap_holds(rng):
    for d in (2, 3):
        gen = random_generator(d, rng)
        gap = spectral_gap(gen).spectral_gap
        for _ in range(10):
            f = center(gen.sigma, rand_herm(d, rng))
            assert poincare_margin(gen, f, gap) >= -1e-9


def test_poincare_from_kappa(rng):
    gen = depolarizing_generator(rand_state(3, rng))
    c2 = 1 / mlsi_constant_depolarizing(gen.sigma)
    lam = 1 / (c2 * kappa(gen)[1])
    assert spectral_gap(gen).spectral_gap >= lam - 1e-6
    for _ in range(10):
        f = center(gen.sigma, rand_herm(3, rng))
        assert poincare_margin(gen, f, lam) >= -1e-6


# ----------------------------------------------------------- tails, bounds

def test_tail_probability_examples(rng):
    sigma = np.diag([0.2, 0.5, 0.3])
    f = np.diag([1.0, -2.0, 4.0])
    mean = 0.2 - 1.0 + 1.2
    r = np.linspace(-5, 5, 41)
    ref = [sum(s for s, x in zip((0.2, 0.5, 0.3), (1.0, -2.0, 4.0)) if x - mean >= rr - 1e-12) for rr in r]
    assert np.allclose(tail_probability(sigma, f, r), ref)
    assert tail_probability(sigma, f, -10.0) == 1.0
    assert tail_probability(sigma, f, 10.0) == 0.0
    s2 = rand_state(3, rng)
    g = rand_herm(3, rng)
    t = tail_probability(s2, g, R)
    assert np.all(np.diff(t) <= 1e-15)


def test_exp_bound(rng):
    gen = depolarizing_generator(np.diag([0.6, 0.4]))
    b = exp_concentration_bound(gen, Z, R)
    assert b[0] == 3.0 and exp_concentration_bound(gen, Z, -1.0) == 3.0
    assert np.all(np.diff(b) <= 0)
    assert np.all(b >= tail_probability(gen.sigma, Z, R))
    assert exp_constant(gen, Z)[0] > 1
    with pytest.raises(DegenerateObservableError):
        exp_concentration_bound(gen, np.eye(2), 1.0)
    for d in (2, 3):
        g = random_generator(d, rng)
        f = rand_herm(d, rng)
        assert exp_constant(g, f)[0] > 1
        assert np.all(exp_concentration_bound(g, f, R) >= tail_probability(g.sigma, f, R) - 1e-9)


def test_gauss_bound(rng):
    gen = depolarizing_generator(np.diag([0.6, 0.4]))
    c1 = 2 / mlsi_constant_depolarizing(gen.sigma)
    b = gauss_concentration_bound(gen, Z, R, c1)
    assert b[0] == 1.0
    assert np.all(np.diff(b) <= 0)
    assert np.all(b >= tail_probability(gen.sigma, Z, R))
    f = rand_herm(2, rng)
    assert np.allclose(gauss_concentration_bound(gen, f + 2 * np.eye(2), R, c1), gauss_concentration_bound(gen, f, R, c1))
    with pytest.raises(InvalidInputError):
        gauss_concentration_bound(gen, Z, R, 0.0)
    with pytest.raises(DegenerateObservableError):
        gauss_concentration_bound(gen, np.eye(2), R, 1.0)


def test_depolarizing_gauss_formula():
    r = np.array([0.0, 0.5, 1.0, 2.5])
    # at I/2 alpha_1 = 1 and the bound is exp(-r^2 / (16 lipH^2))
    phi = np.array([0.3, -1.0])
    ref = np.exp(-r ** 2 / (16 * (phi.max() - phi.min()) ** 2))
    assert np.allclose(depolarizing_gauss_bound(np.eye(2) / 2, np.diag(phi), r), ref, rtol=1e-6)
    # at I/3 the same shape with the computed alpha_1(I/3) < 1
    phi = np.array([0.3, -1.0, 2.0])
    a = mlsi_constant_depolarizing(np.eye(3) / 3)
    ref = np.exp(-r ** 2 * a / (16 * (phi.max() - phi.min()) ** 2))
    assert np.allclose(depolarizing_gauss_bound(np.eye(3) / 3, np.diag(phi), r), ref, rtol=1e-12)


def test_depolarizing_gauss_dominance(rng):
    for k in range(20):
        d = 2 + k % 2
        sigma, f = rand_state(d, rng), rand_herm(d, rng)
        assert np.all(depolarizing_gauss_bound(sigma, f, R) >= tail_probability(sigma, f, R) - 1e-12)


def test_product_bound():
    site = depolarizing_generator(np.diag([0.6, 0.4]))
    b1 = product_concentration_bound(site, Z, 1, 1.3)
    b3 = product_concentration_bound(site, Z, 3, 1.3)
    assert np.log(b3) == pytest.approx(3 * np.log(b1), rel=1e-12)
    assert product_concentration_bound(site, Z, 2, 0.0) == 1.0
    assert log_sobolev_denominator(site.sigma) == pytest.approx(11 + np.log(16 / 0.4))
    g2 = tensorize(site, 2)
    f2 = site_sum(Z, 2)
    assert np.all(product_concentration_bound(site, Z, 2, R) >= tail_probability(g2.sigma, f2, R))
    with pytest.raises(InvalidInputError):
        product_concentration_bound(site, Z, 0, R)


def test_lipschitz_tensorization_identity(rng):
    from qtc.wasserstein import lipschitz_constant

    site = depolarizing_generator(np.diag([0.6, 0.4]))
    f = rand_herm(2, rng)
    for n in (2, 3):
        gn = tensorize(site, n)
        lhs = lipschitz_constant(gn, site_sum(f, n), "lip") ** 2
        assert lhs == pytest.approx(lipschitz_constant(site, f, "lip") ** 2 / n, rel=1e-10)
        assert np.allclose(site_sum(f, n), sum(embed_observable(f, k, n) for k in range(n)) / n)


# ---------------------------------------------------------- Pinsker, mixing

def test_pinsker(rng):
    assert pinsker_check(np.eye(2) / 2, np.eye(2) / 2) == pytest.approx(0, abs=1e-14)
    eps = 1e-6
    rho = np.diag([1 - eps, eps])
    assert pinsker_check(rho, np.eye(2) / 2) > 0
    for d in (2, 3, 4):
        for _ in range(20):
            assert pinsker_check(rand_state(d, rng), rand_state(d, rng)) >= -1e-9


def test_mixing(rng):
    gen = depolarizing_generator(rand_state(3, rng))
    rho = rand_state(3, rng)
    m = mixing_check(gen, rho, [0, 0.5, 1, 2])
    assert m.shape == (4,) and np.all(m >= -1e-6)
    assert np.allclose(mixing_check(gen, gen.sigma, [0, 1.0]), 0, atol=1e-12)


# ------------------------------------------------------------ chain sweep

def test_chain_check_depolarizing_qubit():
    gen = depolarizing_generator(np.diag([0.6, 0.4]))
    reps = chain_check(gen, 6, seed=3)
    names = [r.name for r in reps]
    assert names == [n for n in NAMES if n in names]
    assert set(names) == set(NAMES)
    for r in reps:
        assert r.ok, (r.name, r.worst_margin)
        assert r.samples == 6
    tc2 = next(r for r in reps if r.name == "TC2")
    assert tc2.constant == pytest.approx(1 / mlsi_constant_depolarizing(gen.sigma))
    # margin reproducible from the witness
    from qtc.linalg import matrix_from_json

    rho = matrix_from_json(tc2.witness["rho"])
    assert tc2_check(gen, rho, tc2.constant) == pytest.approx(tc2.worst_margin, abs=1e-12)
    assert reports_to_json(reps) == reports_to_json(chain_check(gen, 6, seed=3))
    with pytest.raises(InvalidInputError):
        chain_check(gen, 0)


def test_chain_check_random_generator(rng):
    gen = random_generator(2, rng)
    reps = {r.name: r for r in chain_check(gen, 4, seed=1)}
    assert "GaussConcDepol" not in reps and "Mixing" not in reps
    assert "estimate" in reps["MLSI"].constant_label
    assert reps["MLSI"].worst_margin == pytest.approx(0, abs=1e-10)
    assert reps["Pinsker"].ok
