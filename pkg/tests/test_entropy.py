import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import quad

from qtc.entropy import (
    de_bruijn_residual,
    dirichlet_form,
    dirichlet_form_1,
    dirichlet_form_derivations,
    ent_1,
    entropy_curve,
    fisher_information,
    maximal_divergence,
    relative_entropy,
)
from qtc.errors import DomainError, SupportError
from qtc.generator import depolarizing_generator, mlsi_constant_depolarizing, random_generator
from qtc.linalg import gamma_map

from conftest import rand_herm, rand_mat, rand_state


def test_relative_entropy_oracle(rng):
    for d in (2, 3, 4):
        rho, sigma = rand_state(d, rng), rand_state(d, rng)
        ref = np.trace(rho @ (scipy.linalg.logm(rho) - scipy.linalg.logm(sigma))).real
        assert relative_entropy(rho, sigma) == pytest.approx(ref, abs=1e-10)
        S = -np.sum([x * np.log(x) for x in np.linalg.eigvalsh(rho)])
        assert relative_entropy(rho, np.eye(d) / d) == pytest.approx(np.log(d) - S, abs=1e-12)
        assert relative_entropy(sigma, sigma) == pytest.approx(0, abs=1e-12)


def test_relative_entropy_examples():
    assert relative_entropy(np.diag([1.0, 0.0]), np.eye(2) / 2) == pytest.approx(np.log(2))
    with pytest.raises(SupportError):
        relative_entropy(np.eye(2) / 2, np.diag([1.0, 0.0]))
    assert relative_entropy(np.diag([1.0, 0.0]), np.diag([1.0, 0.0])) == pytest.approx(0)
    assert relative_entropy(np.eye(2) / 2, np.eye(2) / 2).kind == "umegaki"


def test_maximal_divergence(rng):
    for d in (2, 3):
        rho, sigma = rand_state(d, rng), rand_state(d, rng)
        assert maximal_divergence(rho, sigma) >= relative_entropy(rho, sigma) - 1e-12
    p, q = np.diag([0.2, 0.3, 0.5]), np.diag([0.4, 0.4, 0.2])
    assert maximal_divergence(p, q) == pytest.approx(relative_entropy(p, q), abs=1e-12)


def test_ent1_identities(rng):
    for d in (2, 3):
        sigma, rho = rand_state(d, rng), rand_state(d, rng)
        f = gamma_map(sigma, rho, "inverse")
        assert ent_1(sigma, f) == pytest.approx(relative_entropy(rho, sigma), abs=1e-10)
        assert ent_1(sigma, 2.5 * f) == pytest.approx(2.5 * ent_1(sigma, f), abs=1e-10)
        assert ent_1(sigma, np.eye(d)) == pytest.approx(0, abs=1e-12)
    with pytest.raises(DomainError):
        ent_1(np.eye(2) / 2, np.diag([1.0, -1.0]))


def test_dirichlet_forms(rng):
    for d in (2, 3):
        gen = random_generator(d, rng)
        f, g = rand_mat(d, rng), rand_mat(d, rng)
        for s in (0.0, 0.25, 0.5, 1.0):
            a = dirichlet_form(gen, f, g, s)
            assert abs(a - dirichlet_form_derivations(gen, f, g, s)) < 1e-8 * max(1, abs(a))
        h = rand_herm(d, rng)
        assert dirichlet_form(gen, h, h, 0.5).real >= -1e-12
        assert abs(dirichlet_form(gen, f, g, 0.5) - np.conj(dirichlet_form(gen, g, f, 0.5))) < 1e-9
        assert abs(dirichlet_form(gen, np.eye(d), f)) < 1e-10
    with pytest.raises(DomainError):
        dirichlet_form(gen, f, g, 1.5)


def test_dirichlet_form_1_is_half_fisher(rng):
    for d in (2, 3):
        gen = random_generator(d, rng)
        rho = rand_state(d, rng)
        f = gamma_map(gen.sigma, rho, "inverse")
        e1 = dirichlet_form_1(gen, f)
        assert e1 >= -1e-12
        assert e1 == pytest.approx(0.5 * fisher_information(gen, rho), rel=1e-8)


def test_fisher_classical_two_state():
    p, q = 0.2, 0.6
    gen = depolarizing_generator(np.diag([q, 1 - q]))
    rho = np.diag([p, 1 - p])
    # depolarizing flow on the diagonal: dp/dt = q - p
    ref = -(q - p) * (np.log(p / q) - np.log((1 - p) / (1 - q)))
    assert fisher_information(gen, rho) == pytest.approx(ref, rel=1e-12)
    assert fisher_information(gen, gen.sigma) == pytest.approx(0, abs=1e-14)


def test_fisher_nonnegative(rng):
    for d in (2, 3, 4):
        gen = random_generator(d, rng)
        assert fisher_information(gen, rand_state(d, rng)) >= -1e-12


def test_de_bruijn(rng):
    for d in (2, 3):
        gen = random_generator(d, rng)
        rho = rand_state(d, rng)
        r1 = de_bruijn_residual(gen, rho, 0.3, 1e-4)
        r2 = de_bruijn_residual(gen, rho, 0.3, 5e-5)
        assert r1 < 1e-6
        assert r2 < r1


def test_entropy_decay_and_integrated_mlsi(rng):
    sigma = rand_state(3, rng)
    gen = depolarizing_generator(sigma)
    rho = rand_state(3, rng)
    ts = np.linspace(0, 4, 21)
    D = entropy_curve(gen, rho, ts)
    assert np.all(np.diff(D) <= 1e-12)
    a = mlsi_constant_depolarizing(sigma)
    assert np.all(D <= np.exp(-2 * a * ts) * D[0] + 1e-12)
    # D(rho_0) - D(rho_t) = int I(rho_s) ds
    integral, _ = quad(lambda s: fisher_information(gen, gen.evolve(rho, s)), 0, 1.0, epsabs=1e-12)
    assert D[0] - relative_entropy(gen.evolve(rho, 1.0), sigma) == pytest.approx(integral, abs=1e-9)
