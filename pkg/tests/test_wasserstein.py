import cvxpy as cp
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import linprog

from qtc.entropy import fisher_information
from qtc.errors import InvalidInputError
from qtc.generator import depolarizing_generator, mix_terms, random_generator
from qtc.linalg import trace_norm
from qtc.sampling import haar_unitary
from qtc.wasserstein import (
    VARIANTS,
    lipschitz_constant,
    metric_norm_squared,
    metric_operator,
    w1,
    w2_bracket,
    w2_upper,
)

from conftest import rand_herm, rand_state


def _weights(gen):
    return gen.c * (np.exp(-gen.omega / 2) + np.exp(gen.omega / 2)) / gen.lip_dim


# ------------------------------------------------------------------ Lipschitz

def test_lipschitz_identity_and_seminorm(rng):
    gen = random_generator(3, rng)
    f, g = rand_herm(3, rng), rand_herm(3, rng)
    for v in VARIANTS:
        assert lipschitz_constant(gen, np.eye(3), v) == pytest.approx(0, abs=1e-12)
        assert lipschitz_constant(gen, -2 * f, v) == pytest.approx(2 * lipschitz_constant(gen, f, v))
        assert lipschitz_constant(gen, f + g, v) <= lipschitz_constant(gen, f, v) + lipschitz_constant(gen, g, v) + 1e-12
        assert lipschitz_constant(gen, f + 3 * np.eye(3), v) == pytest.approx(lipschitz_constant(gen, f, v))
    with pytest.raises(InvalidInputError):
        lipschitz_constant(gen, f, "nope")


def test_lipschitz_hierarchy(rng):
    for d in (2, 3):
        gen = random_generator(d, rng)
        f = rand_herm(d, rng)
        assert lipschitz_constant(gen, f, "lip") <= lipschitz_constant(gen, f, "lip2") + 1e-12


def test_lip2_representation_invariance(rng):
    gen = depolarizing_generator(np.eye(3) / 3)
    U = haar_unitary(gen.nterms, rng)
    gen2 = mix_terms(gen, U)
    f = rand_herm(3, rng)
    assert lipschitz_constant(gen2, f, "lip2") == pytest.approx(lipschitz_constant(gen, f, "lip2"), rel=1e-10)


def test_lipschitz_qubit_example():
    gen = depolarizing_generator(np.eye(2) / 2)
    Z = np.diag([1.0, -1.0])
    # each of the two off-diagonal matrix units gives |[E, Z]| of norm 2
    w = _weights(gen)
    D = gen.gradient(Z)
    ref = np.sqrt(np.sum(w * np.linalg.norm(D, ord=2, axis=(1, 2)) ** 2))
    assert lipschitz_constant(gen, Z) == pytest.approx(ref)
    assert lipschitz_constant(gen, Z, "clh") == pytest.approx(2.0)


# ------------------------------------------------------------------ W1

def test_w1_zero_distance(rng):
    gen = random_generator(2, rng)
    rho = rand_state(2, rng)
    for v in VARIANTS:
        assert w1(gen, rho, rho, v).value == 0.0


def _tv_lp(p, q):
    d = len(p)
    A, b = [], []
    for i in range(d):
        for k in range(d):
            if i != k:
                row = np.zeros(d)
                row[i], row[k] = 1, -1
                A.append(row)
                b.append(1.0)
    res = linprog(-(p - q), A_ub=np.array(A), b_ub=b, bounds=[(None, None)] * d, method="highs")
    return -res.fun


def test_w1_clh_is_total_variation(rng):
    for d in (2, 3):
        gen = depolarizing_generator(np.eye(d) / d)
        for _ in range(10):
            p, q = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
            val = w1(gen, np.diag(p), np.diag(q), "clh").value
            assert val == pytest.approx(_tv_lp(p, q), abs=1e-9)
            assert val == pytest.approx(0.5 * np.abs(p - q).sum(), abs=1e-12)


def test_w1_metric_axioms(rng):
    gen = random_generator(3, rng)
    a, b, c = (rand_state(3, rng) for _ in range(3))
    ab = w1(gen, a, b, "lip2").value
    assert ab == pytest.approx(w1(gen, b, a, "lip2").value, rel=1e-10)
    assert ab <= w1(gen, a, c, "lip2").value + w1(gen, c, b, "lip2").value + 1e-10
    assert ab > 0


def test_w1_certificate_is_feasible(rng):
    gen = random_generator(3, rng)
    rho, tau = rand_state(3, rng), rand_state(3, rng)
    for v in VARIANTS:
        r = w1(gen, rho, tau, v, starts=4)
        assert lipschitz_constant(gen, r.certificate, v) <= 1 + 1e-8
        assert np.trace(r.certificate @ (rho - tau)).real == pytest.approx(r.value, abs=1e-9)
    assert w1(gen, rho, tau, "lip", starts=4).value >= w1(gen, rho, tau, "lip2").value - 1e-10


def _w1_lip_sdp(gen, delta):
    d = gen.dim
    F = cp.Variable((d, d), hermitian=True)
    t = cp.Variable(gen.nterms)
    cons = [cp.sigma_max(L @ F - F @ L) <= t[j] for j, L in enumerate(gen.L)]
    cons.append(cp.sum_squares(cp.multiply(np.sqrt(_weights(gen)), t)) <= 1)
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(F @ delta))), cons)
    prob.solve(solver="CLARABEL")
    return prob.value


def test_w1_lip_matches_sdp(rng):
    for d in (2, 3):
        gen = random_generator(d, rng)
        rho, tau = rand_state(d, rng), rand_state(d, rng)
        ref = _w1_lip_sdp(gen, rho - tau)
        assert w1(gen, rho, tau, "lip", starts=8).value == pytest.approx(ref, rel=1e-5)


# ------------------------------------------------------------------ metric

def test_metric_bilinear_and_positive(rng):
    gen = random_generator(3, rng)
    rho = rand_state(3, rng)
    tau = rand_herm(3, rng)
    tau -= np.trace(tau) / 3 * np.eye(3)
    q = metric_norm_squared(gen, rho, tau)
    assert q > 0
    assert metric_norm_squared(gen, rho, -2.0 * tau) == pytest.approx(4 * q, rel=1e-10)
    M = metric_operator(gen, rho)
    assert np.allclose(M, M.conj().T, atol=1e-12)
    with pytest.raises(InvalidInputError):
        metric_norm_squared(gen, rho, np.eye(3))


def test_metric_potential_solves(rng):
    gen = random_generator(2, rng)
    rho = rand_state(2, rng)
    tau = np.array([[0.1, 0.2 - 0.1j], [0.2 + 0.1j, -0.1]])
    q, U = metric_norm_squared(gen, rho, tau, return_potential=True)
    M = metric_operator(gen, rho)
    assert np.allclose((M @ U.reshape(-1, order="F")).reshape(2, 2, order="F"), tau, atol=1e-10)
    assert q == pytest.approx(np.trace(U @ tau).real, rel=1e-10)


def test_gradient_flow_identity(rng):
    for d in (2, 3, 4):
        gen = depolarizing_generator(rand_state(d, rng))
        rho = rand_state(d, rng)
        q = metric_norm_squared(gen, rho, gen.apply_adjoint(rho))
        assert q == pytest.approx(fisher_information(gen, rho), rel=1e-6)


# ------------------------------------------------------------------ W2

def _qubit_geodesic(gen, p0, p1):
    """Length of the diagonal segment: exact W2 between commuting qubit states."""
    Z = np.diag([1.0, -1.0])
    speed = lambda p: np.sqrt(metric_norm_squared(gen, np.diag([p, 1 - p]), Z))
    return abs(quad(speed, p0, p1, epsabs=1e-12, epsrel=1e-12)[0])


def test_w2_classical_qubit_oracle():
    gen = depolarizing_generator(np.diag([0.7, 0.3]))
    p0, p1 = 0.9, 0.2
    ref = _qubit_geodesic(gen, p0, p1)
    r = w2_bracket(gen, np.diag([p0, 1 - p0]), np.diag([p1, 1 - p1]), K_max=32, starts=4)
    lo, hi = r.bracket
    assert lo <= ref + 1e-9 and ref <= hi + 1e-9
    assert hi == pytest.approx(ref, rel=2e-3)


def test_w2_upper_structure(rng):
    gen = random_generator(3, rng)
    rho, tau = rand_state(3, rng), rand_state(3, rng)
    r = w2_upper(gen, rho, tau, K_max=16)
    vals = [v for _, v in r.info["history"]]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert r.value <= np.sqrt(r.info["linear_action"]) + 1e-12
    path = r.certificate
    assert np.allclose(path.states[0], rho) and np.allclose(path.states[-1], tau)
    # continuity equation holds exactly on every segment
    M = [metric_operator(gen, s) for s in path.states]
    for k in range(path.K):
        U = path.potentials[k].reshape(-1, order="F")
        lhs = (path.states[k + 1] - path.states[k]) * path.K
        assert np.max(np.abs(lhs.reshape(-1, order="F") - M[k] @ U)) < 1e-8
    with pytest.raises(InvalidInputError):
        w2_upper(gen, rho, tau, K=2)
    assert w2_upper(gen, rho, rho).value == 0.0


def test_w1_bounded_by_w2(rng):
    for d in (2, 3):
        gen = random_generator(d, rng)
        rho, tau = rand_state(d, rng), rand_state(d, rng)
        lhs = w1(gen, rho, tau, "lip", starts=4).value
        assert lhs <= np.sqrt(d) * w2_upper(gen, rho, tau, K_max=8).value + 1e-6


def test_w2_depolarizing_trace_norm_lower(rng):
    gen = depolarizing_generator(rand_state(2, rng))
    rho, tau = rand_state(2, rng), rand_state(2, rng)
    r = w2_bracket(gen, rho, tau, K_max=8, starts=4)
    assert r.bracket[0] >= trace_norm(rho - tau) / np.sqrt(2) - 1e-12
    assert r.bracket[0] <= r.bracket[1]


def test_w1_variant_ordering(rng):
    for k in range(10):
        d = 2 + k % 2
        gen = random_generator(d, rng) if k % 3 else depolarizing_generator(rand_state(d, rng))
        rho, tau = rand_state(d, rng), rand_state(d, rng)
        vals = [w1(gen, rho, tau, v, starts=4).value for v in ("liph", "lipg", "lip2", "lip")]
        assert all(a <= b + 1e-8 for a, b in zip(vals, vals[1:])), vals


def test_w1_indiscernibles(rng):
    gen = random_generator(2, rng)
    rho = rand_state(2, rng)
    tau = rho + 1e-4 * np.diag([1.0, -1.0])
    assert 0 < w1(gen, rho, tau, "lip2").value < 1e-3
