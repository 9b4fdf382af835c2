"""Finite-sample parameter estimation with the SLD-based unbiased estimator."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateObservableError, InvalidInputError, ResourceLimitError, UninformativeFamilyError
from .generator import DBGenerator, depolarizing_generator, site_sum, spectral_gap
from .inequalities import hamming_lipschitz, log_sobolev_denominator, modular_parts, product_concentration_bound
from .linalg import _full_rank_eig, as_density, dagger, eigh

FISHER_TOL = 1e-12
MAX_SAMPLES = 10 ** 10


class ParametricFamily:
    """theta -> rho_theta with an analytic or finite-difference derivative."""

    def __init__(self, state: Callable, derivative: Callable | None = None, name: str = "", h: float = 1e-5):
        self._state = state
        self._derivative = derivative
        self.name = name
        self.h = h

    def state(self, theta: float) -> np.ndarray:
        return as_density(self._state(float(theta)), full_rank=True, name=f"rho({theta})")

    def derivative(self, theta: float) -> np.ndarray:
        if self._derivative is not None:
            return np.asarray(self._derivative(float(theta)), dtype=complex)
        # central difference with one Richardson step
        h = self.h
        d1 = (self._state(theta + h) - self._state(theta - h)) / (2 * h)
        d2 = (self._state(theta + h / 2) - self._state(theta - h / 2)) / h
        return (4 * d2 - d1) / 3


def diag_family() -> ParametricFamily:
    """Classical Bernoulli family diag(theta, 1 - theta)."""
    return ParametricFamily(lambda t: np.diag([t, 1 - t]).astype(complex),
                            lambda t: np.diag([1.0, -1.0]).astype(complex), name="diag")


_Z = np.diag([1.0, -1.0]).astype(complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def rotation_family(rho0=None) -> ParametricFamily:
    """Z-rotation e^{-i theta Z/2} rho0 e^{i theta Z/2} of a fixed full-rank qubit."""
    if rho0 is None:
        rho0 = 0.5 * (np.eye(2) + 0.6 * _X + 0.2 * _Z)
    rho0 = as_density(rho0, full_rank=True, name="rho0")

    def state(t):
        U = np.diag(np.exp(-0.5j * t * np.array([1.0, -1.0])))
        return U @ rho0 @ dagger(U)

    def deriv(t):
        r = state(t)
        return -0.5j * (_Z @ r - r @ _Z)

    return ParametricFamily(state, deriv, name="rotation")


def _expm_derivative(A: np.ndarray, dA: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(e^A, d/dt e^{A(t)}) for Hermitian A through divided differences."""
    a, V = eigh(A)
    ea = np.exp(a)
    diff = a[:, None] - a[None, :]
    close = np.abs(diff) < 1e-10
    G = np.where(close, 0.5 * (ea[:, None] + ea[None, :]),
                 (ea[:, None] - ea[None, :]) / np.where(close, 1.0, diff))
    return (V * ea) @ dagger(V), V @ (G * (dagger(V) @ dA @ V)) @ dagger(V)


def gibbs_family(H0=None, H1=None) -> ParametricFamily:
    """Gibbs state e^{-(H0 + theta H1)} / Z with non-commuting H0, H1."""
    H0 = np.asarray(_Z if H0 is None else H0, dtype=complex)
    H1 = np.asarray(_X if H1 is None else H1, dtype=complex)

    def both(t):
        E, dE = _expm_derivative(-(H0 + t * H1), -H1)
        Z = np.trace(E).real
        rho = E / Z
        return rho, dE / Z - rho * (np.trace(dE).real / Z)

    return ParametricFamily(lambda t: both(t)[0], lambda t: both(t)[1], name="gibbs")


FAMILIES = {"diag": diag_family, "rotation": rotation_family, "gibbs": gibbs_family}


def family_by_name(name: str) -> ParametricFamily:
    if name not in FAMILIES:
        raise InvalidInputError(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")
    return FAMILIES[name]()


# ------------------------------------------------------------------ SLD

def sld(family: ParametricFamily, theta: float) -> np.ndarray:
    """Symmetric logarithmic derivative: d rho = (rho L + L rho) / 2."""
    rho = family.state(theta)
    p, V = _full_rank_eig(rho, "rho_theta")
    dr = dagger(V) @ family.derivative(theta) @ V
    L = 2 * dr / (p[:, None] + p[None, :])
    L = V @ L @ dagger(V)
    return 0.5 * (L + dagger(L))


def sld_residual(family: ParametricFamily, theta: float) -> float:
    rho, L = family.state(theta), sld(family, theta)
    return float(np.linalg.norm(0.5 * (rho @ L + L @ rho) - family.derivative(theta)))


def sld_fisher(family: ParametricFamily, theta: float) -> float:
    rho, L = family.state(theta), sld(family, theta)
    return float(max(np.trace(rho @ L @ L).real, 0.0))


def estimator_observable(family: ParametricFamily, theta: float) -> np.ndarray:
    """Locally unbiased f = L_theta / J_theta + theta I."""
    J = sld_fisher(family, theta)
    if J <= FISHER_TOL:
        raise UninformativeFamilyError(f"SLD Fisher information {J:.3e} is too small")
    L = sld(family, theta)
    return L / J + theta * np.eye(L.shape[0])


def estimator_n(f: np.ndarray, n: int) -> np.ndarray:
    """f_n = (1/n) sum_k I x .. x f x .. x I."""
    return site_sum(np.asarray(f, dtype=complex), n)


# --------------------------------------------------------------- bounds

def error_bound_dissipative(gen: DBGenerator, f, n: int, eps: float, lam: float | None = None) -> float:
    """Two-sided error bound from a dissipative preparation with invariant state rho_theta."""
    if lam is None:
        lam = spectral_gap(gen).spectral_gap
    return float(2 * product_concentration_bound(gen, f, n, eps, lam))


def error_bound_depolarizing(rho, f, n: int, eps: float) -> float:
    """Dimension-free two-sided bound for the depolarizing preparation."""
    rho = as_density(rho, full_rank=True, name="rho_theta")
    gr, gi = modular_parts(rho, f)
    L = max(hamming_lipschitz(gr), hamming_lipschitz(gi))
    if L < 1e-14:
        raise DegenerateObservableError("f is a multiple of the identity")
    if eps <= 0:
        return 2.0
    return float(2 * np.exp(-n * eps ** 2 / (16 * log_sobolev_denominator(rho) * L ** 2)))


# ------------------------------------------------------------ Monte Carlo

def _outcomes(family: ParametricFamily, theta: float):
    f = estimator_observable(family, theta)
    rho = family.state(theta)
    w, V = eigh(f)
    p = np.clip(np.real(np.einsum("ak,ab,bk->k", np.conj(V), rho, V)), 0, None)
    return w, p / p.sum()


def _outside(means, theta: float, eps: float):
    return np.abs(np.asarray(means) - theta) > eps + 1e-12


def _block(args):
    seq, size, n, values, probs, theta, eps = args
    rng = np.random.default_rng(seq)
    counts = rng.multinomial(n, probs, size=size)
    means = counts @ values / n
    return int(np.sum(_outside(means, theta, eps)))


def monte_carlo_error_probability(family: ParametricFamily, theta: float, n: int, eps: float, trials: int,
                                  seed=0, block: int = 10000, map_fn: Callable = map) -> tuple[float, float]:
    """Frequency of |theta_hat - theta| > eps and its binomial standard error.

    Each copy is measured in the eigenbasis of f and outcomes are averaged.
    Work is split into fixed blocks seeded by SeedSequence.spawn, so the
    result does not depend on how blocks are scheduled.
    """
    if n < 1 or trials < 1:
        raise InvalidInputError("n and trials must be positive")
    if n * trials > MAX_SAMPLES:
        raise ResourceLimitError(f"n*trials = {n * trials} exceeds {MAX_SAMPLES}")
    values, probs = _outcomes(family, theta)
    nblocks = -(-trials // block)
    seqs = np.random.SeedSequence(seed).spawn(nblocks)
    sizes = [min(block, trials - k * block) for k in range(nblocks)]
    hits = sum(map_fn(_block, [(s, m, n, values, probs, theta, eps) for s, m in zip(seqs, sizes)]))
    p = hits / trials
    return float(p), float(np.sqrt(p * (1 - p) / trials))


def _compositions(n: int, k: int):
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev, out = -1, []
        for b in bars + (n + k - 1,):
            out.append(b - prev - 1)
            prev = b
        yield out


def exact_error_probability(family: ParametricFamily, theta: float, n: int, eps: float) -> float:
    """P(|theta_hat - theta| > eps) by enumerating multinomial outcome counts."""
    values, probs = _outcomes(family, theta)
    counts = np.array(list(_compositions(n, len(values))), dtype=float)
    with np.errstate(divide="ignore"):
        logp = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), -np.inf)
    logpmf = gammaln(n + 1) - np.sum(gammaln(counts + 1), axis=1) + np.sum(
        np.where(counts > 0, counts * logp, 0.0), axis=1)
    means = counts @ values / n
    return float(np.sum(np.exp(logpmf)[_outside(means, theta, eps)]))


def _merge(values, probs, tol: float = 1e-10):
    order = np.argsort(values)
    values, probs = np.asarray(values)[order], np.asarray(probs)[order]
    out_v, out_p = [], []
    for v, p in zip(values, probs):
        if out_v and abs(v - out_v[-1]) <= tol * max(1.0, abs(v)):
            out_p[-1] += p
        else:
            out_v.append(v)
            out_p.append(p)
    return np.array(out_v), np.array(out_p)


def estimate_distribution(family: ParametricFamily, theta: float, n: int, method: str = "product"):
    """Distribution of theta_hat as sorted (values, probabilities), equal values merged.

    ``product`` measures each copy in f's eigenbasis and averages; ``global``
    measures the spectral decomposition of f_n on the n-fold product state.
    """
    if method == "product":
        values, probs = _outcomes(family, theta)
        counts = np.array(list(_compositions(n, len(values))), dtype=float)
        logpmf = gammaln(n + 1) - np.sum(gammaln(counts + 1), axis=1) + counts @ np.log(np.maximum(probs, 1e-300))
        return _merge(counts @ values / n, np.exp(logpmf))
    if method == "global":
        f = estimator_observable(family, theta)
        rho = family.state(theta)
        rn = rho
        for _ in range(n - 1):
            rn = np.kron(rn, rho)
        w, V = eigh(estimator_n(f, n))
        return _merge(w, np.real(np.einsum("ak,ab,bk->k", np.conj(V), rn, V)))
    raise InvalidInputError(f"unknown method {method!r}")


# ------------------------------------------------------------------ report

@dataclass
class EstimationBoundReport:
    family: str
    theta: float
    n: int
    eps: float
    fisher: float
    bound_dissipative: float
    bound_depolarizing: float
    empirical: float
    standard_error: float
    trials: int
    seed: int
    generator: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        slack = 3 * self.standard_error
        return self.empirical <= min(self.bound_dissipative, self.bound_depolarizing) + slack

    def to_json(self) -> dict:
        return asdict(self)


def estimation_report(family: ParametricFamily, theta: float, n: int, eps: float, trials: int, seed=0,
                      gen: DBGenerator | None = None, map_fn: Callable = map) -> EstimationBoundReport:
    rho = family.state(theta)
    f = estimator_observable(family, theta)
    if gen is None:
        gen = depolarizing_generator(rho)
        meta = {"preparation": "depolarizing(rho_theta)", "assumes_alpha2_le_alpha1": False}
    else:
        if np.max(np.abs(gen.sigma - rho)) > 1e-8:
            raise InvalidInputError("generator's invariant state must equal rho_theta")
        meta = {"preparation": gen.label or "user", "assumes_alpha2_le_alpha1": True}
    lam = spectral_gap(gen).spectral_gap
    meta["spectral_gap"] = lam
    emp, se = monte_carlo_error_probability(family, theta, n, eps, trials, seed, map_fn=map_fn)
    return EstimationBoundReport(family.name, float(theta), int(n), float(eps), sld_fisher(family, theta),
                                 error_bound_dissipative(gen, f, n, eps, lam), error_bound_depolarizing(rho, f, n, eps),
                                 emp, se, int(trials), int(seed), meta)
