"""Functional and transport inequalities, concentration bounds and their checks.

Every check returns a margin ``lhs - rhs`` oriented so that a non-negative
margin means the inequality holds on that sample.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .entropy import dirichlet_form, fisher_information, relative_entropy, weighted_inner
from .errors import DegenerateObservableError, InvalidInputError
from .generator import DBGenerator, is_depolarizing, mlsi_constant_depolarizing, spectral_gap
from .linalg import (
    _full_rank_eig,
    as_density,
    as_hermitian,
    dagger,
    eigh,
    matrix_to_json,
    tilted_factors,
    trace_norm,
)
from .sampling import haar_unitary, random_density, random_hermitian, rng_from
from .wasserstein import lipschitz_constant, w1, w2_upper

NAMES = ("MLSI", "TC2", "TC1", "PI", "Pinsker", "ExpConc", "GaussConc", "GaussConcDepol", "Mixing")


@dataclass
class InequalityReport:
    name: str
    constant: float
    constant_label: str
    samples: int
    worst_margin: float
    witness: dict | None = None
    margins: list = field(default_factory=list)
    slack: float = 1e-6

    @property
    def ok(self) -> bool:
        return self.worst_margin >= -self.slack

    def to_json(self) -> dict:
        return {"inequality": self.name, "constant": self.constant, "constant_label": self.constant_label,
                "samples": self.samples, "worst_margin": self.worst_margin, "slack": self.slack,
                "witness": self.witness}


# ---------------------------------------------------------------- MLSI

def mlsi_ratio(gen: DBGenerator, rho) -> float:
    """I_sigma(rho) / (2 D(rho||sigma)); undefined at rho = sigma."""
    D = relative_entropy(rho, gen.sigma)
    if D < 1e-14:
        raise InvalidInputError("MLSI ratio is 0/0 at rho = sigma")
    return fisher_information(gen, rho) / (2 * D)


def mlsi_margin(gen: DBGenerator, rho, alpha: float) -> float:
    return fisher_information(gen, rho) - 2 * alpha * relative_entropy(rho, gen.sigma)


def mlsi_estimate(gen: DBGenerator, samples: Sequence) -> float:
    """inf of the MLSI ratio over the samples (an upper estimate of alpha_1)."""
    vals = []
    for rho in samples:
        if relative_entropy(rho, gen.sigma) >= 1e-12:
            vals.append(mlsi_ratio(gen, rho))
    if not vals:
        raise InvalidInputError("no usable samples (all equal to sigma)")
    return float(min(vals))


def alpha1(gen: DBGenerator, samples: Sequence | None = None) -> tuple[float, str]:
    """alpha_1 in closed form for depolarizing generators, else a sampled estimate."""
    if is_depolarizing(gen):
        return mlsi_constant_depolarizing(gen.sigma), "alpha1(sigma) closed form"
    if samples is None:
        raise InvalidInputError("non-depolarizing generator: samples needed to estimate alpha_1")
    return mlsi_estimate(gen, samples), "alpha1 sampled estimate"


# ------------------------------------------------------- transport costs

def tc2_check(gen: DBGenerator, rho, c2: float, K: int = 4, K_max: int = 8, return_result: bool = False):
    """sqrt(2 c2 D(rho||sigma)) - W2 upper bound."""
    up = w2_upper(gen, rho, gen.sigma, K=K, K_max=K_max)
    margin = float(np.sqrt(2 * c2 * relative_entropy(rho, gen.sigma)) - up.value)
    return (margin, up) if return_result else margin


def tc1_check(gen: DBGenerator, rho, c1: float, variant: str = "lip", starts: int = 4, seed=0,
              return_result: bool = False):
    """sqrt(2 c1 D(rho||sigma)) - W1 (ascent value, a lower bound on the exact W1)."""
    res = w1(gen, rho, gen.sigma, variant, starts=starts, seed=seed)
    margin = float(np.sqrt(2 * c1 * relative_entropy(rho, gen.sigma)) - res.value)
    return (margin, res) if return_result else margin


# ------------------------------------------------------------------ kappa

def _haagerup_bound(m: np.ndarray, loga: np.ndarray, logb: np.ndarray) -> float:
    """max_k |x_k| max_l |y_l| for the factorization built from diag(a) m diag(b)."""
    a, b = np.exp(loga), np.exp(logb)
    mp = a[:, None] * m * b[None, :]
    u, s, vh = np.linalg.svd(mp)
    row = np.einsum("ka,a,ka->k", u, s, np.conj(u)).real / a ** 2
    col = np.einsum("al,a,al->l", vh, s, np.conj(vh)).real / b ** 2
    return float(np.sqrt(np.max(row) * np.max(col)))


def schur_norm_upper(m: np.ndarray, max_iter: int = 2000) -> float:
    """Upper bound on the operator-norm Schur multiplier norm of m."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    cands = [np.max(np.linalg.norm(m, axis=1)), np.max(np.linalg.norm(m, axis=0))]
    h = 0.5 * (m + dagger(m))
    if np.allclose(m, h, atol=1e-13) and np.linalg.eigvalsh(h)[0] >= -1e-13:
        cands.append(np.max(np.real(np.diag(m))))
    obj = lambda z: _haagerup_bound(m, z[:n], z[n:])
    z0 = np.zeros(2 * n)
    cands.append(obj(z0))
    res = minimize(obj, z0, method="Nelder-Mead",
                   options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-13, "adaptive": True})
    cands.append(float(res.fun))
    res = minimize(obj, res.x, method="Powell", options={"maxiter": max_iter, "xtol": 1e-10, "ftol": 1e-13})
    cands.append(float(res.fun))
    return float(min(cands))


def schur_norm_lower(m: np.ndarray, rng=None, starts: int = 8, max_iter: int = 500):
    """Lower bound max ||m o U||_inf over unitaries U by monotone ascent.

    Given U, the top singular pair (u, v) of m o U defines a linear functional
    U -> Re sum conj(u_k) m_kl v_l U_kl, maximized over unitaries by a polar factor.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    rng = rng_from(rng)
    fourier = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
    inits = [np.eye(n, dtype=complex), fourier]
    inits += [haar_unitary(n, rng) for _ in range(max(starts - 2, 0))]
    best, best_u = -1.0, None
    for U in inits:
        val = np.linalg.norm(m * U, 2)
        for _ in range(max_iter):
            uu, _, vh = np.linalg.svd(m * U)
            W = np.conj(uu[:, 0])[:, None] * m * np.conj(vh[0, :])[None, :]
            p, _, qh = np.linalg.svd(W.T)
            U_new = dagger(qh) @ dagger(p)
            new = np.linalg.norm(m * U_new, 2)
            U = U_new
            if new <= val * (1 + 1e-13):
                val = max(val, new)
                break
            val = new
        if val > best:
            best, best_u = float(val), U
    return best, best_u


def kappa_multiplier(sigma, omega: float) -> np.ndarray:
    """Eigenbasis multiplier of [sigma]_w o [sigma]_{-w}^{-1}."""
    w, _ = _full_rank_eig(sigma, "sigma")
    return tilted_factors(w, omega) / tilted_factors(w, -omega)


def kappa(gen: DBGenerator, commutative: bool = False, seed=0, starts: int = 8) -> tuple[float, float]:
    """[lower, upper] bracket on kappa_L = sup_j ||[sigma]_{w_j} o [sigma]_{-w_j}^{-1}||_{inf->inf}.

    With ``commutative=True`` the maps are restricted to operators commuting
    with sigma, where every multiplier entry is 1.
    """
    if commutative:
        return 1.0, 1.0
    rng = rng_from(seed)
    lo, hi = 1.0, 1.0
    for om in np.unique(np.round(gen.omega, 12)):
        if om == 0:
            continue
        m = kappa_multiplier(gen.sigma, float(om))
        lval, _ = schur_norm_lower(m, rng, starts=starts)
        uval = schur_norm_upper(m)
        lo, hi = max(lo, lval), max(hi, uval, lval)
    return float(lo), float(hi)


# --------------------------------------------------------------- Poincare

def poincare_margin(gen: DBGenerator, f, lam: float, tol: float = 1e-9) -> float:
    """E_{1/2,2}(f, f) - lam ||f||^2_{1/2,sigma} for sigma-centered f."""
    f = np.asarray(f, dtype=complex)
    mean = np.trace(gen.sigma @ f)
    if abs(mean) > tol * max(1.0, np.linalg.norm(f)):
        raise InvalidInputError(f"f must be centered (Tr sigma f = {mean:.3e})")
    E = dirichlet_form(gen, f, f, 0.5).real
    return float(E - lam * weighted_inner(gen.sigma, f, f, 0.5).real)


def center(sigma, f) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    return f - np.trace(np.asarray(sigma) @ f) * np.eye(f.shape[0])


# ----------------------------------------------------------- concentration

def tail_probability(sigma, f, r):
    """Tr(sigma 1_[r, inf)(f - Tr(sigma f))); vectorized over r."""
    f = as_hermitian(f, tol=1e-10, name="f")
    sigma = np.asarray(sigma, dtype=complex)
    w, v = eigh(center(sigma, f))
    weights = np.real(np.einsum("ak,ab,bk->k", np.conj(v), sigma, v))
    r_arr = np.asarray(r, dtype=float)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(w))))
    out = np.sum(weights[None, :] * (w[None, :] >= r_arr.reshape(-1, 1) - tol), axis=1)
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if r_arr.ndim == 0 else out.reshape(r_arr.shape)


def _bound_shape(r, fn, r0_value):
    r_arr = np.asarray(r, dtype=float)
    out = np.where(r_arr > 0, fn(np.maximum(r_arr, 0.0)), r0_value)
    return float(out) if r_arr.ndim == 0 else out


def exp_constant(gen: DBGenerator, f, lam: float | None = None) -> tuple[float, float, float]:
    """(C_{f,lam}, ||f||_Lip, lam) for the exponential concentration bound."""
    f = as_hermitian(f, tol=1e-10, name="f")
    lip = lipschitz_constant(gen, f, "lip")
    if lip < 1e-14:
        raise DegenerateObservableError("f is a multiple of the identity (Lipschitz constant 0)")
    if lam is None:
        lam = spectral_gap(gen).spectral_gap
    fc = center(gen.sigma, f)
    x = np.sqrt(lam) * np.linalg.norm(fc, 2) / lip
    C = np.expm1(2 * x) / (np.sqrt(2) * x)
    return float(C), float(lip), float(lam)


def exp_concentration_bound(gen: DBGenerator, f, r, lam: float | None = None):
    """3 exp(-r sqrt(lam) / (||f||_Lip C_{f,lam})); lam defaults to the spectral gap."""
    C, lip, lam = exp_constant(gen, f, lam)
    return _bound_shape(r, lambda x: 3 * np.exp(-x * np.sqrt(lam) / (lip * C)), 3.0)


def modular_parts(sigma, f) -> tuple[np.ndarray, np.ndarray]:
    """Real and imaginary parts of Delta_sigma^{-1/2}(f) = sigma^{-1/2} f sigma^{1/2}."""
    w, v = _full_rank_eig(sigma, "sigma")
    g = (v / np.sqrt(w)) @ dagger(v) @ np.asarray(f, dtype=complex) @ (v * np.sqrt(w)) @ dagger(v)
    return 0.5 * (g + dagger(g)), (g - dagger(g)) / 2j


def modular_lipschitz(gen: DBGenerator, f, variant: str = "lip") -> float:
    """max(||g_R||_variant, ||g_I||_variant) with g = Delta_sigma^{-1/2}(f)."""
    gr, gi = modular_parts(gen.sigma, f)
    lr = lipschitz_constant(gen, gr, variant)
    li = lipschitz_constant(gen, gi, variant)
    if max(lr, li) < 1e-14:
        raise DegenerateObservableError("both modular parts of f have zero Lipschitz constant")
    return float(max(lr, li))


def gauss_concentration_bound(gen: DBGenerator, f, r, c1: float):
    """exp(-r^2 / (8 max(||g_R||^2_Lip, ||g_I||^2_Lip) c1))."""
    if c1 <= 0:
        raise InvalidInputError("c1 must be positive")
    L = modular_lipschitz(gen, f, "lip")
    return _bound_shape(r, lambda x: np.exp(-x ** 2 / (8 * L ** 2 * c1)), 1.0)


def hamming_lipschitz(f) -> float:
    """sup_{x != y} |phi(x) - phi(y)| over the eigenvalues of a Hermitian f."""
    w = np.linalg.eigvalsh(as_hermitian(f, tol=1e-9, name="f"))
    return float(w[-1] - w[0])


def depolarizing_gauss_bound(sigma, f, r, alpha: float | None = None):
    """exp(-r^2 alpha_1(sigma) / (16 max(lipH(phi_R)^2, lipH(phi_I)^2)))."""
    sigma = as_density(sigma, full_rank=True, name="sigma")
    if alpha is None:
        alpha = mlsi_constant_depolarizing(sigma)
    gr, gi = modular_parts(sigma, f)
    L = max(hamming_lipschitz(gr), hamming_lipschitz(gi))
    if L < 1e-14:
        raise DegenerateObservableError("f is a multiple of the identity")
    return _bound_shape(r, lambda x: np.exp(-x ** 2 * alpha / (16 * L ** 2)), 1.0)


def log_sobolev_denominator(sigma) -> float:
    """11 + log(d^4 ||sigma^{-1}||_inf)."""
    w, _ = _full_rank_eig(sigma, "sigma")
    return float(11 + np.log(len(w) ** 4 / w[0]))


def product_concentration_bound(site_gen: DBGenerator, f, n: int, r, lam: float | None = None):
    """Tail bound for f_n = (1/n) sum_k f^(k) under sigma^{(x)n}, n identical sites."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if lam is None:
        lam = spectral_gap(site_gen).spectral_gap
    d = site_gen.dim
    L = modular_lipschitz(site_gen, f, "lip")
    den = 8 * d * log_sobolev_denominator(site_gen.sigma) * L ** 2
    return _bound_shape(r, lambda x: np.exp(-lam * n * x ** 2 / den), 1.0)


# ---------------------------------------------------------- Pinsker, mixing

def pinsker_check(rho, sigma) -> float:
    """sqrt(2 D(rho||sigma)) - ||rho - sigma||_1."""
    D = relative_entropy(rho, sigma)
    return float(np.sqrt(2 * D) - trace_norm(np.asarray(rho) - np.asarray(sigma)))


def mixing_check(gen: DBGenerator, rho, ts, alpha: float | None = None) -> np.ndarray:
    """e^{-alpha t} sqrt(2 D(rho||sigma)) - ||rho_t - sigma||_1 on a time grid."""
    if alpha is None:
        alpha, _ = alpha1(gen)
    D = relative_entropy(rho, gen.sigma)
    out = []
    for t in np.atleast_1d(ts):
        rt = gen.evolve(rho, float(t))
        out.append(np.exp(-alpha * t) * np.sqrt(2 * D) - trace_norm(rt - gen.sigma))
    return np.array(out)


# ------------------------------------------------------------ chain sweep

def _witness(rho=None, f=None, **extra) -> dict:
    out = {}
    if rho is not None:
        out["rho"] = matrix_to_json(rho)
    if f is not None:
        out["f"] = matrix_to_json(f)
    out.update(extra)
    return out


def _sample_task(args):
    gen, rho, f, consts, opts = args
    a1, c2, c1, lam = consts["alpha1"], consts["c2"], consts["c1"], consts["gap"]
    D = relative_entropy(rho, gen.sigma)
    out = {}
    out["MLSI"] = fisher_information(gen, rho) - 2 * a1 * D
    out["TC2"] = tc2_check(gen, rho, c2, K=opts["K"], K_max=opts["K_max"])
    out["TC1"] = tc1_check(gen, rho, c1, starts=opts["starts"], seed=opts["seed"])
    out["Pinsker"] = pinsker_check(rho, gen.sigma)
    if consts["depolarizing"]:
        out["Mixing"] = float(np.min(mixing_check(gen, rho, opts["ts"], a1)))
    r = opts["r_grid"]
    tail = tail_probability(gen.sigma, f, r)
    out["ExpConc"] = float(np.min(exp_concentration_bound(gen, f, r, lam) - tail))
    out["GaussConc"] = float(np.min(gauss_concentration_bound(gen, f, r, c1) - tail))
    if consts["depolarizing"]:
        out["GaussConcDepol"] = float(np.min(depolarizing_gauss_bound(gen.sigma, f, r, a1) - tail))
    return out


def chain_check(gen: DBGenerator, samples: int, seed=0, K: int = 4, K_max: int = 8, starts: int = 4,
                r_grid=None, ts=(0.0, 0.5, 1.0, 2.0), map_fn: Callable = map) -> list[InequalityReport]:
    """Sweep the inequality chain over sampled states and observables.

    States are Hilbert-Schmidt random, mixed with I/d at weight 1e-3; all
    random draws happen up front from one generator so that the result does
    not depend on how ``map_fn`` schedules the work.
    """
    if samples < 1:
        raise InvalidInputError("at least one sample is required")
    d = gen.dim
    rng = rng_from(seed)
    states = [random_density(d, rng) for _ in range(samples)]
    obs = [random_hermitian(d, rng) for _ in range(samples)]
    if r_grid is None:
        r_grid = np.round(np.arange(0, 3.0 + 1e-12, 0.1), 12)
    dep = is_depolarizing(gen)
    a1, a1_label = alpha1(gen, None if dep else states)
    c2 = 1.0 / a1
    c1 = gen.lip_dim * c2
    gap = spectral_gap(gen).spectral_gap
    k_lo, k_hi = kappa(gen, seed=seed)
    lam_pi = 1.0 / (c2 * k_hi)
    consts = {"alpha1": a1, "c2": c2, "c1": c1, "gap": gap, "depolarizing": dep}
    opts = {"K": K, "K_max": K_max, "starts": starts, "seed": seed, "r_grid": np.asarray(r_grid), "ts": ts}
    results = list(map_fn(_sample_task, [(gen, rho, f, consts, opts) for rho, f in zip(states, obs)]))

    labels = {
        "MLSI": (a1, f"alpha1={a1_label}"),
        "TC2": (c2, "c2=1/alpha1"),
        "TC1": (c1, "c1=d*c2"),
        "Pinsker": (0.0, "none"),
        "Mixing": (a1, "alpha1"),
        "ExpConc": (gap, "lambda=spectral_gap"),
        "GaussConc": (c1, "c1=d*c2"),
        "GaussConcDepol": (a1, "alpha1(sigma)"),
    }
    reports = []
    for name in NAMES:
        if name == "PI":
            reports.append(InequalityReport("PI", lam_pi, "lambda=1/(c2*kappa_upper)", samples, gap - lam_pi,
                                            _witness(kappa=[k_lo, k_hi], spectral_gap=gap)))
            continue
        if name not in results[0]:
            continue
        margins = [res[name] for res in results]
        k = int(np.argmin(margins))
        wit = _witness(states[k], obs[k] if "Conc" in name else None, sample=k)
        const, lab = labels[name]
        reports.append(InequalityReport(name, float(const), lab, samples, float(margins[k]), wit, margins,
                                        slack=1e-9 if name == "Pinsker" else 1e-6))
    return reports


def reports_to_json(reports: Sequence[InequalityReport]) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True)
