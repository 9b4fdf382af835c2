"""Quantum Lipschitz seminorms, W1 by duality and W2 by path optimization.

W2 is bounded from above by optimizing piecewise-linear paths.  Along a
linear segment the metric integrand s -> ||tau||^2_{g, gamma(s)} is convex
(rho -> [rho]_w is concave and M -> <tau, M^{-1} tau> is convex and
decreasing), so the trapezoid rule over the nodes over-estimates the exact
action of the polygonal path and sqrt(action) is a certified upper bound.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .errors import InternalConsistencyError, InvalidInputError, NonPrimitiveError
from .generator import DBGenerator, is_depolarizing
from .linalg import (
    _full_rank_eig,
    as_density,
    as_hermitian,
    dagger,
    eigh,
    tilted_factors,
    trace_norm,
    traceless_hermitian_basis,
)
from .sampling import rng_from

VARIANTS = ("lip", "lip2", "lipg", "liph", "clh")


def _variant(v: str) -> str:
    v = str(v).lower()
    if v not in VARIANTS:
        raise InvalidInputError(f"unknown Lipschitz variant {v!r}; expected one of {VARIANTS}")
    return v


def _lip_weights(gen: DBGenerator) -> np.ndarray:
    """c_j (e^{-w_j/2} + e^{w_j/2}) / d."""
    return gen.c * (np.exp(-gen.omega / 2) + np.exp(gen.omega / 2)) / gen.lip_dim


def _graph_factor(gen: DBGenerator) -> float:
    return float(np.sqrt(2.0 / gen.lip_dim * np.sum(gen.c * np.exp(-gen.omega / 2))))


def lipschitz_constant(gen: DBGenerator, f, variant: str = "lip") -> float:
    """Quantum Lipschitz seminorm of a self-adjoint f."""
    v = _variant(variant)
    f = as_hermitian(f, tol=1e-10, name="f")
    if v == "clh":
        w = np.linalg.eigvalsh(f)
        return float(w[-1] - w[0])
    D = gen.gradient(f)
    if v == "lip":
        n = np.linalg.norm(D, ord=2, axis=(1, 2))
        return float(np.sqrt(np.sum(_lip_weights(gen) * n ** 2)))
    n = np.linalg.norm(D, axis=(1, 2))
    if v == "lip2":
        return float(np.sqrt(np.sum(_lip_weights(gen) * n ** 2)))
    sel = gen.c != 0 if v == "lipg" else np.ones(gen.nterms, bool)
    return float(np.max(n[sel], initial=0.0) * _graph_factor(gen))


# ------------------------------------------------------------------ results

@dataclass
class DiscretePath:
    K: int
    states: np.ndarray  # (K+1, d, d)
    potentials: np.ndarray  # (K, d, d): U_k with M_{rho_k} U_k = (rho_{k+1}-rho_k) K
    speeds: np.ndarray  # per-segment sqrt of the trapezoid metric average

    @property
    def speed_variance(self) -> float:
        return float(np.var(self.speeds))


@dataclass
class WassersteinResult:
    value: float
    bracket: tuple
    order: int
    variant: str = ""
    certificate: Any = None
    iterations: int = 0
    converged: bool = True
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "variant": self.variant,
            "value": float(self.value),
            "bracket": [float(self.bracket[0]), float(self.bracket[1])],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }


# ------------------------------------------------------------------ metric

def _kron_derivations(Lp: np.ndarray) -> np.ndarray:
    """Matrices of A -> [L, A] for a stack of L (..., d, d) -> (..., d^2, d^2)."""
    d = Lp.shape[-1]
    eye = np.eye(d)
    # column-stacking index (c, r) -> c*d + r
    G = np.einsum("cC,...rR->...crCR", eye, Lp) - np.einsum("...Cc,rR->...crCR", Lp, eye)
    return G.reshape(Lp.shape[:-2] + (d * d, d * d))


def _vecm(m: np.ndarray) -> np.ndarray:
    d = m.shape[-1]
    return np.swapaxes(m, -1, -2).reshape(m.shape[:-2] + (d * d,))


def _unvecm(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.shape[-1])))
    return np.swapaxes(v.reshape(v.shape[:-1] + (d, d)), -1, -2)


class _MetricBatch:
    """Metric operators M_rho for a batch of states, in each state's eigenbasis."""

    def __init__(self, gen: DBGenerator, states: np.ndarray):
        self.gen = gen
        self.p, self.V = np.linalg.eigh(states)
        if np.any(self.p <= 0):
            raise InvalidInputError("metric requires full-rank states")
        Vh = dagger(self.V)
        self.Lp = Vh[:, None] @ gen.L[None] @ self.V[:, None]
        # multiplier m(x, y) = y e^{-w/2} g(z), z = log x - log y + w, and its partials
        logp = np.log(self.p)
        w = gen.omega[None, :, None, None]
        z = logp[:, None, :, None] - logp[:, None, None, :] + w
        g, gp = _lm_parts(z)
        y = self.p[:, None, None, :]
        self.m = y * np.exp(-w / 2) * g
        self.m_dx = np.exp(w / 2) * np.exp(-z) * gp
        self.m_dy = np.exp(-w / 2) * (g - gp)
        G = _kron_derivations(self.Lp)
        n, J, d = len(self.p), gen.nterms, gen.dim
        wm = gen.c[None, :, None] * _vecm(self.m)
        Gs = G.reshape(n, J * d * d, d * d)
        M = dagger(Gs) @ (wm.reshape(n, J * d * d, 1) * Gs)
        ivec = _vecm(np.eye(d))
        alpha = np.real(np.trace(M, axis1=1, axis2=2)) / (d * d)
        self.M = M + (alpha[:, None, None] / d) * np.outer(ivec, ivec.conj())[None]
        self.scale = alpha

    def to_eig(self, n: np.ndarray, A: np.ndarray) -> np.ndarray:
        return dagger(self.V[n]) @ A @ self.V[n]

    def from_eig(self, n: np.ndarray, A: np.ndarray) -> np.ndarray:
        return self.V[n] @ A @ dagger(self.V[n])

    def solve(self, n: np.ndarray, tau: np.ndarray):
        """U (eigenbasis of node n) with M U = tau, and q = <U, tau>."""
        te = self.to_eig(n, tau)
        u = np.linalg.solve(self.M[n], _vecm(te)[..., None])[..., 0]
        Ue = _unvecm(u)
        Ue = 0.5 * (Ue + dagger(Ue))
        q = np.real(np.sum(np.conj(Ue) * te, axis=(1, 2)))
        return Ue, q

    def _grad_u(self, n, Ue):
        Lp = self.Lp[n]
        return Lp @ Ue[:, None] - Ue[:, None] @ Lp

    def apply(self, n: np.ndarray, Ue: np.ndarray) -> np.ndarray:
        """M_rho U in the eigenbasis (without the deflation term)."""
        TB = self.m[n] * self._grad_u(n, Ue)
        Lps = dagger(self.Lp[n])
        div = np.tensordot(TB @ Lps - Lps @ TB, self.gen.c, axes=([1], [0]))
        return -np.moveaxis(div, -1, 1) if div.ndim == 4 else -div

    def quad_gradient(self, n: np.ndarray, Ue: np.ndarray) -> np.ndarray:
        """Eigenbasis gradient of rho -> sum_j c_j <d_j U, [rho]_{w_j} d_j U> at fixed U."""
        B = self._grad_u(n, Ue) * np.sqrt(self.gen.c)[None, :, None, None]
        p = self.p[n]
        m, mdx, mdy = self.m[n], self.m_dx[n], self.m_dy[n]
        pa = p[:, None, :, None]
        pb = p[:, None, None, :]
        close = np.abs(pa - pb) < 1e-5 * np.maximum(pa, pb)
        den = np.where(close, 1.0, pa - pb)[..., None]
        # D1[n,j,a,b,l] first-slot divided difference of m(., p_l)
        D1 = np.where(close[..., None], 0.5 * (mdx[:, :, :, None, :] + mdx[:, :, None, :, :]),
                      (m[:, :, :, None, :] - m[:, :, None, :, :]) / den)
        # D2[n,j,a,b,k] second-slot divided difference of m(p_k, .)
        mt, mdyt = np.swapaxes(m, -1, -2), np.swapaxes(mdy, -1, -2)
        D2 = np.where(close[..., None], 0.5 * (mdyt[:, :, :, None, :] + mdyt[:, :, None, :, :]),
                      (mt[:, :, :, None, :] - mt[:, :, None, :, :]) / den)
        Bc = np.conj(B)
        g1 = np.sum(B[:, :, :, None, :] * Bc[:, :, None, :, :] * D1, axis=(1, 4))
        Bt, Btc = np.swapaxes(B, -1, -2), np.swapaxes(Bc, -1, -2)
        g2 = np.sum(Btc[:, :, :, None, :] * Bt[:, :, None, :, :] * D2, axis=(1, 4))
        return g1 + g2


def _lm_parts(z):
    """g(z) = (e^z - 1)/z and g'(z), stable near 0."""
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    ez = np.exp(zs)
    g = np.where(small, 1 + z / 2 + z * z / 6, np.expm1(zs) / zs)
    gp = np.where(small, 0.5 + z / 3 + z * z / 8, (ez * zs - ez + 1) / (zs * zs))
    return g, gp


def metric_operator(gen: DBGenerator, rho) -> np.ndarray:
    """Dense matrix of M_rho(U) = -div([rho]_w grad U) on column-stacked vectors."""
    rho = as_density(rho, full_rank=True, name="rho")
    d = gen.dim
    G = gen.derivation_matrices
    w, V = eigh(rho)
    u = np.kron(V.conj(), V)  # vec(V A V*) = kron(conj V, V) vec(A)
    out = np.zeros((d * d, d * d), dtype=complex)
    for j in range(gen.nterms):
        m = tilted_factors(w, gen.omega[j])
        T = u @ np.diag(_vecm(m)) @ dagger(u)
        out += gen.c[j] * dagger(G[j]) @ T @ G[j]
    return out


def metric_norm_squared(gen: DBGenerator, rho, tau, return_potential: bool = False):
    """||tau||^2_{g,rho} = <U, tau> with M_rho U = tau on traceless Hermitians."""
    rho = as_density(rho, full_rank=True, name="rho")
    tau = as_hermitian(tau, tol=1e-10, name="tau")
    if abs(np.trace(tau)) > 1e-9 * max(1.0, np.abs(tau).max()):
        raise InvalidInputError("tangent vector must be traceless")
    batch = _MetricBatch(gen, rho[None])
    cond = np.linalg.cond(batch.M[0])
    if not np.isfinite(cond) or cond > 1e12:
        raise NonPrimitiveError(f"metric operator is singular on traceless operators (cond {cond:.2e})")
    Ue, q = batch.solve(np.array([0]), tau[None])
    U = batch.from_eig(np.array([0]), Ue)[0]
    if return_potential:
        return float(q[0]), 0.5 * (U + dagger(U))
    return float(q[0])


# ------------------------------------------------------------------ W1

def _coords(d: int):
    return traceless_hermitian_basis(d)


def _w1_exact_lip2(gen, delta, B):
    Dc = np.einsum("jab,mbc->jmac", gen.L, B) - np.einsum("mab,jbc->jmac", B, gen.L)
    wts = _lip_weights(gen)
    Q = np.real(np.einsum("j,jmab,jnab->mn", wts, np.conj(Dc), Dc))
    dvec = np.real(np.einsum("mab,ba->m", B, delta))
    y = scipy.linalg.solve(Q, dvec, assume_a="pos")
    val = float(np.sqrt(max(dvec @ y, 0.0)))
    x = y / val if val > 0 else y
    return val, x


class _W1Problem:
    def __init__(self, gen: DBGenerator, delta: np.ndarray, variant: str):
        self.gen = gen
        self.variant = variant
        d = gen.dim
        self.B = _coords(d)
        self.Dc = np.einsum("jab,mbc->jmac", gen.L, self.B) - np.einsum("mab,jbc->jmac", self.B, gen.L)
        self.dvec = np.real(np.einsum("mab,ba->m", self.B, delta))
        self.wts = _lip_weights(gen)
        self.kg = _graph_factor(gen)
        if variant == "lipg":
            self.sel = gen.c != 0
        else:
            self.sel = np.ones(gen.nterms, bool)

    def derivs(self, x):
        return np.einsum("m,jmab->jab", x, self.Dc)

    def norm(self, x) -> float:
        A = self.derivs(x)
        if self.variant == "lip":
            n = np.linalg.norm(A, ord=2, axis=(1, 2))
            return float(np.sqrt(np.sum(self.wts * n ** 2)))
        n = np.linalg.norm(A[self.sel], axis=(1, 2))
        return float(self.kg * np.max(n))

    def smooth_norm_grad(self, x, p: float):
        """Smoothed norm N_p >= N and its gradient."""
        A = self.derivs(x)
        if self.variant == "lip":
            U, s, Vh = np.linalg.svd(A)
            smax = np.maximum(s[:, :1], 1e-300)
            r = s / smax
            sp = smax[:, 0] * np.sum(r ** p, axis=1) ** (1 / p)
            wgt = r ** (p - 1) / np.maximum(np.sum(r ** p, axis=1, keepdims=True), 1e-300) ** ((p - 1) / p)
            Gs = np.einsum("jak,jk,jkb->jab", U, wgt, Vh)
            val = np.sqrt(np.sum(self.wts * sp ** 2))
            # d val = sum_j w_j sp_j Re<G_j, dA_j> / val
            coef = self.wts * sp / max(val, 1e-300)
            grad = np.real(np.einsum("j,jab,jmab->m", coef, np.conj(Gs), self.Dc))
            return float(val), grad
        A = A[self.sel]
        Dc = self.Dc[self.sel]
        n = np.linalg.norm(A, axis=(1, 2))
        nmax = max(float(np.max(n)), 1e-300)
        r = n / nmax
        tot = np.sum(r ** p)
        val = nmax * tot ** (1 / p)
        # d n_j = Re<A_j, dA_j>/n_j ; d val = sum r_j^{p-1} tot^{1/p-1} d n_j
        coef = r ** (p - 1) * tot ** (1 / p - 1) / np.maximum(n, 1e-300)
        grad = np.real(np.einsum("j,jab,jmab->m", coef, np.conj(A), Dc))
        return float(self.kg * val), self.kg * grad

    def subgradient(self, x):
        A = self.derivs(x)
        if self.variant == "lip":
            U, s, Vh = np.linalg.svd(A)
            val = float(np.sqrt(np.sum(self.wts * s[:, 0] ** 2)))
            G = np.einsum("ja,jb->jab", U[:, :, 0], Vh[:, 0, :])
            coef = self.wts * s[:, 0] / max(val, 1e-300)
            return val, np.real(np.einsum("j,jab,jmab->m", coef, np.conj(G), self.Dc))
        idx = np.nonzero(self.sel)[0]
        n = np.linalg.norm(A[idx], axis=(1, 2))
        k = idx[int(np.argmax(n))]
        nk = max(float(np.linalg.norm(A[k])), 1e-300)
        g = np.real(np.einsum("ab,mab->m", np.conj(A[k]), self.Dc[k])) / nk
        return self.kg * nk, self.kg * g

    def ratio(self, x) -> float:
        nx = self.norm(x)
        return float(self.dvec @ x / nx) if nx > 0 else 0.0


def _ascend(prob: _W1Problem, x0: np.ndarray, tol: float, max_iter: int):
    x = x0 / max(prob.norm(x0), 1e-300)
    if prob.dvec @ x < 0:
        x = -x
    iters = 0
    for p in (4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0, 16384.0, 65536.0):
        def fun(y, p=p):
            nv, ng = prob.smooth_norm_grad(y, p)
            num = prob.dvec @ y
            return -num / nv, -(prob.dvec / nv - num * ng / nv ** 2)

        res = minimize(fun, x, jac=True, method="L-BFGS-B", options={"maxiter": 500, "gtol": 1e-12, "ftol": 1e-14})
        iters += res.nit
        if prob.ratio(res.x) >= prob.ratio(x):
            x = res.x
        x = x / max(prob.norm(x), 1e-300)
    # polish on the exact (non-smooth) ratio
    best_x, best = x.copy(), prob.ratio(x)
    step = 0.05
    window_best = best
    converged = False
    for t in range(1, max_iter + 1):
        nv, ng = prob.subgradient(x)
        num = prob.dvec @ x
        g = prob.dvec / nv - num * ng / nv ** 2
        gn = np.linalg.norm(g)
        if gn == 0:
            converged = True
            break
        x = x + step / np.sqrt(t) * np.linalg.norm(x) * g / gn
        x = x / max(prob.norm(x), 1e-300)
        r = prob.ratio(x)
        if r > best:
            best, best_x = r, x.copy()
        iters += 1
        if t % 50 == 0:
            if best - window_best <= tol * max(abs(best), 1e-300):
                converged = True
                break
            window_best = best
    return best, best_x, iters, converged


def w1(gen: DBGenerator, rho, tau, variant: str = "lip", starts: int = 16, seed=0,
       tol: float = 1e-7, max_iter: int = 2000, map_fn: Callable = map) -> WassersteinResult:
    """Dual-form W1 distance sup{|Tr f (rho - tau)| : ||f||_variant <= 1}.

    The returned value is attained by the certificate f, so it is always a
    lower bound on the exact supremum (exact for lip2 and clh).
    """
    v = _variant(variant)
    rho = as_density(rho, full_rank=True, name="rho")
    tau = as_density(tau, full_rank=True, name="tau")
    d = gen.dim
    delta = rho - tau
    if trace_norm(delta) < 1e-14:
        return WassersteinResult(0.0, (0.0, 0.0), 1, v, np.zeros((d, d), complex))
    if v == "clh":
        w, V = eigh(delta)
        pos = V[:, w > 0]
        f = pos @ dagger(pos)
        val = float(np.sum(w[w > 0]))
        return WassersteinResult(val, (val, val), 1, v, f)
    B = _coords(d)
    val2, x2 = _w1_exact_lip2(gen, delta, B)
    if v == "lip2":
        f = np.einsum("m,mab->ab", x2, B)
        return WassersteinResult(val2, (val2, val2), 1, v, f)
    prob = _W1Problem(gen, delta, v)
    rng = rng_from(seed)
    inits = [x2, prob.dvec.copy()]
    while len(inits) < max(starts, 1):
        inits.append(rng.standard_normal(len(prob.dvec)))
    inits = inits[:max(starts, 1)]
    runs = list(map_fn(lambda x0: _ascend(prob, x0, tol, max_iter), inits))
    k = int(np.argmax([r[0] for r in runs]))
    best, x, iters, conv = runs[k]
    f = np.einsum("m,mab->ab", x, B)
    if not conv:
        warnings.warn("W1 ascent stopped at max_iter; returning best value found", RuntimeWarning)
    return WassersteinResult(float(best), (float(best), np.inf), 1, v, f,
                             iterations=int(sum(r[2] for r in runs)), converged=bool(conv),
                             info={"start_values": [float(r[0]) for r in runs]})


# ------------------------------------------------------------------ W2

class _PathProblem:
    def __init__(self, gen: DBGenerator, rho0, rho1, K: int):
        self.gen = gen
        self.K = K
        self.rho0 = rho0
        self.rho1 = rho1
        d = gen.dim
        self.B = _coords(d)
        s = np.arange(1, K) / K
        bar = (1 - s)[:, None, None] * rho0 + s[:, None, None] * rho1
        w, V = np.linalg.eigh(bar)
        self.A = np.einsum("nab,nb,ncb->nac", V, np.sqrt(w), np.conj(V))
        self.Ainv = np.einsum("nab,nb,ncb->nac", V, 1 / np.sqrt(w), np.conj(V))
        seg = np.arange(K)
        self.pair_node = np.concatenate([seg, seg + 1])
        self.pair_seg = np.concatenate([seg, seg])

    def states(self, x):
        K, d = self.K, self.gen.dim
        m = len(self.B)
        H = np.einsum("nm,mab->nab", x.reshape(K - 1, m), self.B)
        h, W = np.linalg.eigh(H)
        E = np.einsum("nab,nb,ncb->nac", W, np.exp(h), np.conj(W))
        N = self.A @ E @ self.A
        tr = np.real(np.trace(N, axis1=1, axis2=2))
        rho = N / tr[:, None, None]
        rho = 0.5 * (rho + dagger(rho))
        return np.concatenate([self.rho0[None], rho, self.rho1[None]]), (h, W, tr)

    def encode(self, nodes):
        """Coordinates reproducing given interior nodes (K-1, d, d)."""
        X = self.Ainv @ nodes @ self.Ainv
        w, V = np.linalg.eigh(0.5 * (X + dagger(X)))
        H = np.einsum("nab,nb,ncb->nac", V, np.log(w), np.conj(V))
        return np.real(np.einsum("nab,mba->nm", H, self.B)).reshape(-1)

    def evaluate(self, x, grad: bool = True):
        K = self.K
        P, aux = self.states(x)
        batch = _MetricBatch(self.gen, P)
        tau = K * (P[1:] - P[:-1])
        n, sg = self.pair_node, self.pair_seg
        Ue, q = batch.solve(n, tau[sg])
        action = float(np.sum(q) / (2 * K))
        if not grad:
            return action, P, batch, Ue, q
        # gradient with respect to each node state
        Gq = -batch.from_eig(n, batch.quad_gradient(n, Ue))
        U = batch.from_eig(n, Ue)
        Gn = np.zeros_like(P)
        np.add.at(Gn, n, Gq / (2 * K))
        # d tau_k / d rho_{k+1} = K, d tau_k / d rho_k = -K ; dq/dtau = 2U ; weight 1/(2K)
        np.add.at(Gn, sg + 1, U)
        np.add.at(Gn, sg, -U)
        G = Gn[1:-1]
        h, W, tr = aux
        rho = P[1:-1]
        trg = np.real(np.einsum("nab,nba->n", G, rho))
        GN = (G - trg[:, None, None] * np.eye(self.gen.dim)[None]) / tr[:, None, None]
        GE = self.A @ GN @ self.A
        ha, hb = h[:, :, None], h[:, None, :]
        close = np.abs(ha - hb) < 1e-8
        phi = np.where(close, np.exp(0.5 * (ha + hb)), np.exp(hb) * np.expm1(np.where(close, 0.0, ha - hb)) / np.where(close, 1.0, ha - hb))
        GEt = np.einsum("nai,nab,nbk->nik", np.conj(W), GE, W)
        GH = np.einsum("nia,nab,nkb->nik", W, phi * GEt, np.conj(W))
        gx = np.real(np.einsum("nab,mba->nm", GH, self.B)).reshape(-1)
        return action, gx


def _path_result(prob: _PathProblem, x):
    action, P, batch, Ue, q = prob.evaluate(x, grad=False)
    K = prob.K
    first = np.arange(K)
    U = batch.from_eig(prob.pair_node[:K], Ue[:K])
    speeds = np.sqrt(np.maximum(0.5 * (q[:K] + q[K:]), 0.0))
    return action, DiscretePath(K, P, 0.5 * (U + dagger(U)), speeds)


def _optimize_path(prob: _PathProblem, x0, max_iter: int):
    a0, _ = prob.evaluate(x0)
    res = minimize(prob.evaluate, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": 1e-10, "ftol": 1e-13, "maxcor": 20})
    x = res.x if res.fun <= a0 else x0
    return x, int(res.nit), bool(res.success)


def w2_upper(gen: DBGenerator, rho, tau, K: int = 4, K_max: int = 32, rtol: float = 1e-4,
             max_iter: int = 500) -> WassersteinResult:
    """Certified upper bound on W2 by optimizing piecewise-linear paths.

    Starts from the linear interpolation with K segments and doubles K (inserting
    midpoints of the current optimum, which can only lower the trapezoid action)
    until the bound changes by less than ``rtol`` relatively or K exceeds K_max.
    """
    if K < 4:
        raise InvalidInputError("K must be at least 4")
    rho = as_density(rho, full_rank=True, name="rho")
    tau = as_density(tau, full_rank=True, name="tau")
    if trace_norm(rho - tau) < 1e-14:
        path = DiscretePath(K, np.array([rho] * (K + 1)), np.zeros((K, gen.dim, gen.dim), complex), np.zeros(K))
        return WassersteinResult(0.0, (0.0, 0.0), 2, certificate=path)
    history = []
    iters = 0
    conv_all = True
    prob = _PathProblem(gen, rho, tau, K)
    x = np.zeros((K - 1) * len(prob.B))
    linear_action = prob.evaluate(x, grad=False)[0]
    while True:
        x, nit, ok = _optimize_path(prob, x, max_iter)
        iters += nit
        conv_all &= ok
        action, path = _path_result(prob, x)
        history.append((prob.K, float(np.sqrt(action))))
        if len(history) >= 2:
            prev = history[-2][1]
            if prev - history[-1][1] <= rtol * max(history[-1][1], 1e-300):
                break
        if 2 * prob.K > K_max:
            conv_all = False if len(history) < 2 else conv_all
            break
        nodes = path.states
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        fine = np.empty((2 * prob.K + 1,) + nodes.shape[1:], dtype=complex)
        fine[0::2] = nodes
        fine[1::2] = mids
        prob = _PathProblem(gen, rho, tau, 2 * prob.K)
        x = prob.encode(fine[1:-1])
    best_K, upper = min(history, key=lambda kv: kv[1])
    return WassersteinResult(upper, (0.0, upper), 2, certificate=path, iterations=iters, converged=conv_all,
                             info={"history": history, "linear_action": float(linear_action),
                                   "speed_variance": path.speed_variance, "K": path.K})


def w2_bracket(gen: DBGenerator, rho, tau, K: int = 4, K_max: int = 32, starts: int = 16, seed=0,
               upper: WassersteinResult | None = None, map_fn: Callable = map) -> WassersteinResult:
    """[lower, upper] bracket for W2: lower from W1/sqrt(d) (and trace-norm bounds for depolarizing)."""
    up = upper if upper is not None else w2_upper(gen, rho, tau, K=K, K_max=K_max)
    r1 = w1(gen, rho, tau, "lip", starts=starts, seed=seed, map_fn=map_fn)
    lowers = {"w1_lip/sqrt(d)": r1.value / np.sqrt(gen.lip_dim)}
    if is_depolarizing(gen):
        tn = trace_norm(np.asarray(rho) - np.asarray(tau))
        lowers["w1_cl/sqrt2"] = 0.5 * tn / np.sqrt(2)
        lowers["trace_norm/sqrt2"] = tn / np.sqrt(2)
    lower = max(lowers.values())
    if lower > up.value + 1e-6:
        raise InternalConsistencyError(f"W2 bracket inverted: lower {lower} > upper {up.value}")
    return WassersteinResult(up.value, (float(lower), float(up.value)), 2, certificate=up.certificate,
                             iterations=up.iterations + r1.iterations, converged=up.converged,
                             info={"lower_bounds": lowers, **up.info})
