"""Divergences, Dirichlet forms, entropy production and de Bruijn's identity."""
from __future__ import annotations

import numpy as np

from .errors import DomainError, SupportError
from .generator import DBGenerator
from .linalg import (
    EPS_RANK,
    _full_rank_eig,
    as_hermitian,
    dagger,
    eigh,
    gamma_map,
    herm_log,
    unvec,
    vec,
)


class DivergenceValue(float):
    """A non-negative float tagged with the divergence it came from."""

    def __new__(cls, value: float, kind: str):
        obj = super().__new__(cls, value)
        obj.kind = kind
        return obj

    @property
    def value(self) -> float:
        return float(self)

    def __repr__(self):
        return f"DivergenceValue({float(self)!r}, kind={self.kind!r})"


def _xlogx_trace(w: np.ndarray) -> float:
    w = np.clip(w, 0, None)
    nz = w > 0
    return float(np.sum(w[nz] * np.log(w[nz])))


def relative_entropy(rho, sigma, support_tol: float = 1e-12) -> DivergenceValue:
    """Umegaki relative entropy Tr rho (log rho - log sigma)."""
    rho = as_hermitian(rho, tol=1e-10, name="rho")
    sigma = as_hermitian(sigma, tol=1e-10, name="sigma")
    wr, _ = eigh(rho)
    ws, vs = eigh(sigma)
    keep = ws > EPS_RANK * max(ws[-1], 1.0) * 1e-3
    if not np.all(keep):
        ker = vs[:, ~keep]
        leak = float(np.real(np.trace(dagger(ker) @ rho @ ker)))
        if leak > support_tol:
            raise SupportError(f"supp(rho) not contained in supp(sigma) (weight {leak:.3e} on kernel)")
    vk = vs[:, keep]
    log_sigma = (vk * np.log(ws[keep])) @ dagger(vk)
    val = _xlogx_trace(wr) - float(np.real(np.trace(rho @ log_sigma)))
    return DivergenceValue(max(val, 0.0), "umegaki")


def maximal_divergence(rho, sigma) -> DivergenceValue:
    """D^(rho||sigma) = Tr[sigma X log X], X = sigma^{-1/2} rho sigma^{-1/2}."""
    _full_rank_eig(rho, "rho")
    x = gamma_map(sigma, rho, "inverse")
    w, v = eigh(x)
    if w[0] <= 0:
        raise DomainError("Gamma_sigma^{-1}(rho) must be positive definite")
    xlx = (v * (w * np.log(w))) @ dagger(v)
    val = float(np.real(np.trace(np.asarray(sigma) @ xlx)))
    return DivergenceValue(max(val, 0.0), "maximal")


def ent_1(sigma, f) -> float:
    """Ent_{1,sigma}(f) = Tr(G (log G - log sigma)) - Tr G log Tr G with G = Gamma_sigma(f)."""
    g = gamma_map(sigma, f, "forward")
    g = as_hermitian(g, tol=1e-9, name="Gamma_sigma(f)")
    w, v = eigh(g)
    if w[0] <= 0:
        raise DomainError("Gamma_sigma(f) must be positive definite")
    tr = float(np.sum(w))
    val = float(np.sum(w * np.log(w))) - float(np.real(np.trace(g @ herm_log(sigma)))) - tr * np.log(tr)
    return val


# ----------------------------------------------------------- Dirichlet forms

def _s_weights(sigma, s: float):
    w, v = eigh(sigma)
    return (v * w ** s) @ dagger(v), (v * w ** (1 - s)) @ dagger(v)


def weighted_inner(sigma, f, g, s: float) -> complex:
    """<f, g>_{s,sigma} = Tr(sigma^s f^* sigma^{1-s} g)."""
    a, b = _s_weights(sigma, s)
    return complex(np.trace(a @ dagger(np.asarray(f)) @ b @ np.asarray(g)))


def dirichlet_form(gen: DBGenerator, f, g, s: float = 0.5) -> complex:
    """E_{s,2}(f, g) = -<f, L(g)>_{s,sigma}."""
    if not 0 <= s <= 1:
        raise DomainError("s must lie in [0, 1]")
    return -weighted_inner(gen.sigma, f, gen.apply(g), s)


def dirichlet_form_derivations(gen: DBGenerator, f, g, s: float = 0.5) -> complex:
    """sum_j c_j e^{(1/2-s) w_j} <d_j f, d_j g>_{s,sigma}."""
    a, b = _s_weights(gen.sigma, s)
    df, dg = gen.gradient(f), gen.gradient(g)
    vals = np.einsum("ab,jcb,cd,jda->j", a, np.conj(df), b, dg)
    return complex(np.sum(gen.c * np.exp((0.5 - s) * gen.omega) * vals))


def dirichlet_form_1(gen: DBGenerator, f) -> float:
    """E_1(f, f) = -1/2 Tr(Gamma(L f) (log Gamma(f) - log sigma))."""
    g = gamma_map(gen.sigma, f, "forward")
    w, v = eigh(g)
    if w[0] <= 0:
        raise DomainError("Gamma_sigma(f) must be positive definite")
    log_g = (v * np.log(w)) @ dagger(v)
    glf = gamma_map(gen.sigma, gen.apply(f), "forward")
    return float(-0.5 * np.real(np.trace(glf @ (log_g - herm_log(gen.sigma)))))


def fisher_information(gen: DBGenerator, rho) -> float:
    """Entropy production I_sigma(rho) = -Tr(L_*(rho)(log rho - log sigma))."""
    w, v = _full_rank_eig(rho, "rho")
    log_rho = (v * np.log(w)) @ dagger(v)
    val = -np.real(np.trace(gen.apply_adjoint(rho) @ (log_rho - herm_log(gen.sigma))))
    return float(val)


def _flow(gen: DBGenerator, rho, t: float) -> np.ndarray:
    out = unvec(gen._propagator(t, "schrodinger") @ vec(rho), gen.dim)
    return 0.5 * (out + dagger(out))


def de_bruijn_residual(gen: DBGenerator, rho, t: float, h: float | None = None) -> float:
    """|central difference of D(rho_t||sigma) + I_sigma(rho_t)|."""
    if h is None:
        h = 1e-4 * max(1.0, t)
    rt = _flow(gen, rho, t)
    dp = relative_entropy(_flow(gen, rho, t + h), gen.sigma)
    dm = relative_entropy(_flow(gen, rho, t - h), gen.sigma)
    return abs((dp - dm) / (2 * h) + fisher_information(gen, rt))


def entropy_curve(gen: DBGenerator, rho, ts) -> np.ndarray:
    return np.array([relative_entropy(gen.evolve(rho, t), gen.sigma) for t in ts], dtype=float)
