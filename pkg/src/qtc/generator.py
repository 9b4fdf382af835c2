"""Detailed-balance Lindblad generators.

A generator is stored in its canonical detailed-balance form

    L(f) = sum_j c_j e^{-w_j/2} ( L_j^* [f, L_j] + [L_j^*, f] L_j ),

with sigma L_j sigma^{-1} = e^{-w_j} L_j, (1/d) Tr(L_j^* L_k) = delta_jk,
Tr L_j = 0 and the family closed under adjoints with symmetric rates.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NonPrimitiveError, ResourceLimitError
from .linalg import (
    EPS_RANK,
    Superoperator,
    as_density,
    dagger,
    eigh,
    embed,
    hermitian_part,
    kron_all,
    load_json,
    matrix_from_json,
    matrix_to_json,
    traceless_hermitian_basis,
    unvec,
    vec,
)
from .sampling import haar_unitary, random_full_rank_spectrum, random_orthogonal, rng_from

MAX_DIM = 64
COND_LIMIT = 1e8
KERNEL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DBGenerator:
    """Detailed-balance generator {(c_j, w_j, L_j)} with invariant state sigma.

    ``lip_dim`` is the dimension used in the 1/d normalization of Lipschitz
    constants; it is the single-site dimension for tensorized generators.
    """

    sigma: np.ndarray
    c: np.ndarray
    omega: np.ndarray
    L: np.ndarray
    lip_dim: int = 0
    label: str = ""

    def __post_init__(self):
        sigma = as_density(self.sigma, full_rank=True, name="sigma")
        L = np.asarray(self.L, dtype=complex)
        d = sigma.shape[0]
        if L.ndim != 3 or L.shape[1:] != (d, d):
            raise InvalidInputError(f"jump operators must have shape (J, {d}, {d}), got {L.shape}")
        c = np.asarray(self.c, dtype=float).reshape(-1)
        omega = np.asarray(self.omega, dtype=float).reshape(-1)
        if not (len(c) == len(omega) == L.shape[0]):
            raise InvalidInputError("c, omega and L must have the same number of terms")
        if np.any(c < 0) or not np.all(np.isfinite(c)) or not np.all(np.isfinite(omega)):
            raise InvalidInputError("rates c_j must be finite and non-negative")
        if d > MAX_DIM:
            raise ResourceLimitError(f"dimension {d} exceeds cap {MAX_DIM}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "lip_dim", int(self.lip_dim) if self.lip_dim else d)

    @classmethod
    def from_terms(cls, sigma, terms: Iterable, **kw) -> "DBGenerator":
        terms = list(terms)
        if not terms:
            raise InvalidInputError("generator needs at least one term")
        c, w, L = zip(*terms)
        return cls(sigma, np.array(c), np.array(w), np.array(L), **kw)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def nterms(self) -> int:
        return len(self.c)

    @property
    def terms(self) -> list:
        return [(float(c), float(w), L) for c, w, L in zip(self.c, self.omega, self.L)]

    def scaled(self, k: float) -> "DBGenerator":
        return DBGenerator(self.sigma, self.c * k, self.omega, self.L, self.lip_dim, self.label)

    # --------------------------------------------------------- action

    @cached_property
    def _weights(self) -> np.ndarray:
        return self.c * np.exp(-self.omega / 2)

    def apply(self, f) -> np.ndarray:
        """Heisenberg action L(f)."""
        f = self._check(f)
        L, Ls = self.L, dagger(self.L)
        t = Ls @ (f @ L - L @ f) + (Ls @ f - f @ Ls) @ L
        return np.tensordot(self._weights, t, axes=1)

    def apply_adjoint(self, rho) -> np.ndarray:
        """Schrodinger action L_*(rho) = Gamma_sigma L Gamma_sigma^{-1} (rho)."""
        rho = self._check(rho)
        L, Ls = self.L, dagger(self.L)
        # HS adjoint of f -> 2 L* f L - L* L f - f L* L
        LLs = Ls @ L
        t = 2 * L @ rho @ Ls - LLs @ rho - rho @ LLs
        return np.tensordot(self._weights, t, axes=1)

    def _check(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.dim, self.dim):
            raise InvalidInputError(f"expected a {self.dim}x{self.dim} matrix, got shape {a.shape}")
        return a

    # ---------------------------------------------------- superoperators

    @cached_property
    def heisenberg_matrix(self) -> np.ndarray:
        d = self.dim
        eye = np.eye(d)
        m = np.zeros((d * d, d * d), dtype=complex)
        for k, L in zip(self._weights, self.L):
            if k == 0:
                continue
            Ls = dagger(L)
            LL = Ls @ L
            m += k * (2 * np.kron(L.T, Ls) - np.kron(eye, LL) - np.kron(LL.T, eye))
        return m

    def superoperator(self, picture: str = "heisenberg") -> Superoperator:
        if picture == "heisenberg":
            return Superoperator(self.heisenberg_matrix)
        if picture == "schrodinger":
            return Superoperator(dagger(self.heisenberg_matrix))
        raise InvalidInputError(f"picture must be 'heisenberg' or 'schrodinger', got {picture!r}")

    @cached_property
    def derivation_matrices(self) -> np.ndarray:
        """G_j with vec([L_j, f]) = G_j vec(f); shape (J, d^2, d^2)."""
        d = self.dim
        eye = np.eye(d)
        return np.array([np.kron(eye, L) - np.kron(L.T, eye) for L in self.L])

    @cached_property
    def _sym(self):
        """(R, R^{-1}, eigvals, eigvecs) of the Gamma^{1/2}-symmetrized generator."""
        w, v = eigh(self.sigma)
        q = (v * w ** 0.25) @ dagger(v)
        qi = (v * w ** -0.25) @ dagger(v)
        R = np.kron(q.T, q)
        Ri = np.kron(qi.T, qi)
        Hs = R @ self.heisenberg_matrix @ Ri
        lam, W = np.linalg.eigh(hermitian_part(Hs))
        return R, Ri, lam, W

    @property
    def well_conditioned(self) -> bool:
        w = np.linalg.eigvalsh(self.sigma)
        return np.sqrt(w[-1] / w[0]) <= COND_LIMIT

    # -------------------------------------------------------- evolution

    def propagator(self, t: float, picture: str = "schrodinger") -> np.ndarray:
        if t < 0:
            raise InvalidInputError(f"time must be non-negative, got {t}")
        return self._propagator(t, picture)

    def _propagator(self, t: float, picture: str) -> np.ndarray:
        # no sign check: small negative t is used by central differences
        if self.well_conditioned:
            R, Ri, lam, W = self._sym
            core = (W * np.exp(t * lam)) @ dagger(W)
            heis = Ri @ core @ R
        else:
            heis = scipy.linalg.expm(t * self.heisenberg_matrix)
        return heis if picture == "heisenberg" else dagger(heis)

    def evolve(self, rho, t: float) -> np.ndarray:
        rho = self._check(rho)
        out = unvec(self.propagator(t, "schrodinger") @ vec(rho), self.dim)
        return hermitian_part(out)

    def evolve_observable(self, f, t: float) -> np.ndarray:
        f = self._check(f)
        return unvec(self.propagator(t, "heisenberg") @ vec(f), self.dim)

    # ------------------------------------------------------ derivations

    def derivation(self, j: int, f) -> np.ndarray:
        if not 0 <= j < self.nterms:
            raise InvalidInputError(f"term index {j} out of range [0, {self.nterms})")
        f = self._check(f)
        return self.L[j] @ f - f @ self.L[j]

    def gradient(self, f) -> np.ndarray:
        f = self._check(f)
        return self.L @ f - f @ self.L

    def divergence(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=complex)
        if A.shape != self.L.shape:
            raise InvalidInputError(f"vector field must have shape {self.L.shape}")
        Ls = dagger(self.L)
        return np.tensordot(self.c, A @ Ls - Ls @ A, axes=1)

    # ------------------------------------------------------------- I/O

    def to_json(self) -> dict:
        out = {
            "sigma": matrix_to_json(self.sigma),
            "terms": [{"c": float(c), "omega": float(w), "L": matrix_to_json(L)} for c, w, L in self.terms],
        }
        if self.lip_dim != self.dim:
            out["lip_dim"] = self.lip_dim
        if self.label:
            out["label"] = self.label
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DBGenerator":
        try:
            sigma = matrix_from_json(obj["sigma"], "matrix")
            terms = [(float(t["c"]), float(t["omega"]), matrix_from_json(t["L"])) for t in obj["terms"]]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"malformed generator object: {exc!r}") from None
        return cls.from_terms(sigma, terms, lip_dim=int(obj.get("lip_dim", 0)), label=str(obj.get("label", "")))


def read_generator(path) -> DBGenerator:
    return DBGenerator.from_json(load_json(path))


def write_generator(path, gen: DBGenerator) -> None:
    with open(path, "w") as fh:
        json.dump(gen.to_json(), fh, indent=1)
        fh.write("\n")


# ------------------------------------------------------------ validation

@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)

    def add(self, name: str, residual: float, tol: float):
        self.checks[name] = {"passed": bool(residual <= tol), "residual": float(residual), "tol": tol}

    @property
    def ok(self) -> bool:
        return all(v["passed"] for v in self.checks.values())

    @property
    def failed(self) -> list:
        return [k for k, v in self.checks.items() if not v["passed"]]

    def max_residual(self) -> float:
        return max(v["residual"] for v in self.checks.values())


def adjoint_partners(gen: DBGenerator, tol: float = 1e-10) -> np.ndarray:
    """Index j' with L_{j'} = L_j^*, or -1."""
    Ls = dagger(gen.L)
    out = np.full(gen.nterms, -1)
    for j in range(gen.nterms):
        diff = np.max(np.abs(gen.L - Ls[j]), axis=(1, 2))
        k = int(np.argmin(diff))
        if diff[k] <= tol:
            out[j] = k
    return out


def validate(gen: DBGenerator) -> ValidationReport:
    """Check the detailed-balance hypotheses and 1-sigma self-adjointness."""
    rep = ValidationReport()
    d = gen.dim
    L, Ls = gen.L, dagger(gen.L)
    partners = adjoint_partners(gen)
    # closure: distance from each L_j^* to the nearest L_k
    closure = max(float(np.min(np.max(np.abs(L - Ls[j]), axis=(1, 2)))) for j in range(gen.nterms))
    rep.add("adjoint_closure", closure, 1e-10)

    w, v = eigh(gen.sigma)
    s = (v * w) @ dagger(v)
    si = (v / w) @ dagger(v)
    eig_res = s @ L @ si - np.exp(-gen.omega)[:, None, None] * L
    rep.add("eigenvector", float(np.max(np.abs(eig_res))), 1e-9)

    gram = np.einsum("jab,kab->jk", np.conj(L), L) / d
    rep.add("normalization", float(np.max(np.abs(gram - np.eye(gen.nterms)))), 1e-9)
    rep.add("tracelessness", float(np.max(np.abs(np.trace(L, axis1=1, axis2=2)))), 1e-10)

    sym = 0.0
    for j, k in enumerate(partners):
        if k >= 0:
            sym = max(sym, abs(gen.c[j] - gen.c[k]))
        else:
            sym = np.inf
    rep.add("rate_symmetry", sym, 1e-10 * max(1.0, float(np.max(gen.c))))

    H = gen.heisenberg_matrix
    S1 = np.kron(gen.sigma.T, np.eye(d))  # <f,g>_{1,sigma} = vec(f)^* S1 vec(g)
    scale = max(1.0, float(np.max(np.abs(H))))
    rep.add("self_adjoint_1", float(np.max(np.abs(S1 @ H - dagger(H) @ S1))) / scale, 1e-8)
    return rep


def self_adjointness_residual(gen: DBGenerator, s: float) -> float:
    """max |<E_a, L E_b>_{s} - <L E_a, E_b>_{s}| over matrix units, <f,g>_s = Tr(sigma^s f^* sigma^{1-s} g)."""
    d = gen.dim
    w, v = eigh(gen.sigma)
    a = (v * w ** s) @ dagger(v)
    b = (v * w ** (1 - s)) @ dagger(v)
    S = np.kron(b.T, a)
    H = gen.heisenberg_matrix
    return float(np.max(np.abs(S @ H - dagger(H) @ S)))


# --------------------------------------------------------------- spectra

@dataclass(frozen=True)
class GeneratorSpectrum:
    eigenvalues: np.ndarray  # descending, eigenvalues[0] ~ 0
    spectral_gap: float


def kernel_dimension(gen: DBGenerator, tol: float = KERNEL_TOL) -> int:
    sv = np.linalg.svd(gen.heisenberg_matrix, compute_uv=False)
    return int(np.sum(sv <= tol * max(sv[0], 1e-300)))


def spectral_gap(gen: DBGenerator) -> GeneratorSpectrum:
    kdim = kernel_dimension(gen)
    if kdim > 1:
        raise NonPrimitiveError(f"generator kernel has dimension {kdim}")
    lam = np.sort(gen._sym[2])[::-1]
    return GeneratorSpectrum(lam, float(-lam[1]) if len(lam) > 1 else np.inf)


def is_primitive(gen: DBGenerator) -> bool:
    return kernel_dimension(gen) == 1


# ---------------------------------------------------------- constructors

def _sigma_eigen(sigma):
    sigma = as_density(sigma, full_rank=True, name="sigma")
    return eigh(sigma)


def depolarizing_generator(sigma, literal: bool = False, basis=None) -> DBGenerator:
    """Generalized depolarizing generator L(f) = Tr(sigma f) I - f.

    Off-diagonal terms are sqrt(d)|i><j| in sigma's eigenbasis with
    c_ij = sqrt(s_i s_j)/(2d) and w_ij = log s_j - log s_i.  The diagonal
    pairs sqrt(d)|i><i| are not traceless; by default they are replaced by an
    equivalent traceless orthonormal family (same action, same derivations).
    ``literal=True`` keeps the raw diagonal terms.  ``basis`` is an optional
    (d-1)x(d-1) orthogonal matrix mixing the diagonal sector when its rates
    are degenerate.
    """
    s, V = _sigma_eigen(sigma)
    d = len(s)
    sigma = (V * s) @ dagger(V)
    terms = []
    for i in range(d):
        for j in range(d):
            if i == j and not literal:
                continue
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = np.sqrt(d)
            terms.append((np.sqrt(s[i] * s[j]) / (2 * d), np.log(s[j]) - np.log(s[i]), V @ E @ dagger(V)))
    if not literal and d > 1:
        # diagonal sector: sum_i c_ii D(v_i), v_i = sqrt(d)(P_i - I/d) = sum_a B_ia u_a
        U = np.array([np.sqrt(d) * np.real(np.diag(g)) for g in traceless_hermitian_basis(d)[-(d - 1):]])
        B = np.array([[np.sqrt(d) * (np.eye(d)[i] - 1 / d) @ u / d for u in U] for i in range(d)])
        C = B.T @ np.diag(s / (2 * d)) @ B
        lam, O = np.linalg.eigh(C)
        if basis is not None:
            O = O @ np.asarray(basis, dtype=float)
            lam = np.diag(O.T @ C @ O)
            if np.max(np.abs(O.T @ C @ O - np.diag(lam))) > 1e-12:
                raise InvalidInputError("basis must preserve the diagonal-sector rate matrix")
        for k in range(d - 1):
            u = (O[:, k] @ U).astype(complex)
            terms.append((max(float(lam[k]), 0.0), 0.0, V @ np.diag(u) @ dagger(V)))
    return DBGenerator.from_terms(sigma, terms, label="depolarizing")


def is_depolarizing(gen: DBGenerator, tol: float = 1e-9) -> bool:
    """Numerically test L(f) = Tr(sigma f) I - f on matrix units."""
    d = gen.dim
    target = np.outer(vec(np.eye(d)), vec(gen.sigma.T)) - np.eye(d * d)
    return bool(np.max(np.abs(gen.heisenberg_matrix - target)) <= tol)


def mix_terms(gen: DBGenerator, U) -> DBGenerator:
    """Apply a unitary change of representation L'_j = sum_k U_jk L_k.

    U may only mix terms sharing the same (c, w); the generator is unchanged.
    """
    U = np.asarray(U, dtype=complex)
    J = gen.nterms
    if U.shape != (J, J) or np.max(np.abs(U @ dagger(U) - np.eye(J))) > 1e-10:
        raise InvalidInputError("U must be a unitary of size nterms")
    mixed = np.abs(U) > 1e-12
    for j, k in zip(*np.nonzero(mixed)):
        if abs(gen.c[j] - gen.c[k]) > 1e-12 or abs(gen.omega[j] - gen.omega[k]) > 1e-12:
            raise InvalidInputError("U mixes terms with different (c, omega)")
    L = np.tensordot(U, gen.L, axes=1)
    return DBGenerator(gen.sigma, gen.c, gen.omega, L, gen.lip_dim, gen.label)


def random_generator(d: int, rng=None, sigma=None, c_range=(0.1, 10.0)) -> DBGenerator:
    """Random detailed-balance generator with Haar-random eigenbasis for sigma."""
    rng = rng_from(rng)
    if sigma is None:
        s = random_full_rank_spectrum(d, rng)
        V = haar_unitary(d, rng)
    else:
        s, V = _sigma_eigen(sigma)
    lo, hi = np.log(c_range[0]), np.log(c_range[1])
    terms = []
    for k in range(d):
        for l in range(k + 1, d):
            phase = np.exp(2j * np.pi * rng.random())
            E = np.zeros((d, d), dtype=complex)
            E[k, l] = np.sqrt(d) * phase
            c = float(np.exp(rng.uniform(lo, hi)))
            w = float(np.log(s[l]) - np.log(s[k]))
            terms.append((c, w, E))
            terms.append((c, -w, dagger(E)))
    if d > 1:
        U = np.array([np.sqrt(d) * np.real(np.diag(g)) for g in traceless_hermitian_basis(d)[-(d - 1):]])
        O = random_orthogonal(d - 1, rng)
        for k in range(d - 1):
            terms.append((float(np.exp(rng.uniform(lo, hi))), 0.0, np.diag(O[:, k] @ U).astype(complex)))
    terms = [(c, w, V @ L @ dagger(V)) for c, w, L in terms]
    return DBGenerator.from_terms((V * s) @ dagger(V), terms, label="random")


def tensorize(gen: DBGenerator, n: int, site_dims: Sequence[int] | None = None) -> DBGenerator:
    """Generator of n independent copies, sum_k id x ... x L_k x ... x id."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    d = gen.dim
    if site_dims is not None and any(int(x) != d for x in site_dims):
        raise InvalidInputError("all sites must have the generator's dimension")
    if d ** n > MAX_DIM:
        raise ResourceLimitError(f"total dimension {d}^{n} = {d ** n} exceeds cap {MAX_DIM}")
    if n == 1:
        return gen
    dims = [d] * n
    terms = [(c, w, embed(L, k, dims)) for k in range(n) for c, w, L in gen.terms]
    sigma = kron_all([gen.sigma] * n)
    return DBGenerator.from_terms(sigma, terms, lip_dim=gen.lip_dim, label=f"{gen.label}^{n}" if gen.label else "")


def site_sum(f: np.ndarray, n: int) -> np.ndarray:
    """f_n = (1/n) sum_k I x ... x f x ... x I."""
    dims = [f.shape[0]] * n
    return sum(embed(f, k, dims) for k in range(n)) / n


def embed_observable(f: np.ndarray, site: int, n: int) -> np.ndarray:
    return embed(f, site, [f.shape[0]] * n)


# ------------------------------------------------- alpha_1 (depolarizing)

def _bregman_xlogx(t):
    """t log t - t + 1 for t >= 0, accurate near t = 1."""
    t = np.asarray(t, dtype=float)
    u = t - 1.0
    small = np.abs(u) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0) - t + 1.0
    series = u * u * (0.5 - u / 6.0 + u * u / 12.0 - u ** 3 / 20.0)
    return np.where(small, series, direct)


def binary_relative_entropy(x, y):
    """D2(x||y) = x log(x/y) + (1-x) log((1-x)/(1-y)), with 0 log 0 = 0."""
    x = np.asarray(x, dtype=float)
    return y * _bregman_xlogx(x / y) + (1 - y) * _bregman_xlogx((1 - x) / (1 - y))


def _half_one_plus_q(x, y):
    x = np.asarray(x, dtype=float)
    num = binary_relative_entropy(y, x)
    den = binary_relative_entropy(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = num / den
    # removable point x = y: q -> 1
    return 0.5 * (1 + np.where(den > 0, q, 1.0))


def mlsi_constant_depolarizing(sigma) -> float:
    """alpha_1(sigma) = min_{x in (0,1)} (1 + q(x, s_min)) / 2."""
    s, _ = _sigma_eigen(sigma)
    y = float(s[0])
    if abs(y - 0.5) < 1e-15:
        y = 0.5
    grid = np.linspace(0, 1, 20001)[1:-1]
    vals = _half_one_plus_q(grid, y)
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda x: float(_half_one_plus_q(x, y)), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, vals[k], 1.0))
