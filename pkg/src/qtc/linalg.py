"""Spectral calculus for Hermitian matrices and modular superoperators.

Operators are plain ``numpy`` arrays.  Superoperators act on column-stacked
vectorizations, ``vec(A) = A.reshape(-1, order="F")``, so that
``vec(X A Y) = kron(Y.T, X) @ vec(A)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidInputError, SingularStateError

HERM_TOL = 1e-12
TRACE_TOL = 1e-12
EPS_RANK = 1e-9
MERGE_TOL = 1e-10
TAYLOR_SWITCH = 1e-6


# ---------------------------------------------------------------- basics

def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    if d is None:
        d = int(round(np.sqrt(v.shape[0])))
    return np.asarray(v).reshape(d, d, order="F")


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """<a, b>_HS = Tr(a^* b)."""
    return complex(np.vdot(a, b))


def op_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def trace_norm(a: np.ndarray) -> float:
    a = np.asarray(a)
    if np.allclose(a, dagger(a), atol=1e-12, rtol=0):
        return float(np.abs(np.linalg.eigvalsh(hermitian_part(a))).sum())
    return float(np.linalg.svd(a, compute_uv=False).sum())


def _square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    return a


def is_hermitian(a: np.ndarray, tol: float = HERM_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol)


def as_hermitian(a, tol: float = HERM_TOL, name: str = "operator") -> np.ndarray:
    """Validate Hermiticity (entrywise, absolute) and return the exact Hermitian part."""
    a = _square(a, name)
    if not is_hermitian(a, tol):
        err = float(np.max(np.abs(a - dagger(a))))
        raise InvalidInputError(f"{name} is not Hermitian (max |A - A*| = {err:.3e})")
    return hermitian_part(a)


def eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of the Hermitian part, ascending eigenvalues."""
    w, v = np.linalg.eigh(hermitian_part(np.asarray(a, dtype=complex)))
    return w, v


def as_density(rho, full_rank: bool = True, floor: float = EPS_RANK, name: str = "state") -> np.ndarray:
    """Validate a density matrix; with ``full_rank`` also enforce min eigenvalue >= floor."""
    rho = as_hermitian(rho, max(HERM_TOL, 1e-12), name)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-10:
        raise InvalidInputError(f"{name} must have unit trace, got {tr!r}")
    w = np.linalg.eigvalsh(rho)
    if w[0] < -1e-12:
        raise InvalidInputError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    if full_rank and w[0] < floor:
        raise SingularStateError(f"{name} is not full rank (min eigenvalue {w[0]:.3e} < {floor:.1e})")
    return rho


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(rho))[0])


def project_full_rank(rho, eps: float = 1e-3) -> np.ndarray:
    """Mix ``rho`` with the maximally mixed state: (1-eps) rho + eps I/d."""
    rho = _square(rho, "state")
    d = rho.shape[0]
    return (1.0 - eps) * hermitian_part(rho) + eps * np.eye(d) / d


# ------------------------------------------------------- spectral calculus

@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues (ascending) with their orthogonal projectors."""

    eigenvalues: np.ndarray
    projectors: tuple

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.eigenvalues, self.projectors))

    def __len__(self):
        return len(self.eigenvalues)


def spectral_decompose(f, merge_tol: float = MERGE_TOL) -> SpectralDecomposition:
    """Spectral decomposition with eigenvalues merged when closer than merge_tol*||f||."""
    f = as_hermitian(f, name="f")
    w, v = eigh(f)
    scale = max(np.max(np.abs(w)), 1e-300)
    groups = [[0]]
    for k in range(1, len(w)):
        if w[k] - w[groups[-1][-1]] < merge_tol * scale:
            groups[-1].append(k)
        else:
            groups.append([k])
    lams, projs = [], []
    for g in groups:
        cols = v[:, g]
        lams.append(float(np.mean(w[g])))
        projs.append(cols @ dagger(cols))
    return SpectralDecomposition(np.array(lams), tuple(projs))


def matrix_function(f, phi: Callable, check: Callable | None = None) -> np.ndarray:
    """Return sum phi(lambda) P_lambda; ``phi`` must be finite on the spectrum."""
    f = as_hermitian(f, name="f")
    w, v = eigh(f)
    if check is not None and not np.all(check(w)):
        raise DomainError("function undefined on part of the spectrum")
    with np.errstate(all="ignore"):
        fw = np.asarray(phi(w))
    if not np.all(np.isfinite(fw)):
        raise DomainError("function undefined on part of the spectrum")
    return (v * fw) @ dagger(v)


def herm_log(a: np.ndarray) -> np.ndarray:
    return matrix_function(a, np.log, check=lambda w: w > 0)


def herm_exp(a: np.ndarray) -> np.ndarray:
    return matrix_function(a, np.exp)


def herm_power(a: np.ndarray, p: float) -> np.ndarray:
    if p < 0:
        return matrix_function(a, lambda w: w ** p, check=lambda w: w > 0)
    return matrix_function(a, lambda w: np.clip(w, 0, None) ** p, check=lambda w: w > -1e-12)


def spectral_indicator(f, lo: float = -np.inf, hi: float = np.inf,
                       closed: tuple[bool, bool] = (True, True)) -> np.ndarray:
    """Projection onto the eigenspaces of f with eigenvalue in the interval [lo, hi]."""
    f = as_hermitian(f, name="f")
    w, v = eigh(f)
    lo_ok = w >= lo if closed[0] else w > lo
    hi_ok = w <= hi if closed[1] else w < hi
    sel = v[:, lo_ok & hi_ok]
    return sel @ dagger(sel)


def _full_rank_eig(rho, name="state"):
    rho = _square(rho, name)
    w, v = eigh(rho)
    if w[0] < EPS_RANK:
        raise SingularStateError(f"{name} is not full rank (min eigenvalue {w[0]:.3e})")
    return w, v


# ------------------------------------------------- modular superoperators

@dataclass(frozen=True)
class Superoperator:
    """Matrix of a linear map on d x d matrices in the column-stacking basis."""

    matrix: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = int(round(np.sqrt(m.shape[0])))
        if m.shape != (d * d, d * d):
            raise InvalidInputError(f"superoperator matrix has shape {m.shape}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dim", d)

    def apply(self, a: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(a), self.dim)

    __call__ = apply

    def adjoint(self) -> "Superoperator":
        return Superoperator(dagger(self.matrix))

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix @ other.matrix)

    @classmethod
    def from_map(cls, fn: Callable[[np.ndarray], np.ndarray], d: int) -> "Superoperator":
        cols = []
        for k in range(d * d):
            e = np.zeros(d * d, dtype=complex)
            e[k] = 1.0
            cols.append(vec(fn(unvec(e, d))))
        return cls(np.array(cols).T)


def left_right(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix of A -> x A y."""
    return np.kron(np.asarray(y).T, np.asarray(x))


def relative_modular_apply(rho, sigma, f, s: float = 1.0) -> np.ndarray:
    """rho^s f sigma^{-s}."""
    wr, vr = _full_rank_eig(rho, "rho")
    ws, vs = _full_rank_eig(sigma, "sigma")
    rs = (vr * wr ** s) @ dagger(vr)
    ss = (vs * ws ** (-s)) @ dagger(vs)
    return rs @ np.asarray(f, dtype=complex) @ ss


def relative_modular_superoperator(rho, sigma, s: float = 1.0) -> Superoperator:
    wr, vr = _full_rank_eig(rho, "rho")
    ws, vs = _full_rank_eig(sigma, "sigma")
    rs = (vr * wr ** s) @ dagger(vr)
    ss = (vs * ws ** (-s)) @ dagger(vs)
    return Superoperator(left_right(rs, ss))


def gamma_map(sigma, f, direction: str = "forward") -> np.ndarray:
    """Gamma_sigma(f) = sigma^{1/2} f sigma^{1/2} (or its inverse)."""
    w, v = _full_rank_eig(sigma, "sigma")
    if direction == "forward":
        h = (v * np.sqrt(w)) @ dagger(v)
    elif direction == "inverse":
        h = (v / np.sqrt(w)) @ dagger(v)
    else:
        raise InvalidInputError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return h @ np.asarray(f, dtype=complex) @ h


def f_omega(t, omega: float):
    """f_w(t) = e^{w/2} (t - e^{-w}) / (log t + w), continuous at t = e^{-w}."""
    t = np.asarray(t, dtype=float)
    ell = np.log(t) + omega
    small = np.abs(ell) < TAYLOR_SWITCH
    safe = np.where(small, 1.0, ell)
    ratio = np.where(small, 1.0 + ell / 2.0 + ell * ell / 6.0, np.expm1(safe) / safe)
    return np.exp(-omega / 2.0) * ratio


def tilted_factors(p: np.ndarray, omega: float) -> np.ndarray:
    """Matrix m[k, l] = p_l f_w(p_k / p_l): the eigenbasis multiplier of [rho]_w."""
    p = np.asarray(p, dtype=float)
    ell = np.log(p)[:, None] - np.log(p)[None, :] + omega
    small = np.abs(ell) < TAYLOR_SWITCH
    safe = np.where(small, 1.0, ell)
    ratio = np.where(small, 1.0 + ell / 2.0 + ell * ell / 6.0, np.expm1(safe) / safe)
    return p[None, :] * np.exp(-omega / 2.0) * ratio


def tilted_multiplier(rho, omega: float, a, direction: str = "forward") -> np.ndarray:
    """[rho]_w(A) and its inverse, via the multiplier in rho's eigenbasis."""
    w, v = _full_rank_eig(rho, "rho")
    m = tilted_factors(w, omega)
    at = dagger(v) @ np.asarray(a, dtype=complex) @ v
    if direction == "forward":
        at = at * m
    elif direction == "inverse":
        at = at / m
    else:
        raise InvalidInputError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return v @ at @ dagger(v)


def tilted_superoperator(rho, omega: float, direction: str = "forward") -> Superoperator:
    w, v = _full_rank_eig(rho, "rho")
    m = tilted_factors(w, omega)
    if direction == "inverse":
        m = 1.0 / m
    u = left_right(v, dagger(v))
    return Superoperator(u @ np.diag(vec(m)) @ dagger(u))


def xi_factors(s: np.ndarray) -> np.ndarray:
    """Multiplier sqrt(s_k s_l) (log s_k - log s_l) / (s_k - s_l), 1 on coincident values."""
    s = np.asarray(s, dtype=float)
    x = np.log(s)[:, None] - np.log(s)[None, :]
    small = np.abs(x) < TAYLOR_SWITCH
    safe = np.where(small, 1.0, x)
    # sqrt(s_k s_l) (x) / (s_k - s_l) = x / (2 sinh(x/2))
    return np.where(small, 1.0 - x * x / 24.0, safe / (2.0 * np.sinh(safe / 2.0)))


def xi_sigma(sigma, a) -> np.ndarray:
    w, v = _full_rank_eig(sigma, "sigma")
    at = dagger(v) @ np.asarray(a, dtype=complex) @ v
    return v @ (at * xi_factors(w)) @ dagger(v)


def log_mean(x, y):
    """Logarithmic mean (x - y) / (log x - log y), equal to x on the diagonal."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.log(x) - np.log(y)
    small = np.abs(u) < TAYLOR_SWITCH
    safe = np.where(small, 1.0, u)
    return np.where(small, y * (1.0 + u / 2.0 + u * u / 6.0), y * np.expm1(safe) / safe)


# ------------------------------------------------------------ bases

def traceless_hermitian_basis(d: int) -> np.ndarray:
    """Generalized Gell-Mann matrices, HS-orthonormal, shape (d*d-1, d, d)."""
    out = []
    for k in range(d):
        for l in range(k + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[k, l] = s[l, k] = 1 / np.sqrt(2)
            out.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[k, l] = -1j / np.sqrt(2)
            a[l, k] = 1j / np.sqrt(2)
            out.append(a)
    for m in range(1, d):
        diag = np.zeros(d)
        diag[:m] = 1.0
        diag[m] = -m
        out.append(np.diag(diag / np.sqrt(m * (m + 1))).astype(complex))
    return np.array(out).reshape(d * d - 1, d, d)


def matrix_units(d: int):
    for k in range(d):
        for l in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[k, l] = 1.0
            yield e


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def embed(op: np.ndarray, site: int, dims: Sequence[int]) -> np.ndarray:
    """I x ... x op x ... x I with op on ``site``."""
    return kron_all([op if k == site else np.eye(dk) for k, dk in enumerate(dims)])


# ------------------------------------------------------------ JSON I/O

def matrix_to_json(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"d": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(obj: dict, kind: str = "matrix") -> np.ndarray:
    """Parse {"d", "re", "im"}; ``kind`` in {matrix, hermitian, density, full_rank}."""
    try:
        d = int(obj["d"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((d, d))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed matrix object: {exc}") from None
    if re.shape != (d, d) or im.shape != (d, d):
        raise InvalidInputError(f"matrix entries must be {d}x{d}")
    a = re + 1j * im
    if kind == "hermitian":
        return as_hermitian(a, tol=1e-10)
    if kind == "density":
        return as_density(a, full_rank=False)
    if kind == "full_rank":
        return as_density(a, full_rank=True)
    return a


def load_json(path) -> dict:
    """json.load with line/column diagnostics on syntax errors."""
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise InvalidInputError(f"{path}: {exc.strerror}") from None


def read_matrix(path, kind: str = "matrix") -> np.ndarray:
    return matrix_from_json(load_json(path), kind)


def write_matrix(path, a: np.ndarray) -> None:
    with open(path, "w") as fh:
        json.dump(matrix_to_json(a), fh, indent=1)
        fh.write("\n")
