"""Random instances: states, observables, unitaries."""
from __future__ import annotations

import numpy as np

from .linalg import dagger, hermitian_part, project_full_rank

MIX_WEIGHT = 1e-3


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(d: int, rng) -> np.ndarray:
    rng = rng_from(rng)
    return (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)


def random_density(d: int, rng=None, mix: float = MIX_WEIGHT) -> np.ndarray:
    """Hilbert-Schmidt uniform state mixed with I/d at weight ``mix``."""
    g = ginibre(d, rng)
    rho = g @ dagger(g)
    rho = hermitian_part(rho / np.trace(rho).real)
    return project_full_rank(rho, mix) if mix > 0 else rho


def random_diagonal_density(d: int, rng=None, mix: float = MIX_WEIGHT) -> np.ndarray:
    rng = rng_from(rng)
    p = rng.dirichlet(np.ones(d))
    p = (1 - mix) * p + mix / d
    return np.diag(p).astype(complex)


def random_hermitian(d: int, rng=None) -> np.ndarray:
    g = ginibre(d, rng)
    return hermitian_part(g)


def haar_unitary(d: int, rng=None) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(d, rng))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_orthogonal(n: int, rng=None) -> np.ndarray:
    rng = rng_from(rng)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_full_rank_spectrum(d: int, rng=None, floor: float = 0.02) -> np.ndarray:
    rng = rng_from(rng)
    p = rng.dirichlet(np.ones(d))
    return (1 - d * floor) * p + floor
