import numpy as np
import pytest

from qtc.sampling import random_density, random_hermitian


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def rand_state(d, rng, mix=0.05):
    return random_density(d, rng, mix=mix)


def rand_herm(d, rng):
    return random_hermitian(d, rng)


def rand_mat(d, rng):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def gauss_legendre(fn, n=64, a=0.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (b - a) * x + 0.5 * (b + a)
    return sum(wi * fn(si) for wi, si in zip(0.5 * (b - a) * w, s))


# acceptance results, printed one line per criterion after the run
ACCEPTANCE = {}


def record(criterion, ok, detail=""):
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
