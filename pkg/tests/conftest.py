import numpy as np
import pytest

from stochdt import use_numba
from stochdt._accel import HAVE_NUMBA

KERNEL_PATHS = [pytest.param(True, id="numba", marks=pytest.mark.skipif(not HAVE_NUMBA, reason="numba missing")),
                pytest.param(False, id="numpy")]


@pytest.fixture(params=KERNEL_PATHS)
def kernel_path(request):
    """Run the test once with the compiled kernels and once with the fallbacks."""
    with use_numba(request.param):
        yield request.param


def random_mask(rng, h, w, density=None, max_points=None):
    if max_points is not None:
        m = np.zeros((h, w), bool)
        n = int(rng.integers(1, max_points + 1))
        idx = rng.choice(h * w, size=n, replace=False)
        m.flat[idx] = True
        return m
    return rng.random((h, w)) < (rng.uniform(0.01, 0.3) if density is None else density)


def brute_edt(mask):
    ys, xs = np.nonzero(mask)
    h, w = mask.shape
    gy, gx = np.mgrid[0:h, 0:w]
    if ys.size == 0:
        return np.full((h, w), np.inf)
    d2 = (gy[..., None] - ys) ** 2 + (gx[..., None] - xs) ** 2
    return np.sqrt(d2.min(axis=-1))


def brute_knn(mask, k):
    ys, xs = np.nonzero(mask)
    h, w = mask.shape
    gy, gx = np.mgrid[0:h, 0:w]
    d = np.sqrt((gy[..., None] - ys) ** 2 + (gx[..., None] - xs) ** 2)
    d.sort(axis=-1)
    out = np.full((k, h, w), np.inf)
    kk = min(k, ys.size)
    out[:kk] = np.moveaxis(d[..., :kk], -1, 0)
    return out


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
