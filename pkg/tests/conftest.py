import numpy as np
import pytest

from nsbh.grid import AnisoGrid, SpectralField, VectorField, leray_coeffs

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


def random_coeffs(grid, seed, ncomp=1, band=None):
    """Hermitian coefficients of real Gaussian noise, Nyquist planes removed.

    ``band`` keeps only modes with every integer index strictly below it.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(ncomp):
        x = rng.standard_normal(grid.shape)
        c = np.fft.fftn(x) / grid.size
        c[grid.nyquist_mask] = 0.0
        if band is not None:
            ih = np.abs(np.fft.fftfreq(grid.Nh, 1.0 / grid.Nh))
            iv = np.abs(np.fft.fftfreq(grid.Nv, 1.0 / grid.Nv))
            m = (ih < band)[:, None, None] & (ih < band)[None, :, None] & (iv < band)[None, None, :]
            c = c * m
        out.append(c)
    return np.stack(out)


def random_scalar(grid, seed, band=None):
    return SpectralField(grid, random_coeffs(grid, seed, 1, band)[0])


def random_solenoidal(grid, seed, band=None):
    c = leray_coeffs(grid, random_coeffs(grid, seed, 3, band))
    return VectorField.from_arrays(grid, c, divergence_free=True)


@pytest.fixture(scope="session")
def g8():
    return AnisoGrid(8, 8)


@pytest.fixture(scope="session")
def g16():
    return AnisoGrid(16, 16)


@pytest.fixture(scope="session")
def g32():
    return AnisoGrid(32, 32)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
