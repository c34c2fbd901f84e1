"""
Reproducible random field ensembles.

Sample ``i`` of an ensemble with seed ``s`` is drawn from
``numpy.random.default_rng([s, i])``, so results do not depend on how the
samples are scheduled across threads.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .filterbank import bank_for
from .grid import AnisoGrid, SpectralField, VectorField, _fftn, leray_coeffs


@dataclass(frozen=True)
class EnsembleSpec:
    """``profile`` is one of ``white``, ``power:g``, ``block:q``, ``aniso:gh,gv``.

    ``vband`` (optional) zeroes vertical modes with ``|k3| >= vband`` (integer
    index); ``hband`` does the same horizontally.
    """

    count: int
    profile: str = "white"
    seed: int = 0
    grid: AnisoGrid = AnisoGrid(16, 16)
    vband: int | None = None
    hband: int | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"ensemble count must be >= 1, got {self.count}")
        parse_profile(self.profile)


def parse_profile(text: str) -> tuple:
    name, _, arg = text.partition(":")
    try:
        if name == "white" and not arg:
            return ("white",)
        if name == "power":
            g = float(arg)
            return ("power", g)
        if name == "block":
            return ("block", int(arg))
        if name == "aniso":
            gh, gv = (float(x) for x in arg.split(","))
            return ("aniso", gh, gv)
    except ValueError:
        pass
    raise ValueError(f"unknown spectrum profile {text!r}")


def profile_multiplier(grid: AnisoGrid, profile: str) -> np.ndarray:
    p = parse_profile(profile)
    if p[0] == "white":
        return np.ones(grid.shape)
    if p[0] == "power":
        return (1.0 + grid.k_abs**2) ** (-p[1] / 2.0)
    if p[0] == "aniso":
        return (1.0 + grid.kh2) ** (-p[1] / 2.0) * (1.0 + grid.k3**2) ** (-p[2] / 2.0)
    fb = bank_for(grid)
    return np.broadcast_to(fb.mult_v(p[1])[None, None, :], grid.shape).copy()


def _band_mask(grid: AnisoGrid, vband, hband) -> np.ndarray:
    m = ~grid.nyquist_mask
    if vband is not None:
        iv = np.abs(np.fft.fftfreq(grid.Nv, 1.0 / grid.Nv))
        m = m & (iv < vband)[None, None, :]
    if hband is not None:
        ih = np.abs(np.fft.fftfreq(grid.Nh, 1.0 / grid.Nh))
        m = m & (ih < hband)[:, None, None] & (ih < hband)[None, :, None]
    return m


def shaped_noise(rng, grid: AnisoGrid, mult: np.ndarray, mask: np.ndarray, ncomp: int = 1) -> np.ndarray:
    """``ncomp`` real random fields with the given spectral envelope (coefficients)."""
    out = []
    for _ in range(ncomp):
        x = rng.standard_normal(grid.shape)
        c = _fftn(x) / grid.size * mult * mask
        out.append(c)
    return np.stack(out)


def _unit(c: np.ndarray, grid: AnisoGrid) -> np.ndarray:
    n = np.sqrt(grid.volume * np.sum(np.abs(c) ** 2))
    return c / n if n > 0 else c


def sample_scalar(spec: EnsembleSpec, i: int, stream: int = 0, mean_free: bool = False) -> SpectralField:
    """Unit-L^2 scalar sample ``i`` (``stream`` selects an independent family)."""
    rng = np.random.default_rng([spec.seed, i, stream])
    g = spec.grid
    c = shaped_noise(rng, g, profile_multiplier(g, spec.profile), _band_mask(g, spec.vband, spec.hband))[0]
    if mean_free:
        c[0, 0, 0] = 0.0
    return SpectralField(g, _unit(c, g))


def sample_vector(spec: EnsembleSpec, i: int, stream: int = 0, solenoidal: bool = True) -> VectorField:
    """Unit-L^2 vector sample; Leray-projected when ``solenoidal``."""
    rng = np.random.default_rng([spec.seed, i, stream])
    g = spec.grid
    c = shaped_noise(rng, g, profile_multiplier(g, spec.profile), _band_mask(g, spec.vband, spec.hband), 3)
    if solenoidal:
        c = leray_coeffs(g, c)
    return VectorField.from_arrays(g, _unit(c, g), divergence_free=solenoidal)


def digest(*fields) -> str:
    """sha256 over the raw coefficient bytes of the given fields."""
    h = hashlib.sha256()
    for f in fields:
        arr = f.stacked if isinstance(f, VectorField) else f.coeffs
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def map_ensemble(fn, count: int, threads: int = 1) -> list:
    """Evaluate ``fn(i)`` for ``i < count``; results are returned in index order."""
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(count)))
