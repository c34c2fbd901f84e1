"""
Anisotropic periodic grid and the spectral substrate.

The physical box is ``[0, 2*pi*Lh)^2 x [0, 2*pi*Lv)``; horizontal axes are
``x1, x2`` and the vertical axis is ``x3``.  Fields are stored as complex
Fourier coefficients ``c_k`` normalised so that

    f(x) = sum_k c_k exp(i k.x),   k = (k1/Lh, k2/Lh, k3/Lv),

which makes the DC coefficient equal to the mean of ``f`` and gives the
Parseval relation ``||f||_{L^2}^2 = |box| * sum_k |c_k|^2``.

Odd-order operators (derivatives, divergence, Leray projection) use
wavenumbers with the Nyquist entry set to zero so that Hermitian symmetry,
and hence realness, is preserved.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

_WORKERS = 1


def set_workers(n: int) -> None:
    """Set the thread count used by every FFT in the package."""
    global _WORKERS
    if n < 1:
        raise ValueError(f"worker count must be >= 1, got {n}")
    _WORKERS = int(n)


@contextlib.contextmanager
def fft_workers(n: int):
    """Temporarily change the FFT thread count."""
    old = _WORKERS
    set_workers(n)
    try:
        yield
    finally:
        set_workers(old)


def _fftn(a):
    return sfft.fftn(a, workers=_WORKERS)


def _ifftn(a):
    return sfft.ifftn(a, workers=_WORKERS)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class AnisoGrid:
    """Periodic grid with ``Nh`` points per horizontal axis and ``Nv`` vertically."""

    Nh: int
    Nv: int
    Lh: float = 1.0
    Lv: float = 1.0

    def __post_init__(self):
        for name in ("Nh", "Nv"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or not _is_pow2(int(n)) or n < 8:
                raise ValueError(f"{name} must be a power of two >= 8, got {n!r}")
        for name in ("Lh", "Lv"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.Nh, self.Nh, self.Nv)

    @property
    def size(self) -> int:
        return self.Nh * self.Nh * self.Nv

    @property
    def volume(self) -> float:
        return (2 * np.pi) ** 3 * self.Lh**2 * self.Lv

    @property
    def dx_h(self) -> float:
        return 2 * np.pi * self.Lh / self.Nh

    @property
    def dx_v(self) -> float:
        return 2 * np.pi * self.Lv / self.Nv

    # integer wavenumber indices, fft ordering
    @cached_property
    def _ih(self):
        return np.fft.fftfreq(self.Nh, 1.0 / self.Nh)

    @cached_property
    def _iv(self):
        return np.fft.fftfreq(self.Nv, 1.0 / self.Nv)

    @cached_property
    def k1(self):
        return (self._ih / self.Lh)[:, None, None]

    @cached_property
    def k2(self):
        return (self._ih / self.Lh)[None, :, None]

    @cached_property
    def k3(self):
        return (self._iv / self.Lv)[None, None, :]

    def _zero_nyq(self, i, L):
        k = i / L
        k[np.abs(i) == i.size // 2] = 0.0
        return k

    @cached_property
    def kd(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Derivative wavenumbers (Nyquist entries zeroed), broadcastable."""
        kh = self._zero_nyq(self._ih.copy(), self.Lh)
        kv = self._zero_nyq(self._iv.copy(), self.Lv)
        return kh[:, None, None], kh[None, :, None], kv[None, None, :]

    @cached_property
    def kh2(self):
        return self.k1**2 + self.k2**2

    @cached_property
    def kh_abs(self):
        return np.sqrt(self.kh2)

    @cached_property
    def kv_abs(self):
        return np.abs(self.k3)

    @cached_property
    def k_abs(self):
        return np.sqrt(self.kh2 + self.k3**2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on every mode that lies on a Nyquist plane."""
        h = np.abs(self._ih) == self.Nh // 2
        v = np.abs(self._iv) == self.Nv // 2
        return h[:, None, None] | h[None, :, None] | v[None, None, :]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask on integer wavenumber indices."""
        h = np.abs(self._ih) <= self.Nh / 3
        v = np.abs(self._iv) <= self.Nv / 3
        return h[:, None, None] & h[None, :, None] & v[None, None, :]

    @property
    def kv_max(self) -> float:
        return (self.Nv // 2) / self.Lv

    @property
    def kh_max(self) -> float:
        """Largest horizontal modulus on the grid (the corner mode)."""
        return np.sqrt(2.0) * (self.Nh // 2) / self.Lh

    @property
    def nyquist_radius(self) -> float:
        return min((self.Nh // 2) / self.Lh, (self.Nv // 2) / self.Lv)

    def coords(self):
        """Physical coordinates ``(x1, x2, x3)`` as broadcastable arrays."""
        x1 = np.arange(self.Nh) * self.dx_h
        x3 = np.arange(self.Nv) * self.dx_v
        return x1[:, None, None], x1[None, :, None], x3[None, None, :]

    def to_dict(self) -> dict:
        return {"Nh": self.Nh, "Nv": self.Nv, "Lh": self.Lh, "Lv": self.Lv}


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar field on ``grid``."""

    grid: AnisoGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {c.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.iscomplexobj(c):
            c = c.astype(complex)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: AnisoGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, complex))

    def _like(self, c) -> "SpectralField":
        return SpectralField(self.grid, c)

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check(other)
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.coeffs - other.coeffs)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, a):
        if isinstance(a, SpectralField):
            return product(self, a)
        return self._like(self.coeffs * a)

    __rmul__ = __mul__

    def physical(self) -> np.ndarray:
        return inverse(self)

    def l2_norm(self) -> float:
        """Physical L^2 norm via Parseval."""
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coeffs) ** 2)))

    def inner(self, other) -> float:
        """Physical L^2 inner product via Parseval."""
        self._check(other)
        return float(self.grid.volume * np.real(np.vdot(other.coeffs, self.coeffs)))

    def mean(self) -> float:
        return float(self.coeffs[0, 0, 0].real)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three scalar components on a shared grid."""

    components: tuple
    divergence_free: bool = False

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 3:
            raise ValueError(f"a VectorField needs 3 components, got {len(comps)}")
        g = comps[0].grid
        for c in comps[1:]:
            if c.grid != g:
                raise ValueError("VectorField components must share one grid")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zeros(cls, grid: AnisoGrid) -> "VectorField":
        return cls(tuple(SpectralField.zeros(grid) for _ in range(3)), True)

    @classmethod
    def from_arrays(cls, grid, coeffs, divergence_free=False) -> "VectorField":
        return cls(tuple(SpectralField(grid, c) for c in coeffs), divergence_free)

    @property
    def grid(self) -> AnisoGrid:
        return self.components[0].grid

    def __getitem__(self, i) -> SpectralField:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    @property
    def stacked(self) -> np.ndarray:
        return np.stack([c.coeffs for c in self.components])

    def __add__(self, other):
        return VectorField(
            tuple(a + b for a, b in zip(self, other)),
            self.divergence_free and other.divergence_free,
        )

    def __sub__(self, other):
        return VectorField(
            tuple(a - b for a, b in zip(self, other)),
            self.divergence_free and other.divergence_free,
        )

    def __neg__(self):
        return VectorField(tuple(-a for a in self), self.divergence_free)

    def __mul__(self, a: float):
        return VectorField(tuple(c * a for c in self), self.divergence_free)

    __rmul__ = __mul__

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(c.l2_norm() ** 2 for c in self)))

    def inner(self, other) -> float:
        return float(sum(a.inner(b) for a, b in zip(self, other)))

    def divergence_residual(self) -> float:
        """``max_k |k.u(k)| / max(|k| |u(k)|)``; zero for an exactly solenoidal field."""
        k1, k2, k3 = self.grid.kd
        c = self.stacked
        div = k1 * c[0] + k2 * c[1] + k3 * c[2]
        kmag = np.sqrt(k1**2 + k2**2 + k3**2)
        scale = np.max(kmag * np.sqrt(np.sum(np.abs(c) ** 2, axis=0)))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(div)) / scale)

    def max_divergence(self) -> float:
        """``max_k |k.u(k)|`` in absolute terms."""
        k1, k2, k3 = self.grid.kd
        c = self.stacked
        return float(np.max(np.abs(k1 * c[0] + k2 * c[1] + k3 * c[2])))


@dataclass(frozen=True)
class MixedNormSpec:
    """Iterated Lebesgue norm ``L^p_h(L^q_v)`` (h_outer) or ``L^q_v(L^p_h)`` (v_outer)."""

    p_h: float
    q_v: float
    order: str = "h_outer"

    def __post_init__(self):
        if self.p_h not in (2, 4, np.inf):
            raise ValueError(f"unsupported horizontal exponent {self.p_h}; use 2, 4 or inf")
        if self.q_v not in (2, np.inf):
            raise ValueError(f"unsupported vertical exponent {self.q_v}; use 2 or inf")
        if self.order not in ("h_outer", "v_outer"):
            raise ValueError(f"order must be 'h_outer' or 'v_outer', got {self.order!r}")


# ---------------------------------------------------------------- transforms


def forward(field: np.ndarray, grid: AnisoGrid) -> SpectralField:
    """Physical real array -> SpectralField."""
    f = np.asarray(field)
    if f.shape != grid.shape:
        raise ValueError(f"array shape {f.shape} does not match grid shape {grid.shape}")
    return SpectralField(grid, _fftn(f) / grid.size)


def hermitian_defect(c: np.ndarray) -> float:
    """``max |c(k) - conj(c(-k))|``."""
    mirror = np.conj(np.roll(np.flip(c), 1, axis=(0, 1, 2)))
    return float(np.max(np.abs(c - mirror))) if c.size else 0.0


def inverse(sf: SpectralField, check: bool = True) -> np.ndarray:
    """SpectralField -> physical real array.

    Raises ``ValueError`` when the coefficients are not Hermitian-symmetric
    (relative defect above 1e-10).
    """
    c = sf.coeffs
    if check:
        scale = float(np.max(np.abs(c))) if c.size else 0.0
        if scale > 0 and hermitian_defect(c) > 1e-10 * scale:
            raise ValueError(
                f"coefficients are not Hermitian symmetric "
                f"(defect {hermitian_defect(c):.3e}, scale {scale:.3e})"
            )
    return np.real(_ifftn(c * sf.grid.size))


# ----------------------------------------------------------------- operators


def derivative(sf: SpectralField, axis: int) -> SpectralField:
    """Partial derivative along ``axis`` in {1, 2, 3}."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    k = sf.grid.kd[axis - 1]
    return SpectralField(sf.grid, 1j * k * sf.coeffs)


def gradient_h(sf: SpectralField) -> tuple[SpectralField, SpectralField]:
    return derivative(sf, 1), derivative(sf, 2)


def gradient(sf: SpectralField) -> VectorField:
    return VectorField((derivative(sf, 1), derivative(sf, 2), derivative(sf, 3)))


def divergence(v: VectorField) -> SpectralField:
    return derivative(v[0], 1) + derivative(v[1], 2) + derivative(v[2], 3)


def curl(v: VectorField) -> VectorField:
    d = derivative
    return VectorField(
        (
            d(v[2], 2) - d(v[1], 3),
            d(v[0], 3) - d(v[2], 1),
            d(v[1], 1) - d(v[0], 2),
        ),
        True,
    )


def horizontal_laplacian(sf: SpectralField) -> SpectralField:
    return SpectralField(sf.grid, -sf.grid.kh2 * sf.coeffs)


def horizontal_laplacian_semigroup(sf: SpectralField, t: float) -> SpectralField:
    """Apply ``exp(t * Delta_h)``: mode k is damped by ``exp(-t |k_h|^2)``."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    return SpectralField(sf.grid, np.exp(-t * sf.grid.kh2) * sf.coeffs)


def leray_project(v: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields, mode by mode.

    The k = 0 mode (and any mode whose derivative wavenumber vanishes) is
    passed through unchanged.
    """
    c = leray_coeffs(v.grid, v.stacked)
    return VectorField.from_arrays(v.grid, c, divergence_free=True)


def leray_coeffs(grid: AnisoGrid, c: np.ndarray) -> np.ndarray:
    k1, k2, k3 = grid.kd
    k2sum = k1**2 + k2**2 + k3**2
    inv = np.divide(1.0, k2sum, out=np.zeros_like(k2sum), where=k2sum > 0)
    kdotc = (k1 * c[0] + k2 * c[1] + k3 * c[2]) * inv
    return np.stack([c[0] - k1 * kdotc, c[1] - k2 * kdotc, c[2] - k3 * kdotc])


# ------------------------------------------------------------------ products


def _pad_axis(c, axis, n, m):
    shape = list(c.shape)
    shape[axis] = m
    out = np.zeros(shape, complex)
    h = n // 2
    src = [slice(None)] * c.ndim
    dst = [slice(None)] * c.ndim
    src[axis], dst[axis] = slice(0, h), slice(0, h)
    out[tuple(dst)] = c[tuple(src)]
    src[axis], dst[axis] = slice(h + 1, n), slice(m - h + 1, m)
    out[tuple(dst)] = c[tuple(src)]
    # split the Nyquist coefficient symmetrically so the interpolant stays real
    src[axis] = slice(h, h + 1)
    nyq = 0.5 * c[tuple(src)]
    dst[axis] = slice(h, h + 1)
    out[tuple(dst)] += nyq
    dst[axis] = slice(m - h, m - h + 1)
    out[tuple(dst)] += nyq
    return out


def _truncate_axis(c, axis, n, m):
    shape = list(c.shape)
    shape[axis] = n
    out = np.zeros(shape, complex)
    h = n // 2
    src = [slice(None)] * c.ndim
    dst = [slice(None)] * c.ndim
    src[axis], dst[axis] = slice(0, h), slice(0, h)
    out[tuple(dst)] = c[tuple(src)]
    src[axis], dst[axis] = slice(m - h + 1, m), slice(h + 1, n)
    out[tuple(dst)] = c[tuple(src)]
    return out


def pad_coeffs(c: np.ndarray, shape: tuple) -> np.ndarray:
    """Zero-pad coefficients (last three axes) to a finer grid ``shape``."""
    out = c
    nd = c.ndim
    for j, m in enumerate(shape):
        ax = nd - 3 + j
        out = _pad_axis(out, ax, out.shape[ax], m)
    return out


def truncate_coeffs(c: np.ndarray, shape: tuple) -> np.ndarray:
    """Inverse of :func:`pad_coeffs`; Nyquist planes of the result are zero."""
    out = c
    nd = c.ndim
    for j, n in enumerate(shape):
        ax = nd - 3 + j
        out = _truncate_axis(out, ax, n, out.shape[ax])
    return out


def padded_physical(sf: SpectralField, factor: int = 2) -> np.ndarray:
    g = sf.grid
    big = tuple(factor * n for n in g.shape)
    cp = pad_coeffs(sf.coeffs, big)
    return np.real(_ifftn(cp * np.prod(big)))


def product_physical(arrays: list[np.ndarray], grid: AnisoGrid, factor: int = 2) -> SpectralField:
    """Forward transform of a pointwise product computed on a padded grid."""
    big = tuple(factor * n for n in grid.shape)
    p = arrays[0]
    for a in arrays[1:]:
        p = p * a
    cp = _fftn(p) / np.prod(big)
    return SpectralField(grid, truncate_coeffs(cp, grid.shape))


def product(a: SpectralField, b: SpectralField, factor: int = 2) -> SpectralField:
    """Alias-free product ``a*b`` restricted to the sub-Nyquist modes of the grid.

    Both factors are evaluated on a grid refined by ``factor`` (2 makes every
    retained coefficient exact), multiplied pointwise and truncated back.
    """
    a._check(b)
    return product_physical([padded_physical(a, factor), padded_physical(b, factor)], a.grid, factor)


def dealiased_product(a: np.ndarray, b: np.ndarray, grid: AnisoGrid) -> SpectralField:
    """On-grid pointwise product with the 2/3 rule applied to the result."""
    c = _fftn(a * b) / grid.size
    return SpectralField(grid, c * grid.dealias_mask)


# ---------------------------------------------------------------- rescaling


def dyadic_rescale_v(sf: SpectralField) -> SpectralField:
    """``f(x_h, x3) -> f(x_h, 2 x3)``: vertical mode k3 moves to 2 k3.

    Requires vertical support strictly below ``Nv/4``.
    """
    g = sf.grid
    n = g.Nv
    iv = np.fft.fftfreq(n, 1.0 / n).astype(int)
    c = sf.coeffs
    if np.any(np.abs(c[:, :, np.abs(iv) >= n // 4]) > 0):
        raise ValueError("vertical spectrum must lie strictly below Nv/4 for a dyadic rescale")
    out = np.zeros_like(c)
    keep = np.abs(iv) < n // 4
    out[:, :, (2 * iv[keep]) % n] = c[:, :, keep]
    return SpectralField(g, out)


def dyadic_rescale_h(sf: SpectralField) -> SpectralField:
    """``f(x_h, x3) -> f(2 x_h, x3)``: horizontal modes move to 2 k_h."""
    g = sf.grid
    n = g.Nh
    ih = np.fft.fftfreq(n, 1.0 / n).astype(int)
    keep = np.abs(ih) < n // 4
    c = sf.coeffs
    mask = keep[:, None] & keep[None, :]
    if np.any(np.abs(c[~mask]) > 0):
        raise ValueError("horizontal spectrum must lie strictly below Nh/4 for a dyadic rescale")
    out = np.zeros_like(c)
    src = np.nonzero(keep)[0]
    dst = (2 * ih[keep]) % n
    out[np.ix_(dst, dst, np.arange(g.Nv))] = c[np.ix_(src, src, np.arange(g.Nv))]
    return SpectralField(g, out)


# -------------------------------------------------------------- mixed norms


def _lp(x, p, axis, weight):
    if p == np.inf:
        return np.max(np.abs(x), axis=axis)
    return (np.sum(np.abs(x) ** p, axis=axis) * weight) ** (1.0 / p)


def mixed_norm_physical(f: np.ndarray, grid: AnisoGrid, spec: MixedNormSpec) -> float:
    dA = grid.dx_h**2
    dz = grid.dx_v
    if spec.order == "h_outer":
        inner = _lp(f, spec.q_v, 2, dz)
        return float(_lp(inner, spec.p_h, (0, 1), dA))
    inner = _lp(f, spec.p_h, (0, 1), dA)
    return float(_lp(inner, spec.q_v, 0, dz))


def mixed_norm(sf: SpectralField, spec: MixedNormSpec) -> float:
    """Iterated Lebesgue norm by physical-space quadrature (grid maxima for inf)."""
    return mixed_norm_physical(inverse(sf, check=False), sf.grid, spec)
