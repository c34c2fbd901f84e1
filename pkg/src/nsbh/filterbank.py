"""
Anisotropic Littlewood-Paley decomposition on an :class:`AnisoGrid`.

The profiles are built from a single smooth cutoff ``chi`` that equals 1 on
``[0, 3/4]``, 0 on ``[4/3, inf)`` and is C-infinity in between::

    psi(x) = chi(|x|),   phi(x) = chi(|x|/2) - chi(|x|)

so that ``psi + sum_{q>=0} phi(2^-q x)`` telescopes to 1 exactly.  ``phi`` is
supported in ``[3/4, 8/3]``.  Multipliers are exact zeros outside their
supports, which makes the block orthogonality relations hold bit-for-bit.

Vertical blocks act on ``|xi_3| = |k3|/Lv`` and horizontal blocks on
``|xi_h| = sqrt(k1^2 + k2^2)/Lh``.  The low-frequency cutoff is
``S_q = sum_{m <= q-1} Delta_m`` (so ``S_{-1} = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import (
    AnisoGrid,
    SpectralField,
    _pad_axis,
    _truncate_axis,
    padded_physical,
    product_physical,
)

TRANSITION = (0.75, 4.0 / 3.0)


def _smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    out[inside] = a / (a + b)
    out[t >= 1] = 1.0
    return out


def chi(x):
    """Low-pass cutoff: 1 on [0, 3/4], 0 beyond 4/3."""
    lo, hi = TRANSITION
    return 1.0 - _smoothstep((np.abs(x) - lo) / (hi - lo))


def psi(x):
    return chi(x)


def phi(x):
    return chi(np.asarray(x, dtype=float) / 2.0) - chi(x)


def _block_multiplier(xi, q):
    if q < -1:
        return np.zeros_like(xi)
    if q == -1:
        return psi(xi)
    return phi(xi / 2.0**q)


def _qmax(ximax: float) -> int:
    return int(np.floor(np.log2(ximax / TRANSITION[0])))


@dataclass(frozen=True)
class BlockCoeffs:
    """Normalised per-block coefficients ``c_q`` and the normalising total."""

    values: dict
    s: float
    total: float
    mode: str = "block"

    def sum_squares(self) -> float:
        return float(sum(v * v for v in self.values.values()))


@dataclass(frozen=True, eq=False)
class DyadicFilterBank:
    """Littlewood-Paley blocks for a fixed grid."""

    grid: AnisoGrid
    N0: int = 5
    q_min: int = -1

    # --------------------------------------------------------- profiles
    psi = staticmethod(psi)
    phi = staticmethod(phi)
    chi = staticmethod(chi)

    @cached_property
    def xi_v(self) -> np.ndarray:
        """|xi_3| on the vertical wavenumber axis (length Nv)."""
        g = self.grid
        return np.abs(np.fft.fftfreq(g.Nv, 1.0 / g.Nv)) / g.Lv

    @cached_property
    def xi_h(self) -> np.ndarray:
        """|xi_h| on the horizontal wavenumber plane (Nh x Nh)."""
        g = self.grid
        k = np.fft.fftfreq(g.Nh, 1.0 / g.Nh) / g.Lh
        return np.sqrt(k[:, None] ** 2 + k[None, :] ** 2)

    @cached_property
    def q_max_v(self) -> int:
        """Largest vertical block with a nonzero multiplier on the grid."""
        return _qmax(self.xi_v.max())

    @cached_property
    def q_max_h(self) -> int:
        return _qmax(self.xi_h.max())

    @property
    def q_max(self) -> int:
        return self.q_max_v

    def blocks_v(self) -> range:
        return range(-1, self.q_max_v + 1)

    def blocks_h(self) -> range:
        return range(-1, self.q_max_h + 1)

    def q_resolved_v(self) -> int:
        """Largest vertical block whose whole support lies on the grid."""
        return int(np.floor(np.log2(self.xi_v.max() / (8.0 / 3.0))))

    def q_resolved_h(self) -> int:
        g = self.grid
        return int(np.floor(np.log2(((g.Nh // 2) / g.Lh) / (8.0 / 3.0))))

    # ------------------------------------------------------ multipliers
    def mult_v(self, q: int) -> np.ndarray:
        """Vertical multiplier of block q as a length-Nv array."""
        if q > self.q_max_v:
            return np.zeros_like(self.xi_v)
        return self._mv[q] if q >= -1 else np.zeros_like(self.xi_v)

    def mult_h(self, j: int) -> np.ndarray:
        if j > self.q_max_h:
            return np.zeros_like(self.xi_h)
        return self._mh[j] if j >= -1 else np.zeros_like(self.xi_h)

    @cached_property
    def _mv(self) -> dict:
        return {q: _block_multiplier(self.xi_v, q) for q in self.blocks_v()}

    @cached_property
    def _mh(self) -> dict:
        return {j: _block_multiplier(self.xi_h, j) for j in self.blocks_h()}

    def lowpass_v(self, q: int) -> np.ndarray:
        out = np.zeros_like(self.xi_v)
        for m in range(-1, min(q - 1, self.q_max_v) + 1):
            out = out + self._mv[m]
        return out

    def lowpass_h(self, j: int) -> np.ndarray:
        out = np.zeros_like(self.xi_h)
        for m in range(-1, min(j - 1, self.q_max_h) + 1):
            out = out + self._mh[m]
        return out

    def hom_range_v(self) -> range:
        xi = self.xi_v[self.xi_v > 0]
        return range(int(np.floor(np.log2(xi.min() * 3.0 / 8.0))), self.q_max_v + 1)

    def hom_range_h(self) -> range:
        xi = self.xi_h[self.xi_h > 0]
        return range(int(np.floor(np.log2(xi.min() * 3.0 / 8.0))), self.q_max_h + 1)

    def hom_mult_v(self, q: int) -> np.ndarray:
        return phi(self.xi_v / 2.0**q)

    def hom_mult_h(self, j: int) -> np.ndarray:
        return phi(self.xi_h / 2.0**j)

    # -------------------------------------------------------- operators
    def apply_v(self, mult: np.ndarray, sf: SpectralField) -> SpectralField:
        return SpectralField(sf.grid, sf.coeffs * mult[None, None, :])

    def apply_h(self, mult: np.ndarray, sf: SpectralField) -> SpectralField:
        return SpectralField(sf.grid, sf.coeffs * mult[:, :, None])

    def delta_v(self, q: int, sf: SpectralField) -> SpectralField:
        self._check(sf)
        return self.apply_v(self.mult_v(q), sf)

    def delta_h(self, j: int, sf: SpectralField) -> SpectralField:
        self._check(sf)
        return self.apply_h(self.mult_h(j), sf)

    def s_v(self, q: int, sf: SpectralField) -> SpectralField:
        self._check(sf)
        return self.apply_v(self.lowpass_v(q), sf)

    def s_h(self, j: int, sf: SpectralField) -> SpectralField:
        self._check(sf)
        return self.apply_h(self.lowpass_h(j), sf)

    def delta_v_hom(self, q: int, sf: SpectralField) -> SpectralField:
        return self.apply_v(self.hom_mult_v(q), sf)

    def delta_h_hom(self, j: int, sf: SpectralField) -> SpectralField:
        return self.apply_h(self.hom_mult_h(j), sf)

    def _check(self, sf):
        if sf.grid != self.grid:
            raise ValueError(f"field grid {sf.grid} does not match filter bank grid {self.grid}")

    # ---------------------------------------------------------- audits
    def partition_residual(self) -> dict:
        """Max deviation from 1 of both partition identities over grid frequencies."""
        out = {}
        for name, xi, blocks, hom, homr in (
            ("v", self.xi_v, self.blocks_v(), self.hom_mult_v, self.hom_range_v()),
            ("h", self.xi_h, self.blocks_h(), self.hom_mult_h, self.hom_range_h()),
        ):
            tot = sum(_block_multiplier(xi, q) for q in blocks)
            out[f"nonhom_{name}"] = float(np.max(np.abs(tot - 1.0)))
            htot = sum(hom(q) for q in homr)
            nz = xi > 0
            out[f"hom_{name}"] = float(np.max(np.abs(htot[nz] - 1.0)))
        return out

    def orthogonality_defect(self) -> float:
        """Max |m_q m_q'| over pairs with |q-q'| >= 2 (exactly zero by construction)."""
        worst = 0.0
        for mult, blocks in ((self.mult_v, self.blocks_v()), (self.mult_h, self.blocks_h())):
            for q in blocks:
                for p in blocks:
                    if abs(p - q) >= 2:
                        worst = max(worst, float(np.max(np.abs(mult(q) * mult(p)))))
        return worst

    def _support_v(self, m: np.ndarray):
        xi = self.xi_v[m != 0]
        return (float(xi.min()), float(xi.max())) if xi.size else None

    def bony_support_audit(self) -> dict:
        """Combinatorial check of the paraproduct support rule on grid frequencies.

        For every pair (m, m') with |m - m'| >= 5 the set of sums
        ``xi + eta`` with ``xi`` in supp S_{m'-1} and ``eta`` in supp Delta_{m'}
        must miss supp Delta_m.  Frequencies are taken on the vertical grid
        (sums may leave it, which only helps).
        """
        violations = []
        checked = 0
        blocks = list(self.blocks_v())
        xi = np.fft.fftfreq(self.grid.Nv, 1.0 / self.grid.Nv) / self.grid.Lv
        for mp in blocks:
            low = xi[self.lowpass_v(mp - 1) != 0]
            mid = xi[self.mult_v(mp) != 0]
            if low.size == 0 or mid.size == 0:
                continue
            sums = np.unique(np.abs((low[:, None] + mid[None, :]).ravel()))
            for m in blocks:
                if abs(m - mp) < 5:
                    continue
                checked += 1
                target = _block_multiplier(sums, m)
                if np.any(target != 0):
                    violations.append((m, mp))
        return {"pairs_checked": checked, "violations": violations}

    def equivalence_band(self, s: float = 0.0) -> tuple[float, float]:
        """Bounds of sum_q 2^{2qs} phi_q^2 / (1 + xi^2)^s over grid frequencies.

        Its square roots bound the ratio between the block-sum and Bessel
        forms of the H^{0,s} norm.
        """
        w = block_weight_v(self, s, "block")
        r = w / (1.0 + self.xi_v**2) ** s
        return float(np.sqrt(r.min())), float(np.sqrt(r.max()))

    # -------------------------------------------------------- products
    def bony_decompose_v(self, a: SpectralField, b: SpectralField):
        """Vertical Bony split ``ab = T_a(b) + T_b(a) + R(a, b)``.

        Returns three SpectralFields whose sum equals the alias-free product.
        """
        self._check(a)
        self._check(b)
        blocks = list(self.blocks_v())
        A = {q: padded_physical(self.delta_v(q, a)) for q in blocks}
        B = {q: padded_physical(self.delta_v(q, b)) for q in blocks}
        zero = np.zeros_like(A[-1])

        def low(X, q):
            out = zero
            for m in blocks:
                if m <= q - 2:
                    out = out + X[m]
            return out

        tab = zero
        tba = zero
        r = zero
        for q in blocks:
            tab = tab + low(A, q) * B[q]
            tba = tba + low(B, q) * A[q]
            for i in (-1, 0, 1):
                if q + i in A:
                    r = r + A[q + i] * B[q]
        g = self.grid
        return (
            product_physical([tab], g),
            product_physical([tba], g),
            product_physical([r], g),
        )

    # ------------------------------------------------- block coefficients
    def block_coeffs(self, sf: SpectralField, s: float, mode: str = "block") -> BlockCoeffs:
        """Normalised vertical block coefficients.

        ``block``: ``c_q = 2^{qs} ||Delta_q f|| / ||f||_{0,s}`` (squares sum to 1).
        ``lowpass`` (s < 0): ``c_q = 2^{qs} ||S_q f|| / (K_s ||f||_{0,s})`` with
        ``K_s = 2^s / (1 - 2^s)``, the Young-inequality constant, so the squares
        sum to at most 1.
        """
        if mode not in ("block", "lowpass"):
            raise ValueError(f"mode must be 'block' or 'lowpass', got {mode!r}")
        if mode == "lowpass" and not s < 0:
            raise ValueError(f"lowpass coefficients require s < 0, got s={s}")
        vol = sf.grid.volume
        e = np.sum(np.abs(sf.coeffs) ** 2, axis=(0, 1))
        blocks = list(self.blocks_v())
        per = {q: np.sqrt(vol * np.sum(self.mult_v(q) ** 2 * e)) for q in blocks}
        total = float(np.sqrt(sum(4.0 ** (q * s) * per[q] ** 2 for q in blocks)))
        if total == 0:
            return BlockCoeffs({q: 0.0 for q in blocks}, s, 0.0, mode)
        if mode == "block":
            vals = {q: float(2.0 ** (q * s) * per[q] / total) for q in blocks}
            return BlockCoeffs(vals, s, total, mode)
        K = 2.0**s / (1.0 - 2.0**s)
        vals = {}
        for q in blocks:
            lp = np.sqrt(vol * np.sum(self.lowpass_v(q) ** 2 * e))
            vals[q] = float(2.0 ** (q * s) * lp / (K * total))
        return BlockCoeffs(vals, s, total, mode)

    # ---------------------------------------------------- serialisation
    def to_dict(self) -> dict:
        return {
            "transition": list(TRANSITION),
            "N0": self.N0,
            "q_min": self.q_min,
            "q_max_v": self.q_max_v,
            "q_max_h": self.q_max_h,
            "grid": self.grid.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DyadicFilterBank":
        if tuple(d.get("transition", TRANSITION)) != TRANSITION:
            raise ValueError(f"unsupported profile transition {d['transition']}")
        fb = cls(AnisoGrid(**d["grid"]), N0=int(d.get("N0", 5)), q_min=int(d.get("q_min", -1)))
        for key in ("q_max_v", "q_max_h"):
            if key in d and int(d[key]) != getattr(fb, key):
                raise ValueError(f"{key}={d[key]} inconsistent with grid (expected {getattr(fb, key)})")
        return fb


def block_weight_v(fb: DyadicFilterBank, beta: float, weight: str = "block") -> np.ndarray:
    """Vertical weight ``sum_q 2^{2 q beta} m_q(xi)`` with ``m = phi^2`` or ``phi``.

    ``block`` (phi^2) is the literal block-sum norm; ``partition`` (phi) sums to
    exactly 1 at beta = 0 and turns pairings into plain L^2 products there.
    """
    if weight not in ("block", "partition"):
        raise ValueError(f"weight must be 'block' or 'partition', got {weight!r}")
    p = 2 if weight == "block" else 1
    out = np.zeros_like(fb.xi_v)
    for q in fb.blocks_v():
        out = out + 4.0 ** (q * beta) * fb.mult_v(q) ** p
    return out


_BANKS: dict = {}


def bank_for(grid: AnisoGrid) -> DyadicFilterBank:
    """Shared immutable filter bank per grid."""
    fb = _BANKS.get(grid)
    if fb is None:
        fb = DyadicFilterBank(grid)
        _BANKS[grid] = fb
    return fb


# ------------------------------------------------- exact vertical products


def _hpad_physical(c: np.ndarray, Nh: int) -> np.ndarray:
    """(k1, k2, k3) coefficients -> (x1, x2) physical on a 2x grid, k3 kept spectral."""
    m = 2 * Nh
    cp = _pad_axis(_pad_axis(c, 0, Nh, m), 1, Nh, m)
    return np.fft.ifft2(cp, axes=(0, 1)) * (m * m)


def vconv_product(a: SpectralField, b: SpectralField, extended: bool = False) -> np.ndarray:
    """Coefficients of ``a*b`` via direct convolution along k3.

    Horizontal directions use an alias-free padded transform; the vertical
    direction is an explicit sum over the nonzero vertical modes of ``a``, so
    output modes that no pair of input modes can reach are exact zeros.
    With ``extended`` the vertical axis is returned on ``2*Nv`` modes
    (indices ``-Nv .. Nv-1``, fft order) with nothing truncated.
    """
    g = a.grid
    Nh, Nv = g.Nh, g.Nv
    A = _hpad_physical(a.coeffs, Nh)
    B = _hpad_physical(b.coeffs, Nh)
    iv = np.fft.fftfreq(Nv, 1.0 / Nv).astype(int)
    M = 2 * Nv
    out = np.zeros(A.shape[:2] + (M,), complex)
    active = np.nonzero(np.any(A != 0, axis=(0, 1)))[0]
    bidx = iv % M
    for ia in active:
        shift = iv[ia]
        out[:, :, (bidx + shift) % M] += A[:, :, ia : ia + 1] * B
    m = 2 * Nh
    c = np.fft.fft2(out, axes=(0, 1)) / (m * m)
    c = _truncate_axis(_truncate_axis(c, 0, Nh, m), 1, Nh, m)
    if extended:
        return c
    return _truncate_axis(c, 2, Nv, M)


def extended_xi_v(grid: AnisoGrid) -> np.ndarray:
    M = 2 * grid.Nv
    return np.abs(np.fft.fftfreq(M, 1.0 / M)) / grid.Lv
