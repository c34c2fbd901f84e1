"""
Anisotropic Sobolev and Besov norms and the weighted pairings.

``H^{t,s}`` uses a horizontal Bessel weight and the vertical block sum::

    ||f||_{t,s}^2 = |box| sum_k (1 + |xi_h|^2)^t  W_s(xi_3) |f_k|^2,
    W_s(xi_3) = sum_q 2^{2qs} phi_q(xi_3)^2,

so at ``t = 0`` it is exactly ``sum_q 2^{2qs} ||Delta_q^v f||^2``.  Besov kinds
follow the two-directional block definition with per-block L^p norms
computed in physical space.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .filterbank import bank_for, block_weight_v
from .grid import MixedNormSpec, SpectralField, VectorField, inverse, mixed_norm

KINDS = ("sobolev_ts", "besov_tspq", "besov_mixed", "mixed_lebesgue")
_EXPS = {"1": 1.0, "2": 2.0, "4": 4.0, "inf": np.inf}


@dataclass(frozen=True)
class NormSpec:
    kind: str
    t: float = 0.0
    s: float = 0.0
    p: float = 2.0
    q1: float = 2.0
    q2: float = 2.0
    order: str = "h_outer"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "mixed_lebesgue":
            MixedNormSpec(self.p, self.q1, self.order)
        elif self.kind in ("besov_tspq", "besov_mixed"):
            for name in ("p", "q1", "q2"):
                if getattr(self, name) not in (1.0, 2.0, np.inf):
                    raise ValueError(f"Besov exponent {name}={getattr(self, name)} not in {{1, 2, inf}}")

    @classmethod
    def sobolev(cls, t: float, s: float) -> "NormSpec":
        return cls("sobolev_ts", t=t, s=s)

    def label(self) -> str:
        f = _fmt_exp
        if self.kind == "sobolev_ts":
            return f"H:{self.t:g}:{self.s:g}"
        if self.kind == "besov_tspq":
            return f"B:{f(self.p)},{f(self.q1)}:{self.t:g}:{self.s:g}"
        if self.kind == "besov_mixed":
            return f"BM:{f(self.p)},{f(self.q1)},{f(self.q2)}:{self.t:g}:{self.s:g}"
        h, v = f"{f(self.p)}h", f"{f(self.q1)}v"
        return f"L:{h},{v}" if self.order == "h_outer" else f"L:{v},{h}"


@dataclass(frozen=True)
class PairingSpec:
    alpha: float = 0.0
    beta: float = 0.0
    weight: str = "block"


def _fmt_exp(p):
    return "inf" if p == np.inf else f"{p:g}"


def _exp(tok: str, text: str) -> float:
    if tok not in _EXPS:
        raise ValueError(f"bad exponent {tok!r} in norm spec {text!r}")
    return _EXPS[tok]


def parse_norm_spec(text: str) -> NormSpec:
    """Parse ``H:t:s``, ``B:p,q:t:s``, ``BM:p,q1,q2:t:s`` or ``L:4h,infv``.

    In the Lebesgue form the first listed variable is the outer norm.
    """
    parts = text.strip().split(":")
    try:
        tag = parts[0].upper()
        if tag == "H" and len(parts) == 3:
            return NormSpec("sobolev_ts", t=float(parts[1]), s=float(parts[2]))
        if tag == "B" and len(parts) == 4:
            p, q = parts[1].split(",")
            q = _exp(q, text)
            return NormSpec("besov_tspq", float(parts[2]), float(parts[3]), _exp(p, text), q, q)
        if tag == "BM" and len(parts) == 4:
            p, q1, q2 = parts[1].split(",")
            return NormSpec(
                "besov_mixed", float(parts[2]), float(parts[3]), _exp(p, text), _exp(q1, text), _exp(q2, text)
            )
        if tag == "L" and len(parts) == 2:
            toks = parts[1].split(",")
            m = [re.fullmatch(r"(1|2|4|inf)([hv])", t.strip()) for t in toks]
            if len(toks) == 2 and all(m) and {x.group(2) for x in m} == {"h", "v"}:
                d = {x.group(2): _EXPS[x.group(1)] for x in m}
                order = "h_outer" if m[0].group(2) == "h" else "v_outer"
                return NormSpec("mixed_lebesgue", p=d["h"], q1=d["v"], order=order)
    except ValueError as exc:
        if "norm spec" in str(exc) or "exponent" in str(exc):
            raise
        raise ValueError(f"malformed norm spec {text!r}: {exc}") from None
    raise ValueError(f"malformed norm spec {text!r}")


# ------------------------------------------------------------- weights


def spectral_weight(grid, t: float, s: float, weight: str = "block", gradient: bool = False):
    """Broadcastable multiplier ``(1+|xi_h|^2)^t W_s(xi_3)`` (times |xi_h|^2 if gradient)."""
    fb = bank_for(grid)
    wv = block_weight_v(fb, s, weight)[None, None, :]
    wh = (1.0 + grid.kh2) ** t if t != 0 else 1.0
    out = wh * wv
    if gradient:
        k1, k2, _ = grid.kd
        out = out * (k1**2 + k2**2)
    return out


def _energy(f) -> np.ndarray:
    if isinstance(f, VectorField):
        return np.sum(np.abs(f.stacked) ** 2, axis=0)
    return np.abs(f.coeffs) ** 2


def sobolev_norm(f, t: float, s: float, weight: str = "block") -> float:
    g = f.grid
    return float(np.sqrt(g.volume * np.sum(spectral_weight(g, t, s, weight) * _energy(f))))


def gradh_norm(f, t: float, s: float, weight: str = "block") -> float:
    """``||nabla_h f||_{t,s}``; for a vector field all components are included."""
    g = f.grid
    w = spectral_weight(g, t, s, weight, gradient=True)
    return float(np.sqrt(g.volume * np.sum(w * _energy(f))))


def horizontal_sobolev_norm(f, t: float) -> float:
    """``L^2_v H^t_h`` norm (Bessel weight, no vertical weight)."""
    g = f.grid
    w = (1.0 + g.kh2) ** t
    return float(np.sqrt(g.volume * np.sum(w * _energy(f))))


def _besov(sf: SpectralField, spec: NormSpec) -> float:
    fb = bank_for(sf.grid)
    g = sf.grid
    rows = []
    for k in fb.blocks_h():
        mh = fb.mult_h(k)
        if not np.any(mh):
            continue
        row = []
        for j in fb.blocks_v():
            mv = fb.mult_v(j)
            c = sf.coeffs * mh[:, :, None] * mv[None, None, :]
            if spec.p == 2:
                val = np.sqrt(g.volume * np.sum(np.abs(c) ** 2))
            else:
                x = inverse(SpectralField(g, c), check=False)
                val = _lp_full(x, spec.p, g)
            row.append(2.0 ** (k * spec.t) * 2.0 ** (j * spec.s) * val)
        rows.append(np.array(row))
    inner = np.array([_lq(r, spec.q2) for r in rows])
    return float(_lq(inner, spec.q1))


def _lp_full(x, p, g):
    if p == np.inf:
        return float(np.max(np.abs(x)))
    dv = g.dx_h**2 * g.dx_v
    return float((np.sum(np.abs(x) ** p) * dv) ** (1.0 / p))


def _lq(v, q):
    if q == np.inf:
        return float(np.max(v)) if v.size else 0.0
    return float(np.sum(v**q) ** (1.0 / q))


def norm(f, spec: NormSpec) -> float:
    """Evaluate ``spec`` on a scalar field (or the Euclidean combination over a vector)."""
    if isinstance(f, VectorField):
        if spec.kind == "sobolev_ts":
            return sobolev_norm(f, spec.t, spec.s)
        return float(np.sqrt(sum(norm(c, spec) ** 2 for c in f)))
    if spec.kind == "sobolev_ts":
        return sobolev_norm(f, spec.t, spec.s)
    if spec.kind == "mixed_lebesgue":
        return mixed_norm(f, MixedNormSpec(spec.p, spec.q1, spec.order))
    return _besov(f, spec)


def pairing(f, g, spec: PairingSpec) -> float:
    """Weighted inner product ``<f, g>_{alpha, beta}`` (summed over vector components)."""
    if f.grid != g.grid:
        raise ValueError("pairing requires fields on a shared grid")
    grid = f.grid
    w = spectral_weight(grid, spec.alpha, spec.beta, spec.weight)
    if isinstance(f, VectorField):
        prod = np.sum(f.stacked * np.conj(g.stacked), axis=0)
    else:
        prod = f.coeffs * np.conj(g.coeffs)
    return float(grid.volume * np.real(np.sum(w * prod)))


def interp_half_norm(f, s: float) -> float:
    return sobolev_norm(f, 0.5, s)


def interpolation_ratio(f, s: float) -> float:
    """``||f||_{1/2,s} / (||f||_{0,s}^{1/2} ||nabla_h f||_{0,s}^{1/2})``.

    Returns 0 for the zero field and ``inf`` when ``nabla_h f`` vanishes but
    ``f`` does not.
    """
    top = interp_half_norm(f, s)
    if top == 0:
        return 0.0
    bot = np.sqrt(sobolev_norm(f, 0.0, s) * gradh_norm(f, 0.0, s))
    return float(top / bot) if bot > 0 else float("inf")


def sobolev_equivalence_constants(grid) -> tuple[float, float]:
    """Bounds ``[c*, C*]`` of ``||f||_{0,0} / ||f||_{L^2}`` over all fields on the grid."""
    fb = bank_for(grid)
    w = block_weight_v(fb, 0.0)
    return float(np.sqrt(w.min())), float(np.sqrt(w.max()))
