"""
Randomised numerical checks of the functional inequalities.

An inequality ``A <~ B`` with an unknown constant is checked through the
ratio ``A/B``: it must stay finite over an ensemble and move by at most a
bounded factor under the dyadic rescalings the estimate is invariant to.
Inequalities with explicit constants are checked literally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensembles import EnsembleSpec, digest, map_ensemble, sample_scalar, sample_vector
from .filterbank import _block_multiplier, _hpad_physical, bank_for
from .grid import (
    MixedNormSpec,
    SpectralField,
    VectorField,
    _truncate_axis,
    derivative,
    dyadic_rescale_h,
    dyadic_rescale_v,
    inverse,
    mixed_norm,
    mixed_norm_physical,
    padded_physical,
    product,
    product_physical,
)
from .norms import PairingSpec, gradh_norm, horizontal_sobolev_norm, pairing, sobolev_norm

LITERAL_TOL = 1e-8


@dataclass
class RatioReport:
    """Worst-case ratio of an inequality over an ensemble."""

    inequality_id: str
    lhs: float = 0.0
    rhs_without_constant: float = 0.0
    ratio: float = 0.0
    worst_case_input_digest: str = ""
    n_samples: int = 0
    n_excluded: int = 0
    extras: dict = field(default_factory=dict)

    def absorb(self, lhs: float, rhs: float, dig: str = "") -> None:
        """Add one sample; samples with ``rhs <= 0`` are excluded."""
        if not rhs > 0 or not np.isfinite(rhs):
            self.n_excluded += 1
            return
        self.n_samples += 1
        r = lhs / rhs
        if r > self.ratio or self.n_samples == 1:
            self.ratio, self.lhs, self.rhs_without_constant = float(r), float(lhs), float(rhs)
            self.worst_case_input_digest = dig

    def merge(self, other: "RatioReport") -> "RatioReport":
        out = RatioReport(self.inequality_id, extras=dict(self.extras))
        best = max((self, other), key=lambda r: (r.n_samples > 0, r.ratio))
        out.lhs, out.rhs_without_constant, out.ratio = best.lhs, best.rhs_without_constant, best.ratio
        out.worst_case_input_digest = best.worst_case_input_digest
        out.n_samples = self.n_samples + other.n_samples
        out.n_excluded = self.n_excluded + other.n_excluded
        return out

    def to_dict(self) -> dict:
        return {
            "inequality_id": self.inequality_id,
            "lhs": self.lhs,
            "rhs_without_constant": self.rhs_without_constant,
            "ratio": self.ratio,
            "worst_case_input_digest": self.worst_case_input_digest,
            "n_samples": self.n_samples,
            "n_excluded": self.n_excluded,
            "extras": _jsonable(self.extras),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def reduce_reports(reports: list, inequality_id: str) -> RatioReport:
    """Fixed-order max-reduction of per-sample reports."""
    out = RatioReport(inequality_id)
    for r in reports:
        out = out.merge(r)
    out.inequality_id = inequality_id
    return out


def band_stable(values, factor: float, window: int = 3) -> bool:
    """True when every ``window`` consecutive finite positive values lie within ``factor``."""
    v = [x for x in values if np.isfinite(x) and x > 0]
    for i in range(len(v) - window + 1):
        w = v[i : i + window]
        if max(w) / min(w) > factor:
            return False
    return True


def log2_slope(qs, values) -> float:
    qs = np.asarray(qs, dtype=float)
    y = np.log2(np.asarray(values, dtype=float))
    return float(np.polyfit(qs, y, 1)[0])


# -------------------------------------------------------------- Bernstein


def _deriv_n(sf, axis, n):
    for _ in range(n):
        sf = derivative(sf, axis)
    return sf


def bernstein_block_ratio(f: SpectralField, q: int, direction: str, deriv_order: int,
                          p=(2, 2), qv=(2, 2), reverse: bool = False) -> tuple[float, float]:
    """(lhs, rhs) of the Bernstein inequality for block ``q`` of ``f``.

    ``p = (p1, p2)`` horizontal and ``qv = (q1, q2)`` vertical exponents.
    Forward: ``||d^n a||_{p1,q1} <~ 2^{q(n + gap)} ||a||_{.,.}``.  Reverse
    (ring case): ``||a||_{p1,q1} <~ 2^{-qn} ||d^n a||_{p1,q1}``.
    """
    p1, p2 = p
    q1, q2 = qv
    if p2 > p1 or q2 > q1:
        raise ValueError(f"need p2 <= p1 and q2 <= q1, got p={p}, q={qv}")
    fb = bank_for(f.grid)
    if direction == "v":
        a = fb.delta_v(q, f)
        axes = (3,)
    elif direction == "h":
        a = fb.delta_h(q, f)
        axes = (1, 2)
    else:
        raise ValueError(f"direction must be 'h' or 'v', got {direction!r}")
    g = f.grid
    big = MixedNormSpec(p1, q1)
    da = [inverse(_deriv_n(a, ax, deriv_order), check=False) for ax in axes]
    dnorm = max(mixed_norm_physical(x, g, big) for x in da)
    if reverse:
        lhs = mixed_norm(a, big)
        return lhs, 2.0 ** (-q * deriv_order) * dnorm
    if direction == "v":
        gap = 1.0 / q2 - 1.0 / q1
        rhs = 2.0 ** (q * (deriv_order + gap)) * mixed_norm(a, MixedNormSpec(p1, q2))
    else:
        gap = 2.0 * (1.0 / p2 - 1.0 / p1)
        rhs = 2.0 ** (q * (deriv_order + gap)) * mixed_norm(a, MixedNormSpec(p2, q1))
    return dnorm, rhs


def check_bernstein(ens: EnsembleSpec, direction: str = "v", p=(2, 2), qv=(2, 2), deriv_order: int = 1,
                    reverse: bool = False, threads: int = 1) -> RatioReport:
    """Max Bernstein ratio over the ensemble and the fully resolved ring blocks.

    ``extras['per_block']`` holds the per-block maxima and ``extras['stable']``
    whether they stay within a factor 4 over every three consecutive blocks.
    """
    fb = bank_for(ens.grid)
    top = fb.q_resolved_v() if direction == "v" else fb.q_resolved_h()
    blocks = list(range(0, top + 1))
    skipped = [q for q in range(top + 1, (fb.q_max_v if direction == "v" else fb.q_max_h) + 1)]

    def one(i):
        f = sample_scalar(ens, i)
        d = digest(f)
        reps = {}
        for q in blocks:
            r = RatioReport("bernstein")
            r.absorb(*bernstein_block_ratio(f, q, direction, deriv_order, p, qv, reverse), d)
            reps[q] = r
        return reps

    per = map_ensemble(one, ens.count, threads)
    out = RatioReport(f"bernstein_{direction}")
    per_block = {}
    for q in blocks:
        red = reduce_reports([p_[q] for p_ in per], "bernstein")
        per_block[q] = red.ratio
        out = out.merge(red)
    out.inequality_id = f"bernstein_{direction}"
    out.extras = {
        "per_block": per_block,
        "stable": band_stable([per_block[q] for q in blocks], 4.0),
        "skipped_blocks": skipped,
        "reverse": reverse,
        "deriv_order": deriv_order,
    }
    return out


def bernstein_slope(ens: EnsembleSpec, blocks=None, threads: int = 1) -> dict:
    """Fitted log2-slope of ``||d3 Delta_q f|| / ||Delta_q f||`` against q."""
    fb = bank_for(ens.grid)
    if blocks is None:
        blocks = list(range(0, fb.q_resolved_v() + 1))

    def one(i):
        f = sample_scalar(ens, i)
        out = []
        for q in blocks:
            a = fb.delta_v(q, f)
            out.append(derivative(a, 3).l2_norm() / a.l2_norm())
        return out

    vals = np.array(map_ensemble(one, ens.count, threads))
    mean_log = np.mean(np.log2(vals), axis=0)
    slope = float(np.polyfit(np.asarray(blocks, float), mean_log, 1)[0])
    per_sample = [float(np.polyfit(np.asarray(blocks, float), np.log2(v), 1)[0]) for v in vals]
    return {"slope": slope, "blocks": list(blocks), "mean_log2_ratio": mean_log.tolist(),
            "slope_min": min(per_sample), "slope_max": max(per_sample)}


# ----------------------------------------------------------- product rule


def product_rule_constraints(sigma, sigma_p, s, s0) -> None:
    checks = [
        (sigma < 1, "sigma < 1"),
        (sigma_p < 1, "sigma' < 1"),
        (sigma + sigma_p > 0, "sigma + sigma' > 0"),
        (s0 > 0.5, "s0 > 1/2"),
        (s <= s0, "s <= s0"),
        (s + s0 >= 0, "s + s0 >= 0"),
    ]
    for ok, name in checks:
        if not ok:
            raise ValueError(
                f"product rule hypothesis violated: {name} "
                f"(sigma={sigma}, sigma'={sigma_p}, s={s}, s0={s0})"
            )


def product_rule_ratio(a: SpectralField, b: SpectralField, sigma, sigma_p, s, s0) -> tuple[float, float]:
    ab = product(a, b)
    lhs = sobolev_norm(ab, sigma + sigma_p - 1.0, s)
    rhs = sobolev_norm(a, sigma, s) * sobolev_norm(b, sigma_p, s0)
    return lhs, rhs


def check_product_rule(ens: EnsembleSpec, sigma: float, sigma_p: float, s: float, s0: float,
                       shift: bool = False, threads: int = 1) -> RatioReport:
    """Max of ``||ab||_{s+s'-1,s} / (||a||_{sigma,s} ||b||_{sigma',s0})``.

    With ``shift`` both inputs are rescaled vertically by one dyadic step
    (``x3 -> 2 x3``) before the product; the ensemble needs ``vband <= Nv/4``.
    """
    product_rule_constraints(sigma, sigma_p, s, s0)

    def one(i):
        a = sample_scalar(ens, i, 0)
        b = sample_scalar(ens, i, 1)
        if shift:
            a, b = dyadic_rescale_v(a), dyadic_rescale_v(b)
        r = RatioReport("product_rule")
        r.absorb(*product_rule_ratio(a, b, sigma, sigma_p, s, s0), digest(a, b))
        return r

    out = reduce_reports(map_ensemble(one, ens.count, threads), "product_rule")
    out.extras = {"sigma": sigma, "sigma_p": sigma_p, "s": s, "s0": s0, "shift": shift}
    return out


# ------------------------------------------------------------- commutator


def commutator_coeffs(q: int, a: SpectralField, f: SpectralField) -> np.ndarray:
    """Coefficients of ``[Delta_q^v, a] f`` on an extended vertical axis (2 Nv modes).

    Computed as ``sum_m a_m(x_h) f_eta(x_h) (phi_q(eta + m) - phi_q(eta))``
    so the x3-independent part of ``a`` contributes exactly zero.
    """
    g = a.grid
    Nh, Nv = g.Nh, g.Nv
    M = 2 * Nv
    A = _hpad_physical(a.coeffs, Nh)
    F = _hpad_physical(f.coeffs, Nh)
    iv = np.fft.fftfreq(Nv, 1.0 / Nv).astype(int)
    phi_eta = _block_multiplier(np.abs(iv) / g.Lv, q)
    out = np.zeros(A.shape[:2] + (M,), complex)
    for ia in np.nonzero(np.any(A != 0, axis=(0, 1)))[0]:
        m = iv[ia]
        dst = iv + m
        w = _block_multiplier(np.abs(dst) / g.Lv, q) - phi_eta
        if not np.any(w):
            continue
        out[:, :, dst % M] += A[:, :, ia : ia + 1] * F * w[None, None, :]
    mm = 2 * Nh
    c = np.fft.fft2(out, axes=(0, 1)) / (mm * mm)
    return _truncate_axis(_truncate_axis(c, 0, Nh, mm), 1, Nh, mm)


def commutator_direct(q: int, a: SpectralField, f: SpectralField) -> SpectralField:
    """``Delta_q(a f) - a Delta_q f`` with on-grid alias-free products (for cross-checks)."""
    fb = bank_for(a.grid)
    return fb.delta_v(q, product(a, f)) - product(a, fb.delta_v(q, f))


def _ext_h_sobolev(c: np.ndarray, grid, t: float) -> float:
    w = (1.0 + grid.kh2[:, :, :1]) ** t
    return float(np.sqrt(grid.volume * np.sum(w * np.abs(c) ** 2)))


def commutator_terms(q: int, u: VectorField, f: SpectralField) -> tuple[float, float]:
    """(lhs, rhs) for block q with ``a = S_{q-1} u^3``."""
    fb = bank_for(u.grid)
    a = fb.s_v(q - 1, u[2])
    lhs = _ext_h_sobolev(commutator_coeffs(q, a, f), u.grid, -0.5)
    grads = []
    for comp in range(3):
        sc = fb.s_v(q - 1, u[comp])
        for ax in (1, 2):
            grads.append(inverse(derivative(sc, ax), check=False))
    mag = np.sqrt(sum(x**2 for x in grads))
    gnorm = mixed_norm_physical(mag, u.grid, MixedNormSpec(2, np.inf, "v_outer"))
    rhs = 2.0 ** (-q) * gnorm * horizontal_sobolev_norm(f, 0.5)
    return lhs, rhs


def check_commutator(ens: EnsembleSpec, q_range=None, u_vband: int = 2, threads: int = 1) -> RatioReport:
    """Commutator ratio and the log2-slope of its size against q.

    ``f`` is drawn from ``ens``; ``u`` is a solenoidal field from the same seed
    with vertical modes below ``u_vband``.
    """
    fb = bank_for(ens.grid)
    if q_range is None:
        q_range = range(1, fb.q_max_v + 1)
    qs = list(q_range)
    uspec = EnsembleSpec(ens.count, "white", ens.seed, ens.grid, vband=u_vband)

    def one(i):
        f = sample_scalar(ens, i, 0)
        u = sample_vector(uspec, i, 1)
        d = digest(u, f)
        rows = []
        for q in qs:
            rows.append(commutator_terms(q, u, f))
        return d, rows

    res = map_ensemble(one, ens.count, threads)
    out = RatioReport("commutator")
    lhs_tab = np.array([[r[0] for r in rows] for _, rows in res])
    for d, rows in res:
        for lhs, rhs in rows:
            out.absorb(lhs, rhs, d)
    # blocks where some sample has a vanishing commutator carry no slope information
    used = [k for k in range(len(qs)) if np.all(lhs_tab[:, k] > 0)]
    excluded = len(used) < 2
    if excluded:
        slope = float("nan")
    else:
        geo = np.exp(np.mean(np.log(lhs_tab[:, used]), axis=0))
        slope = log2_slope([qs[k] for k in used], geo)
    out.extras = {"q_range": qs, "q_used": [qs[k] for k in used], "slope": slope,
                  "mean_lhs": np.mean(lhs_tab, axis=0).tolist(), "slope_excluded": excluded}
    return out


# ------------------------------------------- difference-system pairing terms


def _padded(f):
    return [padded_physical(c) for c in f] if isinstance(f, VectorField) else [padded_physical(f)]


def advect(a: VectorField, b, dirs) -> list:
    """``sum_{d in dirs} a^d  d_d b`` per component of b (alias-free)."""
    g = a.grid
    A = {d: padded_physical(a[d - 1]) for d in dirs}
    comps = list(b) if isinstance(b, VectorField) else [b]
    out = []
    for c in comps:
        acc = 0.0
        for d in dirs:
            acc = acc + A[d] * padded_physical(derivative(c, d))
        out.append(product_physical([acc], g))
    return out


def _pair_list(xs, ys, beta, weight):
    spec = PairingSpec(0.0, beta, weight)
    return float(sum(pairing(x, y, spec) for x, y in zip(xs, ys)))


def prop1_terms(u: VectorField, v: VectorField, w: VectorField, eta: SpectralField,
                theta: SpectralField, s: float, weight: str = "block") -> list[float]:
    """Signed values of ``L_1 .. L_9`` by block summation."""
    H = (1, 2)
    V = (3,)
    wl = list(w)
    b1, b2 = s - 1.0, -s
    return [
        _pair_list(advect(u, w, H), wl, b1, weight),
        _pair_list(advect(u, w, V), wl, b1, weight),
        _pair_list(advect(w, v, H), wl, b1, weight),
        _pair_list(advect(w, v, V), wl, b1, weight),
        _pair_list(advect(u, theta, H), [theta], b2, weight),
        _pair_list(advect(u, theta, V), [theta], b2, weight),
        _pair_list(advect(w, eta, H), [theta], b2, weight),
        _pair_list(advect(w, eta, V), [theta], b2, weight),
        pairing(theta, w[2], PairingSpec(0.0, b1, weight)),
    ]


def prop1_bounds(u, v, w, eta, theta, s: float) -> list[float]:
    """Right-hand sides (without constants) of the nine estimates."""
    n = sobolev_norm
    gh = gradh_norm
    w_h = n(w, 0.5, s - 1)
    w_0 = n(w, 0.0, s - 1)
    gw = gh(w, 0.0, s - 1)
    th_h = n(theta, 0.5, -s)
    return [
        n(u, 0.5, s) * gw * w_h,
        gh(u, 0.0, s) * w_h**2,
        gh(v, 0.0, s) * w_h**2,
        n(v, 0.5, s) * (w_0 + gw) * w_h,
        n(u, 0.5, s) * gh(theta, 0.0, -s) * th_h,
        gh(u, 0.0, s) * th_h**2,
        gh(eta, 0.0, 1 - s) * w_h * th_h,
        n(eta, 0.5, 1 - s) * (w_0 + gw) * th_h,
        n(theta, 0.0, -s) * (gw + w_0),
    ]


def _check_s(s):
    if not 0.5 < s <= 1.0:
        raise ValueError(f"s must lie in (1/2, 1], got {s}")


def check_prop1_term(i: int, u, v, w, rho, eta, theta, s: float, weight: str = "block") -> RatioReport:
    """Ratio ``|L_i| / bound_i`` on one sextet of fields."""
    _check_s(s)
    if not 1 <= i <= 9:
        raise ValueError(f"term index must be in 1..9, got {i}")
    for name, f in (("u", u), ("v", v), ("w", w)):
        if not f.divergence_free:
            raise ValueError(f"{name} must be flagged divergence-free")
    L = prop1_terms(u, v, w, eta, theta, s, weight)[i - 1]
    B = prop1_bounds(u, v, w, eta, theta, s)[i - 1]
    r = RatioReport(f"prop1_L{i}")
    if B > 0:
        r.absorb(abs(L), B, digest(u, v, w, eta, theta))
    else:
        r.lhs = abs(L)
        r.n_excluded = 1
    r.extras = {"signed_value": L}
    return r


def sample_sextet(ens: EnsembleSpec, i: int):
    u = sample_vector(ens, i, 0)
    v = sample_vector(ens, i, 1)
    w = sample_vector(ens, i, 2)
    rho = sample_scalar(ens, i, 3, mean_free=True)
    eta = sample_scalar(ens, i, 4, mean_free=True)
    theta = sample_scalar(ens, i, 5, mean_free=True)
    return u, v, w, rho, eta, theta


def check_prop1_ensemble(ens: EnsembleSpec, s: float, threads: int = 1) -> list[RatioReport]:
    _check_s(s)

    def one(k):
        u, v, w, rho, eta, theta = sample_sextet(ens, k)
        L = prop1_terms(u, v, w, eta, theta, s)
        B = prop1_bounds(u, v, w, eta, theta, s)
        d = digest(u, v, w, eta, theta)
        reps = []
        for i in range(9):
            r = RatioReport(f"prop1_L{i + 1}")
            r.absorb(abs(L[i]), B[i], d)
            reps.append(r)
        return reps

    per = map_ensemble(one, ens.count, threads)
    return [reduce_reports([p[i] for p in per], f"prop1_L{i + 1}") for i in range(9)]


# ------------------------------------------------- energy pairing estimates


def transport_pairing_terms(a: VectorField, b, s: float, delta: float) -> tuple[float, float]:
    conv = advect(a, b, (1, 2, 3))
    bl = list(b) if isinstance(b, VectorField) else [b]
    lhs = abs(_pair_list(conv, bl, delta, "block"))
    bh = sobolev_norm(b, 0.5, delta)
    rhs = bh * (sobolev_norm(a, 1.0, s) * bh + sobolev_norm(a, 0.5, s) * sobolev_norm(b, 1.0, delta))
    return lhs, rhs


def buoyancy_pairing_terms(rho: SpectralField, a: VectorField, s: float) -> tuple[float, float]:
    lhs = abs(pairing(rho, a[2], PairingSpec(0.0, s)))
    rn = rho.l2_norm()
    rhs = 0.25 * rn * a.l2_norm() + rn * gradh_norm(a, 0.0, s)
    return lhs, rhs


def check_lemma5(a: VectorField, b, s: float, delta: float, rho: SpectralField | None = None) -> dict:
    """Both estimates of the lemma on one input.

    Returns RatioReports ``transport`` (the ``<a.grad b, b>_{0,delta}`` estimate) and,
    if ``rho`` is given, ``buoyancy`` (``|<rho, a^3>_{0,s}|``); the latter
    carries ``extras['holds']``, the literal inequality with constants 1/4 and
    1 at relative tolerance 1e-8.
    """
    _check_s(s)
    if not 0.0 <= delta <= s:
        raise ValueError(f"delta must lie in [0, s]; got delta={delta}, s={s}")
    if not a.divergence_free:
        raise ValueError("a must be flagged divergence-free")
    out = {}
    r = RatioReport("lemma5_transport")
    lhs, rhs = transport_pairing_terms(a, b, s, delta)
    if rhs > 0:
        r.absorb(lhs, rhs, digest(a, b))
    out["transport"] = r
    if rho is not None:
        r = RatioReport("lemma5_buoyancy")
        lhs, rhs = buoyancy_pairing_terms(rho, a, s)
        r.absorb(lhs, rhs, digest(rho, a))
        if rhs == 0:
            r.lhs = lhs
        r.extras = {"holds": bool(lhs <= rhs * (1.0 + LITERAL_TOL) + 0.0), "lhs": lhs, "rhs": rhs}
        out["buoyancy"] = r
    return out


def check_lemma5_ensemble(ens: EnsembleSpec, s: float, delta: float, threads: int = 1) -> dict:
    _check_s(s)

    def one(i):
        a = sample_vector(ens, i, 0)
        b = sample_vector(ens, i, 1)
        rho = sample_scalar(ens, i, 2, mean_free=True)
        return check_lemma5(a, b, s, delta, rho)

    res = map_ensemble(one, ens.count, threads)
    e33 = reduce_reports([r["transport"] for r in res], "lemma5_transport")
    e34 = reduce_reports([r["buoyancy"] for r in res], "lemma5_buoyancy")
    violations = [i for i, r in enumerate(res) if not r["buoyancy"].extras["holds"]]
    e34.extras = {"violations": violations, "holds_all": not violations, "max_ratio": e34.ratio}
    return {"transport": e33, "buoyancy": e34}


# ------------------------------------------------------ L4h Linfv embedding


def embedding_terms(a: SpectralField, s: float) -> tuple[float, float, float]:
    """(||a||_{L4h Linfv}, ||a||_{Linfv L4h}, rhs)."""
    x = inverse(a, check=False)
    g = a.grid
    lhs = mixed_norm_physical(x, g, MixedNormSpec(4, np.inf, "h_outer"))
    swapped = mixed_norm_physical(x, g, MixedNormSpec(4, np.inf, "v_outer"))
    rhs = np.sqrt(sobolev_norm(a, 0.0, s) * gradh_norm(a, 0.0, s))
    return lhs, swapped, float(rhs)


def check_embedding_l4h_linfv(ens: EnsembleSpec, s: float, rescale: bool = False, threads: int = 1) -> RatioReport:
    if not s > 0.5:
        raise ValueError(f"embedding needs s > 1/2, got {s}")

    def one(i):
        a = sample_scalar(ens, i)
        if rescale:
            a = dyadic_rescale_h(a)
        lhs, sw, rhs = embedding_terms(a, s)
        r = RatioReport("embedding_l4h_linfv")
        if rhs > 0:
            r.absorb(lhs, rhs, digest(a))
        else:
            r.n_excluded = 1
        return r, sw <= lhs * (1 + 1e-12)

    res = map_ensemble(one, ens.count, threads)
    out = reduce_reports([r for r, _ in res], "embedding_l4h_linfv")
    out.extras = {"minkowski_all": bool(all(ok for _, ok in res)), "rescaled": rescale}
    return out
