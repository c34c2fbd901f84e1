"""
Paired runs and the difference functionals behind uniqueness.

Two trajectories ``(u, rho)`` and ``(v, eta)`` are stepped in lockstep and
their differences ``w = u - v``, ``theta = rho - eta`` are measured in the
negative-index norms ``||w||_{0,s-1}`` and ``||theta||_{0,-s}``.  Time
derivatives of the quadratic functionals are evaluated from the
semi-discrete right-hand side, so no finite differencing enters the audits.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .grid import SpectralField, VectorField
from .inequalities import prop1_bounds, prop1_terms
from .norms import gradh_norm, sobolev_norm, spectral_weight
from .osgood import (
    QUAD_FLOOR,
    QUAD_TOL,
    M_double_log_closed,
    OsgoodProblem,
    mu_double_log,
    osgood_bound,
)
from .solver import AdmissionError, Integrator, SolverConfig, State, admission, step_schedule

E_MINUS_2 = math.exp(-2.0)


@dataclass(frozen=True, eq=False)
class PairRun:
    cfg: SolverConfig
    init_a: State
    init_b: State
    perturbation: str = ""
    compute_L: bool = True
    keep_trajectories: bool = False

    def __post_init__(self):
        if self.init_a.grid != self.init_b.grid or self.init_a.grid != self.cfg.grid:
            raise ValueError("both initial states must live on the configured grid")
        if self.cfg.dt == "auto":
            raise ValueError("paired runs need a fixed dt so the two trajectories share instants")


SERIES_COLUMNS = (
    "t", "w_sq", "theta_sq", "gradh_w_sq", "gradh_theta_sq", "y", "dy", "chi", "dchi",
    "f_gronwall", "f_osgood",
    "L1", "L2", "L3", "L4", "L5", "L6", "L7", "L8", "L9",
)


@dataclass
class DifferenceSeries:
    """Time series of the difference functionals at the record instants.

    ``f_gronwall`` and ``f_osgood`` are the time weights without the
    constant ``C``.  ``L`` has one row of nine signed values per instant
    (NaN when not computed).
    """

    s: float
    t: np.ndarray
    w_sq: np.ndarray
    theta_sq: np.ndarray
    gradh_w_sq: np.ndarray
    gradh_theta_sq: np.ndarray
    dy: np.ndarray
    chi: np.ndarray
    dchi: np.ndarray
    f_gronwall: np.ndarray
    f_osgood: np.ndarray
    L: np.ndarray
    flagged: bool = False
    note: str = ""
    trajectories: list = field(default_factory=list)
    grid: object = None

    @property
    def y(self) -> np.ndarray:
        return self.w_sq + self.theta_sq

    @property
    def G(self) -> np.ndarray:
        return self.gradh_w_sq + self.gradh_theta_sq

    def __len__(self):
        return self.t.size

    def window(self, n: int) -> "DifferenceSeries":
        """Prefix of the first ``n`` instants."""
        kw = {k: getattr(self, k)[:n] for k in (
            "t", "w_sq", "theta_sq", "gradh_w_sq", "gradh_theta_sq", "dy", "chi", "dchi",
            "f_gronwall", "f_osgood", "L")}
        return DifferenceSeries(self.s, flagged=self.flagged, note=self.note,
                                trajectories=self.trajectories[:n], grid=self.grid, **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(SERIES_COLUMNS)
        y = self.y
        for i in range(len(self)):
            row = [self.t[i], self.w_sq[i], self.theta_sq[i], self.gradh_w_sq[i], self.gradh_theta_sq[i],
                   y[i], self.dy[i], self.chi[i], self.dchi[i], self.f_gronwall[i], self.f_osgood[i],
                   *self.L[i]]
            wr.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


# ------------------------------------------------------------ time weights


def f_gronwall(u: VectorField, v: VectorField, eta: SpectralField, s: float) -> float:
    """``||u||_{1/2,s}^4 + ||u||_{0,s}^2 + ||grad_h v||_{0,s}^2 + ||v||_{1/2,s}^{4/3}
    + ||grad_h eta||_{0,s}^2 + ||eta||_{1/2,s}^4 + 1``."""
    n, gh = sobolev_norm, gradh_norm
    return (n(u, 0.5, s) ** 4 + n(u, 0.0, s) ** 2 + gh(v, 0.0, s) ** 2 + n(v, 0.5, s) ** (4.0 / 3.0)
            + gh(eta, 0.0, s) ** 2 + n(eta, 0.5, s) ** 4 + 1.0)


def f_osgood(u: VectorField, v: VectorField, w: VectorField) -> float:
    """``(1 + sum ||.||_{1,1/2}^2)(1 + sum ||grad_h .||_{1,1/2}^2)`` over ``u, v, w``."""
    a = 1.0 + sum(sobolev_norm(x, 1.0, 0.5) ** 2 for x in (u, v, w))
    b = 1.0 + sum(gradh_norm(x, 1.0, 0.5) ** 2 for x in (u, v, w))
    return a * b


def _weighted_rate(grid, D: np.ndarray, dD: np.ndarray, bw: float, bt: float) -> float:
    """``d/dt (||D_u||_{0,bw}^2 + ||D_rho||_{0,bt}^2)`` given the difference and its rate."""
    Ww = spectral_weight(grid, 0.0, bw)
    Wt = spectral_weight(grid, 0.0, bt)
    re = np.real(np.conj(D) * dD)
    return float(2.0 * grid.volume * (np.sum(Ww * re[:3]) + np.sum(Wt * re[3])))


def _series_row(integ: Integrator, Xa: np.ndarray, Xb: np.ndarray, s: float, compute_L: bool):
    g = integ.grid
    sa = State.from_stacked(g, 0.0, Xa)
    sb = State.from_stacked(g, 0.0, Xb)
    D = Xa - Xb
    w = VectorField.from_arrays(g, D[:3], divergence_free=True)
    th = SpectralField(g, D[3])
    kh2 = g.kh2
    Ra = -kh2 * Xa + integ.rhs(Xa)
    Rb = -kh2 * Xb + integ.rhs(Xb)
    dD = Ra - Rb
    row = {
        "w_sq": sobolev_norm(w, 0.0, s - 1.0) ** 2,
        "theta_sq": sobolev_norm(th, 0.0, -s) ** 2,
        "gradh_w_sq": gradh_norm(w, 0.0, s - 1.0) ** 2,
        "gradh_theta_sq": gradh_norm(th, 0.0, -s) ** 2,
        "dy": _weighted_rate(g, D, dD, s - 1.0, -s),
        "chi": sobolev_norm(w, 0.0, -0.5) ** 2 + sobolev_norm(th, 0.0, -0.5) ** 2,
        "dchi": _weighted_rate(g, D, dD, -0.5, -0.5),
        "f_gronwall": f_gronwall(sa.u, sb.u, sb.rho, s),
        "f_osgood": f_osgood(sa.u, sb.u, w),
    }
    if compute_L and not np.all(D == 0):
        row["L"] = prop1_terms(sa.u, sb.u, w, sb.rho, th, s)
    else:
        row["L"] = [0.0] * 9 if compute_L else [float("nan")] * 9
    return row


def run_pair(pr: PairRun) -> DifferenceSeries:
    """Step both trajectories with identical dt and record the difference series."""
    cfg = pr.cfg
    for name, st in (("init_a", pr.init_a), ("init_b", pr.init_b)):
        adm = admission(st, cfg)
        if cfg.certified and not adm["admitted"]:
            raise AdmissionError(f"{name}: admission condition violated: " + adm["text"])
    integ = Integrator(cfg)
    Xa = integ.project(pr.init_a.stacked())
    Xb = integ.project(pr.init_b.stacked())
    nsteps, dt = step_schedule(cfg, pr.init_a.t)
    s = cfg.s_index
    rows, times, trajs = [], [], []
    flagged, note = False, ""

    def record(t):
        r = _series_row(integ, Xa, Xb, s, pr.compute_L)
        rows.append(r)
        times.append(t)
        if pr.keep_trajectories:
            trajs.append((t, Xa.copy(), Xb.copy()))

    t0 = pr.init_a.t
    record(t0)
    for i in range(1, nsteps + 1):
        Na = integ.step(Xa, dt)
        Nb = integ.step(Xb, dt)
        if not (np.all(np.isfinite(Na)) and np.all(np.isfinite(Nb))):
            flagged = True
            note = f"trajectory became non-finite at t={t0 + i * dt:.6g}; series truncated"
            break
        Xa, Xb = Na, Nb
        if i % cfg.record_every == 0 or i == nsteps:
            record(t0 + i * dt)
    col = lambda k: np.array([r[k] for r in rows], dtype=float)  # noqa: E731
    return DifferenceSeries(
        s=s, t=np.array(times), w_sq=col("w_sq"), theta_sq=col("theta_sq"),
        gradh_w_sq=col("gradh_w_sq"), gradh_theta_sq=col("gradh_theta_sq"), dy=col("dy"),
        chi=col("chi"), dchi=col("dchi"), f_gronwall=col("f_gronwall"), f_osgood=col("f_osgood"),
        L=np.array([r["L"] for r in rows], dtype=float), flagged=flagged, note=note, trajectories=trajs,
        grid=cfg.grid,
    )


# ------------------------------------------------------------------ audits


def fit_gronwall_constant(ds: DifferenceSeries) -> float:
    """Smallest ``C >= 0`` with ``sum |L_i| <= G/2 + C f y`` at every instant."""
    if np.any(np.isnan(ds.L)):
        raise ValueError("series was recorded without the L_i terms")
    lhs = np.sum(np.abs(ds.L), axis=1) - 0.5 * ds.G
    den = ds.f_gronwall * ds.y
    pos = den > 0
    if not np.any(pos):
        return 0.0
    return float(max(0.0, np.max(lhs[pos] / den[pos])))


def gronwall_audit(ds: DifferenceSeries, s: float, C: float | None = None, rtol: float = 1e-6) -> dict:
    """Gronwall closure for ``s`` in (1/2, 1].

    The weighted inequality ``sum |L_i| <= G/2 + C f y`` implies
    ``y' <= 2 C f y``, so the envelope is ``y(0) exp(2 C int f)``.  When
    ``C`` is omitted it is fitted on this series.
    """
    if not 0.5 < s <= 1.0:
        raise ValueError(f"s must lie in (1/2, 1], got {s}")
    if abs(s - ds.s) > 1e-12:
        raise ValueError(f"series was recorded at s={ds.s}, audit requested s={s}")
    fitted = C is None
    C_used = fit_gronwall_constant(ds) if fitted else float(C)
    y = ds.y
    if np.all(y == 0) and np.all(ds.L == 0):
        z = np.zeros_like(y)
        return {"certified": True, "C": C_used, "fitted": fitted, "margin_curve": z.tolist(),
                "weighted_margin": z.tolist(), "envelope": z.tolist(), "window": len(ds)}
    F = np.concatenate([[0.0], integrate.cumulative_trapezoid(ds.f_gronwall, ds.t)])
    env = y[0] * np.exp(2.0 * C_used * F)
    margin = env * (1.0 + rtol) - y
    weighted = 0.5 * ds.G + C_used * ds.f_gronwall * y - np.sum(np.abs(ds.L), axis=1)
    scale = 0.5 * ds.G + C_used * ds.f_gronwall * y
    weighted_ok = bool(np.all(weighted >= -rtol * scale))
    env_ok = bool(np.all(margin >= 0))
    return {
        "certified": env_ok and weighted_ok,
        "envelope_certified": env_ok,
        "weighted_certified": weighted_ok,
        "C": C_used,
        "fitted": fitted,
        "margin_curve": margin.tolist(),
        "weighted_margin": weighted.tolist(),
        "envelope": env.tolist(),
        "window": len(ds),
        "flagged": ds.flagged,
    }


def energy_identity_defect(ds: DifferenceSeries) -> np.ndarray:
    """``y'/2 + G - (-L1 - ... - L8 + L9)`` at each instant (zero in exact arithmetic)."""
    L = ds.L
    rhs = -np.sum(L[:, :8], axis=1) + L[:, 8]
    return 0.5 * ds.dy + ds.G - rhs


def osgood_window(chi: np.ndarray) -> int:
    """Length of the initial run of instants with ``chi <= e^-2``."""
    bad = np.nonzero(chi > E_MINUS_2)[0]
    return int(bad[0]) if bad.size else int(chi.size)


def fit_osgood_constant(ds: DifferenceSeries) -> float:
    """Smallest ``C >= 0`` with ``dchi/dt <= C f mu(chi)`` at every instant."""
    chi = ds.chi
    pos = (chi > 0) & (ds.f_osgood > 0)
    if not np.any(pos):
        return 0.0
    r = ds.dchi[pos] / (ds.f_osgood[pos] * mu_double_log(chi[pos]))
    return float(max(0.0, np.max(r)))


def osgood_audit(ds: DifferenceSeries, C: float | None = None, gamma=None, closed_form: bool = True) -> dict:
    """Integrated double-log Osgood bound on ``chi``.

    ``gamma`` optionally replaces the tabulated ``C f`` by a callable of
    time (used for manufactured series).  The window is cut where ``chi``
    first exceeds ``e^-2``.
    """
    n = osgood_window(ds.chi)
    note = "" if n == len(ds) else f"window shortened to t <= {ds.t[n - 1]:.6g} (chi exceeds e^-2)" if n else \
        "chi exceeds e^-2 at the first instant"
    if n == 0:
        return {"certified": False, "window": 0, "note": note, "C": C}
    chi = ds.chi[:n]
    t = ds.t[:n]
    fitted = C is None and gamma is None
    C_used = fit_osgood_constant(ds.window(n)) if fitted else (C if C is not None else 1.0)
    if chi[0] == 0:
        prob = OsgoodProblem(0.0, (t, C_used * ds.f_osgood[:n]), mu_double_log, E_MINUS_2, t[0], t[-1])
        res = osgood_bound(prob, chi, t)
        return {"certified": res["certified"], "window": n, "note": note, "C": C_used, "mode": "zero",
                "margin_curve": []}
    g_arg = gamma if gamma is not None else (t, C_used * ds.f_osgood[:n])
    prob = OsgoodProblem(float(chi[0]), g_arg, mu_double_log, E_MINUS_2, t[0], t[-1])
    if closed_form:
        Mg = M_double_log_closed(np.maximum(chi, QUAD_FLOOR), E_MINUS_2)
        Mc = float(M_double_log_closed(chi[0], E_MINUS_2))
        margin = prob.gamma_integral(t) - (Mc - Mg)
        ok = bool(np.all(margin >= -QUAD_TOL))
        res = {"certified": ok, "margin": margin.tolist()}
    else:
        res = osgood_bound(prob, chi, t)
    return {"certified": res["certified"], "window": n, "note": note, "C": C_used, "fitted": fitted,
            "mode": "comparison", "margin_curve": res["margin"]}


def manufactured_chi(t: np.ndarray, chi0: float, C: float, F: np.ndarray) -> np.ndarray:
    """Solution of ``chi' = C f mu(chi)`` with ``F = int_0^t f``."""
    return np.exp(1.0 - (1.0 - math.log(chi0)) ** np.exp(-C * np.asarray(F)))


def prop1_trace(ds: DifferenceSeries, trajectories=None, s: float | None = None) -> list[dict]:
    """Per-instant ``L_1..L_9``, their bounds and ratios along a paired run."""
    trajs = trajectories if trajectories is not None else ds.trajectories
    s = ds.s if s is None else s
    if not 0.5 < s <= 1.0:
        raise ValueError(f"s must lie in (1/2, 1], got {s}")
    if not trajs:
        raise ValueError("no trajectories recorded; run the pair with keep_trajectories=True")
    out = []
    for t, Xa, Xb in trajs:
        g = ds.grid
        sa = State.from_stacked(g, t, Xa)
        sb = State.from_stacked(g, t, Xb)
        D = Xa - Xb
        w = VectorField.from_arrays(g, D[:3], divergence_free=True)
        th = SpectralField(g, D[3])
        L = prop1_terms(sa.u, sb.u, w, sb.rho, th, s)
        B = prop1_bounds(sa.u, sb.u, w, sb.rho, th, s)
        ratio = [abs(a) / b if b > 0 else (0.0 if a == 0 else float("inf")) for a, b in zip(L, B)]
        out.append({"t": float(t), "L": L, "bounds": B, "ratios": ratio})
    return out

