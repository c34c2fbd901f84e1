"""
Friedrichs-Galerkin integrator for the Boussinesq system with horizontal
dissipation::

    d_t u + E_n(u.grad u) - Delta_h u + grad P = rho e3,   div u = 0
    d_t rho + E_n(u.grad rho) - Delta_h rho = 0

``E_n`` is the sharp spectral cutoff onto the open ball ``|k| < n``.  The
horizontal Laplacian is integrated exactly by the factor
``exp(-dt |k_h|^2)``; the remaining terms use Heun's two-stage rule, which
makes the scheme second order.  The pressure is removed by the Leray
projection.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import profile_multiplier, shaped_noise
from .grid import (
    AnisoGrid,
    SpectralField,
    VectorField,
    _fftn,
    _ifftn,
    leray_coeffs,
)
from .norms import sobolev_norm


class AdmissionError(ValueError):
    """Initial data fails the smallness condition in certified mode."""


@dataclass(frozen=True)
class SolverConfig:
    grid: AnisoGrid
    n_cutoff: float
    dt: object = 0.01
    t_end: float = 1.0
    s_index: float = 0.75
    delta_index: float = 0.5
    record_every: int = 1
    dealias: bool = True
    nonlinear: bool = True
    buoyancy: bool = True
    certified: bool = False
    C0: float = 0.1
    cfl: float = 0.5
    dt_max: float = 0.05
    dt_recompute: int = 100
    axisymmetric: bool = False
    keep_snapshots: bool = False

    def __post_init__(self):
        if not self.n_cutoff > 0:
            raise ValueError(f"n_cutoff must be positive, got {self.n_cutoff}")
        if self.n_cutoff > self.grid.nyquist_radius:
            raise ValueError(
                f"n_cutoff={self.n_cutoff} exceeds the grid Nyquist radius {self.grid.nyquist_radius}"
            )
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not 0.5 <= self.s_index <= 1.0:
            raise ValueError(f"s_index must lie in [1/2, 1], got {self.s_index}")
        if not 0.0 <= self.delta_index <= self.s_index:
            raise ValueError(f"delta_index must lie in [0, s_index], got {self.delta_index}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "grid"}
        d["grid"] = self.grid.to_dict()
        return d


@dataclass(frozen=True, eq=False)
class State:
    t: float
    u: VectorField
    rho: SpectralField

    @property
    def grid(self) -> AnisoGrid:
        return self.rho.grid

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u.stacked, self.rho.coeffs[None]])

    @classmethod
    def from_stacked(cls, grid: AnisoGrid, t: float, X: np.ndarray) -> "State":
        u = VectorField.from_arrays(grid, X[:3].copy(), divergence_free=True)
        return cls(float(t), u, SpectralField(grid, X[3].copy()))


# ----------------------------------------------------------------- cutoffs


def ball_mask(grid: AnisoGrid, n: float) -> np.ndarray:
    """Indicator of the open ball ``|k| < n`` (Nyquist planes always excluded)."""
    return (grid.k_abs < n) & ~grid.nyquist_mask


def cutoff_En(sf, n: float):
    """Sharp cutoff onto ``|k| < n`` (any real n > 0)."""
    if isinstance(sf, VectorField):
        return VectorField(tuple(cutoff_En(c, n) for c in sf), sf.divergence_free)
    g = sf.grid
    if n > g.k_abs.max():
        return sf
    return SpectralField(g, sf.coeffs * ((g.k_abs < n) | (g.k_abs == 0)))


# --------------------------------------------------------------- dynamics


class Integrator:
    """Array-level stepping kernel shared by single and paired runs."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        g = cfg.grid
        self.grid = g
        self.ball = ball_mask(g, cfg.n_cutoff)
        self.mask = self.ball & g.dealias_mask if cfg.dealias else self.ball
        self.kd = g.kd
        self.kh2 = g.kh2
        self._E_dt = None
        self._E = None

    def factor(self, dt: float) -> np.ndarray:
        if self._E_dt != dt:
            self._E = np.exp(-dt * self.kh2)
            self._E_dt = dt
        return self._E

    def project(self, X: np.ndarray) -> np.ndarray:
        """Apply E_n and the Leray projection to a stacked state."""
        out = X * self.ball
        out[:3] = leray_coeffs(self.grid, out[:3])
        return out

    def rhs(self, X: np.ndarray) -> np.ndarray:
        """Everything except the horizontal Laplacian."""
        cfg = self.cfg
        g = self.grid
        out = np.zeros_like(X)
        if cfg.nonlinear:
            n = g.size
            k1, k2, k3 = self.kd
            ks = (k1, k2, k3)
            U = [np.real(_ifftn(X[i] * n)) for i in range(3)]
            R = np.real(_ifftn(X[3] * n))

            def hat(a):
                return _fftn(a) / n * self.mask

            # divergence form: u.grad f = div(u f) for solenoidal u
            uu = {(i, j): hat(U[i] * U[j]) for i in range(3) for j in range(i, 3)}
            for i in range(3):
                out[i] = -sum(1j * ks[j] * uu[min(i, j), max(i, j)] for j in range(3))
            out[3] = -sum(1j * ks[j] * hat(U[j] * R) for j in range(3))
        if cfg.buoyancy:
            out[2] = out[2] + X[3]
        out[:3] = leray_coeffs(g, out[:3])
        return out * self.ball

    def step(self, X: np.ndarray, dt: float) -> np.ndarray:
        """One integrating-factor Heun step."""
        E = self.factor(dt)
        N0 = self.rhs(X)
        X1 = E * (X + dt * N0)
        N1 = self.rhs(X1)
        return E * X + 0.5 * dt * (E * N0 + N1)

    def advective_dt(self, X: np.ndarray) -> float:
        cfg = self.cfg
        g = self.grid
        umax = max(float(np.max(np.abs(np.real(_ifftn(X[i] * g.size))))) for i in range(3))
        if umax == 0:
            return cfg.dt_max
        return min(cfg.dt_max, cfg.cfl / (cfg.n_cutoff * umax))


def nonlinear_term(u: VectorField, f, cfg: SolverConfig, tol: float = 1e-10):
    """``E_n(u . grad f)`` with the configured dealiasing, for scalar or vector ``f``."""
    if not u.divergence_free or u.divergence_residual() > tol:
        raise ValueError(f"advecting field is not divergence-free (residual {u.divergence_residual():.3e})")
    g = u.grid
    integ = Integrator(cfg)
    n = g.size
    U = [np.real(_ifftn(c.coeffs * n)) for c in u]
    comps = list(f) if isinstance(f, VectorField) else [f]
    out = []
    for c in comps:
        F = np.real(_ifftn(c.coeffs * n))
        acc = sum(1j * g.kd[j] * (_fftn(U[j] * F) / n * integ.mask) for j in range(3))
        out.append(SpectralField(g, acc * integ.ball))
    if isinstance(f, VectorField):
        return VectorField(tuple(out))
    return out[0]


def step(state: State, cfg: SolverConfig, dt: float | None = None) -> State:
    """Advance one step of size ``dt`` (default ``cfg.dt``)."""
    integ = Integrator(cfg)
    h = cfg.dt if dt is None else dt
    if h == "auto":
        h = integ.advective_dt(state.stacked())
    X = integ.step(state.stacked(), float(h))
    _check_finite(X, state.t + h)
    return State.from_stacked(state.grid, state.t + h, X)


def _check_finite(X: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(X)):
        idx = np.argwhere(~np.isfinite(X))[0]
        comp = ("u1", "u2", "u3", "rho")[idx[0]]
        raise FloatingPointError(
            f"non-finite coefficient at t={t:.6g} in {comp}, mode index (k1,k2,k3)={tuple(int(i) for i in idx[1:])}"
        )


# -------------------------------------------------------------- admission


def admission_lhs(u0: VectorField, rho0: SpectralField, s: float, T: float) -> float:
    """``||u0||_{0,s}^2 + T ||rho0|| (||u0|| + ||rho0|| (1 + T/2))``."""
    r = rho0.l2_norm()
    return sobolev_norm(u0, 0.0, s) ** 2 + T * r * (u0.l2_norm() + r * (1.0 + T / 2.0))


def admission(state: State, cfg: SolverConfig) -> dict:
    lhs = admission_lhs(state.u, state.rho, cfg.s_index, cfg.t_end)
    return {
        "lhs": lhs,
        "C0_sq": cfg.C0**2,
        "admitted": bool(lhs < cfg.C0**2),
        "text": (
            f"||u0||_{{0,s}}^2 + T||rho0||(||u0|| + ||rho0||(1+T/2)) = {lhs:.6g}"
            f" {'<' if lhs < cfg.C0**2 else '>='} C0^2 = {cfg.C0**2:.6g}"
            f" (s={cfg.s_index}, T={cfg.t_end})"
        ),
    }


# ------------------------------------------------------------------ ledger


LEDGER_COLUMNS = (
    "step", "t", "dt",
    "u_L2sq", "int_gradh_u_sq", "rho_L2sq", "int_gradh_rho_sq",
    "u_H0s", "rho_H0delta", "u_H1", "omega_over_r_L2",
    "lhs_u", "bound_u", "ok_u", "lhs_rho", "bound_rho", "ok_rho",
    "u_H0s_sq_bound", "div_max", "flagged",
)


@dataclass
class EnergyLedger:
    """Recorded time series; every bound sits on the row of its left-hand side."""

    rows: list = field(default_factory=list)
    tolerance_formula: str = "lhs <= rhs * (1 + 1e-6 + 10 dt^2)"

    def append(self, row: dict) -> None:
        if self.rows and row["t"] < self.rows[-1]["t"]:
            raise ValueError("ledger time column must be monotone")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def all_ok(self) -> bool:
        return all(r["ok_u"] and r["ok_rho"] for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in LEDGER_COLUMNS])
        return buf.getvalue()


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(bool(x))
    if isinstance(x, (int, np.integer)):
        return int(x)
    return repr(float(x))


def _log_mean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Logarithmic mean ``(a - b) / (ln a - ln b)``, 0 if either is 0."""
    out = np.zeros_like(a)
    pos = (a > 0) & (b > 0)
    ap, bp = a[pos], b[pos]
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = (ap - bp) / (np.log(ap) - np.log(bp))
    close = np.abs(ap - bp) <= 1e-12 * np.maximum(ap, bp)
    lm[close] = 0.5 * (ap[close] + bp[close])
    out[pos] = lm
    return out


def step_dissipation(grid: AnisoGrid, X0: np.ndarray, X1: np.ndarray, dt: float) -> tuple[float, float]:
    """``int ||grad_h u||^2`` and ``int ||grad_h rho||^2`` over one step.

    Each mode's energy is interpolated exponentially between the endpoints,
    which is exact for the linear horizontal decay.
    """
    w = grid.kh2 * grid.volume
    ea, eb = np.sum(np.abs(X0[:3]) ** 2, axis=0), np.sum(np.abs(X1[:3]) ** 2, axis=0)
    ra, rb = np.abs(X0[3]) ** 2, np.abs(X1[3]) ** 2
    return float(dt * np.sum(w * _log_mean(ea, eb))), float(dt * np.sum(w * _log_mean(ra, rb)))


def energy_tolerance(dt: float) -> float:
    return 1e-6 + 10.0 * dt * dt


@dataclass
class RunResult:
    ledger: EnergyLedger
    final: State
    snapshots: list
    flagged: bool
    admission: dict
    dt_history: list


def _record(step_i, t, dt, X, state0, D, cfg, ledger, u0sq, r0sq, u0norm, r0norm, u0s_sq):
    g = cfg.grid
    st = State.from_stacked(g, t, X)
    u_sq = st.u.l2_norm() ** 2
    r_sq = st.rho.l2_norm() ** 2
    lhs_u = u_sq + 2.0 * D[0]
    lhs_r = r_sq + 2.0 * D[1]
    bound_u = 2.0 * (u0sq + t * t * r0sq)
    bound_r = r0sq
    tol = energy_tolerance(dt)
    omr = float("nan")
    if cfg.axisymmetric:
        from .axisym import diagnostics_axi

        omr = diagnostics_axi(st)["omega_over_r_L2"]
    ok_u = bool(lhs_u <= bound_u * (1.0 + tol) + 1e-300)
    ok_r = bool(lhs_r <= bound_r * (1.0 + tol) + 1e-300)
    k2 = g.k_abs**2
    row = {
        "step": step_i, "t": t, "dt": dt,
        "u_L2sq": u_sq, "int_gradh_u_sq": D[0], "rho_L2sq": r_sq, "int_gradh_rho_sq": D[1],
        "u_H0s": sobolev_norm(st.u, 0.0, cfg.s_index),
        "rho_H0delta": sobolev_norm(st.rho, 0.0, cfg.delta_index),
        "u_H1": float(np.sqrt(g.volume * np.sum((1.0 + k2) * np.abs(X[:3]) ** 2))),
        "omega_over_r_L2": omr,
        "lhs_u": lhs_u, "bound_u": bound_u, "ok_u": ok_u,
        "lhs_rho": lhs_r, "bound_rho": bound_r, "ok_rho": ok_r,
        "u_H0s_sq_bound": u0s_sq + t * r0norm * (u0norm + r0norm * (1.0 + t / 2.0)),
        "div_max": st.u.max_divergence(),
        "flagged": not (ok_u and ok_r),
    }
    ledger.append(row)
    return row


def prepare(init: State, cfg: SolverConfig) -> np.ndarray:
    """Initial stacked state ``(E_n u0, E_n rho0)`` with the Leray projection applied."""
    return Integrator(cfg).project(init.stacked())


def step_schedule(cfg: SolverConfig, t0: float = 0.0):
    """Fixed-dt schedule: (number of steps, dt)."""
    span = cfg.t_end - t0
    n = int(round(span / cfg.dt))
    if n < 1 or abs(n * cfg.dt - span) > 1e-9 * max(span, 1.0):
        raise ValueError(f"t_end - t0 = {span} is not an integer multiple of dt = {cfg.dt}")
    return n, span / n


def run(cfg: SolverConfig, init: State) -> RunResult:
    """Integrate from ``init`` to ``cfg.t_end`` and record the energy ledger."""
    adm = admission(init, cfg)
    if cfg.certified and not adm["admitted"]:
        raise AdmissionError("admission condition violated: " + adm["text"])
    integ = Integrator(cfg)
    g = cfg.grid
    X = integ.project(init.stacked())
    st0 = State.from_stacked(g, init.t, X)
    u0sq, r0sq = st0.u.l2_norm() ** 2, st0.rho.l2_norm() ** 2
    u0s_sq = sobolev_norm(st0.u, 0.0, cfg.s_index) ** 2
    args = (u0sq, r0sq, math.sqrt(u0sq), math.sqrt(r0sq), u0s_sq)
    ledger = EnergyLedger()
    D = [0.0, 0.0]
    t = init.t
    snaps = []
    dts = []
    auto = cfg.dt == "auto"
    if auto:
        dt = integ.advective_dt(X)
    else:
        nsteps, dt = step_schedule(cfg, init.t)
    _record(0, t, dt, X, st0, D, cfg, ledger, *args)
    if cfg.keep_snapshots:
        snaps.append((t, X.copy()))
    i = 0
    while True:
        if auto:
            remaining = cfg.t_end - t
            if remaining <= 1e-12 * cfg.t_end:
                break
            if i % cfg.dt_recompute == 0:
                dt_cfl = integ.advective_dt(X)
                dts.append((t, dt_cfl))
            h = min(dt_cfl, remaining)
        else:
            if i >= nsteps:
                break
            h = dt
        Xn = integ.step(X, h)
        _check_finite(Xn, t + h)
        du, dr = step_dissipation(g, X, Xn, h)
        D[0] += du
        D[1] += dr
        X = Xn
        i += 1
        t = init.t + i * h if not auto else t + h
        last = (auto and cfg.t_end - t <= 1e-12 * cfg.t_end) or (not auto and i == nsteps)
        if i % cfg.record_every == 0 or last:
            _record(i, t, h, X, st0, D, cfg, ledger, *args)
            if cfg.keep_snapshots:
                snaps.append((t, X.copy()))
    final = State.from_stacked(g, t, X)
    return RunResult(ledger, final, snaps, not ledger.all_ok, adm, dts)


# ---------------------------------------------------------- initial data


def random_state(grid: AnisoGrid, seed: int, u_norm: float, rho_norm: float, n_cutoff: float,
                 profile: str = "power:2", index: int = 0) -> State:
    """Random solenoidal ``u`` and mean-free ``rho`` inside the Friedrichs ball.

    Both are scaled to the requested L^2 norms after the cutoff.
    """
    rng = np.random.default_rng([seed, index, 7])
    mask = ball_mask(grid, n_cutoff)
    mult = profile_multiplier(grid, profile)
    c = shaped_noise(rng, grid, mult, mask, 4)
    c[3, 0, 0, 0] = 0.0
    c[:3] = leray_coeffs(grid, c[:3])

    def scale(x, target):
        n = math.sqrt(grid.volume * float(np.sum(np.abs(x) ** 2)))
        return x * (target / n) if n > 0 else x

    u = VectorField.from_arrays(grid, scale(c[:3], u_norm), divergence_free=True)
    rho = SpectralField(grid, scale(c[3], rho_norm))
    return State(0.0, u, rho)


def perturb(state: State, seed: int, eps: float, kind: str = "white", n_cutoff: float | None = None,
            index: int = 0) -> State:
    """Add an ``eps``-sized perturbation.

    Kinds: ``white`` (all modes in the ball), ``rho`` (density only),
    ``mode`` (one velocity and one density mode) and ``shear`` (horizontal
    velocity depending on ``x3`` only, invisible to the horizontal Laplacian).
    """
    g = state.grid
    if eps == 0:
        return State(state.t, state.u, state.rho)
    n = n_cutoff if n_cutoff is not None else g.nyquist_radius
    rng = np.random.default_rng([seed, index, 11])
    mask = ball_mask(g, n)
    if kind == "mode":
        c = np.zeros((4,) + g.shape, complex)
        c[0, 0, 0, 1] = 0.5
        c[0, 0, 0, -1] = 0.5
        c[3, 1, 0, 1] = 0.5
        c[3, -1, 0, -1] = 0.5
    elif kind == "shear":
        c = np.zeros((4,) + g.shape, complex)
        c[0, 0, 0, 1] = c[0, 0, 0, -1] = 0.5
        c[1, 0, 0, 2] = -0.5j
        c[1, 0, 0, -2] = 0.5j
    else:
        c = shaped_noise(rng, g, np.ones(g.shape), mask, 4)
        if kind == "rho":
            c[:3] = 0.0
        elif kind != "white":
            raise ValueError(f"unknown perturbation kind {kind!r}")
    c[3, 0, 0, 0] = 0.0
    c[:3] = leray_coeffs(g, c[:3])
    nrm = math.sqrt(g.volume * float(np.sum(np.abs(c) ** 2)))
    c = c * (eps / nrm)
    X = state.stacked() + c
    return State.from_stacked(g, state.t, X)
