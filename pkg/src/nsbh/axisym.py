"""
Axisymmetric data without swirl, built from an azimuthal vector potential.

With axis through the box centre ``c`` and ``F = g(r, z) (-(y-c), x-c, 0)``,
the velocity ``u = curl F`` has components::

    u1 = -(x-c) d3 g,   u2 = -(y-c) d3 g,   u3 = d1((x-c) g) + d2((y-c) g)

The first two are exact on the grid (the factors do not depend on ``x3``),
so the azimuthal component ``-(y-c) u1 + (x-c) u2`` cancels identically, and
the divergence of a spectral curl is zero up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import AnisoGrid, SpectralField, VectorField, curl, forward, inverse


def bump(x):
    """``exp(1 - 1/(1 - x^2))`` on ``|x| < 1`` and 0 outside; smooth, equal to 1 at 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out


@dataclass(frozen=True)
class AxisymmetricData:
    """Stream profile ``amplitude * bump(r/radial) * bump((z-c3)/vertical)`` and a
    density profile of the same form."""

    amplitude: float = 1.0
    radial: float = 1.5
    vertical: float = 1.5
    rho_amplitude: float = 0.5
    rho_radial: float = 1.5
    rho_vertical: float = 1.5

    def __post_init__(self):
        for name in ("radial", "vertical", "rho_radial", "rho_vertical"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


def _centre(grid: AnisoGrid) -> tuple[float, float]:
    """Axis at grid index N/2 horizontally; profile centred at index Nv/2."""
    return np.pi * grid.Lh, np.pi * grid.Lv


def _check_support(grid: AnisoGrid, radial: float, vertical: float, what: str) -> None:
    ch, cv = _centre(grid)
    if radial >= ch:
        raise ValueError(f"{what} radial support {radial} reaches the box boundary (half-width {ch:.4g})")
    if vertical >= cv:
        raise ValueError(f"{what} vertical support {vertical} reaches the box boundary (half-height {cv:.4g})")


def _profile(grid, amp, radial, vertical):
    x, y, z = grid.coords()
    ch, cv = _centre(grid)
    r = np.sqrt((x - ch) ** 2 + (y - ch) ** 2)
    return amp * bump(r / radial) * bump((z - cv) / vertical)


def make_axisymmetric(data: AxisymmetricData, grid: AnisoGrid):
    """Velocity and density of the requested axisymmetric class as a solver State."""
    from .solver import State

    _check_support(grid, data.radial, data.vertical, "stream profile")
    _check_support(grid, data.rho_radial, data.rho_vertical, "density profile")
    g = _profile(grid, data.amplitude, data.radial, data.vertical)
    x, y, _ = grid.coords()
    ch, _ = _centre(grid)
    X, Y = x - ch, y - ch
    F = VectorField((forward(-Y * g, grid), forward(X * g, grid), SpectralField.zeros(grid)))
    u = curl(F)
    u = VectorField(tuple(u), divergence_free=True)
    rho = forward(_profile(grid, data.rho_amplitude, data.rho_radial, data.rho_vertical), grid)
    return State(0.0, u, rho)


# ----------------------------------------------------------- diagnostics


def _rot(a):
    """Scalar field sampled at the rotated point: ``a'[i, j] = a[N-j, i]``."""
    n = a.shape[0]
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return a[(n - j) % n, i]


def rotation_residual(state) -> float:
    """Max deviation from invariance under the quarter turn about the axis.

    A field is invariant when ``u(Rx) = R u(x)`` and ``rho(Rx) = rho(x)``
    with ``R(a, b, c) = (-b, a, c)``.
    """
    U = [inverse(c, check=False) for c in state.u]
    Rh = inverse(state.rho, check=False)
    # u(Rx) at grid point (i, j) lives at index (N-j, i)
    res = [
        np.max(np.abs(_rot(U[0]) - (-U[1]))),
        np.max(np.abs(_rot(U[1]) - U[0])),
        np.max(np.abs(_rot(U[2]) - U[2])),
        np.max(np.abs(_rot(Rh) - Rh)),
    ]
    return float(max(res))


def swirl_max(u: VectorField) -> float:
    """``max |u_theta|`` over grid points off the axis."""
    g = u.grid
    x, y, _ = g.coords()
    ch, _ = _centre(g)
    X, Y = x - ch, y - ch
    r = np.broadcast_to(np.sqrt(X**2 + Y**2), g.shape)
    U1, U2 = inverse(u[0], check=False), inverse(u[1], check=False)
    m = r > 0
    return float(np.max(np.abs((-Y * U1 + X * U2)[m] / r[m])))


def omega_over_r(u: VectorField) -> np.ndarray:
    """``omega_theta / r`` on the grid with ``r`` clamped below at half a cell."""
    g = u.grid
    x, y, _ = g.coords()
    ch, _ = _centre(g)
    X, Y = x - ch, y - ch
    w = curl(u)
    W1, W2 = inverse(w[0], check=False), inverse(w[1], check=False)
    r2 = np.maximum(X**2 + Y**2, (0.5 * g.dx_h) ** 2)
    return (-Y * W1 + X * W2) / r2


def diagnostics_axi(state) -> dict:
    g = state.grid
    wr = omega_over_r(state.u)
    dv = g.dx_h**2 * g.dx_v
    k2 = g.k_abs**2
    h1 = np.sqrt(g.volume * np.sum((1.0 + k2) * np.abs(state.u.stacked) ** 2))
    return {
        "omega_over_r_L2": float(np.sqrt(np.sum(wr**2) * dv)),
        "H1_norm": float(h1),
        "swirl_max": swirl_max(state.u),
        "rotation_residual": rotation_residual(state),
        "div_max": state.u.max_divergence(),
    }
