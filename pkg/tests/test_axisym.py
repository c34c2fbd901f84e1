import numpy as np
import pytest
import sympy as sp

from nsbh.axisym import (
    AxisymmetricData,
    bump,
    diagnostics_axi,
    make_axisymmetric,
    omega_over_r,
    rotation_residual,
    swirl_max,
)
from nsbh.grid import AnisoGrid, VectorField, forward
from nsbh.solver import SolverConfig, run


def sympy_ring(grid, width2=0.09, r0=1.5):
    """Velocity and omega_theta / r of u = curl(g (-Y, X, 0)) for a Gaussian ring, via sympy."""
    x, y, z = sp.symbols("x y z", real=True)
    c = sp.pi
    X, Y = x - c, y - c
    r = sp.sqrt(X**2 + Y**2)
    g = sp.exp(-((r - r0) ** 2 + (z - c) ** 2) / width2)
    F = (-Y * g, X * g, sp.Integer(0))

    def curl(v):
        return (sp.diff(v[2], y) - sp.diff(v[1], z), sp.diff(v[0], z) - sp.diff(v[2], x),
                sp.diff(v[1], x) - sp.diff(v[0], y))

    u = curl(F)
    w = curl(u)
    wr = (-Y * w[0] + X * w[1]) / (X**2 + Y**2)
    xs, ys, zs = (np.broadcast_to(a, grid.shape) for a in grid.coords())
    num = [sp.lambdify((x, y, z), e, "numpy") for e in (*u, wr)]
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = [np.array(np.broadcast_to(f(xs, ys, zs), grid.shape)) for f in num]
    # the formulas are 0/0 on the axis, where the ring is below e^{-25}
    for v in vals:
        v[~np.isfinite(v)] = 0.0
    return vals[:3], vals[3]


class TestBump:
    def test_values(self):
        assert bump(0.0) == 1.0
        assert bump(1.0) == 0.0 and bump(-2.0) == 0.0
        assert bump(0.5) == pytest.approx(np.exp(1 - 1 / 0.75))


class TestGeneration:
    def test_zero_amplitude(self, g16):
        st = make_axisymmetric(AxisymmetricData(amplitude=0.0, rho_amplitude=0.0), g16)
        assert st.u.l2_norm() == 0.0 and st.rho.l2_norm() == 0.0

    def test_support_must_fit(self, g16):
        with pytest.raises(ValueError, match="radial support"):
            make_axisymmetric(AxisymmetricData(radial=3.5), g16)
        with pytest.raises(ValueError, match="vertical support"):
            make_axisymmetric(AxisymmetricData(rho_vertical=4.0), g16)
        with pytest.raises(ValueError, match="positive"):
            AxisymmetricData(vertical=0.0)

    def test_class_invariants_on_32_cube(self, g32):
        st = make_axisymmetric(AxisymmetricData(), g32)
        assert st.u.max_divergence() <= 1e-10
        assert swirl_max(st.u) <= 1e-10
        assert rotation_residual(st) <= 1e-8
        assert st.u.divergence_free

    def test_rotation_detects_asymmetry(self, g16):
        st = make_axisymmetric(AxisymmetricData(), g16)
        c = st.rho.coeffs.copy()
        c[1, 0, 0] += 0.01
        c[-1, 0, 0] += 0.01
        st2 = type(st)(0.0, st.u, type(st.rho)(g16, c))
        assert rotation_residual(st2) > 1e-3


class TestOmegaOverR:
    def test_matches_symbolic_ring(self):
        g = AnisoGrid(64, 64)
        U, ref = sympy_ring(g)
        u = VectorField(tuple(forward(np.ascontiguousarray(a), g) for a in U), divergence_free=True)
        got = omega_over_r(u)
        x, y, _ = g.coords()
        r = np.broadcast_to(np.sqrt((x - np.pi) ** 2 + (y - np.pi) ** 2), g.shape)
        m = r > g.dx_h
        assert np.max(np.abs(got[m] - ref[m])) <= 1e-6 * np.max(np.abs(ref[m]))

    def test_swirl_of_pure_rotation(self, g16):
        x, y, z = g16.coords()
        X, Y = x - np.pi, y - np.pi
        # a swirling field u_theta = r exp(-r^2) has |u_theta| = r exp(-r^2)
        e = np.exp(-(X**2 + Y**2)) + 0 * z
        u = VectorField((forward(-Y * e, g16), forward(X * e, g16), forward(0 * e, g16)))
        assert swirl_max(u) == pytest.approx(np.max(np.sqrt(X**2 + Y**2) * e), rel=1e-10)


class TestAlongRun:
    def test_symmetry_preserved(self, g16):
        st = make_axisymmetric(AxisymmetricData(amplitude=0.05, rho_amplitude=0.02), g16)
        cfg = SolverConfig(g16, 7, dt=0.05, t_end=0.2, record_every=2, axisymmetric=True)
        res = run(cfg, st)
        assert rotation_residual(res.final) <= 1e-6
        wr = res.ledger.column("omega_over_r_L2")
        assert np.all(np.isfinite(wr)) and np.all(np.isfinite(res.ledger.column("u_H1")))
        d = diagnostics_axi(res.final)
        assert set(d) == {"omega_over_r_L2", "H1_norm", "swirl_max", "rotation_residual", "div_max"}
