import numpy as np
import pytest

from conftest import random_scalar, random_solenoidal
from nsbh.grid import AnisoGrid, SpectralField, VectorField, leray_coeffs
from nsbh.solver import (
    LEDGER_COLUMNS,
    AdmissionError,
    EnergyLedger,
    Integrator,
    SolverConfig,
    State,
    _log_mean,
    admission,
    ball_mask,
    cutoff_En,
    nonlinear_term,
    perturb,
    random_state,
    run,
    step,
    step_dissipation,
    step_schedule,
)


def state_from(grid, X, t=0.0):
    return State.from_stacked(grid, t, np.asarray(X, complex))


def shear_state(grid, amp=0.1):
    """u = (amp sin x2, 0, 0): a steady Euler flow decaying under the horizontal Laplacian."""
    X = np.zeros((4,) + grid.shape, complex)
    X[0, 0, 1, 0] = -0.5j * amp
    X[0, 0, -1, 0] = 0.5j * amp
    return state_from(grid, X)


class TestConfig:
    def test_cutoff_beyond_nyquist(self, g16):
        with pytest.raises(ValueError, match="Nyquist"):
            SolverConfig(g16, n_cutoff=100)

    @pytest.mark.parametrize("kw,msg", [({"dt": -1}, "dt"), ({"dt": "fast"}, "dt"), ({"s_index": 0.3}, "s_index"),
                                        ({"delta_index": 0.9}, "delta_index"), ({"record_every": 0}, "record_every"),
                                        ({"t_end": 0}, "t_end")])
    def test_rejects(self, g16, kw, msg):
        with pytest.raises(ValueError, match=msg):
            SolverConfig(g16, 4, **kw)

    def test_schedule(self, g16):
        assert step_schedule(SolverConfig(g16, 4, dt=0.25, t_end=1.0)) == (4, 0.25)
        with pytest.raises(ValueError, match="multiple"):
            step_schedule(SolverConfig(g16, 4, dt=0.3, t_end=1.0))

    def test_to_dict(self, g16):
        d = SolverConfig(g16, 4).to_dict()
        assert d["grid"]["Nh"] == 16 and d["n_cutoff"] == 4


class TestCutoff:
    def test_identity_above_max_wavenumber(self, g8):
        f = random_scalar(g8, 0)
        assert cutoff_En(f, 100.0) is f

    def test_idempotent_and_keeps_mean(self, g16):
        f = random_scalar(g16, 1)
        once = cutoff_En(f, 3.5)
        assert np.array_equal(cutoff_En(once, 3.5).coeffs, once.coeffs)
        assert once.coeffs[0, 0, 0] == f.coeffs[0, 0, 0]
        assert not np.any(once.coeffs[g16.k_abs >= 3.5])

    def test_open_ball(self, g16):
        m = ball_mask(g16, 2.0)
        assert not m[2, 0, 0] and m[1, 1, 0]
        assert not np.any(m & g16.nyquist_mask)

    def test_vector_keeps_flag(self, g16):
        u = random_solenoidal(g16, 0)
        assert cutoff_En(u, 3.0).divergence_free


class TestNonlinear:
    def cfg(self, g):
        return SolverConfig(g, g.nyquist_radius)

    def test_rejects_compressible(self, g16):
        u = VectorField(tuple(random_scalar(g16, s) for s in range(3)), divergence_free=True)
        with pytest.raises(ValueError, match="divergence-free"):
            nonlinear_term(u, random_scalar(g16, 5), self.cfg(g16))

    def test_zero_velocity_and_constant_scalar(self, g16):
        u = random_solenoidal(g16, 1)
        c = np.zeros(g16.shape, complex)
        c[0, 0, 0] = 2.0
        # divergence form leaves c div(u), which is round-off for a projected field
        assert nonlinear_term(u, SpectralField(g16, c), self.cfg(g16)).l2_norm() < 1e-13
        assert nonlinear_term(u * 0.0, random_scalar(g16, 2), self.cfg(g16)).l2_norm() == 0.0

    def test_skew_symmetry(self, g16):
        # with inputs below a third of the grid the dealiased product is exact
        u = VectorField.from_arrays(g16, leray_coeffs(g16, np.stack([random_scalar(g16, s, band=3).coeffs
                                                                     for s in range(3)])), divergence_free=True)
        f = random_scalar(g16, 7, band=3)
        nl = nonlinear_term(u, f, self.cfg(g16))
        assert abs(nl.inner(f)) < 1e-13 * nl.l2_norm() * f.l2_norm()

    def test_vector_target(self, g16):
        u = random_solenoidal(g16, 3)
        out = nonlinear_term(u, u, self.cfg(g16))
        assert isinstance(out, VectorField) and len(out.components) == 3


class TestLinearDynamics:
    def test_heat_flow_exact(self, g16):
        cfg = SolverConfig(g16, 8, dt=0.05, nonlinear=False, buoyancy=False)
        X0 = random_state(g16, 0, 0.1, 0.1, 8).stacked()
        st = state_from(g16, X0)
        for _ in range(10):
            st = step(st, cfg)
        assert np.allclose(st.stacked(), np.exp(-0.5 * g16.kh2) * X0, atol=1e-15)

    def test_buoyancy_forcing_exact(self, g16):
        # u_n = E^n (u_0 + n dt P(rho_0 e3)) solves the linear system exactly
        cfg = SolverConfig(g16, 8, dt=0.05, nonlinear=False)
        X0 = random_state(g16, 1, 0.1, 0.1, 8).stacked()
        forced = np.zeros((3,) + g16.shape, complex)
        forced[2] = X0[3]
        forced = leray_coeffs(g16, forced)
        st = state_from(g16, X0)
        for _ in range(8):
            st = step(st, cfg)
        E = np.exp(-0.4 * g16.kh2)
        assert np.allclose(st.u.stacked, E * (X0[:3] + 0.4 * forced), atol=1e-15)
        assert np.allclose(st.rho.coeffs, E * X0[3], atol=1e-15)

    def test_constant_density_lifts_mean_velocity(self, g8):
        X = np.zeros((4,) + g8.shape, complex)
        X[3, 0, 0, 0] = 0.3
        st = state_from(g8, X)
        cfg = SolverConfig(g8, 4, dt=0.1)
        for _ in range(5):
            st = step(st, cfg)
        assert st.u[2].mean() == pytest.approx(0.15, abs=1e-15)

    def test_shear_decays_exponentially(self, g16):
        cfg = SolverConfig(g16, 8, dt=0.1)
        st = shear_state(g16)
        for _ in range(10):
            st = step(st, cfg)
        assert st.u.l2_norm() == pytest.approx(np.exp(-1.0) * shear_state(g16).u.l2_norm(), rel=1e-14)

    def test_vertical_mode_invariant(self, g16):
        X = np.zeros((4,) + g16.shape, complex)
        X[0, 0, 0, 3] = X[0, 0, 0, -3] = 0.05
        st = state_from(g16, X)
        cfg = SolverConfig(g16, 8, dt=0.1)
        for _ in range(20):
            st = step(st, cfg)
        assert np.array_equal(st.stacked(), X)


class TestDissipation:
    def test_log_mean(self):
        a, b = np.array([1.0, 2.0, 0.0, 3.0]), np.array([np.e, 2.0, 1.0, 3.0 * (1 + 1e-14)])
        out = _log_mean(a, b)
        assert out[0] == pytest.approx(np.e - 1.0) and out[1] == 2.0 and out[2] == 0.0
        assert out[3] == pytest.approx(3.0)

    def test_exact_for_decaying_mode(self, g16):
        st = shear_state(g16)
        X0 = st.stacked()
        dt = 0.2
        X1 = np.exp(-dt * g16.kh2) * X0
        du, dr = step_dissipation(g16, X0, X1, dt)
        e0 = st.u.l2_norm() ** 2
        assert du == pytest.approx(e0 * (1 - np.exp(-2 * dt)) / 2, rel=1e-13)
        assert dr == 0.0


class TestRun:
    def test_energy_ledger(self, g16):
        cfg = SolverConfig(g16, 6, dt=0.05, t_end=0.5, record_every=5, certified=True)
        res = run(cfg, random_state(g16, 0, 0.05, 0.02, 6))
        assert res.ledger.all_ok and not res.flagged
        assert res.ledger.column("step").tolist() == [0, 5, 10]
        assert res.final.t == pytest.approx(0.5)
        assert np.max(res.ledger.column("div_max")) < 1e-12

    def test_csv(self, g8):
        res = run(SolverConfig(g8, 3, dt=0.1, t_end=0.2), random_state(g8, 0, 0.05, 0.02, 3))
        lines = res.ledger.to_csv().splitlines()
        assert lines[0].split(",") == list(LEDGER_COLUMNS) and len(lines) == 4

    def test_ledger_monotone(self):
        led = EnergyLedger()
        led.append({"t": 1.0})
        with pytest.raises(ValueError, match="monotone"):
            led.append({"t": 0.5})

    def test_admission_error(self, g16):
        cfg = SolverConfig(g16, 6, dt=0.05, t_end=0.1, certified=True)
        big = random_state(g16, 0, 1.0, 1.0, 6)
        assert not admission(big, cfg)["admitted"]
        with pytest.raises(AdmissionError, match="C0"):
            run(cfg, big)
        assert run(SolverConfig(g16, 6, dt=0.05, t_end=0.1), big).admission["admitted"] is False

    def test_zero_density(self, g16):
        st = random_state(g16, 2, 0.05, 0.0, 6)
        res = run(SolverConfig(g16, 6, dt=0.05, t_end=0.2), st)
        assert res.final.rho.l2_norm() == 0.0

    def test_auto_dt(self, g16):
        cfg = SolverConfig(g16, 6, dt="auto", t_end=0.3, dt_max=0.07, dt_recompute=2)
        res = run(cfg, random_state(g16, 0, 0.05, 0.02, 6))
        assert res.final.t == pytest.approx(0.3) and res.dt_history
        assert all(h <= 0.07 for _, h in res.dt_history)

    def test_nan_abort(self, g8):
        X = random_state(g8, 0, 0.05, 0.02, 3).stacked()
        X[3, 1, 0, 0] = np.nan
        with pytest.raises(FloatingPointError, match=r"non-finite coefficient at t=0\.1 in u1"):
            run(SolverConfig(g8, 3, dt=0.1, t_end=0.1), state_from(g8, X))

    def test_snapshots(self, g8):
        cfg = SolverConfig(g8, 3, dt=0.1, t_end=0.3, keep_snapshots=True)
        res = run(cfg, random_state(g8, 0, 0.05, 0.02, 3))
        assert [round(t, 12) for t, _ in res.snapshots] == [0.0, 0.1, 0.2, 0.3]


class TestInitialData:
    def test_random_state(self, g16):
        st = random_state(g16, 4, 0.05, 0.02, 5)
        assert st.u.l2_norm() == pytest.approx(0.05) and st.rho.l2_norm() == pytest.approx(0.02)
        assert st.u.divergence_residual() < 1e-14 and st.rho.coeffs[0, 0, 0] == 0
        assert not np.any(st.stacked()[:, ~ball_mask(g16, 5)])

    def test_integrator_projection_idempotent(self, g16):
        integ = Integrator(SolverConfig(g16, 5))
        X = integ.project(random_state(g16, 0, 0.1, 0.1, 8).stacked())
        assert np.allclose(integ.project(X), X, atol=1e-16)

    @pytest.mark.parametrize("kind", ["white", "rho", "mode", "shear"])
    def test_perturb_size(self, g16, kind):
        a = random_state(g16, 0, 0.05, 0.02, 6)
        b = perturb(a, 1, 1e-6, kind, 6)
        d = b.stacked() - a.stacked()
        assert np.sqrt(g16.volume * np.sum(np.abs(d) ** 2)) == pytest.approx(1e-6, rel=1e-12)
        assert b.u.divergence_residual() < 1e-14

    def test_shear_perturbation_is_horizontally_constant(self, g16):
        a = random_state(g16, 0, 0.05, 0.02, 6)
        d = perturb(a, 1, 1e-3, "shear", 6).stacked() - a.stacked()
        assert not np.any(d[:, g16.kh2[..., 0] > 0])

    def test_zero_eps_identity(self, g16):
        a = random_state(g16, 0, 0.05, 0.02, 6)
        assert np.array_equal(perturb(a, 1, 0.0).stacked(), a.stacked())

    def test_unknown_kind(self, g16):
        with pytest.raises(ValueError, match="kind"):
            perturb(random_state(g16, 0, 0.05, 0.02, 6), 1, 1e-3, "pink")
