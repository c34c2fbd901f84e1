import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsbh.osgood import (
    M_double_log_closed,
    M_double_log_inverse,
    M_linear_closed,
    OsgoodProblem,
    mu_double_log,
    mu_linear,
    osgood_bound,
)

A = np.exp(-2.0)


class TestModuli:
    def test_double_log_positive_nondecreasing(self):
        x = np.logspace(-300, -2, 500) * A * 100
        x = x[x <= A]
        v = mu_double_log(x)
        assert np.all(v > 0) and np.all(np.diff(v) >= 0)

    def test_closed_forms_vanish_at_a(self):
        assert M_linear_closed(0.3, 0.3) == 0.0
        assert M_double_log_closed(A, A) == 0.0

    @pytest.mark.parametrize("x", [1e-200, 1e-40, 1e-8, 1e-3, 0.1])
    def test_double_log_quadrature_matches_closed_form(self, x):
        p = OsgoodProblem(1e-3, lambda t: 1.0, mu_double_log, a=A)
        assert p.M(x)[0] == pytest.approx(M_double_log_closed(x, A), abs=1e-9)

    def test_linear_quadrature(self):
        p = OsgoodProblem(1e-3, lambda t: 1.0, mu_linear, a=1.0)
        assert p.M([1e-5, 0.5]) == pytest.approx(M_linear_closed([1e-5, 0.5], 1.0), abs=1e-10)

    def test_inverse(self):
        x = np.array([1e-100, 1e-9, 1e-2])
        assert M_double_log_inverse(M_double_log_closed(x, A), A) == pytest.approx(x, rel=1e-9)

    @given(st.floats(-300.0, np.log10(A)))
    def test_inverse_property(self, lx):
        x = 10.0**lx
        assert M_double_log_inverse(M_double_log_closed(x, A), A) == pytest.approx(x, rel=1e-8)

    def test_divergence_detection(self):
        assert OsgoodProblem(0.1, lambda t: 1.0, mu_linear).diverges()
        assert OsgoodProblem(0.1, lambda t: 1.0, mu_double_log, a=A).diverges()
        assert not OsgoodProblem(0.1, lambda t: 1.0, np.sqrt).diverges()


class TestValidation:
    def test_negative_c(self):
        with pytest.raises(ValueError, match="nonnegative"):
            OsgoodProblem(-1.0, lambda t: 1.0)

    def test_modulus_must_be_positive(self):
        with pytest.raises(ValueError, match="modulus"):
            OsgoodProblem(0.1, lambda t: 1.0, lambda x: np.asarray(x) - 0.5)

    def test_tabulation_above_a(self):
        p = OsgoodProblem(0.01, lambda t: 1.0, mu_double_log, a=A)
        with pytest.raises(ValueError, match="exceeds"):
            osgood_bound(p, [0.01, 0.5])

    def test_negative_gamma_table(self):
        p = OsgoodProblem(0.01, ([0.0, 1.0], [1.0, -1.0]))
        with pytest.raises(ValueError, match="nonnegative"):
            p.gamma_integral([1.0])


class TestBound:
    def test_gronwall_solution_is_sharp(self):
        # g' = gamma g with gamma = 1 + t: g = c exp(t + t^2/2), equality case of the linear modulus
        t = np.linspace(0, 1, 21)
        g = 1e-4 * np.exp(t + t**2 / 2)
        p = OsgoodProblem(1e-4, lambda s: 1.0 + s, mu_linear, a=1.0)
        res = osgood_bound(p, g, t)
        assert res["certified"]
        assert np.max(np.abs(res["margin"])) < 1e-9

    def test_violation_detected(self):
        t = np.linspace(0, 1, 21)
        p = OsgoodProblem(1e-4, lambda s: 1.0, mu_linear, a=1.0)
        assert not osgood_bound(p, 1e-4 * np.exp(1.1 * t), t)["certified"]

    def test_double_log_manufactured(self):
        # chi' = C mu(chi) integrates to M(chi0) - M(chi) = C t
        t = np.linspace(0, 1, 17)
        chi = M_double_log_inverse(M_double_log_closed(1e-6, A) - 0.7 * t, A)
        p = OsgoodProblem(1e-6, (t, np.full_like(t, 0.7)), mu_double_log, a=A)
        res = osgood_bound(p, chi, t)
        assert res["certified"] and np.max(np.abs(res["margin"])) < 1e-8

    def test_zero_initial_value(self):
        p = OsgoodProblem(0.0, lambda s: 1.0, mu_linear)
        assert osgood_bound(p, np.zeros(5))["certified"]
        assert not osgood_bound(p, [0.0, 1e-3])["certified"]
        with pytest.raises(ValueError, match="divergent"):
            osgood_bound(OsgoodProblem(0.0, lambda s: 1.0, np.sqrt), np.zeros(3))
