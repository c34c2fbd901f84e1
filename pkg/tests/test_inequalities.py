import re

import numpy as np
import pytest

from conftest import random_scalar, random_solenoidal
from nsbh.ensembles import EnsembleSpec
from nsbh.filterbank import bank_for
from nsbh.grid import AnisoGrid, SpectralField, VectorField
from nsbh.inequalities import (
    RatioReport,
    band_stable,
    bernstein_block_ratio,
    check_bernstein,
    check_commutator,
    check_embedding_l4h_linfv,
    check_lemma5,
    check_prop1_term,
    check_product_rule,
    commutator_coeffs,
    commutator_direct,
    log2_slope,
    prop1_terms,
    product_rule_constraints,
    reduce_reports,
)
from nsbh.norms import PairingSpec, pairing


def vertical_cosine(grid, k):
    c = np.zeros(grid.shape, complex)
    c[0, 1, k] = c[0, -1, -k] = 0.5
    return SpectralField(grid, c)


class TestReports:
    def test_absorb_keeps_worst(self):
        r = RatioReport("x")
        r.absorb(1.0, 4.0, "a")
        r.absorb(3.0, 2.0, "b")
        r.absorb(1.0, 0.0, "c")
        assert (r.ratio, r.worst_case_input_digest, r.n_samples, r.n_excluded) == (1.5, "b", 2, 1)

    def test_reduce_is_order_independent_for_max(self):
        a, b = RatioReport("x"), RatioReport("x")
        a.absorb(1.0, 2.0, "a")
        b.absorb(2.0, 2.0, "b")
        assert reduce_reports([a, b], "y").ratio == reduce_reports([b, a], "y").ratio == 1.0
        assert reduce_reports([a, b], "y").to_dict()["n_samples"] == 2

    def test_band_stable(self):
        assert band_stable([1, 2, 3, 1.5], 4.0)
        assert not band_stable([1, 5, 1], 4.0)
        assert band_stable([1, float("nan"), 100], 4.0, window=3)

    def test_log2_slope_exact(self):
        assert log2_slope([0, 1, 2, 3], [3 * 2.0**-q for q in range(4)]) == pytest.approx(-1.0)


class TestBernstein:
    def test_single_mode_ratio(self):
        g = AnisoGrid(8, 32)
        # |k3| = 6 lies where phi_2 = 1, so d3 multiplies the norm by exactly 6
        lhs, rhs = bernstein_block_ratio(vertical_cosine(g, 6), 2, "v", 1)
        assert lhs / rhs == pytest.approx(6 / 4, rel=1e-12)

    def test_reverse_single_mode(self):
        g = AnisoGrid(8, 32)
        lhs, rhs = bernstein_block_ratio(vertical_cosine(g, 6), 2, "v", 1, reverse=True)
        assert lhs / rhs == pytest.approx(4 / 6, rel=1e-12)

    def test_exponent_order(self, g16):
        with pytest.raises(ValueError, match="p2 <= p1"):
            bernstein_block_ratio(random_scalar(g16, 0), 1, "v", 1, p=(2, 4))
        with pytest.raises(ValueError, match="direction"):
            bernstein_block_ratio(random_scalar(g16, 0), 1, "z", 1)

    def test_ensemble_report_bounded(self):
        rep = check_bernstein(EnsembleSpec(3, grid=AnisoGrid(8, 32)))
        assert 0 < rep.ratio <= 8 / 3 and rep.extras["stable"]
        assert rep.n_samples == 3 * len(rep.extras["per_block"])


class TestProductRule:
    @pytest.mark.parametrize("args,msg", [((1.0, 0.0, 0.5, 0.75), "sigma < 1"), ((0.2, -0.3, 0.5, 0.75), "sigma + sigma'"),
                                          ((0.5, 0.5, 0.5, 0.5), "s0 > 1/2"), ((0.5, 0.5, 1.0, 0.75), "s <= s0"),
                                          ((0.5, 0.5, -0.8, 0.75), "s + s0")])
    def test_constraints(self, args, msg):
        with pytest.raises(ValueError, match=re.escape(msg)):
            product_rule_constraints(*args)

    def test_shift_requires_low_band(self):
        ens = EnsembleSpec(2, grid=AnisoGrid(8, 16))
        with pytest.raises(ValueError, match="Nv/4"):
            check_product_rule(ens, 0.5, 0.5, 0.5, 0.75, shift=True)

    def test_finite_ratio(self):
        ens = EnsembleSpec(3, grid=AnisoGrid(8, 16), vband=4)
        a = check_product_rule(ens, 0.5, 0.5, 0.5, 0.75)
        b = check_product_rule(ens, 0.5, 0.5, 0.5, 0.75, shift=True)
        assert np.isfinite(a.ratio) and np.isfinite(b.ratio) and a.n_samples == b.n_samples == 3


class TestCommutator:
    def test_vertically_constant_coefficient_gives_zero(self, g16):
        a = random_scalar(g16, 0)
        a = SpectralField(g16, a.coeffs * (g16.k3 == 0))
        for q in range(0, 4):
            assert not np.any(commutator_coeffs(q, a, random_scalar(g16, 1)))

    def test_matches_direct_form_for_band_limited_inputs(self, g16):
        a = random_scalar(g16, 2, band=4)
        f = random_scalar(g16, 3, band=4)
        for q in range(0, 3):
            ext = commutator_coeffs(q, a, f)
            iv = np.fft.fftfreq(g16.Nv, 1 / g16.Nv).astype(int)
            on_grid = ext[:, :, iv % (2 * g16.Nv)]
            assert np.allclose(on_grid, commutator_direct(q, a, f).coeffs, atol=1e-15)

    def test_x3_constant_velocity_ensemble(self):
        rep = check_commutator(EnsembleSpec(2, grid=AnisoGrid(8, 32)), q_range=range(1, 4), u_vband=1)
        assert rep.lhs == 0.0 and all(m == 0.0 for m in rep.extras["mean_lhs"])
        assert rep.extras["slope_excluded"] and rep.extras["q_used"] == []


@pytest.fixture
def sextet(g8):
    u, v, w = (random_solenoidal(g8, s) for s in (1, 2, 3))
    eta, theta = random_scalar(g8, 4), random_scalar(g8, 5)
    return u, v, w, eta, theta


class TestProp1:
    def test_transport_terms_cancel_in_plain_l2(self, sextet):
        u, v, w, eta, theta = sextet
        L = prop1_terms(u, v, w, eta, theta, 1.0, weight="partition")
        # at s = 1 the weight is flat, so L1 + L2 = ((u . grad) w, w) = 0
        assert abs(L[0] + L[1]) < 1e-12 * (abs(L[0]) + abs(L[1]))

    def test_buoyancy_term_is_pairing(self, sextet):
        u, v, w, eta, theta = sextet
        L = prop1_terms(u, v, w, eta, theta, 0.75)
        assert L[8] == pytest.approx(pairing(theta, w[2], PairingSpec(0.0, -0.25)), rel=1e-13)

    def test_zero_difference(self, sextet):
        u, v, w, eta, theta = sextet
        assert prop1_terms(u, v, w * 0.0, eta, theta * 0.0, 0.75) == [0.0] * 9

    def test_validation(self, sextet):
        u, v, w, eta, theta = sextet
        with pytest.raises(ValueError, match="s must"):
            check_prop1_term(1, u, v, w, eta, eta, theta, 0.5)
        with pytest.raises(ValueError, match="1..9"):
            check_prop1_term(10, u, v, w, eta, eta, theta, 0.75)
        plain = VectorField(tuple(u))
        with pytest.raises(ValueError, match="divergence-free"):
            check_prop1_term(1, plain, v, w, eta, eta, theta, 0.75)


class TestEnergyPairingEstimates:
    def test_reports(self, sextet):
        u, v, w, eta, theta = sextet
        out = check_lemma5(u, w, 0.75, 0.5, theta)
        assert np.isfinite(out["transport"].ratio) and out["transport"].n_samples == 1
        assert "holds" in out["buoyancy"].extras

    def test_validation(self, sextet):
        u, v, w, eta, theta = sextet
        with pytest.raises(ValueError, match="delta"):
            check_lemma5(u, w, 0.75, 0.8)
        with pytest.raises(ValueError, match="divergence-free"):
            check_lemma5(VectorField(tuple(u)), w, 0.75, 0.5)


class TestEmbedding:
    def test_minkowski_and_ratio(self):
        ens = EnsembleSpec(3, "power:1", grid=AnisoGrid(16, 16), hband=4)
        rep = check_embedding_l4h_linfv(ens, 0.75)
        assert rep.extras["minkowski_all"] and np.isfinite(rep.ratio)
        assert check_embedding_l4h_linfv(ens, 0.75, rescale=True).n_samples == 3

    def test_requires_s_above_half(self):
        with pytest.raises(ValueError, match="s > 1/2"):
            check_embedding_l4h_linfv(EnsembleSpec(1), 0.5)
