import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypfrac import inequalities as IQ
from hypfrac.spectral import RadialFn


class TestQuotient:
    @given(c=st.floats(min_value=0.1, max_value=10.0))
    @settings(max_examples=15, deadline=None)
    def test_scale_invariance(self, ref3, c):
        g = ref3.rgrid
        u = RadialFn(g, np.exp(-g.nodes ** 2), 1.0)
        q1 = IQ.poincare_quotient(u, 2.6, 0.5, 1.0, ref3)
        q2 = IQ.poincare_quotient(u.scaled(c), 2.6, 0.5, 1.0, ref3)
        assert q2 == pytest.approx(q1, rel=1e-10)

    def test_admissible_range_n3(self, ref3, gaussian):
        # 2n/(n-2 sigma) = 3 for n = 3, sigma = 1/2
        assert IQ.poincare_quotient(gaussian, 3.0, 0.5, 1.0, ref3) > 0
        for bad_q in (2.0, 3.2, 1.0):
            with pytest.raises(ValueError):
                IQ.poincare_quotient(gaussian, bad_q, 0.5, 1.0, ref3)

    def test_zero_function_rejected(self, ref3):
        z = RadialFn(ref3.rgrid, np.zeros_like(ref3.rgrid.nodes), 0.0)
        with pytest.raises(ValueError):
            IQ.poincare_quotient(z, 2.5, 0.5, 1.0, ref3)

    def test_lambda_ordering(self, ref3, gaussian):
        top = IQ.poincare_quotient(gaussian, 2.6, 0.5, 1.0, ref3)
        mid = IQ.poincare_quotient(gaussian, 2.6, 0.5, 0.5, ref3)
        free = IQ.poincare_quotient(gaussian, 2.6, 0.5, 0.0, ref3)
        assert top <= mid <= free


class TestFamily:
    def test_family_size_and_hash(self, ref3):
        fns = IQ.test_family(ref3, seed=1234)
        assert len(fns) == 100
        h1 = IQ.family_hash(fns)
        h2 = IQ.family_hash(IQ.test_family(ref3, seed=1234))
        assert h1 == h2
        h3 = IQ.family_hash(IQ.test_family(ref3, seed=99))
        assert h1 != h3

    @pytest.mark.parametrize("q", [2.2, 2.6, 3.0])
    def test_minimum_positive(self, ref3, q):
        fns = IQ.test_family(ref3, seed=1234)
        best, samples = IQ.estimate_best_constant(fns, q, 0.5, 1.0, ref3)
        assert best > 0
        assert len(samples) == 100
        assert all(s.quotient > 0 for s in samples)

    def test_adding_scaled_member_keeps_minimum(self, ref3):
        fns = IQ.test_family(ref3, seed=1234)[:10]
        best, _ = IQ.estimate_best_constant(fns, 2.6, 0.5, 1.0, ref3)
        tag, f = fns[3]
        extended = fns + [(tag + "_scaled", f.scaled(2.5))]
        best2, _ = IQ.estimate_best_constant(extended, 2.6, 0.5, 1.0, ref3)
        assert best2 == pytest.approx(best, rel=1e-10)

    def test_empty_family_rejected(self, ref3):
        with pytest.raises(ValueError):
            IQ.estimate_best_constant([], 2.6, 0.5, 1.0, ref3)

    def test_singleton(self, ref3, gaussian):
        best, samples = IQ.estimate_best_constant(
            [("g", gaussian)], 2.6, 0.5, 1.0, ref3)
        assert best == samples[0].quotient


class TestShiftOrders:
    def test_ratio_at_least_one(self, ref3):
        fns = IQ.test_family(ref3, seed=1234)
        for _, f in fns[::7]:
            rep = IQ.compare_shift_orders(f, 0.5, ref3)
            assert rep["ratio"] >= 1.0 - 1e-10

    def test_high_frequency_ratio_near_one(self, ref3):
        # band-limited at high xi: the multipliers asymptotically agree
        F = np.exp(-(((ref3.sgrid.nodes - 20.0) / 2.0) ** 2))
        f = ref3.from_multiplier(F)
        rep = IQ.compare_shift_orders(f, 0.5, ref3)
        assert rep["ratio"] == pytest.approx(1.0, abs=0.03)

    def test_reverse_ratio_degrades_at_low_frequency(self, ref3):
        ratios = []
        for w in (0.5, 0.25, 0.125):
            F = np.exp(-((ref3.sgrid.nodes / w) ** 2))
            f = ref3.from_multiplier(F)
            rep = IQ.compare_shift_orders(f, 0.5, ref3)
            ratios.append(rep["reverse_ratio"])
        assert ratios[0] > ratios[1] > ratios[2]
        assert ratios[2] < 0.5


class TestMultiplier:
    def test_taylor_limit_at_top(self):
        # lambda = lambda0 = 1, sigma = 1/2: ((xi^2+1)^{1/2}-1)/xi^2 -> 1/2
        xi = np.array([1e-4, 1e-3, 1e-2])
        rep = IQ.multiplier_equivalence_check(1.0, 0.5, 1.0, xi=xi)
        lo, hi = rep["low"]
        assert lo == pytest.approx(0.5, rel=1e-3)
        assert hi == pytest.approx(0.5, rel=1e-3)

    def test_free_case_value_at_origin(self):
        xi = np.array([1e-8])
        rep = IQ.multiplier_equivalence_check(0.0, 0.5, 1.0, xi=xi)
        assert rep["low"][0] == pytest.approx(1.0, rel=1e-6)

    def test_high_frequency_band(self):
        xi = np.array([1e3])
        rep = IQ.multiplier_equivalence_check(1.0, 0.5, 1.0, xi=xi)
        assert 0.9 <= rep["high"][0] <= 1.1

    @pytest.mark.parametrize("sigma", [0.25, 0.5, 0.75])
    @pytest.mark.parametrize("lam_frac", [0.0, 0.5, 1.0])
    def test_bands_bounded(self, sigma, lam_frac):
        lam0 = 1.0
        rep = IQ.multiplier_equivalence_check(lam_frac * lam0, sigma, lam0)
        for lo, hi in rep.values():
            assert lo > 0
            assert hi / lo < 50.0


class TestCsv:
    def test_columns_and_determinism(self, ref3, tmp_path):
        fns = IQ.test_family(ref3, seed=7)[:5]
        _, samples = IQ.estimate_best_constant(fns, 2.6, 0.5, 1.0, ref3)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        IQ.write_quotient_csv(samples, p1, header_lines=("h",))
        IQ.write_quotient_csv(samples, p2, header_lines=("h",))
        assert p1.read_bytes() == p2.read_bytes()
        lines = p1.read_text().splitlines()
        assert lines[1] == "familyId,fnId,q,sigma,lambda,quotient"
