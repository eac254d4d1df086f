import math

import numpy as np
import pytest

from hypfrac import kernels as K
from hypfrac.spectral import ModelParams, RadialFn, SpectralFn, radial_grid, spectral_grid, SphericalTransform


@pytest.fixture(scope="module")
def p3():
    return ModelParams(3, 0.5, lam=1.0)


class TestSubordinator:
    def test_half_closed_form_vs_contour(self):
        sub = K.StableSubordinator(0.5)
        for t in (0.5, 2.0):
            s = np.logspace(-2, 1.5, 30)
            closed = t / math.sqrt(4 * math.pi) * s ** -1.5 * np.exp(
                -t * t / (4 * s))
            got = sub.density(t, s)
            assert np.max(np.abs(got - closed) / closed) < 1e-6

    @pytest.mark.parametrize("sigma", [0.3, 0.5, 0.8])
    @pytest.mark.parametrize("t", [0.5, 2.0])
    def test_normalization(self, sigma, t):
        assert K.subordinator_normalization(sigma, t) == pytest.approx(
            1.0, abs=1e-8)

    @pytest.mark.parametrize("sigma,t,u", [
        (0.3, 1.0, 0.7), (0.5, 2.0, 2.0), (0.8, 0.5, 1.3),
    ])
    def test_laplace_transform_oracle(self, sigma, t, u):
        got = K.subordinator_laplace(sigma, t, u)
        assert got == pytest.approx(math.exp(-t * u ** sigma), rel=1e-6)

    def test_positive_on_log_grid(self):
        # extreme tails underflow double precision; positivity is asserted
        # wherever the value is representable at all
        s = np.logspace(-4, 3, 40)
        for sigma in (0.3, 0.5, 0.8):
            d = K.subordinator_density(sigma, 1.0, s)
            assert np.all(d >= 0)
            mid = np.logspace(-0.5, 1.5, 20)
            assert np.all(K.subordinator_density(sigma, 1.0, mid) > 0)

    def test_negative_arguments_rejected(self):
        with pytest.raises(ValueError):
            K.subordinator_density(0.5, -1.0, 1.0)
        with pytest.raises(ValueError):
            K.subordinator_density(0.5, 1.0, np.array([-1.0]))


class TestHeatKernel:
    def test_h3_value_from_closed_form(self, p3):
        prof = K.heat_kernel(p3, 1.0)
        want = (4 * math.pi) ** -1.5 / math.sinh(1.0) * math.exp(-1.0 - 0.25)
        # compare at a node (linear interpolation would add its own error)
        i = int(np.argmin(np.abs(prof.profile.grid.nodes - 1.0)))
        r = float(prof.profile.grid.nodes[i])
        want_i = (4 * math.pi) ** -1.5 * r / math.sinh(r) * math.exp(
            -1.0 - r * r / 4.0)
        assert prof.profile.values[i] == pytest.approx(want_i, rel=1e-8)
        assert want == pytest.approx(
            (4 * math.pi) ** -1.5 / math.sinh(1.0) * math.exp(-1.25))

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_mass_one(self, t):
        assert K.heat_mass(3, t) == pytest.approx(1.0, abs=1e-6)

    def test_mass_other_dimensions(self):
        assert K.heat_mass(2, 1.0) == pytest.approx(1.0, abs=1e-6)
        assert K.heat_mass(5, 1.0) == pytest.approx(1.0, abs=1e-6)

    def test_profile_mass_and_positivity(self, p3):
        prof = K.heat_kernel(p3, 1.0)
        assert prof.mass == pytest.approx(1.0, abs=1e-6)
        vals = prof.profile.values
        meaningful = np.abs(vals) > 1e-14 * float(np.max(vals))
        assert np.all(vals[meaningful] > 0)

    def test_large_r_slope_trend(self, p3):
        # measured log-slope at r = 10, t = 1 close to -(n-1)/2 - r/(2t)
        h = 1e-3
        vals = K.heat_profile(3, 1.0, np.array([10.0 - h, 10.0 + h]))
        slope = (math.log(vals[1]) - math.log(vals[0])) / (2 * h)
        assert slope == pytest.approx(-(1.0 + 5.0), rel=0.05)

    def test_closed_forms_match_spectral(self):
        # descent recursion (n=5) and plane integral (n=2) versus inversion
        for n, xi_max in ((5, 25.0), (2, 25.0)):
            rg = radial_grid(n, 18.0, width=0.5, order=10)
            sg = spectral_grid(n, xi_max, width_low=0.4, width_high=0.8,
                               order=10)
            tr = SphericalTransform(n, rg, sg)
            rho2 = ((n - 1) / 2.0) ** 2
            spec = tr.inverse(SpectralFn(sg, np.exp(-(sg.nodes ** 2 + rho2))))
            closed = K.heat_profile(n, 1.0, rg.nodes)
            mask = rg.nodes < 8.0
            rel = np.max(np.abs(spec.values - closed)[mask] / closed[mask])
            assert rel < 5e-6

    def test_invalid_time(self, p3):
        with pytest.raises(ValueError):
            K.heat_kernel(p3, 0.0)


class TestFracHeat:
    def test_route_consistency(self, p3, ref3):
        rep = K.check_route_consistency(p3, 1.0, ref3)
        assert rep["max_rel_deviation"] < 1e-4

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_mass_by_subordination(self, p3, t):
        mass, detail = K.frac_heat_mass(p3, t)
        assert mass == pytest.approx(1.0, abs=1e-6)
        assert detail["subordinator_normalization"] == pytest.approx(
            1.0, abs=1e-8)

    def test_profile_positive(self, p3, light3):
        prof = K.frac_heat_kernel(p3, 0.5, transform=light3)
        assert np.all(prof.profile.values > 0)
        assert prof.mass == pytest.approx(1.0, abs=1e-6)

    def test_sup_norm_decay_rate(self, p3):
        # log P_t(o) = const - lambda0^sigma t - 1.5 log t for large t
        ts = np.linspace(5.0, 50.0, 10)
        sups = [float(K.frac_heat_values(p3, float(t), np.array([0.0]))[0])
                for t in ts]
        A = np.stack([np.ones_like(ts), ts, np.log(ts)], axis=1)
        coef, *_ = np.linalg.lstsq(A, np.log(sups), rcond=None)
        assert coef[1] == pytest.approx(-1.0, rel=0.05)
        # the power correction is qualitative: subleading terms bias the
        # jointly fitted log coefficient
        assert coef[2] == pytest.approx(-1.5, abs=0.4)

    def test_small_scale_band(self, p3):
        # t + r <= 1: ratio to t (t^{1/(2 sigma)} + r)^{-(n+2 sigma)} bounded
        pts = [(t, r) for t in (0.02, 0.05, 0.1)
               for r in (0.05, 0.1, 0.3, 0.6) if t + r <= 1.0]
        ratios = []
        for t, r in pts:
            val = float(K.frac_heat_values(p3, t, np.array([r]))[0])
            env = t * (t ** (1.0 / (2 * p3.sigma)) + r) ** -(3 + 2 * p3.sigma)
            ratios.append(val / env)
        ratios = np.array(ratios)
        assert ratios.min() > 0
        assert ratios.max() / ratios.min() < 50.0

    def test_small_time_limit_at_fixed_radius(self, p3):
        # P_t(r)/t approaches a positive multiple of r^{-(n+2 sigma)}
        r = 0.5
        vals = [float(K.frac_heat_values(p3, t, np.array([r]))[0]) / t
                for t in (1e-3, 1e-4, 1e-5)]
        band = np.array(vals) / r ** -4.0
        assert band.min() > 0.01 and band.max() < 100.0
        # and the limit stabilizes
        assert abs(vals[2] - vals[1]) / vals[2] < 1e-3


class TestEstimateValidation:
    def test_reports_and_csv(self, p3, tmp_path):
        reports = K.validate_frac_heat_estimates(p3)
        regimes = {r.regime for r in reports}
        assert {"small-scale", "diffusive", "far-field"} <= regimes
        assert "excluded(skipped)" in regimes
        for rep in reports:
            if rep.regime.startswith("excluded"):
                continue
            assert rep.ratio_min > 0
            assert rep.ratio_max / rep.ratio_min < 50.0 ** 2
        far = next(r for r in reports if r.regime == "far-field")
        assert far.measured_slope == pytest.approx(-2.0, rel=0.05)
        path = tmp_path / "est.csv"
        K.write_estimate_csv(reports, path, header_lines=("test",))
        lines = path.read_text().splitlines()
        assert lines[0] == "# test"
        assert lines[1].split(",")[:4] == ["kind", "regime", "rMin", "rMax"]

    def test_regime_classifier(self, p3):
        assert K.classify_regime(p3, 0.1, 0.2) == "small-scale"
        assert K.classify_regime(p3, 9.0, 1.0) == "diffusive"
        assert K.classify_regime(p3, 0.5, 5.0) == "far-field"
        assert K.classify_regime(p3, 4.0, 3.0) == "excluded"


class TestP0:
    def test_small_r_slope(self, p3):
        r = np.logspace(-3, -1, 12)
        slope = np.polyfit(np.log(r), np.log(K.p0_values(3, 0.5, r)), 1)[0]
        assert slope == pytest.approx(-4.0, rel=0.02)

    def test_far_field_rate(self, p3):
        r = np.linspace(5.0, 20.0, 12)
        vals = K.p0_values(3, 0.5, r)
        A = np.stack([np.ones_like(r), r, np.log(1 + r)], axis=1)
        coef, *_ = np.linalg.lstsq(A, np.log(vals), rcond=None)
        assert coef[1] == pytest.approx(-2.0, rel=0.02)
        assert coef[2] == pytest.approx(-1.5, abs=1.0)

    def test_outer_integral_stable_under_rmax(self, p3):
        # the weighted kernel has a slow t^{-1-sigma} tail; completing it
        # with the asymptotic power integral makes the value truncation
        # independent to well beyond three digits
        vals = []
        for rmax in (40.0, 50.0):
            nodes, w = K.log_panels(1.0, rmax, per_decade=20, order=12)
            bulk = float(w @ K.p0_weighted3(0.5, nodes))
            tail = 2.0 ** 0.5 * rmax ** -0.5 / 0.5
            vals.append(bulk + tail)
        assert vals[0] == pytest.approx(vals[1], rel=1e-3)

    def test_kernel_profile_metadata(self, p3, light3):
        prof = K.p0_kernel(p3, light3.rgrid)
        assert prof.kind == "singular"
        assert np.all(prof.profile.values > 0)
        assert prof.mass is None

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            K.p0_values(3, 0.5, np.array([0.0]))


class TestResolvent:
    def test_small_r_slope(self, p3):
        r = np.logspace(math.log10(2e-3), math.log10(8e-2), 8)
        vals = K.resolvent_values(p3, r)
        slope = np.polyfit(np.log(r), np.log(vals), 1)[0]
        assert slope == pytest.approx(-2.0, rel=0.02)

    def test_far_field_polynomial_bound(self, p3):
        # log k + (n-1) r / 2 grows at most logarithmically on [5, 25]
        r = np.linspace(5.0, 25.0, 9)
        comp = np.log(K.resolvent_values(p3, r)) + 1.0 * r
        growth = comp[-1] - comp[0]
        assert abs(growth) < 2.0 * (math.log(25.0) - math.log(5.0))

    def test_lower_bound_at_infinity(self, p3):
        r = np.linspace(5.0, 25.0, 9)
        assert np.min(K.resolvent_values(p3, r) * np.exp(r)) > 0.05

    def test_domination(self, p3):
        r = np.linspace(0.5, 20.0, 12)
        k_top = K.resolvent_values(p3, r)
        for lam in (0.0, 0.5):
            assert np.all(K.resolvent_values(p3, r, lam=lam)
                          <= k_top * (1 + 1e-9))

    def test_lambda_out_of_range(self, p3):
        with pytest.raises(ValueError):
            K.resolvent_values(p3, np.array([1.0]), lam=2.0)

    def test_closed_form_cross_check_lambda0_free(self):
        # at lambda = 0, sigma = 1/2, n = 3 the kernel is K1(r)/(2 pi^2 sinh r)
        from scipy.special import k1
        p = ModelParams(3, 0.5, lam=0.0)
        r = np.array([0.3, 0.7, 1.5, 4.0])
        want = k1(r) / (2 * math.pi ** 2 * np.sinh(r))
        got = K.resolvent_values(p, r)
        assert np.max(np.abs(got - want) / want) < 1e-4
