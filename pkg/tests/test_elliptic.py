import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypfrac import elliptic as EL
from hypfrac.spectral import ModelParams, RadialFn

from conftest import l2_diff


@pytest.fixture(scope="module")
def solver3():
    return EL.solver_transform(3)


@pytest.fixture(scope="module")
def p_free():
    return ModelParams(3, 0.5, lam=0.0, gamma=1.5)


@pytest.fixture(scope="module")
def p_top():
    return ModelParams(3, 0.5, lam=1.0, beta=0.5, gamma=1.5)


@pytest.fixture(scope="module")
def gs_free(solver3, p_free):
    return EL.solve_ground_state(p_free, "projected_gradient", solver3)


@pytest.fixture(scope="module")
def gs_free_fp(solver3, p_free):
    return EL.solve_ground_state(p_free, "resolvent_fixed_point", solver3)


class TestEnergyAndProjection:
    def test_zero_energy(self, solver3, p_free):
        z = RadialFn(solver3.rgrid, np.zeros_like(solver3.rgrid.nodes), 0.0)
        assert EL.energy_J(z, p_free, solver3) == 0.0

    def test_even_in_sign(self, solver3, p_free):
        g = solver3.rgrid
        f = RadialFn(g, np.exp(-g.nodes ** 2), 1.0)
        assert EL.energy_J(f, p_free, solver3) == pytest.approx(
            EL.energy_J(f.scaled(-1.0), p_free, solver3), rel=1e-14)

    def test_on_manifold_energy_identity(self, solver3, p_free):
        g = solver3.rgrid
        f = RadialFn(g, np.exp(-g.nodes ** 2), 1.0)
        state = EL.nehari_project(f, p_free, solver3)
        alpha = 0.5 - 1.0 / (p_free.gamma + 1.0)
        assert state.J == pytest.approx(alpha * state.norm_sq, rel=1e-12)
        assert state.defect < 1e-10

    def test_projection_of_manifold_point_is_identity(self, solver3, p_free):
        g = solver3.rgrid
        f = RadialFn(g, np.exp(-g.nodes ** 2), 1.0)
        state = EL.nehari_project(f, p_free, solver3)
        again = EL.nehari_project(state.u, p_free, solver3)
        assert again.u.values == pytest.approx(state.u.values, rel=1e-10)

    @given(c=st.floats(min_value=0.2, max_value=5.0))
    @settings(max_examples=15, deadline=None)
    def test_projection_scale_invariance(self, solver3, p_free, c):
        g = solver3.rgrid
        f = RadialFn(g, np.exp(-g.nodes ** 2), 1.0)
        a = EL.nehari_project(f, p_free, solver3)
        b = EL.nehari_project(f.scaled(c), p_free, solver3)
        assert np.allclose(a.u.values, b.u.values, rtol=1e-10, atol=1e-14)

    def test_zero_projection_rejected(self, solver3, p_free):
        z = RadialFn(solver3.rgrid, np.zeros_like(solver3.rgrid.nodes), 0.0)
        with pytest.raises(ValueError):
            EL.nehari_project(z, p_free, solver3)

    def test_exponent_range_enforced(self, solver3):
        p_end = ModelParams(3, 0.5, lam=0.0, gamma=2.0)  # critical endpoint
        with pytest.raises(ValueError):
            EL.solve_ground_state(p_end, "projected_gradient", solver3)
        p_beyond = ModelParams(3, 0.5, lam=0.0, gamma=2.5)
        with pytest.raises(ValueError):
            EL.energy_J(RadialFn(solver3.rgrid,
                                 np.exp(-solver3.rgrid.nodes ** 2), 1.0),
                        p_beyond, solver3)


class TestGradient:
    def test_zero_gradient_input(self, solver3, p_free):
        z = RadialFn(solver3.rgrid, np.zeros_like(solver3.rgrid.nodes), 0.0)
        g = EL.gradient_J(z, p_free, solver3)
        assert np.max(np.abs(g.values)) == 0.0

    def test_fd_order(self, solver3, p_free, gs_free):
        chk = EL.gradient_check(gs_free.u, p_free, solver3)
        assert float(np.median(chk["orders"])) == pytest.approx(2.0, abs=0.2)

    def test_gradient_small_at_solution(self, gs_free):
        assert gs_free.diagnostics["grad_norm"] < 1e-5


class TestSolvers:
    def test_projected_gradient_quality(self, gs_free):
        assert gs_free.energy > 0
        assert gs_free.residual_l2 < 1e-3
        assert gs_free.diagnostics["nehari_defect"] < 1e-8
        assert np.all(gs_free.u.values >= 0)
        assert math.isfinite(gs_free.u.sup_norm())

    def test_methods_agree(self, solver3, gs_free, gs_free_fp):
        assert gs_free_fp.energy == pytest.approx(gs_free.energy, rel=0.01)
        dist = l2_diff(solver3.rgrid, gs_free.u.values, gs_free_fp.u.values)
        scale = math.sqrt(float(solver3.rgrid.weights @ gs_free.u.values ** 2))
        assert dist / scale < 0.02

    def test_monotone_descent(self, solver3, p_free):
        _, history = EL._projected_gradient(
            p_free, solver3, EL._seed_fn(solver3), 200, 1e-6)
        js = [h[1] for h in history]
        assert all(b <= a + 1e-12 for a, b in zip(js, js[1:]))

    def test_seed_zero_rejected(self, solver3, p_free):
        z = RadialFn(solver3.rgrid, np.zeros_like(solver3.rgrid.nodes), 0.0)
        with pytest.raises(ValueError):
            EL.solve_ground_state(p_free, "projected_gradient", solver3, seed=z)

    def test_unknown_method(self, solver3, p_free):
        with pytest.raises(ValueError):
            EL.solve_ground_state(p_free, "annealing", solver3)

    def test_energy_stable_under_refinement(self, p_free, gs_free):
        fine = EL.solver_transform(3, refine=1.3)
        gs_fine = EL.solve_ground_state(p_free, "projected_gradient", fine)
        assert gs_fine.energy == pytest.approx(gs_free.energy, rel=0.02)

    def test_quotient_stable_under_refinement(self, p_free, gs_free):
        fine = EL.solver_transform(3, refine=1.3)
        gs_fine = EL.solve_ground_state(p_free, "projected_gradient", fine)
        assert gs_fine.quotient > 0
        assert gs_fine.quotient == pytest.approx(gs_free.quotient, rel=0.02)


class TestLambdaTop:
    def test_converges_with_exact_bookkeeping(self, solver3, p_top):
        gs = EL.solve_ground_state(p_top, "projected_gradient", solver3)
        assert gs.energy > 0
        assert gs.diagnostics["nehari_defect"] < 1e-8
        assert gs.diagnostics["grad_norm"] < 1e-5
        assert np.all(gs.u.values >= 0)

    def test_energy_stable_under_refinement(self, p_top):
        a = EL.solve_ground_state(p_top, "projected_gradient",
                                  EL.solver_transform(3))
        b = EL.solve_ground_state(p_top, "projected_gradient",
                                  EL.solver_transform(3, refine=1.3))
        assert b.energy == pytest.approx(a.energy, rel=0.02)

    def test_fixed_point_solves_convolution_equation(self, solver3, p_top):
        gs = EL.solve_ground_state(p_top, "resolvent_fixed_point", solver3)
        # grad_norm carries the physical equation defect for this method
        assert gs.diagnostics["grad_norm"] < 1e-8

    def test_decay_envelope(self, solver3, p_top):
        gs = EL.solve_ground_state(p_top, "projected_gradient", solver3)
        slope = gs.diagnostics["decay_slope"]
        # ground-state tails follow the e^{-(n-1)r/2} envelope family
        assert slope == pytest.approx(-1.0, rel=0.15)


class TestResidualAndStructure:
    def test_residual_of_solution_small(self, solver3, p_free, gs_free):
        assert EL.residual(gs_free.u, p_free, solver3) < 1e-3

    def test_residual_zero_function(self, solver3, p_free):
        z = RadialFn(solver3.rgrid, np.zeros_like(solver3.rgrid.nodes), 0.0)
        assert EL.residual(z, p_free, solver3) == 0.0

    def test_residual_positive_for_non_solution(self, solver3, p_free):
        g = solver3.rgrid
        f = RadialFn(g, np.exp(-g.nodes ** 2), 1.0)
        assert EL.residual(f, p_free, solver3) > 1e-2

    def test_residual_cross_check(self, solver3, p_free, gs_free):
        pts = EL.residual_cross_check(gs_free.u, p_free, solver3)
        assert np.max(np.abs(pts)) < 1e-2

    def test_verify_structure(self, solver3, p_free, gs_free):
        rep = EL.verify_structure(gs_free, p_free, solver3)
        assert rep["all_pass"]
        assert rep["fixed_point_defect"] < 1e-2
        assert rep["energy_positive"] and rep["energy_finite"]
        assert rep["lq_finite"]

    def test_verify_structure_zero(self, solver3, p_free):
        z = RadialFn(solver3.rgrid, np.zeros_like(solver3.rgrid.nodes), 0.0)
        gs = EL.GroundState(u=z, residual_l2=0.0, energy=0.0, quotient=0.0)
        rep = EL.verify_structure(gs, p_free, solver3)
        assert rep["fixed_point_defect"] == 0.0


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path, solver3, p_free, gs_free):
        path = tmp_path / "gs.json"
        EL.save_ground_state(gs_free, p_free, str(path))
        payload = EL.load_ground_state(str(path))
        assert payload["params"]["gamma"] == p_free.gamma
        assert payload["grid_fingerprint"] == solver3.rgrid.fingerprint
        assert np.allclose(payload["values"], gs_free.u.values)
        json.loads(path.read_text())  # well-formed
