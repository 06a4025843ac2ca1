"""Picard construction: reductions, invariants, dual representation, smallness."""

import numpy as np
import pytest

from respde import obstacle as ob
from respde import spde as sp
from respde.lattice import DomainError, GridField, GridSpec, solve_poisson
from respde.noise import sample_noise


def _pair(f_text, sigma_text):
    return sp.make_coefficient_pair(f_text, sigma_text)


class TestPicardBasics:
    def test_all_zero(self):
        sol = sp.picard_solve(_pair("zero", "zero"), sample_noise(GridSpec(1, 8), 0))
        assert np.all(sol.u.values == 0.0)
        assert np.all(sol.eta.values == 0.0)
        assert sol.picard_iterations <= 2

    def test_positive_constant_forcing_never_touches(self):
        # B^{-1} is entrywise positive, so u = B^{-1}(c 1) > 0 and eta = 0
        spec = GridSpec(1, 16)
        sol = sp.picard_solve(_pair("const:value=3", "zero"), sample_noise(spec, 1))
        direct = solve_poisson(GridField(spec, np.full(spec.interior_count, 3.0)))
        assert sol.u.values == pytest.approx(direct.values, abs=1e-12)
        assert np.min(sol.u.values) > 0
        assert np.max(np.abs(sol.eta.values)) <= 1e-10
        assert sol.residual <= 1e-9

    def test_negative_constant_forcing_matches_obstacle_pipeline(self):
        spec = GridSpec(2, 8)
        sol = sp.picard_solve(_pair("const:value=-4", "zero"), sample_noise(spec, 2))
        v = solve_poisson(GridField(spec, np.full(spec.interior_count, -4.0)))
        det = ob.solve_lcp(ob.LcpProblem(spec, v), tol=1e-13)
        assert sol.u.values == pytest.approx(v.values + det.Z.values, abs=1e-10)
        assert sol.eta.values == pytest.approx(det.eta.values, abs=1e-8)

    def test_deterministic_reduction_random_forcings(self):
        rng = np.random.default_rng(40)
        for d, n in [(1, 16), (2, 8)]:
            spec = GridSpec(d, n)
            for _ in range(3):
                forcing = rng.normal(size=spec.interior_count)
                pair = sp.CoefficientPair(
                    f=sp.Coefficient(lambda pts, u, g=forcing: g, 0.0, 1.0, True),
                    sigma=sp.Coefficient(lambda pts, u: np.zeros_like(u), 0.0, 0.0, True),
                    L1=0.0,
                    L2=1.0,
                    monotone_f=True,
                )
                sol = sp.picard_solve(pair, sample_noise(spec, 3), tol=1e-10)
                v = solve_poisson(GridField(spec, forcing))
                det = ob.solve_lcp(ob.LcpProblem(spec, v), tol=1e-13)
                assert np.max(np.abs(sol.u.values - (v.values + det.Z.values))) <= 1e-8

    def test_solution_invariants(self):
        spec = GridSpec(1, 32)
        pair = _pair("affine:slope=-0.1,offset=-1", "const:value=0.1")
        tol = 1e-8
        for seed in range(5):
            sol = sp.picard_solve(pair, sample_noise(spec, seed), tol=tol)
            assert np.min(sol.u.values) >= -tol
            assert np.min(sol.eta.values) >= -tol
            cap = tol * spec.interior_count * (1 + sol.u.sup_norm() * sol.eta.sup_norm())
            assert sol.complementarity <= cap
            assert sol.residual <= 10 * tol
            assert sol.picard_iterations <= 200

    def test_divergent_coefficients_raise_with_history(self):
        # an amplifying drift overwhelms the inverse operator's gain and the
        # iteration blows up; a violated smallness condition is diagnosable
        pair = _pair("affine:slope=60,offset=1", "const:value=0.1")
        with pytest.raises(sp.PicardConvergenceError) as exc:
            sp.picard_solve(pair, sample_noise(GridSpec(1, 16), 4), max_iters=15)
        assert len(exc.value.history) == 15
        assert exc.value.history[-1] > exc.value.history[0]

    def test_contraction_history_geometric(self):
        pair = _pair("affine:slope=-0.45,offset=-2", "const:value=0.3")
        sol = sp.picard_solve(pair, sample_noise(GridSpec(1, 24), 5), tol=1e-12)
        hist = sol.change_history
        assert len(hist) >= 4
        tail = hist[-6:]
        for a, b in zip(tail, tail[1:]):
            if a > 0:
                assert b / a <= 0.95


class TestContinuousAssembly:
    def test_interpolation_hits_nodes_and_boundary(self):
        spec = GridSpec(1, 8)
        sol = sp.picard_solve(
            _pair("affine:slope=-0.1,offset=-1", "const:value=0.5"),
            sample_noise(spec, 6),
        )
        u_tilde = sp.assemble_continuous(sol)
        pts = spec.interior_points()
        for k in (0, 3, 6):
            assert u_tilde(pts[k]) == pytest.approx(sol.u.values[k])
        assert u_tilde(np.array([0.0])) == 0.0
        assert u_tilde(np.array([1.0])) == 0.0

    def test_interpolation_equals_kernel_representation(self):
        spec = GridSpec(1, 8)
        pair = _pair("affine:slope=-0.1,offset=-1", "const:value=0.5")
        sol = sp.picard_solve(pair, sample_noise(spec, 7), tol=1e-10)
        u_tilde = sp.assemble_continuous(sol)
        rng = np.random.default_rng(41)
        for x in rng.random(20):
            a = u_tilde(np.array([x]))
            b = sp.continuous_from_kernel(sol, pair, np.array([x]))
            assert abs(a - b) <= 1e-7


class TestSmallness:
    def test_zero_lipschitz_always_satisfied(self):
        report = sp.check_smallness(_pair("const:value=1", "const:value=1"), GridSpec(1, 16), p=2)
        assert report.lemma_lhs == 0.0
        assert report.theorem_lhs == 0.0
        assert report.satisfied

    def test_moment_order_precondition(self):
        pair = _pair("zero", "zero")
        with pytest.raises(DomainError):
            sp.check_smallness(pair, GridSpec(1, 8), p=1.0)  # needs p > 1 for d=1
        with pytest.raises(DomainError):
            sp.check_smallness(pair, GridSpec(3, 8), p=6.0, eps=0.01)  # needs p > 6.25

    def test_formula_evaluated_literally(self):
        pair = _pair("affine:slope=-0.2,offset=0", "zero")
        spec = GridSpec(1, 16)
        report = sp.check_smallness(pair, spec, p=2, c_p=1.0, a=1.0, b_holder=1.0)
        lip = 0.2
        lemma = 2**3 * lip**2 * report.c_d + 2**4 * lip**2 * (1.0 + report.c_d)
        theorem = 2**4 * lip**2 * report.c_tilde_d + 2**5 * lip**2 * (1.0 + report.c_tilde_d)
        assert report.lemma_lhs == pytest.approx(lemma, rel=1e-12)
        assert report.theorem_lhs == pytest.approx(theorem, rel=1e-12)
        assert report.satisfied == (report.theorem_lhs < 1)

    def test_measured_norm_matches_mode_sum(self):
        from respde.greens import discrete_l2_norm_sq_exact

        spec = GridSpec(1, 16)
        report = sp.check_smallness(_pair("zero", "zero"), spec, p=2, samples=10, seed=3)
        xs = np.vstack(
            [np.random.default_rng(3).random((10, 1)), np.full((1, 1), 0.5)]
        )
        expected = max(discrete_l2_norm_sq_exact(spec, x) for x in xs)
        assert report.c_d == pytest.approx(expected, rel=1e-12)


class TestCoefficients:
    def test_registry_and_metadata(self):
        pair = _pair("affine:slope=-0.1,offset=-1", "const:value=0.1")
        assert pair.L1 == pytest.approx(0.1)
        assert pair.L2 == pytest.approx(1.1)
        assert not pair.monotone_f
        up = _pair("affine:slope=0.2,offset=0", "zero")
        assert up.monotone_f

    def test_probe_confirms_declared_bounds(self):
        pair = _pair("affine:slope=-0.3,offset=2", "tanh:scale=0.2,rate=1")
        report = sp.probe_coefficients(pair, d=1, seed=1)
        assert report["lipschitz_ok"]
        assert report["lipschitz_measured"] <= pair.L1 + 1e-9

    def test_unknown_coefficient(self):
        with pytest.raises(DomainError):
            sp.make_coefficient("mystery:foo=1")
