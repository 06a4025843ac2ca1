"""Kernel identities, closed forms, L2 estimates, and the table output."""

import numpy as np
import pytest

from respde import greens as gr
from respde.lattice import DomainError, GridField, GridSpec, solve_poisson


class TestPointwise:
    def test_series_matches_1d_closed_form(self):
        spec = GridSpec(1, 8)
        kind = gr.KernelKind.continuous(2000)
        got = gr.eval_kernel(kind, spec, np.array([0.3]), np.array([0.7]))
        assert got == pytest.approx(gr.green_closed_form_1d(0.3, 0.7), abs=1e-4)

    def test_discrete_kernel_closed_form_1d(self):
        # K_n at lattice nodes is the scaled tridiagonal inverse (i/n)(1 - j/n)
        kind = gr.KernelKind.discrete()
        for n in (2, 4, 8, 16):
            spec = GridSpec(1, n)
            for i in range(1, n):
                for j in range(i, n):
                    got = gr.eval_kernel(kind, spec, np.array([i / n]), np.array([j / n]))
                    assert got == pytest.approx((i / n) * (1 - j / n), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(21)
        spec = GridSpec(2, 6)
        pts = spec.interior_points()
        for kind in (gr.KernelKind.continuous(64), gr.KernelKind.discrete()):
            for _ in range(10):
                i, j = rng.integers(0, spec.interior_count, size=2)
                a = gr.eval_kernel(kind, spec, pts[i], pts[j])
                b = gr.eval_kernel(kind, spec, pts[j], pts[i])
                assert a == pytest.approx(b, abs=1e-12)

    def test_discrete_kernel_is_scaled_poisson_inverse(self):
        rng = np.random.default_rng(22)
        spec = GridSpec(2, 5)
        pts = spec.interior_points()
        kind = gr.KernelKind.discrete()
        from respde.lattice import operator_matrix

        binv = np.linalg.inv(operator_matrix(spec).toarray())
        for _ in range(8):
            i, j = rng.integers(0, spec.interior_count, size=2)
            got = gr.eval_kernel(kind, spec, pts[i], pts[j])
            assert got == pytest.approx(spec.n**spec.d * binv[i, j], rel=1e-10)

    def test_truncation_below_resolution_rejected(self):
        spec = GridSpec(1, 16)
        with pytest.raises(DomainError):
            gr.eval_kernel(gr.KernelKind.continuous(8), spec, np.array([0.5]), np.array([0.5]))

    def test_interpolated_kernel_exact_at_nodes(self):
        spec = GridSpec(1, 8)
        kd = gr.KernelKind.discrete()
        ki = gr.KernelKind.interp_discrete()
        y = np.array([0.375])
        for i in range(1, 8):
            x = np.array([i / 8])
            assert gr.eval_kernel(ki, spec, x, y) == pytest.approx(
                gr.eval_kernel(kd, spec, x, y), abs=1e-13
            )


class TestL2Norms:
    def test_continuous_norm_at_center_1d(self):
        # int_0^1 K(0.5, y)^2 dy = 2 * int_0^{1/2} (y/2)^2 dy = 1/48,
        # confirmed by the mode sum 2/pi^4 sum_{odd a} a^{-4} = 1/48
        spec = GridSpec(1, 8)
        val = gr.kernel_l2_norm_sq(gr.KernelKind.continuous(1024), spec, np.array([0.5]), 512)
        assert val == pytest.approx(1.0 / 48.0, rel=1e-4)

    def test_quadrature_matches_mode_sum_for_discrete(self):
        rng = np.random.default_rng(23)
        for d, n in [(1, 8), (2, 4)]:
            spec = GridSpec(d, n)
            for _ in range(5):
                x = rng.random(d)
                quad = gr.kernel_l2_norm_sq(gr.KernelKind.discrete(), spec, x, 4 * n)
                exact = gr.discrete_l2_norm_sq_exact(spec, x)
                assert quad == pytest.approx(exact, abs=1e-10)

    def test_zero_on_boundary(self):
        spec = GridSpec(2, 4)
        for kind in (gr.KernelKind.discrete(), gr.KernelKind.continuous(32)):
            val = gr.kernel_l2_norm_sq(kind, spec, np.array([0.0, 0.5]), 8)
            assert val == pytest.approx(0.0, abs=1e-15)

    def test_quadrature_must_resolve_lattice(self):
        spec = GridSpec(1, 8)
        with pytest.raises(DomainError):
            gr.kernel_l2_norm_sq(gr.KernelKind.discrete(), spec, np.array([0.5]), 4)

    def test_uniform_bound_across_resolutions(self):
        rng = np.random.default_rng(24)
        for d in (1, 2, 3):
            xs = rng.random((20, d))
            sups = []
            for n in (4, 8, 16, 32):
                spec = GridSpec(d, n)
                sups.append(max(gr.discrete_l2_norm_sq_exact(spec, x) for x in xs))
            for a, b in zip(sups, sups[1:]):
                assert 0.5 <= b / a <= 2.0


class TestL2Differences:
    def test_same_kind_is_zero(self):
        spec = GridSpec(1, 8)
        kind = gr.KernelKind.discrete()
        val = gr.kernel_l2_difference(kind, kind, spec, np.array([0.5]), 16)
        assert val == 0.0

    def test_continuous_vs_discrete_decreases_1d(self):
        vals = []
        for n in (4, 8, 16, 32):
            spec = GridSpec(1, n)
            vals.append(
                gr.kernel_l2_difference(
                    gr.KernelKind.continuous(),
                    gr.KernelKind.discrete(),
                    spec,
                    np.array([0.5]),
                    4 * n,
                )
            )
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_shift_ratio_bounded_1d(self):
        # int |K(x,.) - K(z,.)|^2 / |x-z|^2 approaches int (dK/dx)^2 = 1/12 at x = 1/2
        spec = GridSpec(1, 8)
        kind = gr.KernelKind.continuous(512)
        x = np.array([0.5])
        ratios = []
        for delta in (1 / 8, 1 / 16, 1 / 32):
            mid = (np.arange(256) + 0.5) / 256
            va = gr.kernel_values(kind, spec, x, (mid,))
            vb = gr.kernel_values(kind, spec, np.array([0.5 + delta]), (mid,))
            dist = float(np.sum((va - vb) ** 2) / 256)
            ratios.append(dist / delta**2)
        assert max(ratios) <= 1.35 / 12
        assert min(ratios) >= 0.65 / 12


class TestRepresentation:
    def test_poisson_solution_equals_kernel_integral(self):
        rng = np.random.default_rng(25)
        for d, n in [(1, 16), (2, 6), (3, 4)]:
            spec = GridSpec(d, n)
            eta = GridField(spec, rng.normal(size=spec.interior_count))
            u = solve_poisson(eta)
            cell_eta = np.zeros(spec.cells_shape)
            cell_eta[(slice(1, n),) * d] = eta.as_array()
            mid = (np.arange(n) + 0.5) / n
            pts = spec.interior_points()
            scale = np.max(np.abs(u.values))
            for k in rng.choice(spec.interior_count, size=5, replace=False):
                kv = gr.kernel_values(gr.KernelKind.discrete(), spec, pts[k], (mid,) * d)
                integral = float(np.sum(kv * cell_eta)) / n**d
                assert abs(integral - u.values[k]) <= 1e-9 * scale


class TestExponents:
    def test_gamma_and_sigma_tables(self):
        eps = 0.01
        assert gr.gamma_exponent(1, eps) == 0.5
        assert gr.gamma_exponent(2, eps) == pytest.approx(0.49)
        assert gr.gamma_exponent(3, eps) == pytest.approx(0.24)
        assert gr.sigma_exponent(1, eps) == pytest.approx(0.99)
        assert gr.sigma_exponent(2, eps) == pytest.approx(0.49)
        assert gr.sigma_exponent(3, eps) == pytest.approx(0.19)
        est = gr.HolderEstimate.for_dimension(2, eps)
        assert (est.gamma, est.sigma) == (gr.gamma_exponent(2, eps), gr.sigma_exponent(2, eps))
        with pytest.raises(DomainError):
            gr.gamma_exponent(1, 0.0)


class TestGreenTable:
    def test_table_shape_and_duality(self):
        spec = GridSpec(1, 4)
        header, rows = gr.green_table_rows(spec, np.array([0.25, 0.5, 0.75]))
        assert header == ["x1", "y1", "K", "Kn", "Kprime", "Kcaret_n"]
        assert rows.shape == (9, 6)
        # at lattice points the interpolated kinds agree with their parents
        for row in rows:
            assert row[3] == pytest.approx(row[5], abs=1e-12)
