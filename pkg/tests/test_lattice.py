"""Grid ordering, lattice operator, eigenbasis, solvers, interpolation."""

import itertools

import numpy as np
import pytest

from respde import lattice as lat
from respde.lattice import DomainError, GridField, GridSpec


class TestOrdering:
    def test_paper_examples_d2(self):
        spec = GridSpec(2, 3)
        assert lat.natural_rank((2, 1), spec) == 2
        assert lat.natural_rank((1, 2), spec) == 3

    def test_identity_in_1d(self):
        spec = GridSpec(1, 9)
        for j in range(1, 9):
            assert lat.natural_rank((j,), spec) == j

    def test_bijection(self):
        for d, n in itertools.product((1, 2, 3), (2, 3, 5, 8, 16)):
            spec = GridSpec(d, n)
            seen = set()
            for k in range(1, spec.interior_count + 1):
                idx = lat.unrank(k, spec)
                assert lat.natural_rank(idx, spec) == k
                seen.add(idx)
            assert len(seen) == spec.interior_count

    def test_out_of_range(self):
        spec = GridSpec(2, 4)
        with pytest.raises(DomainError):
            lat.natural_rank((0, 1), spec)
        with pytest.raises(DomainError):
            lat.natural_rank((1, 4), spec)
        with pytest.raises(DomainError):
            lat.unrank(0, spec)
        with pytest.raises(DomainError):
            lat.unrank(10, spec)

    def test_points_follow_ordering(self):
        spec = GridSpec(3, 4)
        pts = spec.interior_points()
        for k in (1, 5, 14, 27):
            idx = lat.unrank(k, spec)
            assert np.allclose(pts[k - 1], np.array(idx) / spec.n)


class TestGridField:
    def test_length_validated(self):
        with pytest.raises(DomainError):
            GridField(GridSpec(2, 4), np.zeros(5))

    def test_values_frozen(self):
        f = GridField.zeros(GridSpec(1, 4))
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_array_roundtrip(self):
        spec = GridSpec(2, 5)
        vals = np.arange(spec.interior_count, dtype=float)
        f = GridField(spec, vals)
        assert np.array_equal(GridField.from_array(spec, f.as_array()).values, vals)
        # axis 0 is the first coordinate: entry (i1, i2) sits at rank i1 + (n-1)(i2-1)
        arr = f.as_array()
        assert arr[1, 2] == vals[lat.natural_rank((2, 3), spec) - 1]


class TestLaplacian:
    def test_single_interior_point(self):
        f = GridField(GridSpec(1, 2), np.array([3.0]))
        assert lat.apply_discrete_laplacian(f).values == pytest.approx([-24.0])

    def test_zero_field(self):
        for d in (1, 2, 3):
            f = GridField.zeros(GridSpec(d, 4))
            assert np.all(lat.apply_discrete_laplacian(f).values == 0.0)

    def test_sine_mode_matches_stencil_eigenvalue(self):
        # direct stencil evaluation is the oracle for L sin = -lambda sin
        n = 4
        spec = GridSpec(1, n)
        x = np.arange(1, n) / n
        f = GridField(spec, np.sin(np.pi * x))
        lap = lat.apply_discrete_laplacian(f).values
        c1 = np.sin(np.pi / (2 * n)) ** 2 / (np.pi / (2 * n)) ** 2
        lam = np.pi**2 * c1
        assert lap == pytest.approx(-lam * f.values, rel=1e-12)
        # independent stencil check at an interior node
        direct = n**2 * (np.sin(np.pi * 2 / n) - 2 * np.sin(np.pi / n))
        assert lap[0] == pytest.approx(direct, rel=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        for d, n in [(1, 16), (2, 7), (3, 4)]:
            spec = GridSpec(d, n)
            f = GridField(spec, rng.normal(size=spec.interior_count))
            g = GridField(spec, rng.normal(size=spec.interior_count))
            lhs = np.dot(lat.apply_discrete_laplacian(f).values, g.values)
            rhs = np.dot(f.values, lat.apply_discrete_laplacian(g).values)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_matches_sparse_matrix(self):
        rng = np.random.default_rng(12)
        for d, n in [(1, 8), (2, 5), (3, 3)]:
            spec = GridSpec(d, n)
            f = GridField(spec, rng.normal(size=spec.interior_count))
            via_stencil = lat.apply_operator(f).values
            via_matrix = lat.operator_matrix(spec) @ f.values
            assert via_stencil == pytest.approx(via_matrix, rel=1e-13)


class TestEigenBasis:
    def test_smallest_grid_forced(self):
        basis = lat.eigen_basis(GridSpec(1, 2))
        assert basis.eigenvalue((1,)) == pytest.approx(8.0)
        assert basis.basis_vector((1,)) == pytest.approx([1.0])

    def test_frequency_factor_bounds(self):
        # the factor at the formal endpoint j = n equals the lower bound 4/pi^2
        endpoint = np.sin(np.pi / 2) ** 2 / (np.pi / 2) ** 2
        assert endpoint == pytest.approx(4.0 / np.pi**2)
        for n in (2, 3, 8, 64, 1024):
            c = lat.axis_frequency_factors(n)
            assert np.all(c >= 4.0 / np.pi**2 - 1e-15)
            assert np.all(c <= 1.0 + 1e-15)

    def test_eigen_residual_d2_n4(self):
        spec = GridSpec(2, 4)
        basis = lat.eigen_basis(spec)
        count = 0
        for alpha in basis.all_frequencies():
            b = GridField(spec, basis.basis_vector(alpha))
            resid = lat.apply_operator(b).values - basis.eigenvalue(alpha) * b.values
            assert np.max(np.abs(resid)) <= 1e-10
            count += 1
        assert count == 9

    def test_eigenvalue_tensor_matches_scalar(self):
        spec = GridSpec(3, 5)
        basis = lat.eigen_basis(spec)
        lam = basis.eigenvalues
        for alpha in [(1, 1, 1), (2, 3, 4), (4, 4, 4)]:
            assert lam[tuple(a - 1 for a in alpha)] == pytest.approx(
                basis.eigenvalue(alpha)
            )

    def test_orthonormality_direct(self):
        for d, n in [(1, 16), (2, 8), (3, 4)]:
            spec = GridSpec(d, n)
            basis = lat.eigen_basis(spec)
            mat = np.column_stack(
                [basis.basis_vector(a) for a in basis.all_frequencies()]
            )
            gram = mat.T @ mat
            dev = np.max(np.abs(gram - np.eye(spec.interior_count)))
            assert dev <= 1e-12


class TestPoisson:
    def test_one_by_one(self):
        u = lat.solve_poisson(GridField(GridSpec(1, 2), np.array([8.0])))
        assert u.values == pytest.approx([1.0])

    def test_zero_rhs(self):
        u = lat.solve_poisson(GridField.zeros(GridSpec(2, 6)))
        assert np.all(u.values == 0.0)

    def test_eigenvector_rhs(self):
        spec = GridSpec(1, 8)
        basis = lat.eigen_basis(spec)
        for alpha in [(1,), (4,), (7,)]:
            rhs = GridField(spec, basis.basis_vector(alpha))
            u = lat.solve_poisson(rhs)
            assert u.values == pytest.approx(
                rhs.values / basis.eigenvalue(alpha), rel=1e-12
            )

    def test_roundtrip_and_sparse_agreement(self):
        rng = np.random.default_rng(13)
        for d, n in [(1, 64), (2, 12), (3, 6)]:
            spec = GridSpec(d, n)
            rhs = GridField(spec, rng.normal(size=spec.interior_count))
            u = lat.solve_poisson(rhs)
            back = lat.apply_operator(u).values
            assert np.max(np.abs(back - rhs.values)) <= 1e-9 * np.max(np.abs(rhs.values))
            direct = lat.solve_poisson_direct(rhs).values
            assert np.max(np.abs(u.values - direct)) <= 1e-10 * np.max(np.abs(direct))


def _successive_interp_3d(field: GridField, x: np.ndarray) -> float:
    """The displayed three-step construction, written out literally."""
    n = field.spec.n
    pad = field.padded()

    def node(i1, i2, i3):
        return pad[i1, i2, i3]

    k = [min(int(np.floor(x[j] * n)), n - 1) for j in range(3)]

    def z1(x1, i2, i3):
        lo = node(k[0], i2, i3)
        hi = node(k[0] + 1, i2, i3)
        return lo + n * (x1 - k[0] / n) * (hi - lo)

    def z2(x1, x2, i3):
        lo = z1(x1, k[1], i3)
        hi = z1(x1, k[1] + 1, i3)
        return lo + n * (x2 - k[1] / n) * (hi - lo)

    lo = z2(x[0], x[1], k[2])
    hi = z2(x[0], x[1], k[2] + 1)
    return lo + n * (x[2] - k[2] / n) * (hi - lo)


class TestInterpolation:
    def test_exact_at_nodes(self):
        rng = np.random.default_rng(14)
        for d, n in [(1, 5), (2, 4), (3, 3)]:
            spec = GridSpec(d, n)
            f = GridField(spec, rng.normal(size=spec.interior_count))
            pts = spec.interior_points()
            vals = lat.multilinear_extend(f, pts)
            assert vals == pytest.approx(f.values, abs=1e-14)

    def test_linear_between_boundary_and_node(self):
        f = GridField(GridSpec(1, 2), np.array([1.0]))
        assert lat.multilinear_extend(f, np.array([0.25])) == pytest.approx(0.5)

    def test_zero_on_boundary(self):
        rng = np.random.default_rng(15)
        spec = GridSpec(2, 4)
        f = GridField(spec, rng.normal(size=spec.interior_count))
        for x in ([0.0, 0.37], [1.0, 0.64], [0.5, 0.0], [0.81, 1.0]):
            assert lat.multilinear_extend(f, np.array(x)) == pytest.approx(0.0, abs=1e-15)

    def test_matches_displayed_3d_formula(self):
        rng = np.random.default_rng(16)
        spec = GridSpec(3, 4)
        f = GridField(spec, rng.normal(size=spec.interior_count))
        for _ in range(25):
            x = rng.random(3)
            assert lat.multilinear_extend(f, x) == pytest.approx(
                _successive_interp_3d(f, x), abs=1e-13
            )

    def test_outside_domain_rejected(self):
        f = GridField.zeros(GridSpec(1, 4))
        with pytest.raises(DomainError):
            lat.multilinear_extend(f, np.array([1.2]))
        with pytest.raises(DomainError):
            lat.multilinear_extend(f, np.array([-0.1]))


class TestFloorMap:
    def test_grid_floor(self):
        assert lat.floor_map(np.array([0.3]), 4) == pytest.approx([0.25])
        assert lat.floor_map(np.array([0.25]), 4) == pytest.approx([0.25])
        assert lat.floor_map(np.array([0.49, 0.51]), 2) == pytest.approx([0.0, 0.5])

    def test_outside_rejected(self):
        with pytest.raises(DomainError):
            lat.floor_map(np.array([1.5]), 4)


class TestGridSpec:
    def test_validation(self):
        with pytest.raises(DomainError):
            GridSpec(4, 4)
        with pytest.raises(DomainError):
            GridSpec(1, 1)

    def test_derived_quantities(self):
        spec = GridSpec(3, 5)
        assert spec.h * spec.n == 1.0
        assert spec.interior_count == 64
        assert spec.cell_count == 125
