"""Lattice geometry and spectral tools for the Dirichlet Laplacian on (0,1)^d.

The unit cube, d in {1,2,3}, is discretized with mesh width h = 1/n.  Field
values live on the (n-1)^d interior points hi, i in {1,...,n-1}^d, stored as
flat vectors in the *natural ordering*

    k = i1 + (n-1)(i2-1) + ... + (n-1)^(d-1)(id-1),

i.e. the first coordinate varies fastest.  Boundary values are identically
zero (homogeneous Dirichlet) and never stored.

The second-order difference operator

    L f(x) = sum_j n^2 (f(x+h e_j) - 2 f(x) + f(x-h e_j)),   f = 0 off-grid,

equals n^2 A with A the usual (-2, 1) stencil matrix.  B := -n^2 A is
symmetric positive definite with the exact eigenpairs

    b_alpha = n^(-d/2) (phi_alpha(x))_{x in grid},
    phi_alpha(x) = prod_j sqrt(2) sin(alpha_j pi x_j),
    lambda_alpha = pi^2 sum_j alpha_j^2 c_{alpha_j},
    c_j = sin^2(j pi / 2n) / (j pi / 2n)^2,   4/pi^2 <= c_j <= 1,

for alpha in {1,...,n-1}^d.  Because the b_alpha are exactly the orthonormal
DST-I modes, B is inverted by a type-I discrete sine transform; a sparse
direct solve is kept alongside as an independent oracle.

All types are immutable after construction and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.fft
import scipy.sparse
import scipy.sparse.linalg


class DomainError(ValueError):
    """A point or index lies outside its admissible range."""


@dataclass(frozen=True)
class GridSpec:
    """Cubic lattice description: dimension d in {1,2,3} and resolution n >= 2."""

    d: int
    n: int

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise DomainError(f"resolution must be an integer >= 2, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def interior_count(self) -> int:
        return (self.n - 1) ** self.d

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return (self.n - 1,) * self.d

    @property
    def cell_count(self) -> int:
        return self.n**self.d

    @property
    def cells_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def interior_points(self) -> np.ndarray:
        """Coordinates of all interior points, shape (interior_count, d), natural order."""
        axes = [np.arange(1, self.n) / self.n] * self.d
        # first coordinate fastest: meshgrid with ij indexing, flatten Fortran-style
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=-1)


def natural_rank(i: Sequence[int], spec: GridSpec) -> int:
    """Rank (1-based) of the multi-index i in the natural ordering."""
    if len(i) != spec.d:
        raise DomainError(f"multi-index has {len(i)} components, expected {spec.d}")
    m = spec.n - 1
    k = 0
    for j in reversed(range(spec.d)):
        c = int(i[j])
        if not 1 <= c <= m:
            raise DomainError(f"component {c} outside 1..{m}")
        k = k * m + (c - 1)
    return k + 1


def unrank(k: int, spec: GridSpec) -> tuple[int, ...]:
    """Inverse of :func:`natural_rank`: the multi-index at rank k (1-based)."""
    m = spec.n - 1
    if not 1 <= k <= spec.interior_count:
        raise DomainError(f"rank {k} outside 1..{spec.interior_count}")
    rem = k - 1
    comps = []
    for _ in range(spec.d):
        comps.append(rem % m + 1)
        rem //= m
    return tuple(comps)


@dataclass(frozen=True)
class GridField:
    """Values on the interior lattice in natural-ordering layout.

    Boundary values are implicitly zero and not stored.  The value array is
    copied and frozen on construction.
    """

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.spec.interior_count,):
            raise DomainError(
                f"field length {vals.shape} does not match interior count "
                f"{self.spec.interior_count}"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridField":
        return cls(spec, np.zeros(spec.interior_count))

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "GridField":
        """Sample fn (vectorized over an (m, d) point array) at the interior points."""
        pts = spec.interior_points()
        return cls(spec, np.asarray(fn(pts), dtype=np.float64))

    @classmethod
    def from_array(cls, spec: GridSpec, arr: np.ndarray) -> "GridField":
        """Build from a d-dimensional array with axis j indexing coordinate j."""
        if arr.shape != spec.interior_shape:
            raise DomainError(f"array shape {arr.shape} != {spec.interior_shape}")
        return cls(spec, np.asarray(arr, dtype=np.float64).ravel(order="F"))

    def as_array(self) -> np.ndarray:
        """The values as a d-dimensional array, axis j indexing coordinate j."""
        return self.values.reshape(self.spec.interior_shape, order="F")

    def padded(self) -> np.ndarray:
        """Values embedded in an (n+1)^d array with the zero Dirichlet boundary."""
        out = np.zeros((self.spec.n + 1,) * self.spec.d)
        out[(slice(1, self.spec.n),) * self.spec.d] = self.as_array()
        return out

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def apply_discrete_laplacian(f: GridField) -> GridField:
    """Apply the lattice Laplacian L = n^2 A with zero extension off the grid."""
    spec = f.spec
    pad = f.padded()
    inner = (slice(1, spec.n),) * spec.d
    out = -2.0 * spec.d * pad[inner]
    for axis in range(spec.d):
        lo = tuple(slice(0, spec.n - 1) if j == axis else slice(1, spec.n) for j in range(spec.d))
        hi = tuple(slice(2, spec.n + 1) if j == axis else slice(1, spec.n) for j in range(spec.d))
        out = out + pad[lo] + pad[hi]
    return GridField.from_array(spec, (spec.n**2) * out)


def apply_operator(f: GridField) -> GridField:
    """Apply B = -n^2 A, the positive-definite form of the lattice Laplacian."""
    lap = apply_discrete_laplacian(f)
    return GridField(f.spec, -lap.values)


@lru_cache(maxsize=64)
def operator_matrix(spec: GridSpec) -> scipy.sparse.csr_matrix:
    """Sparse B = -n^2 A in natural ordering (test oracle for the spectral path)."""
    m = spec.n - 1
    one = scipy.sparse.diags(
        [2.0 * np.ones(m), -np.ones(m - 1), -np.ones(m - 1)], [0, 1, -1], format="csr"
    )
    eye = scipy.sparse.identity(m, format="csr")
    # natural ordering: coordinate 1 fastest, so axis-1 blocks are innermost
    mats = []
    for axis in range(spec.d):
        factors = [one if j == axis else eye for j in range(spec.d)]
        acc = factors[0]
        for fac in factors[1:]:
            acc = scipy.sparse.kron(fac, acc, format="csr")
        mats.append(acc)
    total = mats[0]
    for mat in mats[1:]:
        total = total + mat
    return (spec.n**2 * total).tocsr()


def axis_frequency_factors(n: int) -> np.ndarray:
    """c_j = sin^2(j pi / 2n) / (j pi / 2n)^2 for j = 1..n-1."""
    j = np.arange(1, n)
    t = j * np.pi / (2 * n)
    return np.sin(t) ** 2 / t**2


@lru_cache(maxsize=64)
def _eigenvalue_axis(n: int) -> np.ndarray:
    j = np.arange(1, n)
    return np.pi**2 * j**2 * axis_frequency_factors(n)


@lru_cache(maxsize=64)
def eigenvalue_tensor(spec: GridSpec) -> np.ndarray:
    """lambda_alpha on the full index set, shape (n-1,)^d, axis j = alpha_j."""
    ax = _eigenvalue_axis(spec.n)
    lam = np.zeros(spec.interior_shape)
    for axis in range(spec.d):
        shape = [1] * spec.d
        shape[axis] = spec.n - 1
        lam = lam + ax.reshape(shape)
    lam.setflags(write=False)
    return lam


@dataclass(frozen=True)
class EigenBasis:
    """Exact eigen-decomposition of B = -n^2 A on the interior lattice.

    Eigenvectors are indexed by frequency multi-indices alpha in {1,..,n-1}^d
    and stored implicitly through the product structure; ``basis_vector``
    materializes a single mode in natural ordering.
    """

    spec: GridSpec
    axis_factors: np.ndarray = field(repr=False)  # c_j, j = 1..n-1
    axis_eigenvalues: np.ndarray = field(repr=False)  # pi^2 j^2 c_j

    def eigenvalue(self, alpha: Sequence[int]) -> float:
        k = natural_rank(alpha, self.spec)  # validates the range
        del k
        return float(sum(self.axis_eigenvalues[a - 1] for a in alpha))

    @property
    def eigenvalues(self) -> np.ndarray:
        """All eigenvalues as a (n-1,)^d tensor, axis j indexing alpha_j."""
        return eigenvalue_tensor(self.spec)

    def mode_axis_values(self, freq: int) -> np.ndarray:
        """sqrt(2) sin(freq pi i / n) at the interior nodes i/n of one axis."""
        i = np.arange(1, self.spec.n)
        return np.sqrt(2.0) * np.sin(freq * np.pi * i / self.spec.n)

    def basis_vector(self, alpha: Sequence[int]) -> np.ndarray:
        """b_alpha = n^(-d/2) phi_alpha on the lattice, flat natural order."""
        natural_rank(alpha, self.spec)
        axes = [self.mode_axis_values(a) for a in alpha]
        arr = axes[0]
        for ax in axes[1:]:
            arr = np.multiply.outer(arr, ax)  # axis order matches coordinates
        return self.spec.n ** (-self.spec.d / 2.0) * arr.ravel(order="F")

    def phi(self, alpha: Sequence[int], x: np.ndarray) -> np.ndarray:
        """Continuous eigenfunction phi_alpha at points x of shape (m, d) or (d,)."""
        pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.ones(pts.shape[0])
        for j, a in enumerate(alpha):
            out = out * np.sqrt(2.0) * np.sin(a * np.pi * pts[:, j])
        return out if np.ndim(x) > 1 else out[0]

    def all_frequencies(self) -> Iterable[tuple[int, ...]]:
        """All alpha in natural-ranking order of the frequency index."""
        for k in range(1, self.spec.interior_count + 1):
            yield unrank(k, self.spec)


def eigen_basis(spec: GridSpec) -> EigenBasis:
    c = axis_frequency_factors(spec.n)
    c.setflags(write=False)
    lam = _eigenvalue_axis(spec.n).copy()
    lam.setflags(write=False)
    return EigenBasis(spec, c, lam)


def _dst(arr: np.ndarray) -> np.ndarray:
    # DST-I with ortho norm is self-inverse and its modes are exactly b_alpha
    return scipy.fft.dstn(arr, type=1, norm="ortho")


def solve_poisson(rhs: GridField) -> GridField:
    """Solve B u = rhs by expansion in the sine eigenbasis (canonical path)."""
    coeff = _dst(rhs.as_array())
    u = _dst(coeff / eigenvalue_tensor(rhs.spec))
    return GridField.from_array(rhs.spec, u)


def solve_poisson_direct(rhs: GridField) -> GridField:
    """Solve B u = rhs by sparse factorization (oracle for the spectral path)."""
    u = scipy.sparse.linalg.spsolve(operator_matrix(rhs.spec).tocsc(), rhs.values)
    return GridField(rhs.spec, u)


def floor_map(x: np.ndarray, n: int) -> np.ndarray:
    """Componentwise grid floor: t -> j/n for t in [j/n, (j+1)/n); 1 maps to 1."""
    pts = np.asarray(x, dtype=np.float64)
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise DomainError("floor_map expects points in [0,1]^d")
    return np.floor(pts * n) / n


def multilinear_extend(f: GridField, x: np.ndarray) -> float | np.ndarray:
    """Successive per-coordinate linear interpolation of f, zero on the boundary.

    Exact at lattice points.  Accepts a single point of shape (d,) or a batch
    of shape (m, d); returns a float or an (m,) array accordingly.
    """
    spec = f.spec
    single = np.ndim(x) == 1
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if pts.shape[1] != spec.d:
        raise DomainError(f"points have {pts.shape[1]} coordinates, expected {spec.d}")
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise DomainError("interpolation point outside [0,1]^d")
    pad = f.padded()
    scaled = pts * spec.n
    base = np.minimum(scaled.astype(np.int64), spec.n - 1)
    theta = scaled - base
    out = np.zeros(pts.shape[0])
    for corner in range(2**spec.d):
        offs = [(corner >> j) & 1 for j in range(spec.d)]
        weight = np.ones(pts.shape[0])
        idx = []
        for j, off in enumerate(offs):
            weight = weight * (theta[:, j] if off else 1.0 - theta[:, j])
            idx.append(base[:, j] + off)
        out += weight * pad[tuple(idx)]
    return float(out[0]) if single else out


def interpolate_axis_modes(freqs: np.ndarray, coords: np.ndarray, n: int) -> np.ndarray:
    """Piecewise-linear interpolants of sqrt(2) sin(a pi t) on the 1/n grid.

    Returns an array of shape (len(freqs), len(coords)): entry (a, t) is the
    linear interpolation between the grid samples bracketing t.
    """
    t = np.asarray(coords, dtype=np.float64)
    j = np.minimum(np.floor(t * n).astype(np.int64), n - 1)
    theta = t * n - j
    a = np.asarray(freqs, dtype=np.float64)[:, None]
    left = np.sqrt(2.0) * np.sin(a * np.pi * j / n)
    right = np.sqrt(2.0) * np.sin(a * np.pi * (j + 1) / n)
    return left + (right - left) * theta
