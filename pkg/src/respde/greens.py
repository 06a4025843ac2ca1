"""Green kernels of the Dirichlet Laplacian and their lattice counterparts.

Four kernels share one spectral shape, sum_alpha w_alpha(x) psi_alpha(y) / lambda_alpha:

  discrete           K_n(x,y)  = sum_{alpha in I_n}  phi_alpha(grid x) phi_alpha(grid y) / lambda_alpha
  interp-discrete    K^n(x,y)  = sum_{alpha in I_n}  phi^n_alpha(x)    phi_alpha(grid y) / lambda_alpha
  continuous         K(x,y)    = sum_{alpha}         phi_alpha(x)      phi_alpha(y)      / (pi^2 |alpha|^2)
  interp-continuous  K'(x,y)   = sum_{alpha}         phi^n_alpha(x)    phi_alpha(y)      / (pi^2 |alpha|^2)

where "grid" is the componentwise floor to the 1/n lattice, phi_alpha is the
product sine mode and phi^n_alpha its per-coordinate piecewise-linear
interpolant on the lattice.  The discrete kinds sum over exactly the
(n-1)^d lattice frequencies; the continuous kinds are truncated at a
per-axis mode count M >= n.  K_n at lattice points recovers the inverse of
the lattice operator: K_n(x_i, x_j) = n^d (B^{-1})_{ij}.

In one dimension the continuous kernel has the closed form
(x ^ y)(1 - (x v y)), kept here as an oracle for the truncated series.

L2 quantities in the second argument use the midpoint rule on a
quadrature_n^d grid; for the discrete kinds the integrand is piecewise
constant in y, so any quadrature_n that is a multiple of n is exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from respde.lattice import (
    DomainError,
    GridSpec,
    eigenvalue_tensor,
    floor_map,
    interpolate_axis_modes,
)


class KernelFamily(enum.Enum):
    DISCRETE = "discrete"
    INTERP_DISCRETE = "interp-discrete"
    CONTINUOUS = "continuous"
    INTERP_CONTINUOUS = "interp-continuous"


@dataclass(frozen=True)
class KernelKind:
    """A kernel family plus, for the continuous families, a truncation level.

    ``truncation`` is the per-axis mode count of the series; it must be at
    least the grid resolution and is ignored by the discrete families, whose
    mode set is exactly the lattice frequency set.
    """

    family: KernelFamily
    truncation: int | None = None

    @classmethod
    def discrete(cls) -> "KernelKind":
        return cls(KernelFamily.DISCRETE)

    @classmethod
    def interp_discrete(cls) -> "KernelKind":
        return cls(KernelFamily.INTERP_DISCRETE)

    @classmethod
    def continuous(cls, truncation: int | None = None) -> "KernelKind":
        return cls(KernelFamily.CONTINUOUS, truncation)

    @classmethod
    def interp_continuous(cls, truncation: int | None = None) -> "KernelKind":
        return cls(KernelFamily.INTERP_CONTINUOUS, truncation)

    @property
    def is_continuous_family(self) -> bool:
        return self.family in (KernelFamily.CONTINUOUS, KernelFamily.INTERP_CONTINUOUS)

    def modes_per_axis(self, spec: GridSpec) -> int:
        if not self.is_continuous_family:
            return spec.n - 1
        m = self.truncation if self.truncation is not None else default_truncation(spec)
        if m < spec.n:
            raise DomainError(f"truncation {m} below resolution {spec.n}")
        return m


def default_truncation(spec: GridSpec) -> int:
    """Per-axis mode count for the truncated continuous kernels."""
    if spec.d <= 2:
        return max(64, 4 * spec.n)
    return max(32, 2 * spec.n)


def gamma_exponent(d: int, eps: float) -> float:
    """Holder exponent of the kernels' L2 modulus of continuity."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if d == 1:
        return 0.5
    if d == 2:
        return 0.5 - eps
    if d == 3:
        return 0.25 - eps
    raise DomainError(f"dimension {d} unsupported")


def sigma_exponent(d: int, eps: float) -> float:
    """Rate exponent of the L2 distance between K and its interpolated lattice kernel."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if d == 1:
        return 1.0 - eps
    if d == 2:
        return 0.5 - eps
    if d == 3:
        return 0.2 - eps
    raise DomainError(f"dimension {d} unsupported")


@dataclass(frozen=True)
class HolderEstimate:
    """The (gamma, sigma) exponent pair for dimension d at margin eps."""

    d: int
    eps: float
    gamma: float
    sigma: float

    @classmethod
    def for_dimension(cls, d: int, eps: float) -> "HolderEstimate":
        return cls(d, eps, gamma_exponent(d, eps), sigma_exponent(d, eps))


@lru_cache(maxsize=32)
def _continuous_lambda(d: int, modes: int) -> np.ndarray:
    a2 = np.arange(1, modes + 1, dtype=np.float64) ** 2
    lam = np.zeros((modes,) * d)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = modes
        lam = lam + a2.reshape(shape)
    lam = np.pi**2 * lam
    lam.setflags(write=False)
    return lam


def _sine_modes(freqs: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Matrix sqrt(2) sin(a pi t), shape (len(freqs), len(coords))."""
    return np.sqrt(2.0) * np.sin(np.outer(freqs, coords) * np.pi)


def _check_unit_cube(pts: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(pts, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{what} outside [0,1]")
    return arr


def kernel_values(
    kind: KernelKind, spec: GridSpec, x: np.ndarray, y_axes: tuple[np.ndarray, ...]
) -> np.ndarray:
    """Kernel values at a fixed x against the tensor grid prod_j y_axes[j].

    Returns an array of shape (len(y_axes[0]), ..., len(y_axes[d-1])).
    """
    x = _check_unit_cube(np.atleast_1d(x), "x")
    if x.shape != (spec.d,):
        raise DomainError(f"x has shape {x.shape}, expected ({spec.d},)")
    if len(y_axes) != spec.d:
        raise DomainError(f"{len(y_axes)} y axes for dimension {spec.d}")
    modes = kind.modes_per_axis(spec)
    freqs = np.arange(1, modes + 1, dtype=np.float64)

    if kind.is_continuous_family:
        lam = _continuous_lambda(spec.d, modes)
    else:
        lam = eigenvalue_tensor(spec)

    if kind.family is KernelFamily.DISCRETE:
        xg = floor_map(x, spec.n)
        x_factors = [_sine_modes(freqs, xg[j : j + 1])[:, 0] for j in range(spec.d)]
    elif kind.family is KernelFamily.CONTINUOUS:
        x_factors = [_sine_modes(freqs, x[j : j + 1])[:, 0] for j in range(spec.d)]
    else:  # interpolated in x
        x_factors = [
            interpolate_axis_modes(freqs, x[j : j + 1], spec.n)[:, 0] for j in range(spec.d)
        ]

    weights = x_factors[0]
    for fac in x_factors[1:]:
        weights = np.multiply.outer(weights, fac)
    weights = weights / lam

    out = weights
    for j in range(spec.d):
        yj = _check_unit_cube(y_axes[j], "y")
        if kind.is_continuous_family:
            s = _sine_modes(freqs, yj)
        else:
            s = _sine_modes(freqs, floor_map(yj, spec.n))
        out = np.tensordot(out, s, axes=([0], [0]))
    return out


def eval_kernel(kind: KernelKind, spec: GridSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Pointwise kernel value G(x, y)."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.shape != (spec.d,):
        raise DomainError(f"y has shape {y.shape}, expected ({spec.d},)")
    axes = tuple(y[j : j + 1] for j in range(spec.d))
    return float(kernel_values(kind, spec, x, axes).ravel()[0])


def _midpoints(quadrature_n: int) -> np.ndarray:
    return (np.arange(quadrature_n) + 0.5) / quadrature_n


def kernel_l2_norm_sq(
    kind: KernelKind, spec: GridSpec, x: np.ndarray, quadrature_n: int
) -> float:
    """Midpoint-rule value of the squared L2 norm of G(x, .) over the cube."""
    if quadrature_n < spec.n:
        raise DomainError("quadrature grid must be at least as fine as the lattice")
    axes = (_midpoints(quadrature_n),) * spec.d
    vals = kernel_values(kind, spec, x, axes)
    return float(np.sum(vals**2) / quadrature_n**spec.d)


def kernel_l2_difference(
    kind_a: KernelKind,
    kind_b: KernelKind,
    spec: GridSpec,
    x: np.ndarray,
    quadrature_n: int,
) -> float:
    """Midpoint-rule value of the squared L2 distance between two kernels at x."""
    if quadrature_n < spec.n:
        raise DomainError("quadrature grid must be at least as fine as the lattice")
    axes = (_midpoints(quadrature_n),) * spec.d
    va = kernel_values(kind_a, spec, x, axes)
    vb = kernel_values(kind_b, spec, x, axes)
    return float(np.sum((va - vb) ** 2) / quadrature_n**spec.d)


def green_closed_form_1d(x: float, y: float) -> float:
    """One-dimensional Dirichlet Green function (x ^ y)(1 - (x v y))."""
    lo, hi = (x, y) if x <= y else (y, x)
    return lo * (1.0 - hi)


def discrete_l2_norm_sq_exact(spec: GridSpec, x: np.ndarray) -> float:
    """Exact squared L2 norm of K_n(x, .) via orthonormality of the grid modes.

    The y-slices phi_alpha(grid y) have unit L2 norm and are mutually
    orthogonal, so the integral collapses to
    sum_alpha phi_alpha(grid x)^2 / lambda_alpha^2.
    """
    x = _check_unit_cube(np.atleast_1d(x), "x")
    n = spec.n
    freqs = np.arange(1, n, dtype=np.float64)
    xg = floor_map(x, n)
    factors = [_sine_modes(freqs, xg[j : j + 1])[:, 0] for j in range(spec.d)]
    num = factors[0]
    for fac in factors[1:]:
        num = np.multiply.outer(num, fac)
    lam = eigenvalue_tensor(spec)
    return float(np.sum((num / lam) ** 2))


def green_table_rows(
    spec: GridSpec, axis_coords: np.ndarray, truncation: int | None = None
) -> tuple[list[str], np.ndarray]:
    """Tabulate all four kernels on all pairs from a tensor evaluation grid.

    ``axis_coords`` is the per-axis coordinate list; the grid points are its
    d-fold tensor product.  Returns (header, rows) with one row per (x, y)
    pair and columns x, y, K, Kn, Kprime, Kcaret_n.
    """
    coords = _check_unit_cube(axis_coords, "grid coordinate")
    mesh = np.meshgrid(*([coords] * spec.d), indexing="ij")
    points = np.stack([m.ravel(order="F") for m in mesh], axis=-1)
    kinds = [
        KernelKind.continuous(truncation),
        KernelKind.discrete(),
        KernelKind.interp_continuous(truncation),
        KernelKind.interp_discrete(),
    ]
    axes = (coords,) * spec.d
    per_kind = []
    for kind in kinds:
        vals = [kernel_values(kind, spec, x, axes).ravel(order="F") for x in points]
        per_kind.append(np.asarray(vals))  # shape (npts, npts)
    npts = points.shape[0]
    rows = []
    for ix in range(npts):
        for iy in range(npts):
            rows.append(
                np.concatenate(
                    [points[ix], points[iy], [pk[ix, iy] for pk in per_kind]]
                )
            )
    header = (
        [f"x{j+1}" for j in range(spec.d)]
        + [f"y{j+1}" for j in range(spec.d)]
        + ["K", "Kn", "Kprime", "Kcaret_n"]
    )
    return header, np.asarray(rows)
