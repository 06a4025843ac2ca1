"""Reflected stochastic solution on the lattice via Picard iteration.

For coefficients f, sigma and a fixed noise sample DW, the discrete reflected
problem couples the field u >= 0 and the reaction eta >= 0 through

    B u = f(x, u) + n^d sigma(x, u) DW + eta,    sum_k u_k eta_k = 0,

with B the lattice Dirichlet operator.  Starting from u = 0, each stage
solves the linear equation B V = f(u_prev) + n^d sigma(u_prev) DW and then
the obstacle problem B Z = eta, Z >= -V, <Z + V, eta> = 0, setting
u = V + Z; the iteration stops when the sup change falls below tolerance.
For Lipschitz coefficients with a small enough constant the map is a
contraction, which the smallness checker quantifies from the measured
squared L2 norms of the lattice kernels:

    lemma condition    2^(2p-1) L^p C^(p/2) + 2^(3p-2) c_p L^p (a B^(p/2) + C^(p/2)) < 1
    theorem condition  2^(3p-2) L^p C~^(p/2) + 2^(4p-3) c_p L^p (a B^(p/2) + C~^(p/2)) < 1

with C, C~ the sup over x of the squared L2 norms of the discrete and
interpolated-discrete kernels, p > d / (2 gamma(d, eps)), and c_p, a, B
user-supplied constants (the moment and continuity constants are not
derived here).  The checker is advisory: the solver runs regardless and a
violated contraction shows up in the recorded change history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from respde.greens import KernelKind, gamma_exponent, kernel_l2_norm_sq, kernel_values
from respde.lattice import (
    DomainError,
    GridField,
    GridSpec,
    apply_operator,
    multilinear_extend,
    solve_poisson,
)
from respde.noise import NoiseSample
from respde.obstacle import LcpProblem, solve_lcp

CoefficientFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class PicardConvergenceError(RuntimeError):
    """The two-step iteration did not settle; carries the sup-change history."""

    def __init__(self, message: str, history: tuple[float, ...]):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class Coefficient:
    """One coefficient function (x, u) -> value with its declared metadata."""

    fn: CoefficientFn
    lipschitz: float
    at_origin: float
    monotone: bool = False

    def __call__(self, pts: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(pts, u), dtype=np.float64)


@dataclass(frozen=True)
class CoefficientPair:
    """Drift f and diffusion sigma with joint Lipschitz/boundedness metadata.

    ``L1`` bounds the combined Lipschitz modulus of (f, sigma), ``L2`` their
    size at the origin; ``monotone_f`` records whether f is non-decreasing in
    its second argument.  The metadata is declared, not derived; see
    :func:`probe_coefficients` for a randomized spot check.
    """

    f: Coefficient
    sigma: Coefficient
    L1: float
    L2: float
    monotone_f: bool

    @classmethod
    def from_coefficients(cls, f: Coefficient, sigma: Coefficient) -> "CoefficientPair":
        # the assumption bounds the summed moduli, so the pair constant adds
        return cls(
            f=f,
            sigma=sigma,
            L1=f.lipschitz + sigma.lipschitz,
            L2=f.at_origin + sigma.at_origin,
            monotone_f=f.monotone,
        )


def probe_coefficients(
    pair: CoefficientPair, d: int, seed: int = 0, samples: int = 512
) -> dict[str, float | bool]:
    """Randomized spot check of the declared Lipschitz bound and monotonicity."""
    rng = np.random.default_rng(seed)
    x = rng.random((samples, d))
    u = rng.normal(0.0, 2.0, size=samples)
    v = rng.normal(0.0, 2.0, size=samples)
    du = np.abs(u - v) + 1e-30
    ratio = (
        np.abs(pair.f(x, u) - pair.f(x, v)) + np.abs(pair.sigma(x, u) - pair.sigma(x, v))
    ) / du
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    monotone_ok = bool(np.all(pair.f(x, hi) - pair.f(x, lo) >= -1e-12))
    return {
        "lipschitz_measured": float(np.max(ratio)),
        "lipschitz_ok": bool(np.max(ratio) <= pair.L1 * (1.0 + 1e-9) + 1e-12),
        "monotone_measured": monotone_ok,
        "monotone_ok": monotone_ok == pair.monotone_f or monotone_ok,
    }


@dataclass(frozen=True)
class SpdeSolution:
    """Converged pair (u, eta) for one noise sample, with solver diagnostics."""

    u: GridField
    eta: GridField
    noise: NoiseSample = field(repr=False)
    picard_iterations: int
    final_change: float
    residual: float  # sup norm of B u - f(u) - n^d sigma(u) DW - eta
    complementarity: float  # |sum_k u_k eta_k|
    change_history: tuple[float, ...] = field(repr=False, default=())


def picard_solve(
    coeffs: CoefficientPair,
    noise: NoiseSample,
    tol: float = 1e-8,
    max_iters: int = 200,
    lcp_tol: float = 1e-12,
    omega: float = 1.5,
    lcp_max_sweeps: int = 500_000,
) -> SpdeSolution:
    """Iterate linear solve + obstacle solve until the sup change is <= tol.

    Each stage warm-starts the obstacle solve from the previous stage's
    contact configuration.  Raises :class:`PicardConvergenceError` with the
    change history when ``max_iters`` is exhausted (the usual cause is a
    violated smallness condition).
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    spec = noise.spec
    pts = spec.interior_points()
    dw = noise.interior_increments()
    nd = float(spec.n**spec.d)
    u = np.zeros(spec.interior_count)
    z_prev: Optional[GridField] = None
    history: list[float] = []
    lcp_solution = None
    for iteration in range(1, max_iters + 1):
        rhs = coeffs.f(pts, u) + nd * coeffs.sigma(pts, u) * dw
        v = solve_poisson(GridField(spec, rhs))
        lcp_solution = solve_lcp(
            LcpProblem(spec, v),
            tol=lcp_tol,
            omega=omega,
            max_sweeps=lcp_max_sweeps,
            initial=z_prev,
        )
        u_new = v.values + lcp_solution.Z.values
        change = float(np.max(np.abs(u_new - u), initial=0.0))
        history.append(change)
        u = u_new
        z_prev = lcp_solution.Z
        if change <= tol:
            break
    else:
        raise PicardConvergenceError(
            f"no convergence to {tol} within {max_iters} iterations "
            f"(last change {history[-1]:.3e})",
            tuple(history),
        )
    u_field = GridField(spec, u)
    eta = lcp_solution.eta
    forcing = coeffs.f(pts, u) + nd * coeffs.sigma(pts, u) * dw
    residual = float(
        np.max(np.abs(apply_operator(u_field).values - forcing - eta.values), initial=0.0)
    )
    return SpdeSolution(
        u=u_field,
        eta=eta,
        noise=noise,
        picard_iterations=iteration,
        final_change=history[-1],
        residual=residual,
        complementarity=float(abs(np.dot(u, eta.values))),
        change_history=tuple(history),
    )


def assemble_continuous(sol: SpdeSolution) -> Callable[[np.ndarray], float | np.ndarray]:
    """The interpolated field: per-coordinate linear extension of u, zero on the boundary."""
    return lambda x: multilinear_extend(sol.u, x)


def continuous_from_kernel(
    sol: SpdeSolution, coeffs: CoefficientPair, x: np.ndarray
) -> float:
    """Evaluate the interpolated field through its kernel representation.

    The forcing terms are constant on lattice cells, so the integral against
    the interpolated-discrete kernel collapses to the exact cell sum
    sum_k K^n(x, x_k) [h^d (f_k + eta_k) + sigma_k DW_k]; at convergence this
    agrees with the interpolation path up to the Picard tolerance.
    """
    spec = sol.noise.spec
    pts = spec.interior_points()
    node_axes = (np.arange(1, spec.n) / spec.n,) * spec.d
    kvals = kernel_values(KernelKind.interp_discrete(), spec, np.asarray(x, float), node_axes)
    hd = spec.h**spec.d
    weights = (
        hd * (coeffs.f(pts, sol.u.values) + sol.eta.values)
        + coeffs.sigma(pts, sol.u.values) * sol.noise.interior_increments()
    )
    return float(np.dot(kvals.ravel(order="F"), weights))


@dataclass(frozen=True)
class SmallnessReport:
    """Evaluation of the contraction conditions at user-supplied constants."""

    p: float
    eps: float
    gamma: float
    c_p: float
    a: float
    b_holder: float
    lipschitz: float
    c_d: float  # measured sup_x of the discrete kernel's squared L2 norm
    c_tilde_d: float  # same for the interpolated-discrete kernel
    lemma_lhs: float
    theorem_lhs: float
    satisfied: bool

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "eps": self.eps,
            "gamma": self.gamma,
            "c_p": self.c_p,
            "a": self.a,
            "b_holder": self.b_holder,
            "lipschitz": self.lipschitz,
            "c_d": self.c_d,
            "c_tilde_d": self.c_tilde_d,
            "lemma_lhs": self.lemma_lhs,
            "theorem_lhs": self.theorem_lhs,
            "satisfied": self.satisfied,
        }


def check_smallness(
    coeffs: CoefficientPair,
    spec: GridSpec,
    p: float,
    c_p: float = 1.0,
    a: float = 1.0,
    b_holder: float = 1.0,
    eps: float = 0.01,
    samples: int = 40,
    seed: int = 7,
) -> SmallnessReport:
    """Measure the kernel norms and evaluate both contraction conditions.

    Advisory only; requires p > d / (2 gamma(d, eps)).
    """
    gamma = gamma_exponent(spec.d, eps)
    if p <= spec.d / (2.0 * gamma):
        raise DomainError(
            f"moment order p = {p} must exceed d / (2 gamma) = {spec.d / (2 * gamma):.3f}"
        )
    rng = np.random.default_rng(seed)
    probes = np.vstack([rng.random((samples, spec.d)), np.full((1, spec.d), 0.5)])
    c_d = max(
        kernel_l2_norm_sq(KernelKind.discrete(), spec, x, spec.n) for x in probes
    )
    c_tilde_d = max(
        kernel_l2_norm_sq(KernelKind.interp_discrete(), spec, x, spec.n) for x in probes
    )
    lip = coeffs.L1
    half_p = p / 2.0
    lemma_lhs = 2.0 ** (2 * p - 1) * lip**p * c_d**half_p + 2.0 ** (
        3 * p - 2
    ) * c_p * lip**p * (a * b_holder**half_p + c_d**half_p)
    theorem_lhs = 2.0 ** (3 * p - 2) * lip**p * c_tilde_d**half_p + 2.0 ** (
        4 * p - 3
    ) * c_p * lip**p * (a * b_holder**half_p + c_tilde_d**half_p)
    return SmallnessReport(
        p=float(p),
        eps=float(eps),
        gamma=float(gamma),
        c_p=float(c_p),
        a=float(a),
        b_holder=float(b_holder),
        lipschitz=float(lip),
        c_d=float(c_d),
        c_tilde_d=float(c_tilde_d),
        lemma_lhs=float(lemma_lhs),
        theorem_lhs=float(theorem_lhs),
        satisfied=bool(theorem_lhs < 1.0),
    )


# --- coefficient registry ---------------------------------------------------

def _affine(slope: float = 0.0, offset: float = 0.0) -> Coefficient:
    return Coefficient(
        fn=lambda pts, u: slope * u + offset,
        lipschitz=abs(slope),
        at_origin=abs(offset),
        monotone=slope >= 0.0,
    )


def _const(value: float = 0.0) -> Coefficient:
    return Coefficient(
        fn=lambda pts, u: np.full(np.shape(u), value, dtype=np.float64),
        lipschitz=0.0,
        at_origin=abs(value),
        monotone=True,
    )


def _bounded_slope(scale: float = 1.0, rate: float = 1.0) -> Coefficient:
    # scale * tanh(rate * u): Lipschitz scale*rate, saturating drift
    return Coefficient(
        fn=lambda pts, u: scale * np.tanh(rate * u),
        lipschitz=abs(scale * rate),
        at_origin=0.0,
        monotone=scale >= 0.0,
    )


COEFFICIENTS: dict[str, Callable[..., Coefficient]] = {
    "affine": _affine,
    "const": _const,
    "zero": lambda: _const(0.0),
    "tanh": _bounded_slope,
}


def make_coefficient(text: str) -> Coefficient:
    """Instantiate a registered coefficient from 'name[:key=val,...]'."""
    from respde.obstacle import parse_name_params

    name, params = parse_name_params(text)
    if name not in COEFFICIENTS:
        raise DomainError(f"unknown coefficient {name!r}; known: {sorted(COEFFICIENTS)}")
    return COEFFICIENTS[name](**params)


def make_coefficient_pair(f_text: str, sigma_text: str) -> CoefficientPair:
    return CoefficientPair.from_coefficients(
        make_coefficient(f_text), make_coefficient(sigma_text)
    )
