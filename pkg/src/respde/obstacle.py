"""The discrete one-sided obstacle problem as a linear complementarity problem.

Given a barrier field V on the interior lattice, solve

    B Z = eta,    Z >= -V,    eta >= 0,    <Z + V, eta> = 0,

with B = -n^2 A the lattice Dirichlet operator.  In w = Z + V this is the
standard LCP  w >= 0, B w - B V >= 0, <w, B w - B V> = 0, whose matrix is a
symmetric positive-definite M-matrix, so projected SOR with natural-ordering
sweeps converges for any relaxation 0 < omega < 2 and the solution is unique.

Two independent solvers back the canonical one:

  * exhaustive active-set enumeration, exact on small instances;
  * the penalization equation B z = (1/eps)(z + V)^-, solved by a semismooth
    Newton (active set) iteration, whose solutions approach Z as eps -> 0.

Continuous approximations are assembled from the grid solution by
per-coordinate linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numba
import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from respde.lattice import (
    DomainError,
    GridField,
    GridSpec,
    apply_operator,
    multilinear_extend,
    operator_matrix,
)


class LcpConvergenceError(RuntimeError):
    """Projected SOR ran out of sweeps; carries the residual state reached."""

    def __init__(self, message: str, sweeps: int, last_change: float):
        super().__init__(message)
        self.sweeps = sweeps
        self.last_change = last_change


class PenalizationError(RuntimeError):
    """The penalized equation's active-set iteration failed to settle."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class LcpProblem:
    """Constraint data: the solution must satisfy Z >= -barrier."""

    spec: GridSpec
    barrier: GridField

    def __post_init__(self) -> None:
        if self.barrier.spec != self.spec:
            raise DomainError("barrier field lives on a different grid")
        if not np.all(np.isfinite(self.barrier.values)):
            raise DomainError("barrier must be finite")


@dataclass(frozen=True)
class LcpResiduals:
    max_violation: float  # max of (-(Z+V))^+, constraint slack
    max_negative_eta: float  # max of (-eta)^+
    complementarity: float  # |<Z+V, eta>|


@dataclass(frozen=True)
class LcpSolution:
    Z: GridField
    eta: GridField
    residuals: LcpResiduals
    sweeps: int
    last_change: float


@numba.njit(cache=True)
def _psor_1d(w, q, n2, omega, tol, max_sweeps):
    m = w.shape[0] - 2
    diag = 2.0 * n2
    change = 0.0
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i1 in range(1, m + 1):
            lhs = q[i1] + n2 * (w[i1 - 1] + w[i1 + 1])
            wn = (1.0 - omega) * w[i1] + omega * lhs / diag
            if wn < 0.0:
                wn = 0.0
            dc = abs(wn - w[i1])
            if dc > change:
                change = dc
            w[i1] = wn
        if change <= tol:
            return sweep, change
    return max_sweeps, change


@numba.njit(cache=True)
def _psor_2d(w, q, n2, omega, tol, max_sweeps):
    m = w.shape[0] - 2
    diag = 4.0 * n2
    change = 0.0
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i2 in range(1, m + 1):
            for i1 in range(1, m + 1):
                lhs = q[i1, i2] + n2 * (
                    w[i1 - 1, i2] + w[i1 + 1, i2] + w[i1, i2 - 1] + w[i1, i2 + 1]
                )
                wn = (1.0 - omega) * w[i1, i2] + omega * lhs / diag
                if wn < 0.0:
                    wn = 0.0
                dc = abs(wn - w[i1, i2])
                if dc > change:
                    change = dc
                w[i1, i2] = wn
        if change <= tol:
            return sweep, change
    return max_sweeps, change


@numba.njit(cache=True)
def _psor_3d(w, q, n2, omega, tol, max_sweeps):
    m = w.shape[0] - 2
    diag = 6.0 * n2
    change = 0.0
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i3 in range(1, m + 1):
            for i2 in range(1, m + 1):
                for i1 in range(1, m + 1):
                    lhs = q[i1, i2, i3] + n2 * (
                        w[i1 - 1, i2, i3]
                        + w[i1 + 1, i2, i3]
                        + w[i1, i2 - 1, i3]
                        + w[i1, i2 + 1, i3]
                        + w[i1, i2, i3 - 1]
                        + w[i1, i2, i3 + 1]
                    )
                    wn = (1.0 - omega) * w[i1, i2, i3] + omega * lhs / diag
                    if wn < 0.0:
                        wn = 0.0
                    dc = abs(wn - w[i1, i2, i3])
                    if dc > change:
                        change = dc
                    w[i1, i2, i3] = wn
        if change <= tol:
            return sweep, change
    return max_sweeps, change


_PSOR = {1: _psor_1d, 2: _psor_2d, 3: _psor_3d}


def optimal_relaxation(spec: GridSpec) -> float:
    """The classical SOR optimum 2 / (1 + sin(pi h)) for the lattice operator."""
    return 2.0 / (1.0 + np.sin(np.pi / spec.n))


def _assemble_solution(
    problem: LcpProblem, w_pad: np.ndarray, sweeps: int, last_change: float
) -> LcpSolution:
    spec = problem.spec
    inner = (slice(1, spec.n),) * spec.d
    w = w_pad[inner].ravel(order="F")
    Z = GridField(spec, w - problem.barrier.values)
    eta = apply_operator(Z)
    residuals = LcpResiduals(
        max_violation=float(max(0.0, -w.min(initial=0.0))),
        max_negative_eta=float(max(0.0, -eta.values.min(initial=0.0))),
        complementarity=float(abs(np.dot(w, eta.values))),
    )
    return LcpSolution(Z, eta, residuals, sweeps, last_change)


def solve_lcp(
    problem: LcpProblem,
    tol: float = 1e-10,
    max_sweeps: int = 500_000,
    omega: float = 1.5,
    initial: Optional[GridField] = None,
) -> LcpSolution:
    """Projected SOR in natural-ordering sweeps; stops when the sup change <= tol.

    ``initial`` warm-starts from a previous Z.  Raises
    :class:`LcpConvergenceError` when the sweep budget is exhausted.
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    if not 0.0 < omega < 2.0:
        raise DomainError("relaxation must lie in (0, 2)")
    spec = problem.spec
    q_pad = apply_operator(problem.barrier).padded()
    if initial is not None:
        if initial.spec != spec:
            raise DomainError("warm start lives on a different grid")
        start = np.maximum(initial.values + problem.barrier.values, 0.0)
    else:
        start = np.maximum(problem.barrier.values, 0.0)
    w_pad = GridField(spec, start).padded()
    sweeps, last_change = _PSOR[spec.d](
        w_pad, q_pad, float(spec.n**2), float(omega), float(tol), int(max_sweeps)
    )
    if last_change > tol:
        raise LcpConvergenceError(
            f"projected SOR did not reach {tol} in {max_sweeps} sweeps "
            f"(last change {last_change:.3e})",
            sweeps,
            float(last_change),
        )
    return _assemble_solution(problem, w_pad, int(sweeps), float(last_change))


def solve_lcp_bruteforce(problem: LcpProblem, feas_tol: float = 1e-11) -> LcpSolution:
    """Exhaustive active-set enumeration; exact oracle for small instances.

    Tries every contact set A, solves the reduced linear system with
    Z = -V on A and eta = 0 off A, and returns the first feasible
    configuration (the solution is unique; under degeneracy the least
    infeasible configuration is returned, which then coincides with it).
    """
    spec = problem.spec
    count = spec.interior_count
    if count > 20:
        raise DomainError("enumeration oracle is limited to 2^20 active sets")
    B = operator_matrix(spec).toarray()
    V = problem.barrier.values
    scale = 1.0 + float(np.max(np.abs(V))) * float(np.max(np.abs(B)))
    best = None
    best_viol = np.inf
    for mask in range(2**count):
        active = np.array([(mask >> i) & 1 for i in range(count)], dtype=bool)
        Z = np.zeros(count)
        Z[active] = -V[active]
        inactive = ~active
        if inactive.any():
            sub = B[np.ix_(inactive, inactive)]
            rhs = -B[np.ix_(inactive, active)] @ Z[active] if active.any() else np.zeros(
                inactive.sum()
            )
            Z[inactive] = np.linalg.solve(sub, rhs)
        eta = B @ Z
        viol = max(
            float(np.max(-(Z + V), initial=0.0)),
            float(np.max(-eta[active], initial=0.0)) if active.any() else 0.0,
        )
        if viol <= feas_tol * scale:
            best, best_viol = (Z, eta), viol
            break
        if viol < best_viol:
            best, best_viol = (Z, eta), viol
    Zf = GridField(spec, best[0])
    etaf = GridField(spec, best[1])
    w = best[0] + V
    residuals = LcpResiduals(
        max_violation=float(max(0.0, -w.min(initial=0.0))),
        max_negative_eta=float(max(0.0, -best[1].min(initial=0.0))),
        complementarity=float(abs(np.dot(w, best[1]))),
    )
    return LcpSolution(Zf, etaf, residuals, sweeps=0, last_change=best_viol)


def solve_penalized(
    problem: LcpProblem,
    epsilon: float,
    tol: float = 1e-12,
    max_iters: int = 200,
) -> GridField:
    """Solve B z = (1/eps)(z + V)^- by active-set (semismooth Newton) iteration.

    Independent oracle for :func:`solve_lcp`: z^eps increases to the LCP
    solution Z as eps decreases to zero.
    """
    if epsilon <= 0:
        raise DomainError("penalty parameter must be positive")
    spec = problem.spec
    B = operator_matrix(spec).tocsc()
    V = problem.barrier.values
    count = spec.interior_count
    z = np.zeros(count)
    trace: list[float] = []
    active = z + V < 0.0
    for _ in range(max_iters):
        mat = B + scipy.sparse.diags(active / epsilon, format="csc")
        z = scipy.sparse.linalg.spsolve(mat, -(active * V) / epsilon)
        residual = float(
            np.max(np.abs(B @ z - np.maximum(-(z + V), 0.0) / epsilon))
        )
        trace.append(residual)
        new_active = z + V < 0.0
        scale = 1.0 + float(np.max(np.abs(z))) / epsilon
        if np.array_equal(new_active, active) and residual <= tol * scale:
            return GridField(spec, z)
        active = new_active
    raise PenalizationError(
        f"active set did not settle within {max_iters} iterations", trace
    )


@dataclass(frozen=True)
class DeterministicSolution:
    """Grid solution of the obstacle problem plus its continuous extensions."""

    Z: GridField
    eta: GridField
    residuals: LcpResiduals

    def z(self, x: np.ndarray) -> float | np.ndarray:
        return multilinear_extend(self.Z, x)

    def eta_extension(self, x: np.ndarray) -> float | np.ndarray:
        return multilinear_extend(self.eta, x)


def _boundary_probe_points(d: int, per_face: int = 16) -> np.ndarray:
    rng = np.random.default_rng(20_240_517)
    pts = []
    for axis in range(d):
        for side in (0.0, 1.0):
            p = rng.random((per_face, d))
            p[:, axis] = side
            pts.append(p)
    pts.append(np.zeros((1, d)))
    pts.append(np.ones((1, d)))
    return np.vstack(pts)


def deterministic_scheme(
    v: Callable[[np.ndarray], np.ndarray],
    spec: GridSpec,
    tol: float = 1e-10,
    omega: float = 1.5,
    max_sweeps: int = 500_000,
    boundary_tol: float = 1e-6,
) -> DeterministicSolution:
    """Sample the continuous barrier, solve the LCP, return interpolated fields.

    ``v`` must vanish on the boundary (checked at probe points to
    ``boundary_tol``).
    """
    probe = np.abs(np.asarray(v(_boundary_probe_points(spec.d))))
    if probe.max() > boundary_tol:
        raise DomainError(
            f"barrier is not zero on the boundary (max {probe.max():.2e})"
        )
    V = GridField.from_function(spec, v)
    sol = solve_lcp(LcpProblem(spec, V), tol=tol, omega=omega, max_sweeps=max_sweeps)
    return DeterministicSolution(sol.Z, sol.eta, sol.residuals)


def second_derivative_sup(
    v: Callable[[np.ndarray], np.ndarray], d: int, fine_n: int | None = None
) -> float:
    """max_j sup |d^2 v / dx_j^2|, estimated by central differences on a fine grid."""
    if fine_n is None:
        fine_n = {1: 4096, 2: 256, 3: 48}[d]
    h = 1.0 / fine_n
    axes = [np.arange(1, fine_n) / fine_n] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    worst = 0.0
    for axis in range(d):
        e = np.zeros(d)
        e[axis] = h
        second = (v(pts + e) - 2.0 * v(pts) + v(pts - e)) / h**2
        worst = max(worst, float(np.max(np.abs(second))))
    return worst


@dataclass(frozen=True)
class EtaBoundReport:
    max_eta: float
    second_derivative_bound: float  # 2 d ||v||_2
    satisfied: bool


def eta_smooth_bound_check(
    v: Callable[[np.ndarray], np.ndarray],
    spec: GridSpec,
    tol_factor: float = 0.05,
    lcp_tol: float = 1e-11,
    omega: float = 1.5,
) -> EtaBoundReport:
    """Check max eta <= 2 d ||v||_2 (1 + tol_factor) for a twice-differentiable barrier."""
    sol = deterministic_scheme(v, spec, tol=lcp_tol, omega=omega)
    bound = 2.0 * spec.d * second_derivative_sup(v, spec.d)
    max_eta = float(np.max(sol.eta.values, initial=0.0))
    return EtaBoundReport(max_eta, bound, max_eta <= bound * (1.0 + tol_factor))


# --- barrier registry -------------------------------------------------------

def _product(pts: np.ndarray, factor: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    out = np.ones(pts.shape[0])
    for j in range(pts.shape[1]):
        out = out * factor(pts[:, j])
    return out


def _neg_sine(amp: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    return lambda pts: -amp * _product(np.atleast_2d(pts), lambda t: np.sin(np.pi * t))


def _neg_sine_plus(amp: float = 1.0, shift: float = 0.5) -> Callable[[np.ndarray], np.ndarray]:
    base = _neg_sine(amp)
    return lambda pts: base(pts) + shift


def _neg_parabola(amp: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    return lambda pts: -amp * _product(np.atleast_2d(pts), lambda t: t * (1.0 - t))


def _pyramid(amp: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    # merely continuous: kinked tent barrier, zero on the boundary
    return lambda pts: -amp * _product(
        np.atleast_2d(pts), lambda t: 1.0 - np.abs(2.0 * t - 1.0)
    )


def _nonneg_sine(amp: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    return lambda pts: amp * _product(np.atleast_2d(pts), lambda t: np.sin(np.pi * t))


BARRIERS: dict[str, Callable[..., Callable[[np.ndarray], np.ndarray]]] = {
    "neg_sine": _neg_sine,
    "neg_sine_plus": _neg_sine_plus,
    "neg_parabola": _neg_parabola,
    "pyramid": _pyramid,
    "nonneg_sine": _nonneg_sine,
}


def parse_name_params(text: str) -> tuple[str, dict[str, float]]:
    """Parse 'name' or 'name:key=val,key=val' into (name, params)."""
    name, _, tail = text.partition(":")
    params: dict[str, float] = {}
    if tail:
        for piece in tail.split(","):
            key, _, val = piece.partition("=")
            if not val:
                raise DomainError(f"malformed parameter {piece!r}")
            params[key.strip()] = float(val)
    return name.strip(), params


def make_barrier(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Instantiate a registered barrier from 'name[:key=val,...]'."""
    name, params = parse_name_params(text)
    if name not in BARRIERS:
        raise DomainError(f"unknown barrier {name!r}; known: {sorted(BARRIERS)}")
    return BARRIERS[name](**params)
