"""Registered property checks backing the property-suite runner.

Each property exercises one invariant from a module's contract at configured
sample counts and returns a verdict with diagnostic details.  Properties
marked non-asserted are heuristic probes: their verdicts are reported but do
not gate the suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from respde import greens, lattice, noise, obstacle, spde
from respde.lattice import GridField, GridSpec


@dataclass(frozen=True)
class PropertyContext:
    seed: int = 2718
    scale: float = 1.0  # multiplies sample counts; < 1 for quick runs

    def count(self, base: int, floor: int = 4) -> int:
        return max(floor, int(round(base * self.scale)))

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(salt,)))


@dataclass
class PropertyResult:
    name: str
    passed: bool
    asserted: bool
    details: dict = field(default_factory=dict)


CheckFn = Callable[[PropertyContext], tuple[bool, dict]]
_REGISTRY: list[tuple[str, bool, CheckFn]] = []


def _register(name: str, asserted: bool = True):
    def deco(fn: CheckFn) -> CheckFn:
        _REGISTRY.append((name, asserted, fn))
        return fn

    return deco


def registered_names() -> list[str]:
    return [name for name, _, _ in _REGISTRY]


def run_properties(
    ctx: PropertyContext | None = None, name_filter: str | None = None
) -> list[PropertyResult]:
    ctx = ctx or PropertyContext()
    results = []
    for name, asserted, fn in _REGISTRY:
        if name_filter and name_filter not in name:
            continue
        try:
            passed, details = fn(ctx)
        except Exception as exc:  # a crash is a failed property, not a crashed suite
            passed, details = False, {"error": f"{type(exc).__name__}: {exc}"}
        results.append(PropertyResult(name, bool(passed), asserted, details))
    return results


# --- lattice ----------------------------------------------------------------

@_register("lattice/ordering-bijection")
def _check_ordering(ctx: PropertyContext):
    for d in (1, 2, 3):
        for n in (2, 3, 5, 8, 16):
            spec = GridSpec(d, n)
            for k in range(1, spec.interior_count + 1):
                if lattice.natural_rank(lattice.unrank(k, spec), spec) != k:
                    return False, {"d": d, "n": n, "k": k}
    return True, {"checked_n": [2, 3, 5, 8, 16]}


@_register("lattice/operator-symmetry")
def _check_symmetry(ctx: PropertyContext):
    rng = ctx.rng(1)
    worst = 0.0
    for d, n in [(1, 16), (2, 9), (3, 5)]:
        spec = GridSpec(d, n)
        for _ in range(ctx.count(20)):
            f = GridField(spec, rng.normal(size=spec.interior_count))
            g = GridField(spec, rng.normal(size=spec.interior_count))
            af = lattice.apply_discrete_laplacian(f).values
            ag = lattice.apply_discrete_laplacian(g).values
            lhs, rhs = np.dot(af, g.values), np.dot(f.values, ag)
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst <= 1e-12, {"max_relative_asymmetry": worst}


def sign_pairing(b: np.ndarray, spec: GridSpec) -> float:
    """<b^+, A b> with A the raw stencil matrix (lattice Laplacian / n^2)."""
    f = GridField(spec, b)
    ab = lattice.apply_discrete_laplacian(f).values / spec.n**2
    return float(np.dot(np.maximum(b, 0.0), ab))


@_register("lattice/sign-pairing")
def _check_sign_pairing(ctx: PropertyContext):
    rng = ctx.rng(2)
    worst = -np.inf
    for d, n in itertools.product((1, 2, 3), (4, 8, 16)):
        spec = GridSpec(d, n)
        draws = rng.normal(size=(ctx.count(1000), spec.interior_count))
        for b in draws:
            worst = max(worst, sign_pairing(b, spec))
    return worst <= 1e-12, {"max_pairing": worst}


@_register("lattice/eigen-residual")
def _check_eigen_residual(ctx: PropertyContext):
    worst = 0.0
    for d, n in itertools.product((1, 2, 3), (2, 4, 8, 16)):
        spec = GridSpec(d, n)
        basis = lattice.eigen_basis(spec)
        for alpha in basis.all_frequencies():
            b = GridField(spec, basis.basis_vector(alpha))
            resid = lattice.apply_operator(b).values - basis.eigenvalue(alpha) * b.values
            worst = max(worst, float(np.max(np.abs(resid))))
    return worst <= 1e-9, {"max_residual": worst}


def gram_deviation(spec: GridSpec) -> float:
    """Max entrywise deviation of the eigenvector Gram matrix from identity.

    The basis is a tensor product of per-axis sine systems, so the Gram
    matrix factors axis by axis; the maximum deviation is assembled exactly
    from the per-axis Gram without materializing the full matrix.
    """
    basis = lattice.eigen_basis(spec)
    m = spec.n - 1
    v = np.empty((m, m))
    for a in range(1, m + 1):
        v[:, a - 1] = basis.mode_axis_values(a) / np.sqrt(spec.n)
    g1 = v.T @ v
    diag = np.diag(g1)
    dev_diag = max(abs(diag.max() ** spec.d - 1.0), abs(diag.min() ** spec.d - 1.0))
    off = np.abs(g1 - np.diag(diag))
    off_max = float(off.max()) if m > 1 else 0.0
    any_max = max(float(np.abs(g1).max()), 0.0)
    dev_off = off_max * any_max ** (spec.d - 1)
    return max(dev_diag, dev_off)


@_register("lattice/orthonormality")
def _check_orthonormality(ctx: PropertyContext):
    worst = 0.0
    for d, n in itertools.product((1, 2, 3), (2, 4, 8, 16)):
        worst = max(worst, gram_deviation(GridSpec(d, n)))
    return worst <= 1e-10, {"max_gram_deviation": worst}


@_register("lattice/spectral-bounds")
def _check_spectral_bounds(ctx: PropertyContext):
    lo, hi = np.inf, -np.inf
    for n in range(2, 1025):
        c = lattice.axis_frequency_factors(n)
        lo, hi = min(lo, float(c.min())), max(hi, float(c.max()))
    ok = lo >= 4.0 / np.pi**2 - 1e-15 and hi <= 1.0 + 1e-15
    return ok, {"min_c": lo, "max_c": hi, "lower_bound": 4.0 / np.pi**2}


@_register("lattice/poisson-roundtrip")
def _check_poisson(ctx: PropertyContext):
    rng = ctx.rng(3)
    worst_round, worst_agree = 0.0, 0.0
    for d, n in [(1, 64), (2, 16), (3, 8)]:
        spec = GridSpec(d, n)
        for _ in range(ctx.count(8)):
            rhs = GridField(spec, rng.normal(size=spec.interior_count))
            u = lattice.solve_poisson(rhs)
            back = lattice.apply_operator(u).values
            scale = float(np.max(np.abs(rhs.values)))
            worst_round = max(worst_round, float(np.max(np.abs(back - rhs.values))) / scale)
            direct = lattice.solve_poisson_direct(rhs).values
            uscale = float(np.max(np.abs(direct)))
            worst_agree = max(worst_agree, float(np.max(np.abs(u.values - direct))) / uscale)
    return worst_round <= 1e-9 and worst_agree <= 1e-10, {
        "max_roundtrip_rel": worst_round,
        "max_spectral_vs_sparse_rel": worst_agree,
    }


# --- greens -----------------------------------------------------------------

@_register("greens/representation-identity")
def _check_representation(ctx: PropertyContext):
    rng = ctx.rng(4)
    worst = 0.0
    for d, n in [(1, 16), (2, 8), (3, 4)]:
        spec = GridSpec(d, n)
        eta = GridField(spec, rng.normal(size=spec.interior_count))
        u = lattice.solve_poisson(eta).values
        cell_eta = np.zeros(spec.cells_shape)
        cell_eta[(slice(1, n),) * d] = eta.as_array()
        mid = (np.arange(n) + 0.5) / n
        pts = spec.interior_points()
        scale = float(np.max(np.abs(u)))
        for k in rng.choice(spec.interior_count, size=min(10, spec.interior_count), replace=False):
            kv = greens.kernel_values(greens.KernelKind.discrete(), spec, pts[k], (mid,) * d)
            integral = float(np.sum(kv * cell_eta)) / n**d
            worst = max(worst, abs(integral - u[k]) / scale)
    return worst <= 1e-9, {"max_relative_error": worst}


@_register("greens/uniform-l2-bound")
def _check_l2_bound(ctx: PropertyContext):
    rng = ctx.rng(5)
    ratios = {}
    ok = True
    for d in (1, 2, 3):
        xs = rng.random((ctx.count(50), d))
        sups = []
        for n in (4, 8, 16, 32):
            spec = GridSpec(d, n)
            sups.append(
                max(greens.discrete_l2_norm_sq_exact(spec, x) for x in xs)
            )
        rr = [sups[i + 1] / sups[i] for i in range(len(sups) - 1)]
        ratios[f"d{d}"] = rr
        ok = ok and all(0.5 <= r <= 2.0 for r in rr)
    return ok, {"consecutive_ratios": ratios}


@_register("greens/discrete-kernel-symmetry")
def _check_kn_symmetry(ctx: PropertyContext):
    rng = ctx.rng(6)
    worst = 0.0
    for d, n in [(1, 8), (2, 6), (3, 4)]:
        spec = GridSpec(d, n)
        pts = spec.interior_points()
        for _ in range(ctx.count(20)):
            i, j = rng.integers(0, spec.interior_count, size=2)
            a = greens.eval_kernel(greens.KernelKind.discrete(), spec, pts[i], pts[j])
            b = greens.eval_kernel(greens.KernelKind.discrete(), spec, pts[j], pts[i])
            worst = max(worst, abs(a - b))
    return worst <= 1e-12, {"max_asymmetry": worst}


@_register("greens/interp-kernel-continuity")
def _check_interp_continuity(ctx: PropertyContext):
    rng = ctx.rng(7)
    worst = 0.0
    delta = 1e-9
    for d, n in [(1, 8), (2, 6)]:
        spec = GridSpec(d, n)
        kind = greens.KernelKind.interp_discrete()
        y = rng.random(d) * 0.8 + 0.1
        for _ in range(ctx.count(10)):
            i = rng.integers(1, n)
            axis = rng.integers(0, d)
            x = rng.random(d) * 0.8 + 0.1
            x[axis] = i / n
            xl, xr = x.copy(), x.copy()
            xl[axis] -= delta
            xr[axis] += delta
            jump = abs(
                greens.eval_kernel(kind, spec, xl, y) - greens.eval_kernel(kind, spec, xr, y)
            )
            worst = max(worst, jump)
    return worst <= 1e-8, {"max_jump": worst, "offset": delta}


# --- noise ------------------------------------------------------------------

@_register("noise/determinism")
def _check_noise_determinism(ctx: PropertyContext):
    for d, n in [(1, 8), (2, 4), (3, 3)]:
        spec = GridSpec(d, n)
        a = noise.sample_noise(spec, ctx.seed)
        b = noise.sample_noise(spec, ctx.seed)
        if not np.array_equal(a.increments, b.increments):
            return False, {"d": d, "n": n}
        c = noise.sample_noise(spec, ctx.seed + 1)
        if np.array_equal(a.increments, c.increments):
            return False, {"d": d, "n": n, "issue": "seed collision"}
    return True, {}


@_register("noise/coarsening-consistency")
def _check_coarsening(ctx: PropertyContext):
    worst = 0.0
    for d, n in [(1, 8), (2, 4), (3, 2)]:
        spec = GridSpec(d, n)
        parent = noise.sample_noise(spec, ctx.seed + 13)
        child = noise.refine_noise(parent)
        sums = noise.coarsen_increments(child)
        worst = max(worst, float(np.max(np.abs(sums - parent.increments))))
        if child.parent is not parent:
            return False, {"issue": "lineage lost"}
    return worst <= 1e-14, {"max_sum_mismatch": worst}


@_register("noise/increment-statistics")
def _check_noise_stats(ctx: PropertyContext):
    spec = GridSpec(1, 4)
    reps = ctx.count(20_000)
    batch = noise.sample_noise_batch(spec, ctx.seed + 29, reps)
    target = spec.h**spec.d
    mean = batch.mean(axis=0)
    se_mean = np.sqrt(target / reps)
    var = batch.var(axis=0, ddof=1)
    se_var = target * np.sqrt(2.0 / (reps - 1))
    cov = np.cov(batch.T)
    off = np.abs(cov - np.diag(np.diag(cov))).max()
    ok = (
        bool(np.all(np.abs(mean) <= 3 * se_mean))
        and bool(np.all(np.abs(var - target) <= 3 * se_var))
        and off <= 3 * target / np.sqrt(reps)
    )
    return ok, {
        "replicates": reps,
        "max_abs_mean": float(np.max(np.abs(mean))),
        "max_var_offset": float(np.max(np.abs(var - target))),
        "max_cross_cov": float(off),
    }


# --- obstacle ---------------------------------------------------------------

@_register("obstacle/comparison-lemma")
def _check_comparison(ctx: PropertyContext):
    rng = ctx.rng(8)
    worst_excess = -np.inf
    pairs = ctx.count(200)
    for d, n in itertools.product((1, 2, 3), (4, 8)):
        spec = GridSpec(d, n)
        for _ in range(pairs):
            v1 = rng.normal(size=spec.interior_count)
            v2 = v1 + rng.normal(scale=0.5, size=spec.interior_count)
            s1 = obstacle.solve_lcp(obstacle.LcpProblem(spec, GridField(spec, v1)), tol=1e-12)
            s2 = obstacle.solve_lcp(obstacle.LcpProblem(spec, GridField(spec, v2)), tol=1e-12)
            dz = float(np.max(np.abs(s1.Z.values - s2.Z.values)))
            dv = float(np.max(np.abs(v1 - v2)))
            worst_excess = max(worst_excess, dz - dv)
    return worst_excess <= 1e-8, {"max_excess": worst_excess, "pairs_per_case": pairs}


@_register("obstacle/uniqueness-random-starts")
def _check_uniqueness(ctx: PropertyContext):
    rng = ctx.rng(9)
    spec = GridSpec(2, 6)
    problem = obstacle.LcpProblem(spec, GridField(spec, rng.normal(size=spec.interior_count)))
    base = obstacle.solve_lcp(problem, tol=1e-12)
    worst = 0.0
    for _ in range(ctx.count(10)):
        start = GridField(spec, rng.normal(scale=2.0, size=spec.interior_count))
        sol = obstacle.solve_lcp(problem, tol=1e-12, initial=start)
        worst = max(
            worst,
            float(np.max(np.abs(sol.Z.values - base.Z.values))),
            float(np.max(np.abs(sol.eta.values - base.eta.values))),
        )
    return worst <= 1e-7, {"max_spread": worst}


@_register("obstacle/oracle-equivalence")
def _check_oracle(ctx: PropertyContext):
    rng = ctx.rng(10)
    worst = 0.0
    cases = [(1, 9), (1, 13), (2, 4), (3, 3)]
    for d, n in cases:
        spec = GridSpec(d, n)
        for _ in range(ctx.count(12)):
            v = GridField(spec, rng.normal(size=spec.interior_count))
            problem = obstacle.LcpProblem(spec, v)
            a = obstacle.solve_lcp(problem, tol=1e-13)
            b = obstacle.solve_lcp_bruteforce(problem)
            worst = max(worst, float(np.max(np.abs(a.Z.values - b.Z.values))))
    return worst <= 1e-9, {"max_gap": worst, "cases": cases}


@_register("obstacle/penalization-consistency")
def _check_penalization(ctx: PropertyContext):
    spec = GridSpec(1, 64)
    v = obstacle.make_barrier("neg_sine")
    problem = obstacle.LcpProblem(spec, GridField.from_function(spec, v))
    exact = obstacle.solve_lcp(problem, tol=1e-13)
    gaps = []
    for eps in (1e-2, 1e-3, 1e-4):
        z = obstacle.solve_penalized(problem, eps)
        gaps.append(float(np.max(np.abs(z.values - exact.Z.values))))
    monotone = all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
    return monotone, {"gaps": gaps}


@_register("obstacle/interpolation-sup-identity")
def _check_sup_identity(ctx: PropertyContext):
    rng = ctx.rng(11)
    worst = 0.0
    for d, n in [(1, 8), (2, 5), (3, 3)]:
        spec = GridSpec(d, n)
        f1 = GridField(spec, rng.normal(size=spec.interior_count))
        f2 = GridField(spec, rng.normal(size=spec.interior_count))
        node_max = float(np.max(np.abs(f1.values - f2.values)))
        pts = np.vstack([rng.random((ctx.count(2000), d)), spec.interior_points()])
        diff = lattice.multilinear_extend(
            f1, pts
        ) - lattice.multilinear_extend(f2, pts)
        dense_sup = float(np.max(np.abs(diff)))
        if dense_sup > node_max + 1e-12:
            return False, {"d": d, "n": n, "dense_sup": dense_sup, "node_max": node_max}
        worst = max(worst, abs(dense_sup - node_max))
    return worst <= 1e-12, {"max_identity_gap": worst}


# --- spde -------------------------------------------------------------------

@_register("spde/solution-validity")
def _check_spde_validity(ctx: PropertyContext):
    pair = spde.make_coefficient_pair("affine:slope=-0.1,offset=-1", "const:value=0.1")
    spec = GridSpec(1, 32)
    tol = 1e-8
    worst = {"neg_u": 0.0, "neg_eta": 0.0, "comp": 0.0, "residual": 0.0}
    for r in range(ctx.count(10)):
        sol = spde.picard_solve(pair, noise.sample_noise(spec, ctx.seed + r), tol=tol)
        worst["neg_u"] = max(worst["neg_u"], -float(sol.u.values.min()))
        worst["neg_eta"] = max(worst["neg_eta"], -float(sol.eta.values.min()))
        comp_cap = tol * spec.interior_count * (1.0 + sol.u.sup_norm() * sol.eta.sup_norm())
        worst["comp"] = max(worst["comp"], sol.complementarity / comp_cap)
        worst["residual"] = max(worst["residual"], sol.residual)
    ok = (
        worst["neg_u"] <= tol
        and worst["neg_eta"] <= tol
        and worst["comp"] <= 1.0
        and worst["residual"] <= 10 * tol
    )
    return ok, worst


@_register("spde/picard-contraction")
def _check_contraction(ctx: PropertyContext):
    pair = spde.make_coefficient_pair("affine:slope=-0.45,offset=-2", "const:value=0.3")
    spec = GridSpec(1, 24)
    report = spde.check_smallness(pair, spec, p=2, eps=0.01)
    sol = spde.picard_solve(pair, noise.sample_noise(spec, ctx.seed + 5), tol=1e-12)
    hist = sol.change_history
    tail = hist[-6:]
    ratios = [tail[i + 1] / tail[i] for i in range(len(tail) - 1) if tail[i] > 0]
    ok = len(hist) >= 4 and all(r <= 0.95 for r in ratios)
    return ok, {
        "smallness_satisfied": report.satisfied,
        "theorem_lhs": report.theorem_lhs,
        "iterations": len(hist),
        "tail_ratios": ratios,
    }


def _random_fourier_forcing(d: int, rng: np.random.Generator) -> Callable:
    modes = [tuple(rng.integers(1, 4, size=d)) for _ in range(3)]
    coefs = rng.normal(scale=2.0, size=3)

    def forcing(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.zeros(pts.shape[0])
        for coef, alpha in zip(coefs, modes):
            term = np.ones(pts.shape[0]) * coef
            for j, a in enumerate(alpha):
                term = term * np.sin(a * np.pi * pts[:, j])
            out += term
        return out

    return forcing


@_register("spde/deterministic-reduction")
def _check_reduction(ctx: PropertyContext):
    rng = ctx.rng(12)
    worst = 0.0
    for d, n in [(1, 16), (2, 8)]:
        spec = GridSpec(d, n)
        for _ in range(ctx.count(5)):
            forcing = _random_fourier_forcing(d, rng)
            pair = spde.CoefficientPair(
                f=spde.Coefficient(lambda pts, u, g=forcing: g(pts), 0.0, 1.0, True),
                sigma=spde.Coefficient(lambda pts, u: np.zeros_like(u), 0.0, 0.0, True),
                L1=0.0,
                L2=1.0,
                monotone_f=True,
            )
            sol = spde.picard_solve(pair, noise.sample_noise(spec, ctx.seed), tol=1e-10)
            v = lattice.solve_poisson(GridField.from_function(spec, forcing))
            det = obstacle.solve_lcp(obstacle.LcpProblem(spec, v), tol=1e-12)
            worst = max(
                worst, float(np.max(np.abs(sol.u.values - (v.values + det.Z.values))))
            )
    return worst <= 1e-8, {"max_gap": worst}


@_register("spde/monotonicity-probe", asserted=False)
def _check_monotonicity(ctx: PropertyContext):
    # heuristic comparison probe, reported only: f non-decreasing in u, and a
    # doubled nonnegative forcing should not decrease the solution anywhere
    rng = ctx.rng(13)
    spec = GridSpec(1, 16)
    fixed = noise.sample_noise(spec, ctx.seed + 3)
    worst = 0.0
    for _ in range(ctx.count(5)):
        g = np.abs(rng.normal(size=spec.interior_count))

        def make_pair(scale: float) -> spde.CoefficientPair:
            bump = scale * g

            def drift(pts, u, b=bump):
                return 0.05 * np.tanh(u) - 1.0 + b

            return spde.CoefficientPair(
                f=spde.Coefficient(drift, 0.05, 1.0, True),
                sigma=spde.Coefficient(lambda pts, u: np.full_like(u, 0.1), 0.0, 0.1, True),
                L1=0.05,
                L2=1.1,
                monotone_f=True,
            )

        u1 = spde.picard_solve(make_pair(1.0), fixed, tol=1e-10).u.values
        u2 = spde.picard_solve(make_pair(2.0), fixed, tol=1e-10).u.values
        worst = max(worst, float(np.max(u1 - u2)))
    return worst <= 1e-8, {"max_decrease": worst}


# --- harness ----------------------------------------------------------------

@_register("harness/experiment-determinism")
def _check_experiment_determinism(ctx: PropertyContext):
    import json

    from respde import harness

    cfg = harness.ExperimentConfig(
        kind="stochastic-convergence",
        d=1,
        levels=(4, 8),
        reference_n=16,
        replicates=4,
        p=2.0,
        seed=ctx.seed,
        f="affine:slope=-0.1,offset=-1",
        sigma="const:value=0.1",
    )
    payloads = []
    for _ in range(2):
        report = harness.run_stochastic_convergence(cfg)
        payloads.append(
            json.dumps(report.report_dict(), sort_keys=True).encode()
        )
    return payloads[0] == payloads[1], {"bytes": len(payloads[0])}


@_register("harness/coupling-correctness")
def _check_coupling(ctx: PropertyContext):
    chain = noise.refinement_chain(GridSpec(1, 4), ctx.seed + 19, 32)
    worst = 0.0
    for coarse, fine in zip(chain, chain[1:]):
        if fine.parent is not coarse:
            return False, {"issue": "chain member is not the refinement parent"}
        worst = max(
            worst,
            float(np.max(np.abs(noise.coarsen_increments(fine) - coarse.increments))),
        )
    return worst <= 1e-14, {"max_sum_mismatch": worst, "chain": [s.spec.n for s in chain]}


@_register("harness/deterministic-slope")
def _check_det_slope(ctx: PropertyContext):
    from respde import harness

    cfg = harness.ExperimentConfig(
        kind="deterministic-convergence",
        d=1,
        levels=(8, 16, 32),
        reference_n=128,
        barrier="neg_sine",
        seed=ctx.seed,
    )
    report = harness.run_deterministic_convergence(cfg)
    ok = report.slope is not None and report.slope < 0 and report.monotone
    return ok, {"slope": report.slope, "monotone": report.monotone}
