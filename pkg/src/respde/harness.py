"""Experiment orchestration: refinement studies, property suite, file outputs.

Convergence is assessed against the finest computed level: the limit field
has no closed form, so each study solves the same problem on a ladder of
resolutions and measures sup distances to the reference level on the
reference lattice net (the interpolants are multilinear, so cell suprema are
attained at the finest common nodes).  Stochastic studies couple every level
to one Brownian-sheet path per replicate by sampling the coarsest level and
refining conditionally up to the reference resolution.

Every run is a pure function of (config, seed): reports and error tables are
byte-identical across re-runs.  Wall-clock timings therefore live in the run
manifest, never in the report itself.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

import respde
from respde import io as rio
from respde import properties
from respde.greens import green_table_rows
from respde.lattice import DomainError, GridSpec, multilinear_extend
from respde.noise import refinement_chain
from respde.obstacle import (
    LcpConvergenceError,
    deterministic_scheme,
    make_barrier,
    optimal_relaxation,
)
from respde.spde import PicardConvergenceError, make_coefficient_pair, picard_solve

DEFAULT_MOMENT_ORDER = {1: 2.0, 2: 6.0, 3: 8.0}
KINDS = ("deterministic-convergence", "stochastic-convergence", "green-table", "property-suite")
ZERO_FLOOR = 1e-14  # metrics below this count as exactly converged


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    d: int = 1
    levels: tuple[int, ...] = ()
    reference_n: int = 0
    replicates: int = 1
    p: float | None = None
    seed: int = 0
    barrier: str | None = None
    f: str | None = None
    sigma: str | None = None
    tol: float = 1e-8
    lcp_tol: float = 1e-12
    omega: float | str = "auto"
    out_dir: str | None = None
    grid_points: int = 7
    truncation: int | None = None
    name_filter: str | None = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        object.__setattr__(self, "levels", tuple(int(n) for n in self.levels))
        if self.kind.endswith("convergence"):
            if not self.levels:
                raise DomainError("convergence study needs a level list")
            for a, b in zip(self.levels, self.levels[1:]):
                if b <= a or b % a:
                    raise DomainError("levels must be strictly increasing, each dividing the next")
            if self.reference_n <= self.levels[-1] or self.reference_n % self.levels[-1]:
                raise DomainError("reference resolution must be a proper multiple of the last level")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if self.p is not None and self.p < 1:
            raise DomainError("moment order must be >= 1")
        if self.kind == "stochastic-convergence":
            base = self.levels[0]
            for n in (*self.levels, self.reference_n):
                ratio = n // base
                if base * ratio != n or ratio & (ratio - 1):
                    raise DomainError(
                        "coupled-noise levels must be the coarsest level times powers of two"
                    )
            if not self.f or not self.sigma:
                raise DomainError("stochastic study needs coefficient names")
        if self.kind == "deterministic-convergence" and not self.barrier:
            raise DomainError("deterministic study needs a barrier name")

    @property
    def moment_order(self) -> float:
        return self.p if self.p is not None else DEFAULT_MOMENT_ORDER[self.d]

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        if "levels" in obj:
            obj["levels"] = tuple(obj["levels"])
        return cls(**obj)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        obj = asdict(self)
        obj["levels"] = list(self.levels)
        return obj


def _omega_for(cfg: ExperimentConfig, spec: GridSpec) -> float:
    if cfg.omega == "auto":
        return optimal_relaxation(spec)
    return float(cfg.omega)


@dataclass(frozen=True)
class LevelStats:
    n: int
    sup_errors: tuple[float, ...]
    mean_power_error: float
    standard_error: float
    wall_time: float


@dataclass(frozen=True)
class ConvergenceReport:
    kind: str
    d: int
    reference_n: int
    p: float
    seed: int
    levels: tuple[LevelStats, ...]
    monotone: bool
    monotone_beyond_se: Optional[bool]
    slope: Optional[float]
    failures: tuple[dict, ...] = field(default_factory=tuple)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.kind == "stochastic-convergence":
            return bool(self.monotone_beyond_se)
        return self.monotone

    def report_dict(self) -> dict:
        # deterministic payload only; timings go to the manifest
        return {
            "kind": self.kind,
            "d": self.d,
            "reference_n": self.reference_n,
            "p": self.p,
            "seed": self.seed,
            "config": self.config,
            "levels": [
                {
                    "n": ls.n,
                    "sup_errors": list(ls.sup_errors),
                    "mean_power_error": ls.mean_power_error,
                    "standard_error": ls.standard_error,
                }
                for ls in self.levels
            ],
            "monotone": self.monotone,
            "monotone_beyond_se": self.monotone_beyond_se,
            "slope": self.slope,
            "failures": list(self.failures),
            "passed": self.passed,
        }

    def error_rows(self) -> list[tuple[int, int, float]]:
        rows = []
        for ls in self.levels:
            for r, err in enumerate(ls.sup_errors):
                rows.append((ls.n, r, err))
        return rows

    def timings(self) -> dict:
        return {str(ls.n): ls.wall_time for ls in self.levels}


def _metrics(levels: tuple[LevelStats, ...]) -> tuple[bool, Optional[bool], Optional[float]]:
    means = np.array([ls.mean_power_error for ls in levels])
    ses = np.array([ls.standard_error for ls in levels])
    if np.all(means <= ZERO_FLOOR):
        return True, True, 0.0
    monotone = bool(np.all(np.diff(means) < 0))
    beyond = bool(
        np.all(means[:-1] - means[1:] > np.sqrt(ses[:-1] ** 2 + ses[1:] ** 2))
    )
    if np.any(means <= 0):
        slope = None
    else:
        ns = np.array([ls.n for ls in levels], dtype=float)
        slope = float(np.polyfit(np.log(ns), np.log(means), 1)[0])
    return monotone, beyond, slope


def run_deterministic_convergence(cfg: ExperimentConfig) -> ConvergenceReport:
    if cfg.kind != "deterministic-convergence":
        raise DomainError(f"config kind is {cfg.kind}")
    barrier = make_barrier(cfg.barrier)
    p = cfg.moment_order
    ref_spec = GridSpec(cfg.d, cfg.reference_n)
    t0 = time.perf_counter()
    ref = deterministic_scheme(
        barrier, ref_spec, tol=cfg.lcp_tol, omega=_omega_for(cfg, ref_spec)
    )
    ref_time = time.perf_counter() - t0
    net = ref_spec.interior_points()
    stats = []
    for n in cfg.levels:
        spec = GridSpec(cfg.d, n)
        t0 = time.perf_counter()
        sol = deterministic_scheme(barrier, spec, tol=cfg.lcp_tol, omega=_omega_for(cfg, spec))
        err = float(np.max(np.abs(multilinear_extend(sol.Z, net) - ref.Z.values)))
        stats.append(
            LevelStats(
                n=n,
                sup_errors=(err,),
                mean_power_error=err**p,
                standard_error=0.0,
                wall_time=time.perf_counter() - t0,
            )
        )
    stats.append(
        LevelStats(cfg.reference_n, (), 0.0, 0.0, ref_time)
    )  # timing row only
    levels = tuple(stats[:-1])
    monotone, beyond, slope = _metrics(levels)
    return ConvergenceReport(
        kind=cfg.kind,
        d=cfg.d,
        reference_n=cfg.reference_n,
        p=p,
        seed=cfg.seed,
        levels=tuple([*levels, stats[-1]]),
        monotone=monotone,
        monotone_beyond_se=None,
        slope=slope,
        config=cfg.to_dict(),
    )


def run_stochastic_convergence(cfg: ExperimentConfig) -> ConvergenceReport:
    if cfg.kind != "stochastic-convergence":
        raise DomainError(f"config kind is {cfg.kind}")
    pair = make_coefficient_pair(cfg.f, cfg.sigma)
    p = cfg.moment_order
    ref_spec = GridSpec(cfg.d, cfg.reference_n)
    net = ref_spec.interior_points()
    seeds = [int(s) for s in np.random.SeedSequence(cfg.seed).generate_state(cfg.replicates, np.uint64)]
    errors: dict[int, list[float]] = {n: [] for n in cfg.levels}
    wall: dict[int, float] = {n: 0.0 for n in (*cfg.levels, cfg.reference_n)}
    failures: list[dict] = []
    for r, seed_r in enumerate(seeds):
        chain = refinement_chain(GridSpec(cfg.d, cfg.levels[0]), seed_r, cfg.reference_n)
        by_n = {s.spec.n: s for s in chain}
        try:
            t0 = time.perf_counter()
            ref_sol = picard_solve(
                pair,
                by_n[cfg.reference_n],
                tol=cfg.tol,
                lcp_tol=cfg.lcp_tol,
                omega=_omega_for(cfg, ref_spec),
            )
            wall[cfg.reference_n] += time.perf_counter() - t0
            level_errs = {}
            for n in cfg.levels:
                spec = GridSpec(cfg.d, n)
                t0 = time.perf_counter()
                sol = picard_solve(
                    pair,
                    by_n[n],
                    tol=cfg.tol,
                    lcp_tol=cfg.lcp_tol,
                    omega=_omega_for(cfg, spec),
                )
                level_errs[n] = float(
                    np.max(np.abs(multilinear_extend(sol.u, net) - ref_sol.u.values))
                )
                wall[n] += time.perf_counter() - t0
        except (PicardConvergenceError, LcpConvergenceError) as exc:
            failures.append({"replicate": r, "seed": seed_r, "error": str(exc)})
            continue
        for n, err in level_errs.items():
            errors[n].append(err)
    if len(failures) > 0.05 * cfg.replicates:
        raise HarnessError(
            f"{len(failures)} of {cfg.replicates} replicates failed; study aborted"
        )
    stats = []
    for n in cfg.levels:
        errs = np.array(errors[n])
        powered = errs**p
        se = float(powered.std(ddof=1) / np.sqrt(len(powered))) if len(powered) > 1 else 0.0
        stats.append(
            LevelStats(
                n=n,
                sup_errors=tuple(float(e) for e in errs),
                mean_power_error=float(powered.mean()),
                standard_error=se,
                wall_time=wall[n],
            )
        )
    levels = tuple(stats)
    monotone, beyond, slope = _metrics(levels)
    return ConvergenceReport(
        kind=cfg.kind,
        d=cfg.d,
        reference_n=cfg.reference_n,
        p=p,
        seed=cfg.seed,
        levels=tuple(
            [*levels, LevelStats(cfg.reference_n, (), 0.0, 0.0, wall[cfg.reference_n])]
        ),
        monotone=monotone,
        monotone_beyond_se=beyond,
        slope=slope,
        failures=tuple(failures),
        config=cfg.to_dict(),
    )


def run_green_table(cfg: ExperimentConfig) -> tuple[list[str], np.ndarray]:
    spec = GridSpec(cfg.d, cfg.reference_n)
    coords = np.arange(1, cfg.grid_points + 1) / (cfg.grid_points + 1)
    return green_table_rows(spec, coords, cfg.truncation)


@dataclass(frozen=True)
class PropertySuiteReport:
    results: tuple[properties.PropertyResult, ...]
    seed: int
    scale: float

    @property
    def all_asserted_passed(self) -> bool:
        return all(r.passed for r in self.results if r.asserted)

    def report_dict(self) -> dict:
        return {
            "kind": "property-suite",
            "seed": self.seed,
            "scale": self.scale,
            "all_asserted_passed": self.all_asserted_passed,
            "properties": [
                {
                    "name": r.name,
                    "passed": r.passed,
                    "asserted": r.asserted,
                    "details": _jsonable(r.details),
                }
                for r in self.results
            ],
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def run_property_suite(cfg: ExperimentConfig) -> PropertySuiteReport:
    ctx = properties.PropertyContext(seed=cfg.seed, scale=cfg.scale)
    results = properties.run_properties(ctx, cfg.name_filter)
    return PropertySuiteReport(tuple(results), cfg.seed, cfg.scale)


def _manifest(cfg: ExperimentConfig, timings: dict, extra: dict | None = None) -> dict:
    manifest = {
        "config": cfg.to_dict(),
        "versions": {
            "respde": respde.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timings_seconds": timings,
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_convergence_outputs(report: ConvergenceReport, cfg: ExperimentConfig) -> Path:
    if not cfg.out_dir:
        raise DomainError("config has no output directory")
    out = Path(cfg.out_dir)
    rio.write_json(out / "report.json", report.report_dict())
    rio.atomic_write_text(out / "errors.csv", rio.errors_csv(report.error_rows()))
    rio.write_json(out / "manifest.json", _manifest(cfg, report.timings()))
    return out


def write_property_outputs(report: PropertySuiteReport, cfg: ExperimentConfig) -> Path:
    if not cfg.out_dir:
        raise DomainError("config has no output directory")
    out = Path(cfg.out_dir)
    rio.write_json(out / "report.json", report.report_dict())
    rio.write_json(out / "manifest.json", _manifest(cfg, {}))
    return out
