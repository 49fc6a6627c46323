"""Sampling grids, residual suites and the pass/fail report model."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import filtration as filt
from . import twistor as tw
from .bundle import (
    DEFAULT_SEED,
    FD_TOL,
    SPAN_TOL,
    AnalyticMap,
    MovingSubbundle,
    at_generic_point,
    compute_Az,
    generic_points,
    harmonic_residual,
    spectral_norm,
)
from .errors import DomainError
from .grassmodel import ExtendedSolution, GrassModel, segal_filtration, symmetry_predicates, uhlenbeck_filtration

SCHEMA = "report/v1"
EXIT_PASS = 0
EXIT_FAIL = 2
EXIT_INPUT = 3
VERSION = "0.1.0"


@dataclass(frozen=True)
class SampleGrid:
    """Seeded z-points in the sampling disc and ``count`` roots of unity for lambda."""

    seed: int = DEFAULT_SEED
    z_count: int = 5
    lambda_count: int = 10

    @property
    def z_points(self):
        return tuple(generic_points(self.z_count, self.seed, salt=301))

    @property
    def lambda_points(self):
        return tuple(np.exp(2j * np.pi * k / self.lambda_count) for k in range(self.lambda_count))


@dataclass
class Check:
    max_residual: float
    threshold: float

    @property
    def passed(self):
        return bool(self.max_residual < self.threshold)

    def to_json(self):
        return {"max_residual": float(self.max_residual), "threshold": self.threshold, "pass": self.passed}


@dataclass
class Report:
    suite: str
    checks: Dict[str, Check] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def add(self, name, residual, threshold):
        residual = float(residual)
        if name in self.checks:
            residual = max(residual, self.checks[name].max_residual)
        self.checks[name] = Check(residual, threshold)

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def failed(self):
        return sorted(name for name, c in self.checks.items() if not c.passed)

    @property
    def exit_code(self):
        return EXIT_PASS if self.passed else EXIT_FAIL

    def to_json(self):
        return {
            "schema": SCHEMA,
            "suite": self.suite,
            "pass": self.passed,
            "checks": {name: c.to_json() for name, c in sorted(self.checks.items())},
            "provenance": self.provenance,
            "notes": tw._jsonable(self.notes),
        }


def provenance(seed, fixture=None):
    return {"fixture": fixture, "seed": seed, "versions": {"twistorlift": VERSION, "numpy": np.__version__}}


def _grid_max(fn, points, threads=1):
    def one(item):
        idx, z = item
        value, _ = at_generic_point(fn, z, salt=idx)
        return float(value)

    items = list(enumerate(points))
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, items))
    else:
        values = [one(item) for item in items]
    return max(values, default=0.0)


def compare_subbundles(a, b, grid=None):
    """Largest ``|P_A - P_B|`` over the grid."""
    if a.n != b.n:
        raise DomainError("subbundles live in different dimensions")
    grid = grid or SampleGrid()
    return _grid_max(lambda z: spectral_norm(a.projector(z) - b.projector(z)), grid.z_points)


def _solution_of(obj):
    if isinstance(obj, ExtendedSolution):
        return obj
    if isinstance(obj, GrassModel):
        return uhlenbeck_filtration(obj).solution
    raise DomainError("extended-solution suite needs an ExtendedSolution or GrassModel")


def _extended_solution_suite(obj, report, grid, tol_span, tol_fd, threads):
    solution = _solution_of(obj)
    phi = solution.harmonic_map()
    az = compute_Az(phi)
    n = solution.n
    lams = grid.lambda_points

    def identity(z):
        return max(solution.residual(z, lam, az) for lam in lams)

    def unitary(z):
        return max(spectral_norm(solution.eval(z, lam).conj().T @ solution.eval(z, lam) - np.eye(n)) for lam in lams)

    def nilpotent(z):
        a = az(z)
        scale = max(1.0, spectral_norm(a)) ** (solution.r + 1)
        return spectral_norm(np.linalg.matrix_power(a, solution.r + 1)) / scale

    report.add("extended_solution_identity", _grid_max(identity, grid.z_points, threads), tol_fd)
    report.add("harmonicity", _grid_max(lambda z: harmonic_residual(phi, z, az), grid.z_points, threads), tol_fd)
    report.add("unitarity", _grid_max(unitary, grid.z_points, threads), tol_span)
    report.add("nilpotency", _grid_max(nilpotent, grid.z_points, threads), tol_span)


def _model_suite(model, report, grid, tol_span, tol_fd, threads):
    if not isinstance(model, GrassModel):
        raise DomainError("model suite needs a GrassModel")
    closure = model.closure_residuals(list(grid.z_points[:3]))
    report.add("lambda_closure", closure["lambda_closure"], tol_span)
    report.add("F_closure", closure["F_closure"], tol_span)
    segal = segal_filtration(model).solution
    uhl = uhlenbeck_filtration(model).solution

    def agree(z):
        return max(spectral_norm(segal.eval(z, lam) - uhl.eval(z, lam)) for lam in grid.lambda_points)

    report.add("segal_uhlenbeck_agree", _grid_max(agree, grid.z_points, threads), tol_span)
    _extended_solution_suite(uhl, report, grid, tol_span, tol_fd, threads)
    sym = symmetry_predicates(uhl, model.r, list(grid.z_points[:3]))
    report.notes["symmetry"] = sym
    for flag, key in (("expect_nu", "nu_invariant"), ("expect_real", "real"), ("expect_symplectic", "symplectic")):
        if model.flags.get(flag):
            value = sym["residuals"][key]
            report.add(key, 1.0 if value is None else value, tol_span)


def _uniton_suite(obj, report, grid, tol_span, tol_fd, threads):
    try:
        phi, alpha = obj
    except (TypeError, ValueError):
        raise DomainError("uniton suite needs a (map, subbundle) pair") from None
    if not isinstance(alpha, MovingSubbundle):
        raise DomainError("uniton suite needs a (map, subbundle) pair")
    res = filt.uniton_residuals(phi, alpha, points=list(grid.z_points[:3]))
    report.add("uniton_holomorphic", res["holomorphic"], tol_fd)
    report.add("uniton_az_closed", res["az_closed"], tol_span)


def _lift_suite(obj, report, grid, tol_span, tol_fd, threads):
    if not isinstance(obj, tw.LiftReport):
        raise DomainError("lift suite needs a LiftReport")
    limits = {"J2": tol_fd}
    for name, value in obj.residuals.items():
        report.add(name, value, limits.get(name, tol_span))
    report.notes.update(flavor=obj.flavor, sign=obj.sign, ranks=obj.flag.ranks, pipeline=obj.pipeline)


def _flag_suite(obj, report, grid, tol_span, tol_fd, threads):
    if not isinstance(obj, tw.MovingFlag):
        raise DomainError("flag suite needs a MovingFlag")
    points = list(grid.z_points[:3])
    for name, value in obj.invariants(points).items():
        report.add(name, value, tol_span)
    report.add("J2", tw.check_J2(obj, points, tol_fd)["residual"], tol_fd)


def _filtration_suite(obj, report, grid, tol_span, tol_fd, threads):
    if not isinstance(obj, filt.AzFiltration):
        raise DomainError("filtration suite needs an AzFiltration")
    limits = {"inclusion": tol_span, "holomorphic": tol_fd, "az_step": tol_span}
    for name, value in obj.invariants(list(grid.z_points[:3])).items():
        report.add(name, value, limits[name])


def _map_suite(obj, report, grid, tol_span, tol_fd, threads):
    if not isinstance(obj, AnalyticMap) and not hasattr(obj, "unitary_jet"):
        raise DomainError("map suite needs a map with unitary jets")
    az = compute_Az(obj)
    report.add("harmonicity", _grid_max(lambda z: harmonic_residual(obj, z, az), grid.z_points, threads), tol_fd)


SUITES = {
    "extended-solution": _extended_solution_suite,
    "model": _model_suite,
    "uniton": _uniton_suite,
    "lift": _lift_suite,
    "flag": _flag_suite,
    "filtration": _filtration_suite,
    "map": _map_suite,
}


def run_suite(obj, suite_id, grid: Optional[SampleGrid] = None, tol_span=SPAN_TOL, tol_fd=FD_TOL, fixture=None,
              threads=1):
    """Run the named residual suite on ``obj`` and collect the checks."""
    if suite_id not in SUITES:
        raise DomainError(f"unknown suite {suite_id!r}; choose from {sorted(SUITES)}")
    grid = grid or SampleGrid()
    report = Report(suite_id, provenance=provenance(grid.seed, fixture))
    report.provenance["thresholds"] = {"span": tol_span, "fd": tol_fd}
    SUITES[suite_id](obj, report, grid, tol_span, tol_fd, max(1, int(threads)))
    return report


def merge_reports(suite, reports, provenance_data=None):
    out = Report(suite, provenance=provenance_data or {})
    for rep in reports:
        for name, check in rep.checks.items():
            out.add(f"{rep.suite}.{name}", check.max_residual, check.threshold)
        out.notes.update({f"{rep.suite}.{k}": v for k, v in rep.notes.items()})
    return out
