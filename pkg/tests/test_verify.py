import json

import numpy as np
import pytest

import frozen
import shared
from twistorlift import fixtures
from twistorlift.bundle import MovingSubbundle, bundle_sum
from twistorlift.errors import DomainError
from twistorlift.filtration import burstall_filtration
from twistorlift.grassmodel import ExtendedSolution
from twistorlift.jets import Jet
from twistorlift.verify import EXIT_FAIL, EXIT_PASS, SampleGrid, compare_subbundles, merge_reports, run_suite


def _line_through(first, second, projector_bundle):
    """``span{first + pi^perp second}`` as a moving line."""
    n = first.n

    def span(z0, order):
        a = Jet.from_holomorphic(np.stack([first.taylor(z0, order)], axis=2))
        b = Jet.from_holomorphic(np.stack([second.taylor(z0, order)], axis=2))
        return a + (np.eye(n) - projector_bundle.projector_jet(z0, order)) @ b

    return MovingSubbundle(n, span, "line")


def test_grid_is_deterministic_and_on_the_circle():
    grid = SampleGrid(seed=7)
    assert grid.z_points == SampleGrid(seed=7).z_points
    assert grid.z_points != SampleGrid(seed=8).z_points
    assert np.allclose(np.abs(grid.lambda_points), 1.0, atol=1e-15)
    assert len(grid.lambda_points) == 10 and -1 in np.round(grid.lambda_points, 12)


def test_extended_solution_suite_passes_on_degree_three_example():
    report = run_suite(shared.fixture("example-8.2").model, "extended-solution")
    assert report.passed, report.failed()
    assert report.exit_code == EXIT_PASS
    assert {"extended_solution_identity", "harmonicity", "unitarity", "nilpotency"} <= set(report.checks)


def test_identity_loop_has_zero_residual():
    report = run_suite(ExtendedSolution([], 3), "extended-solution")
    assert report.passed
    assert max(c.max_residual for c in report.checks.values()) == 0.0


def test_corrupted_uniton_fails_its_check():
    fac = shared.uhlenbeck("mixed-pair")
    phi = fac.solution.harmonic_map()
    alpha = fac.unitons[-1].perp()
    good = run_suite((phi, alpha), "uniton")
    assert good.passed
    bad = run_suite((phi, alpha.conj()), "uniton")
    assert not bad.passed
    assert "uniton_holomorphic" in bad.failed()
    assert bad.exit_code == EXIT_FAIL


def test_compare_subbundles():
    e1 = MovingSubbundle.constant([[1, 0]])
    e2 = MovingSubbundle.constant([[0, 1]])
    assert compare_subbundles(e1, e1) == 0.0
    assert abs(compare_subbundles(e1, e2) - frozen.ORTHOGONAL_LINES_DISTANCE) < 1e-15
    with pytest.raises(DomainError):
        compare_subbundles(e1, MovingSubbundle.full(3))


def test_two_expressions_for_beta_three_agree():
    data = shared.fixture("example-8.2").data
    tail = data["h_2"].ominus(data["h"])
    via_h1 = bundle_sum([_line_through(data["H0"], data["H2"], data["h_1"]), tail], 4)
    via_h2 = bundle_sum([_line_through(data["H0"], data["H2"], data["h_2"]), tail], 4)
    assert via_h1.generic_rank == 3
    assert compare_subbundles(via_h1, via_h2) < 1e-8
    assert compare_subbundles(via_h1, shared.segal("example-8.2").unitons[2]) < 1e-8


def test_unknown_suite_and_wrong_objects():
    with pytest.raises(DomainError):
        run_suite(None, "astrology")
    with pytest.raises(DomainError):
        run_suite(42, "model")
    with pytest.raises(DomainError):
        run_suite("not a pair", "uniton")
    with pytest.raises(DomainError):
        run_suite(3.0, "lift")


def test_reports_are_reproducible():
    # fresh objects each time: warm jet caches may shift the last bits
    first = run_suite(fixtures.get("mixed-pair").model, "model", SampleGrid(seed=11))
    second = run_suite(fixtures.get("mixed-pair").model, "model", SampleGrid(seed=11))
    assert json.dumps(first.to_json(), sort_keys=True) == json.dumps(second.to_json(), sort_keys=True)
    assert first.to_json()["schema"] == "report/v1"
    assert first.provenance["seed"] == 11


def test_threads_do_not_change_results():
    serial = run_suite(fixtures.get("example-8.2").model, "extended-solution", threads=1)
    parallel = run_suite(fixtures.get("example-8.2").model, "extended-solution", threads=4)
    assert {k: c.max_residual for k, c in serial.checks.items()} == {k: c.max_residual for k, c in parallel.checks.items()}


def test_lift_flag_filtration_and_map_suites():
    lift = shared.canonical("example-8.2")
    assert run_suite(lift, "lift").passed
    assert run_suite(lift.flag, "flag").passed
    torus = shared.fixture("superconformal-torus-cp2").analytic
    assert run_suite(torus, "map").passed
    assert run_suite(burstall_filtration(torus), "filtration").passed


def test_threshold_policy_and_merge():
    model = shared.fixture("mixed-pair").model
    strict = run_suite(model, "extended-solution", tol_span=0.0, tol_fd=0.0)
    assert not strict.passed
    merged = merge_reports("all", [run_suite(model, "extended-solution"), strict])
    assert not merged.passed
    assert any(name.startswith("extended-solution.") for name in merged.checks)
