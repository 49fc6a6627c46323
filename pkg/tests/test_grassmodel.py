import numpy as np
import pytest

import oracles
import shared
from twistorlift.bundle import MovingSubbundle, compute_Az
from twistorlift.errors import ContractError, DomainError
from twistorlift.grassmodel import (
    ExtendedSolution,
    GrassModel,
    eval_Phi,
    extract_unitons,
    generate_W,
    laurent_support,
    nu_align,
    osculating_filtration,
    p0_phi_inverse,
    segal_filtration,
    segal_stages,
    symmetry_predicates,
)
from twistorlift.meromorphic import LaurentSection, MeroVec, RatFun


def _line_model():
    v = MeroVec([RatFun([1.0]), RatFun.monomial(1)])
    return GrassModel(2, 1, [LaurentSection({0: v})]), MovingSubbundle.from_generators([v])


def _interpolated_p0(solution, section, z, count=16):
    """Constant lambda-coefficient of ``Phi^-1 H`` by averaging over roots of unity."""
    lams = np.exp(2j * np.pi * np.arange(count) / count)
    return sum(np.linalg.solve(solution.eval(z, lam), section(z, lam)) for lam in lams) / count


def test_holomorphic_model_has_one_uniton():
    fx = shared.fixture("holomorphic-line")
    fac = shared.segal("holomorphic-line")
    assert len(fac.unitons) == 1
    for z in shared.points(3):
        assert oracles.distance(fac.unitons[0].projector(z), fx.data["beta1"].projector(z)) < 1e-10


def test_empty_generators_give_a_constant_loop():
    # X = 0 leaves W = lam^r H_+, so every uniton is zero and Phi = lam^r Id
    fac = segal_filtration(GrassModel(3, 2, []))
    assert [u.generic_rank for u in fac.unitons] == [0, 0]
    for z in shared.points(2):
        for lam in (1j, -1.0, np.exp(0.3j)):
            assert np.allclose(eval_Phi(fac.solution, z, lam), lam**2 * np.eye(3))


def test_closure_of_generated_models():
    for name in ("example-8.2", "mixed-pair", "symplectic-example-8.2"):
        res = shared.fixture(name).model.closure_residuals(shared.points(3, salt=1))
        assert res["lambda_closure"] < 1e-8
        assert res["F_closure"] < 1e-8


def test_exponent_range_is_enforced():
    e1 = MeroVec.constant([1, 0])
    with pytest.raises(DomainError):
        generate_W([LaurentSection({2: e1})], 2)
    with pytest.raises(DomainError):
        GrassModel(2, 0, [])
    model = generate_W([LaurentSection({1: e1})], 2)
    assert model.n == 2 and model.r == 2


def test_mixed_pair_extended_solution_formula():
    fx = shared.fixture("mixed-pair")
    solution = shared.uhlenbeck("mixed-pair").solution
    b1, b2 = fx.data["beta1"], fx.data["beta2"]
    for z in shared.points(3, salt=2):
        p1, p2 = b1.projector(z), b2.projector(z)
        for lam in (1j, np.exp(1.1j), -1.0):
            expected = p1 + lam * (p2 - p1) + lam**2 * (np.eye(4) - p2)
            assert np.linalg.norm(solution.eval(z, lam) - expected, 2) < 1e-9


def test_single_uniton_value_at_minus_one():
    alpha = shared.fixture("holomorphic-line").data["beta1"]
    solution = ExtendedSolution([alpha], 3)
    for z in shared.points(2, salt=3):
        p = alpha.projector(z)
        assert np.linalg.norm(eval_Phi(solution, z, -1.0) - (2 * p - np.eye(3)), 2) < 1e-12


def test_extended_solution_identity_by_finite_differences():
    lams = [np.exp(2j * np.pi * k / 5) for k in range(1, 5)]
    for name in ("mixed-pair", "example-8.2", "real-mixed-pair"):
        solution = shared.uhlenbeck(name).solution
        for z in shared.points(2, salt=4):
            assert oracles.extended_solution_fd_residual(solution.eval, z, lams) < 1e-6


def test_uhlenbeck_unitons_are_basic_and_segal_antibasic():
    for name in ("example-8.2", "frenet-pair"):
        for flavor, fac in (("uhlenbeck", shared.uhlenbeck(name)), ("segal", shared.segal(name))):
            for i in range(1, len(fac.unitons)):
                partial = ExtendedSolution(fac.unitons[:i], fac.solution.n)
                az = compute_Az(partial.harmonic_map())
                alpha = fac.unitons[i]
                for z in shared.points(2, salt=5):
                    a = az(z)
                    p = alpha.projector(z)
                    scale = max(1.0, np.linalg.norm(a, 2))
                    if flavor == "uhlenbeck":
                        assert np.linalg.norm(a @ p, 2) < 1e-8 * scale
                    else:
                        assert np.linalg.norm(a - p @ a, 2) < 1e-8 * scale


def test_segal_and_uhlenbeck_agree():
    for name in ("example-8.2", "symplectic-example-8.2"):
        s, u = shared.segal(name).solution, shared.uhlenbeck(name).solution
        for z in shared.points(2, salt=6):
            for lam in (1j, np.exp(2.2j)):
                assert np.linalg.norm(s.eval(z, lam) - u.eval(z, lam), 2) < 1e-7


def test_osculating_unitons_on_a_line():
    model, line = _line_model()
    fac = osculating_filtration(model)
    for z in shared.points(3, salt=7):
        assert oracles.distance(fac.unitons[-1].projector(z), line.projector(z)) < 1e-10
    solution = osculating_filtration(shared.fixture("example-8.2").model).solution
    assert symmetry_predicates(solution, 3)["nu_invariant"]


def test_broken_filtration_names_the_stage():
    model = shared.fixture("mixed-pair").model
    stages = list(reversed(segal_stages(model)))
    with pytest.raises(ContractError) as info:
        extract_unitons(stages, model.n, model.r)
    assert info.value.index == 1


def test_symmetry_predicates():
    beta = MovingSubbundle.constant([[1, 0, 0]])
    constant = symmetry_predicates(ExtendedSolution([beta], 3))
    assert constant["s1_invariant"] and constant["nu_invariant"]
    assert symmetry_predicates(shared.uhlenbeck("example-8.2").solution, 3)["nu_invariant"]
    sym = symmetry_predicates(shared.uhlenbeck("symplectic-example-8.2").solution, 3)
    assert sym["symplectic"]
    assert not symmetry_predicates(shared.uhlenbeck("example-8.2").solution, 3)["s1_invariant"]


def test_nu_align():
    solution = shared.uhlenbeck("mixed-pair").solution
    z0 = shared.points(1, salt=8)[0]
    aligned = nu_align(solution, z0)
    assert symmetry_predicates(aligned, 2)["nu_invariant"]
    assert np.linalg.norm(aligned.eval(z0, -1.0) - solution.eval(z0, -1.0), 2) < 1e-10
    # at the base point the aligned loop is the homomorphism gamma itself
    p = 0.5 * (np.eye(4) + solution.eval(z0, -1.0))
    for lam in (1j, np.exp(0.4j)):
        assert np.linalg.norm(aligned.eval(z0, lam) - (p + lam * (np.eye(4) - p)), 2) < 1e-9
    assert laurent_support(aligned, z0) == (0, 1)
    rogue = ExtendedSolution(shared.uhlenbeck("mixed-pair").unitons[:1] + [MovingSubbundle.constant([[1, 1j, 0, 0]])], 4)
    with pytest.raises(ContractError):
        nu_align(rogue, z0)


def test_p0_phi_inverse_single_factor():
    alpha = shared.fixture("holomorphic-line").data["beta1"]
    solution = ExtendedSolution([alpha], 3)
    v = MeroVec.constant([1.0, 2.0, -1j])
    z = 0.4 + 0.1j
    p = alpha.projector(z)
    assert np.allclose(p0_phi_inverse(solution, LaurentSection({0: v}))(z), p @ v(z))
    assert np.allclose(p0_phi_inverse(solution, LaurentSection({1: v}))(z), (np.eye(3) - p) @ v(z))
    with pytest.raises(DomainError):
        p0_phi_inverse(solution, LaurentSection({2: v}))


def test_p0_phi_inverse_matches_interpolation():
    fx = shared.fixture("example-8.2")
    solution = shared.uhlenbeck("example-8.2").solution
    sections = [
        LaurentSection({0: fx.data["H0"], 2: fx.data["H2"]}),
        LaurentSection({1: fx.data["H0"].differentiate(), 3: MeroVec.constant([0, 1, 0, 0])}),
    ]
    for section in sections:
        for z in shared.points(2, salt=9):
            exact = p0_phi_inverse(solution, section)(z)
            assert np.linalg.norm(exact - _interpolated_p0(solution, section, z)) < 1e-8


def test_model_json_round_trip():
    model = shared.fixture("symplectic-example-8.2").model
    back = GrassModel.from_json(model.to_json())
    assert back.n == model.n and back.r == model.r
    assert {k: v for k, v in back.flags.items() if v} == model.flags
    z = 0.2 + 0.5j
    assert oracles.distance(back.W.projector(z), model.W.projector(z)) < 1e-12
    with pytest.raises(DomainError):
        GrassModel.from_json({"n": 2, "r": 1, "generators": [], "colour": 1})
