import json

import numpy as np
import pytest

import frozen
import oracles
import shared
from twistorlift import twistor as tw
from twistorlift.bundle import MovingSubbundle, gauss_transform
from twistorlift.errors import ContractError, DomainError, NotNormalizedError
from twistorlift.filtration import burstall_filtration, combine
from twistorlift.grassmodel import GrassModel, uhlenbeck_filtration
from twistorlift.meromorphic import LaurentSection, MeroVec, RatFun

LINE = MovingSubbundle.from_generators([MeroVec([RatFun([1.0]), RatFun.monomial(1), RatFun.monomial(2)])], "h")


def gap(a, b, zs=None):
    zs = zs if zs is not None else shared.points(3, salt=50)
    if a.generic_rank != b.generic_rank:
        return 1.0
    return max(oracles.distance(a.projector(z), b.projector(z)) for z in zs)


def harmonic(name):
    return shared.uhlenbeck(name).solution.harmonic_map()


def torus():
    return shared.fixture("superconformal-torus-cp2").analytic


def torus_flag():
    """``(G''(phi), phi, G'(phi))`` built straight from the harmonic sequence."""
    phi = torus().subbundle
    return tw.MovingFlag([gauss_transform(phi, "'", 2), phi, gauss_transform(phi, "'", 1)])


def test_two_leg_flag_is_integrable_for_both_structures():
    flag = tw.MovingFlag([LINE, LINE.perp()])
    assert tw.check_J1(flag)["pass"]
    assert tw.check_J2(flag)["pass"]


def test_torus_flag_and_its_reverse():
    flag = torus_flag()
    assert tw.check_J2(flag)["pass"]
    backwards = tw.MovingFlag(flag.legs[::-1])
    report = tw.check_J2(backwards)
    assert not report["pass"]
    assert report["offending_pairs"]


def test_superhorizontal_examples():
    assert tw.check_superhorizontal(tw.MovingFlag([LINE, LINE.perp()]))["pass"]
    mixed = shared.canonical("mixed-pair").flag
    out = tw.check_superhorizontal(mixed)
    assert out["pass"] and out["J1"] and out["J2"]
    assert not tw.check_superhorizontal(shared.torus_lifts()[0].flag)["pass"]


def test_superhorizontal_iff_circle_invariant():
    expectations = {"mixed-pair": True, "frenet-pair": True, "holomorphic-line": True, "example-8.2": False}
    for name, invariant in expectations.items():
        assert tw.check_superhorizontal(shared.canonical(name).flag)["pass"] is invariant, name


def test_pi_e_of_single_and_canonical_flags():
    single = tw.MovingFlag([MovingSubbundle.full(3)])
    assert tw.pi_e(single).generic_rank == 3
    for name in ("mixed-pair", "example-8.2"):
        flag = shared.canonical(name).flag
        assert gap(tw.pi_e(flag), harmonic(name).grassmannian_bundle) < 1e-8


def test_surgery_zero_legs_and_signs():
    zero = MovingSubbundle.zero(3)
    flag = tw.MovingFlag([zero, LINE, LINE.perp()])
    out, sign = tw.surgery(flag, "remove_first_zero")
    assert sign == -1 and out.ranks == [1, 2]
    # pi_e swaps to the complement: before it was 0 + perp, after it is the line
    assert gap(tw.pi_e(flag), LINE.perp()) < 1e-12 and gap(tw.pi_e(out), LINE) < 1e-12
    out, sign = tw.surgery(tw.MovingFlag([LINE, LINE.perp(), zero]), "remove_last_zero")
    assert sign == 1 and out.ranks == [1, 2]
    legs = torus_flag().legs
    inner = tw.MovingFlag([legs[0], legs[1], zero, legs[2]])
    out, sign = tw.surgery(inner, "remove_inner_zero", 2)
    assert sign == 1 and out.ranks == [1, 2]
    assert gap(tw.pi_e(out), tw.pi_e(inner)) < 1e-10


def test_surgery_preconditions():
    flag = tw.MovingFlag([LINE, LINE.perp()])
    with pytest.raises(ContractError):
        tw.surgery(flag, "remove_first_zero")
    with pytest.raises(ContractError):
        tw.surgery(flag, "remove_last_zero")
    with pytest.raises(ContractError):
        tw.surgery(torus_flag(), "merge_on_vanishing", 0)
    with pytest.raises(DomainError):
        tw.surgery(flag, "rotate")
    with pytest.raises(DomainError):
        tw.surgery(flag, "remove_inner_zero", 0)


def test_merge_on_vanishing_at_start_flips_sign():
    # constant legs have vanishing forms; at i = 0 the two legs trade places
    const = MovingSubbundle.constant([[1, 0, 0]])
    rest = const.perp()
    flag = tw.MovingFlag([const, rest])
    out, sign = tw.surgery(flag, "merge_on_vanishing", 0)
    assert sign == -1
    assert out.ranks == [2, 1]
    assert gap(tw.pi_e(out), tw.pi_e(flag).perp()) < 1e-12


def test_merge_on_vanishing_interior_keeps_pi_e():
    e = [MovingSubbundle.constant([[1 if k == j else 0 for k in range(3)]]) for j in range(3)]
    flag = tw.MovingFlag([e[0], e[1], e[2]])
    out, sign = tw.surgery(flag, "merge_on_vanishing", 1)
    assert sign == 1 and out.ranks == [2, 1]
    assert gap(tw.pi_e(out), tw.pi_e(flag)) < 1e-12


def test_normalize_flag_cases():
    norm = tw.normalize_flag(torus_flag())
    assert norm.ops == [] and norm.sign == 1 and norm.flag.ranks == frozen.TORUS_LEG_RANKS
    images = burstall_filtration(LINE)
    flag = tw.flag_from_filtration(combine(images, "iii"))
    norm = tw.normalize_flag(flag)
    assert len(norm.flag) == 2
    assert tw.check_J2(norm.flag)["pass"]


def test_symmetry_checks():
    real = shared.canonical("real-mixed-pair").flag
    assert tw.symmetry_check(real, "real-F")["pass"]
    quat = shared.canonical("quaternionic-mixed-pair").flag
    assert tw.symmetry_check(quat, "quat-F")["pass"]
    assert not tw.symmetry_check(shared.canonical("mixed-pair").flag, "real")["pass"]
    with pytest.raises(DomainError):
        tw.symmetry_check(real, "real-Z")
    with pytest.raises(DomainError):
        tw.symmetry_check(real, "octonionic")


def test_symplectic_legs_pair_under_j():
    legs = shared.canonical("symplectic-example-8.2").flag.legs
    assert len(legs) == 4
    for z in shared.points(3, salt=51):
        assert oracles.distance(oracles.j_image_projector(legs[0].projector(z)), legs[3].projector(z)) < 1e-8
        assert oracles.distance(oracles.j_image_projector(legs[1].projector(z)), legs[2].projector(z)) < 1e-8


def test_canonical_lifts_on_fixtures():
    for name in shared.MODEL_FIXTURES:
        report = shared.canonical(name)
        assert report.passed, (name, report.residuals)
        assert report.flag.ranks == frozen.CANONICAL_LEG_RANKS[name], name
        assert report.flavor == frozen.CANONICAL_FLAVORS[name], name


def test_canonical_lift_of_holomorphic_line():
    report = shared.canonical("holomorphic-line")
    beta = shared.fixture("holomorphic-line").data["beta1"]
    assert gap(report.flag.legs[0], beta) < 1e-8 and gap(report.flag.legs[1], beta.perp()) < 1e-8


def test_canonical_lift_rejects_non_normalized_and_non_nu():
    v = MeroVec([RatFun([1.0]), RatFun.monomial(1), RatFun.monomial(2)])
    # generators only at lam^1 leave the first canonical leg empty
    shifted = GrassModel(3, 2, [LaurentSection({1: v})])
    with pytest.raises(NotNormalizedError):
        tw.canonical_lift(shifted)
    # a generator mixing even and odd lam-powers breaks nu-invariance
    mixed_parity = GrassModel(3, 2, [LaurentSection({0: v, 1: MeroVec.constant([0, 1, 0])})])
    with pytest.raises(DomainError, match="nu-invariant"):
        tw.canonical_lift(mixed_parity)
    with pytest.raises(DomainError):
        tw.canonical_lift(uhlenbeck_filtration(shared.fixture("mixed-pair").model).solution.harmonic_map())


def test_torus_burstall_lift():
    reports = shared.torus_lifts()
    assert len(reports) == 1
    report = reports[0]
    assert report.passed and report.sign == -1 and report.extras["case"] == "b"
    expected = torus_flag().legs
    for leg, ref in zip(report.flag.legs, expected):
        assert gap(leg, ref) < 1e-8


def test_burstall_lift_of_holomorphic_map_has_two_legs():
    for report in tw.burstall_lift(LINE):
        assert report.passed and len(report.flag) == 2
    with pytest.raises(DomainError):
        tw.burstall_lift(LINE, variants=("i",))


def test_strongly_conformal_frenet_lift():
    phi = harmonic("frenet-pair")
    report = tw.strongly_conformal_lifts(phi)
    assert report.passed and report.flag.ranks == frozen.FRENET_STRONGLY_CONFORMAL_RANKS
    assert report.extras["unique"] and report.sign == -1
    grass = phi.grassmannian_bundle
    kernel_side = gauss_transform(grass, "''", 1).perp().intersect(grass.perp())
    dual = tw.strongly_conformal_lifts(phi, kernel_side)
    assert dual.passed
    with pytest.raises(ContractError):
        tw.strongly_conformal_lifts(phi, MovingSubbundle.constant([[1, 0, 0, 0, 0]]))


def test_uniton_anchored_lift():
    fac = shared.uhlenbeck("example-8.2")
    phi = fac.solution.harmonic_map()
    report = tw.uniton_anchored_lift(phi, fac.unitons[-1].perp())
    assert report.passed
    assert report.extras["uniton_sum_distance"] < 1e-8
    full = tw.uniton_anchored_lift(phi, MovingSubbundle.full(4))
    assert full.passed and full.extras["k"] == 0
    with pytest.raises(DomainError):
        tw.uniton_anchored_lift(phi, MovingSubbundle.full(4), variant="iii")


def test_real_lifts():
    fx = shared.fixture("totally-isotropic-rp4")
    report = tw.real_ocs_lift(harmonic("totally-isotropic-rp4"), alpha=fx.data["beta1"].conj())
    assert report.passed and report.flavor == "real-grassmann"
    assert report.flag.ranks == frozen.CANONICAL_LEG_RANKS["totally-isotropic-rp4"]
    mixed = tw.real_ocs_lift(harmonic("real-mixed-pair"))
    assert mixed.passed and mixed.residuals["symmetry"] < 1e-8
    beta = shared.fixture("real-mixed-pair").data["beta1"]
    legs = mixed.flag.legs
    assert gap(legs[0], beta) < 1e-8 and gap(legs[2], beta.conj()) < 1e-8
    with pytest.raises(ContractError):
        tw.real_ocs_lift(harmonic("mixed-pair"))


def test_lift_report_json():
    report = shared.canonical("mixed-pair")
    data = json.loads(json.dumps(report.to_json()))
    assert data["schema"] == "lift/v1" and data["passed"] is True
    assert [leg["rank"] for leg in data["legs"]] == [1, 1, 2]
    assert set(data["residuals"]) >= {"J2", "pi_e", "orthogonality", "completeness"}


def test_flag_rejects_bad_input():
    with pytest.raises(DomainError):
        tw.MovingFlag([])
    with pytest.raises(DomainError):
        tw.MovingFlag([MovingSubbundle.full(2), MovingSubbundle.full(3)])
    overlap = tw.MovingFlag([LINE, LINE])
    assert overlap.invariants()["orthogonality"] > 0.5
    assert np.isfinite(overlap.invariants()["completeness"])
