import numpy as np
import pytest

import frozen
import oracles
import shared
from twistorlift.bundle import MovingSubbundle, compute_Az
from twistorlift.errors import ContractError, DomainError
from twistorlift.filtration import (
    AzFiltration,
    beta_condition_residual,
    burstall_filtration,
    canonical_F,
    combine,
    conjugate_map,
    f_to_az,
    grassmannian_of,
    image_F,
    involution_Y,
    involution_Z,
    isotropic_seed,
    kernel_filtration,
    real_isotropic_filtration,
    structure_predicates,
    uniton_anchored,
    uniton_residuals,
    unitons_to_Z,
)
from twistorlift.grassmodel import ExtendedSolution
from twistorlift.meromorphic import MeroVec, RatFun


def gap(a, b, zs=None):
    """Worst projector distance between two moving subbundles."""
    zs = zs if zs is not None else shared.points(3, salt=40)
    return max(oracles.distance(a.projector(z), b.projector(z)) for z in zs)


def same_stages(f, g, zs=None):
    if len(f.stages) != len(g.stages):
        return np.inf
    return max(gap(a, b, zs) for a, b in zip(f.stages, g.stages))


def harmonic(name):
    return shared.uhlenbeck(name).solution.harmonic_map()


def torus():
    return shared.fixture("superconformal-torus-cp2").analytic


def test_canonical_F_lengths():
    lengths = {name: canonical_F(shared.fixture(name).model).t for name in ("holomorphic-line", "mixed-pair", "example-8.2")}
    assert lengths == {"holomorphic-line": 1, "mixed-pair": 2, "example-8.2": 3}


def test_canonical_F_invariants():
    for name in ("mixed-pair", "example-8.2"):
        res = canonical_F(shared.fixture(name).model).invariants()
        assert max(res.values()) < 1e-8, res


def test_canonical_legs_of_holomorphic_line():
    fx = shared.fixture("holomorphic-line")
    z = f_to_az(canonical_F(fx.model), shared.uhlenbeck("holomorphic-line").solution)
    legs = z.legs()
    beta = fx.data["beta1"]
    assert gap(legs[0], beta) < 1e-8
    assert gap(legs[1], beta.perp()) < 1e-8


def test_canonical_legs_of_mixed_pair():
    fx = shared.fixture("mixed-pair")
    fac = shared.uhlenbeck("mixed-pair")
    legs = f_to_az(canonical_F(fx.model), fac.solution).legs()
    phi = fac.solution.harmonic_map().grassmannian_bundle
    expected = [fx.data["beta1"], phi.perp(), fx.data["beta2"].perp()]
    assert [gap(a, b) for a, b in zip(legs, expected)] == pytest.approx([0, 0, 0], abs=1e-8)


def test_f_to_az_passes_invariants():
    for name in ("mixed-pair", "example-8.2", "frenet-pair"):
        z = f_to_az(canonical_F(shared.fixture(name).model), shared.uhlenbeck(name).solution)
        assert z.stages[0].generic_rank == z.n
        res = z.invariants()
        assert res["inclusion"] < 1e-8 and res["az_step"] < 1e-8 and res["holomorphic"] < 1e-6


def test_burstall_of_the_torus():
    filt = burstall_filtration(torus())
    assert filt.ranks() == frozen.TORUS_IMAGE_RANKS
    zs = shared.points(3, salt=41)
    z1 = filt.stages[1]
    for z in zs:
        expected = oracles.torus_member(0, z) + oracles.torus_member(1, z)
        assert oracles.distance(z1.projector(z), expected) < 1e-8


def test_burstall_matches_image_F():
    for name in ("mixed-pair", "example-8.2"):
        fac = shared.uhlenbeck(name)
        via_f = f_to_az(image_F(fac.model), fac.solution)
        direct = burstall_filtration(fac.solution.harmonic_map())
        assert via_f.ranks() == direct.ranks()
        assert same_stages(via_f, direct) < 1e-8


def test_burstall_of_antiholomorphic_map_has_length_one():
    line = MovingSubbundle.from_generators([MeroVec([RatFun([1.0]), RatFun.monomial(1), RatFun.monomial(2)])]).conj()
    filt = burstall_filtration(line)
    assert filt.t == 1
    assert filt.ranks() == [3, 1, 0]


def test_non_nilconformal_map_is_rejected():
    class Rotation:
        """``z -> diag(e^{i Re z}, 1)``, a unitary map whose A_z is diagonal and nonzero."""

        n = 2

        def unitary_jet(self, z0, order):
            from twistorlift.jets import Jet

            def coeff(p, q):
                out = np.zeros((2, 2), dtype=complex)
                base = np.exp(1j * z0.real)
                # expand exp(i (w + wbar)/2) around z0
                from math import factorial

                out[0, 0] = base * (0.5j) ** (p + q) / (factorial(p) * factorial(q))
                if p == q == 0:
                    out[1, 1] = 1.0
                return out

            return Jet.from_monomials(coeff, (2, 2), order)

    with pytest.raises(DomainError):
        burstall_filtration(Rotation())


def test_kernel_filtration_on_the_torus_matches_images():
    images = burstall_filtration(torus())
    kernels = kernel_filtration(torus(), 2)
    assert same_stages(images, kernels) < 1e-8
    with pytest.raises(DomainError):
        kernel_filtration(torus(), 1)


def test_images_sit_inside_kernels():
    for name in ("mixed-pair", "example-8.2", "frenet-pair"):
        phi = harmonic(name)
        images = burstall_filtration(phi)
        kernels = kernel_filtration(phi, images.t)
        for img, ker in zip(images.stages, kernels.stages):
            for z in shared.points(2, salt=42):
                p, q = img.projector(z), ker.projector(z)
                assert np.linalg.norm(p - q @ p, 2) < 1e-8


def test_kernel_filtration_of_a_constant_map():
    const = MovingSubbundle.constant([[1, 0, 0]])
    filt = kernel_filtration(const, 2)
    assert filt.ranks() == [3, 3, 3, 0]


def test_uniton_anchored_extremes():
    phi = harmonic("example-8.2")
    images = burstall_filtration(phi)
    full, k_full = uniton_anchored(phi, MovingSubbundle.full(phi.n))
    assert k_full == 0
    assert same_stages(full, images) < 1e-8
    kernels = kernel_filtration(phi, images.t)
    zero, k_zero = uniton_anchored(phi, MovingSubbundle.zero(phi.n))
    assert same_stages(zero, kernels) < 1e-8
    assert k_zero == zero.t + 1


def test_uniton_anchored_through_last_uhlenbeck_uniton():
    fac = shared.uhlenbeck("example-8.2")
    phi = fac.solution.harmonic_map()
    alpha = fac.unitons[-1].perp()
    filt, k = uniton_anchored(phi, alpha)
    assert gap(filt.stages[k], alpha) < 1e-8
    res = filt.invariants()
    assert res["az_step"] < 1e-8 and res["inclusion"] < 1e-8


def test_non_uniton_is_rejected():
    phi = harmonic("mixed-pair")
    rogue = MovingSubbundle.constant([[1, 2, 0, 1j]])
    res = uniton_residuals(phi, rogue)
    assert max(res.values()) > 1e-6
    with pytest.raises(ContractError):
        uniton_anchored(phi, rogue)


def test_unitons_to_Z_reproduces_gamma_three():
    fac = shared.uhlenbeck("example-8.2")
    filt = unitons_to_Z(fac.unitons)
    for z in shared.points(3, salt=43):
        ref = oracles.DegreeThreeReference(z)
        assert oracles.distance(filt.stages[1].perp().projector(z), ref.gamma_3) < 1e-8


def test_unitons_to_Z_agrees_with_canonical_F():
    for name in ("example-8.2", "mixed-pair"):
        fac = shared.uhlenbeck(name)
        via_units = unitons_to_Z(fac.unitons)
        via_f = f_to_az(canonical_F(fac.model), fac.solution)
        assert same_stages(via_units, via_f) < 1e-8


def test_unitons_to_Z_rejects_non_basic_order():
    fac = shared.segal("example-8.2")
    with pytest.raises(ContractError) as info:
        unitons_to_Z(fac.unitons)
    assert info.value.index >= 2


def test_structure_predicates():
    name = "example-8.2"
    fac = shared.uhlenbeck(name)
    canon = f_to_az(canonical_F(fac.model), fac.solution)
    rep = structure_predicates(canon)
    assert rep.applicable and rep.alternating_for_phi and rep.splits
    images = structure_predicates(burstall_filtration(fac.solution.harmonic_map()))
    assert images.splits and images.strict
    # legs (phi_2, phi, phi_1) of the torus alternate starting in phi^perp
    ring = structure_predicates(burstall_filtration(torus()))
    assert ring.splits and ring.alternating_for_phi_perp and not ring.alternating_for_phi
    twisted = ExtendedSolution([shared.fixture("holomorphic-line").data["beta1"], MovingSubbundle.constant([[1, 1, 0]])], 3)
    assert not structure_predicates(AzFiltration([MovingSubbundle.full(3), MovingSubbundle.zero(3)], twisted.harmonic_map())).applicable


def test_combine_on_length_zero_filtration():
    phi = harmonic("mixed-pair")
    grass = phi.grassmannian_bundle
    trivial = AzFiltration([MovingSubbundle.full(4), MovingSubbundle.zero(4)], phi)
    first = combine(trivial, "i")
    second = combine(trivial, "ii")
    legs_i = [leg for leg in first.legs() if leg.generic_rank]
    legs_ii = [leg for leg in second.legs() if leg.generic_rank]
    assert gap(legs_i[0], grass) < 1e-8 and gap(legs_i[1], grass.perp()) < 1e-8
    assert gap(legs_ii[0], grass.perp()) < 1e-8 and gap(legs_ii[1], grass) < 1e-8
    assert (first.target, second.target) == (1, -1)


def test_combine_variants_alternate():
    phi = harmonic("example-8.2")
    images = burstall_filtration(phi)
    for variant in ("i", "ii", "iii", "iv"):
        out = combine(images, variant)
        rep = structure_predicates(out)
        want = rep.alternating_for_phi if out.target > 0 else rep.alternating_for_phi_perp
        assert want, variant
    assert len(combine(images, "i").stages) == 2 * images.t + 3
    with pytest.raises(DomainError):
        combine(images, "v")


def test_combine_rejects_non_split_filtration():
    fac = shared.uhlenbeck("mixed-pair")
    phi = fac.solution.harmonic_map()
    skew = MovingSubbundle.from_generators([MeroVec([RatFun([1.0]), RatFun.monomial(1), RatFun.monomial(2), RatFun([0.5, 1.0])])])
    filt = AzFiltration([MovingSubbundle.full(4), skew, MovingSubbundle.zero(4)], phi)
    with pytest.raises(ContractError):
        combine(filt, "i")


def test_involution_Z_of_images_is_kernel_filtration_of_conjugate():
    images = burstall_filtration(torus())
    dual = involution_Z(images)
    kernels = kernel_filtration(conjugate_map(torus()), images.t)
    assert same_stages(dual, kernels) < 1e-8
    for name in ("mixed-pair", "example-8.2"):
        phi = harmonic(name)
        images = burstall_filtration(phi)
        kernels = kernel_filtration(conjugate_map(phi), images.t)
        assert same_stages(involution_Z(images), kernels) < 1e-8


def test_involution_Z_twice_is_identity_and_fixes_trivial():
    for name in shared.REAL_FIXTURES[:2]:
        filt = burstall_filtration(harmonic(name))
        back = involution_Z(involution_Z(filt))
        assert same_stages(back, filt) < 1e-8
    phi = harmonic("mixed-pair")
    trivial = AzFiltration([MovingSubbundle.full(4), MovingSubbundle.zero(4)], phi)
    assert involution_Z(trivial).ranks() == [4, 0]


def test_involution_Z_legs_are_reversed_conjugates():
    filt = burstall_filtration(harmonic("example-8.2"))
    legs, dual = filt.legs(), involution_Z(filt).legs()
    t = filt.t
    for i in range(t + 1):
        assert gap(dual[i], legs[t - i].conj()) < 1e-8


def test_involution_Y_is_an_involution():
    for name in ("mixed-pair", "example-8.2", "real-mixed-pair"):
        y = canonical_F(shared.fixture(name).model)
        back = involution_Y(involution_Y(y))
        assert same_stages(back, y) < 1e-8


def test_involution_Y_fixes_real_canonical_filtrations():
    for name in ("real-mixed-pair", "real-example-8.2"):
        y = canonical_F(shared.fixture(name).model)
        assert same_stages(involution_Y(y), y) < 1e-8
    y = canonical_F(shared.fixture("mixed-pair").model)
    assert same_stages(involution_Y(y), y) > 0.5


def test_isotropic_seed_conditions():
    for name in ("real-mixed-pair", "real-example-8.2"):
        phi = harmonic(name)
        beta = isotropic_seed(phi)
        assert beta_condition_residual(phi, beta) < 1e-8
        for z in shared.points(2, salt=44):
            f = beta.frame(z).matrix
            assert np.linalg.norm(f.T @ f) < 1e-8
    # the torus is not real, so the seed it grows cannot be isotropic
    with pytest.raises(ContractError):
        isotropic_seed(torus())


def test_real_isotropic_filtration_is_real():
    fx = shared.fixture("totally-isotropic-rp4")
    phi = harmonic("totally-isotropic-rp4")
    alpha = fx.data["beta1"].conj()
    filt = real_isotropic_filtration(phi, alpha)
    ranks = filt.ranks()
    assert all(a > b for a, b in zip(ranks, ranks[1:]))
    assert same_stages(involution_Z(filt), filt) < 1e-8
    assert filt.invariants()["az_step"] < 1e-8
    assert any(gap(s, alpha) < 1e-8 for s in filt.stages if s.generic_rank == alpha.generic_rank)


def test_real_isotropic_filtration_from_zero_mirrors_kernels():
    phi = harmonic("real-mixed-pair")
    filt = real_isotropic_filtration(phi, MovingSubbundle.zero(4))
    assert same_stages(involution_Z(filt), filt) < 1e-8


def test_real_isotropic_filtration_rejects_non_isotropic():
    phi = harmonic("real-mixed-pair")
    with pytest.raises(ContractError):
        real_isotropic_filtration(phi, MovingSubbundle.constant([[1, 0, 0, 0]]))


def test_grassmannian_of_and_az_scale():
    phi = harmonic("mixed-pair")
    assert grassmannian_of(phi) is not None
    assert np.linalg.norm(compute_Az(phi)(0.3 + 0.1j)) > 1e-3
