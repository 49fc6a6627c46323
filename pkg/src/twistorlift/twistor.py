"""Moving flags, holomorphicity checks for the twistor structures, leg surgery and lift pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import filtration as filt
from .bundle import (
    DEFAULT_SEED,
    FD_TOL,
    SPAN_TOL,
    MovingSubbundle,
    a_prime,
    at_generic_point,
    bundle_sum,
    compute_Az,
    gauss_transform,
    generic_points,
    spectral_norm,
)
from .errors import ContractError, DomainError, NotNormalizedError
from .grassmodel import ExtendedSolution, GrassModel, symmetry_predicates, uhlenbeck_filtration

FLAVORS = ("complex", "real-grassmann", "ocs", "quaternionic-grassmann", "sp-um")


def _points(count=3, salt=0):
    return generic_points(count, DEFAULT_SEED, salt)


def _worst(fn, points, salt=0):
    worst = 0.0
    for idx, z in enumerate(points):
        value, _ = at_generic_point(fn, z, salt=salt + idx)
        worst = max(worst, float(value))
    return worst


class MovingFlag:
    """Mutually orthogonal legs ``psi_0, ..., psi_t`` filling C^n."""

    def __init__(self, legs, label=""):
        self.legs = list(legs)
        if not self.legs:
            raise DomainError("a moving flag needs at least one leg")
        self.n = self.legs[0].n
        if any(leg.n != self.n for leg in self.legs):
            raise DomainError("legs must share ambient dimension")
        self.label = label

    @property
    def t(self):
        return len(self.legs) - 1

    @property
    def ranks(self):
        return [leg.generic_rank for leg in self.legs]

    def __len__(self):
        return len(self.legs)

    def __repr__(self):
        return f"MovingFlag(ranks={self.ranks})"

    def invariants(self, points=None):
        """Worst pairwise orthogonality and completeness defects."""
        points = points or _points(3, salt=201)

        def measure(z):
            projs = [leg.projector(z) for leg in self.legs]
            ortho = 0.0
            for i in range(len(projs)):
                for j in range(i + 1, len(projs)):
                    ortho = max(ortho, spectral_norm(projs[i] @ projs[j]))
            total = spectral_norm(sum(projs) - np.eye(self.n))
            return ortho, total

        ortho = total = 0.0
        for idx, z in enumerate(points):
            (o, c), _ = at_generic_point(measure, z, salt=idx)
            ortho, total = max(ortho, o), max(total, c)
        return {"orthogonality": float(ortho), "completeness": float(total)}

    def zero_legs(self):
        return [i for i, r in enumerate(self.ranks) if r == 0]


def flag_from_filtration(filtration):
    return MovingFlag(filtration.legs(), f"legs({filtration.label})")


def second_fundamental_forms(flag, z):
    """Matrix of ``|A'_{psi_i, psi_j}|`` at ``z`` (row ``i`` is the source)."""
    jets = [leg.projector_jet(z, 1) for leg in flag.legs]
    values = [j.value for j in jets]
    derivs = [j.dz().value for j in jets]
    k = len(jets)
    out = np.zeros((k, k))
    for i in range(k):
        if flag.legs[i].generic_rank == 0:
            continue
        for j in range(k):
            if i != j and flag.legs[j].generic_rank:
                out[i, j] = spectral_norm(values[j] @ derivs[i] @ values[i])
    return out


def _forbidden_j1(i, j):
    return i - j > 0


def _forbidden_j2(i, j):
    return (i - j > 0 and (i - j) % 2 == 1) or (j - i > 0 and (j - i) % 2 == 0)


def _check_forbidden(flag, rule, points, tol):
    points = points or _points(3, salt=211)
    worst = 0.0
    offenders = set()
    for idx, z in enumerate(points):
        forms, _ = at_generic_point(lambda zz: second_fundamental_forms(flag, zz), z, salt=idx)
        scale = max(1.0, float(forms.max(initial=0.0)))
        for i in range(len(flag)):
            for j in range(len(flag)):
                if rule(i, j):
                    value = forms[i, j] / scale
                    worst = max(worst, value)
                    if value >= tol:
                        offenders.add((i, j))
    return {"residual": worst, "pass": worst < tol, "offending_pairs": sorted(offenders)}


def check_J1(flag, points=None, tol=FD_TOL):
    return _check_forbidden(flag, _forbidden_j1, points, tol)


def check_J2(flag, points=None, tol=FD_TOL):
    return _check_forbidden(flag, _forbidden_j2, points, tol)


def check_superhorizontal(flag, points=None, tol=FD_TOL):
    """``d/dz`` maps sections of ``beta_i = psi_0 + ... + psi_{i-1}`` into ``beta_{i+1}``."""
    points = points or _points(3, salt=221)
    partial = [bundle_sum(flag.legs[:i], flag.n) for i in range(1, len(flag))]

    def measure(z):
        worst = 0.0
        for i, beta in enumerate(partial):
            if beta.generic_rank == 0:
                continue
            nxt = partial[i + 1] if i + 1 < len(partial) else None
            p = beta.projector_jet(z, 1)
            dp, dbar, pv = p.dz().value, p.dzbar().value, p.value
            q = np.eye(flag.n) - pv
            worst = max(worst, spectral_norm(q @ dbar @ pv))
            if nxt is not None:
                qn = np.eye(flag.n) - nxt.projector(z)
                worst = max(worst, spectral_norm(qn @ dp @ pv))
        return worst

    residual = _worst(measure, points)
    out = {"residual": residual, "pass": residual < tol}
    if out["pass"]:
        out["J1"] = check_J1(flag, points, tol)["pass"]
        out["J2"] = check_J2(flag, points, tol)["pass"]
        if not (out["J1"] and out["J2"]):
            raise ContractError("superhorizontal flag failed the J1/J2 check", residual=residual)
    return out


def pi_e(flag):
    """Sum of the even legs."""
    return bundle_sum(flag.legs[::2], flag.n)


def _zero_form(flag, i, points):
    if i < 0 or i + 1 >= len(flag):
        return True

    def measure(z):
        forms = second_fundamental_forms(flag, z)
        return forms[i, i + 1] / max(1.0, float(forms.max(initial=0.0)))

    return _worst(measure, points, salt=13) < SPAN_TOL


def _vanishing_steps(flag, points):
    """Indices ``i`` with ``A'(psi_i, psi_{i+1})`` numerically zero at every point."""
    worst = np.zeros(max(flag.t, 0))
    for idx, z in enumerate(points):
        forms, _ = at_generic_point(lambda zz: second_fundamental_forms(flag, zz), z, salt=13 + idx)
        scale = max(1.0, float(forms.max(initial=0.0)))
        worst = np.maximum(worst, [forms[i, i + 1] / scale for i in range(flag.t)])
    return [i for i in range(flag.t) if worst[i] < SPAN_TOL]


def _combine_legs(a, b, n):
    if a is None:
        return b
    if b is None:
        return a
    return bundle_sum([a, b], n)


def surgery(flag, op, index=None, points=None):
    """Apply one leg operation; returns ``(new_flag, sign)`` with ``pi_e`` changing by ``sign``."""
    legs = list(flag.legs)
    n = flag.n
    t = flag.t
    points = points or _points(3, salt=231)
    ranks = flag.ranks
    if op == "remove_first_zero":
        if ranks[0] != 0:
            raise ContractError("first leg is not zero", index=0)
        return MovingFlag(legs[1:], flag.label), -1
    if op == "remove_last_zero":
        if ranks[-1] != 0:
            raise ContractError("last leg is not zero", index=t)
        return MovingFlag(legs[:-1], flag.label), 1
    if op == "remove_inner_zero":
        i = index
        if i is None or not 0 < i < t:
            raise DomainError("remove_inner_zero needs an interior index")
        if ranks[i] != 0:
            raise ContractError(f"leg {i} is not zero", index=i)
        new = legs[: i - 1] + [bundle_sum([legs[i - 1], legs[i + 1]], n)] + legs[i + 2:]
        return MovingFlag(new, flag.label), 1
    if op == "merge_on_vanishing":
        i = index
        if i is None or not 0 <= i < t:
            raise DomainError("merge_on_vanishing needs 0 <= i < t")
        if not _zero_form(flag, i, points):
            raise ContractError(f"A'(psi_{i}, psi_{i + 1}) does not vanish", index=i)

        def leg(k):
            return legs[k] if 0 <= k <= t else None

        first = _combine_legs(leg(i - 1), leg(i + 1), n)
        second = _combine_legs(leg(i), leg(i + 2), n)
        new = legs[: max(i - 1, 0)] + [first, second] + legs[i + 3:]
        # with i = 0 the merged leg psi_1 now comes first, so the parity flips
        return MovingFlag(new, flag.label), (-1 if i == 0 else 1)
    raise DomainError(f"unknown surgery operation {op!r}")


@dataclass
class NormalizedFlag:
    flag: MovingFlag
    sign: int
    ops: List[tuple] = field(default_factory=list)


def normalize_flag(flag, points=None, allow_merge=True, symmetric=False):
    """Remove zero legs and vanishing consecutive forms until none are left."""
    points = points or _points(3, salt=241)
    sign = 1
    ops = []
    current = flag
    while True:
        ranks = current.ranks
        zeros = [i for i, r in enumerate(ranks) if r == 0]
        if len(current) == 1:
            break
        if zeros:
            t = current.t
            if symmetric and 0 in zeros and t in zeros and t > 0:
                current, s = surgery(current, "remove_last_zero")
                current, s2 = surgery(current, "remove_first_zero")
                sign *= s * s2
                ops += [("remove_last_zero", t), ("remove_first_zero", 0)]
                continue
            if zeros[0] == 0:
                current, s = surgery(current, "remove_first_zero")
                sign *= s
                ops.append(("remove_first_zero", 0))
                continue
            if zeros[-1] == t:
                current, s = surgery(current, "remove_last_zero")
                sign *= s
                ops.append(("remove_last_zero", t))
                continue
            if symmetric:
                i = zeros[-1]
                mirror = t - i
                if mirror < i - 1 and ranks[mirror] == 0:
                    current, _ = surgery(current, "remove_inner_zero", i)
                    current, _ = surgery(current, "remove_inner_zero", mirror)
                    ops += [("remove_inner_zero", i), ("remove_inner_zero", mirror)]
                    continue
            i = zeros[0]
            current, s = surgery(current, "remove_inner_zero", i)
            sign *= s
            ops.append(("remove_inner_zero", i))
            continue
        # on two legs a merge only swaps them, which would never terminate
        if not allow_merge or len(current) == 2:
            break
        vanishing = _vanishing_steps(current, points)
        if not vanishing:
            break
        i = vanishing[0]
        current, s = surgery(current, "merge_on_vanishing", i, points)
        sign *= s
        ops.append(("merge_on_vanishing", i))
    return NormalizedFlag(current, sign, ops)


def _distance(a, b, points):
    if a.generic_rank != b.generic_rank:
        return 1.0
    if a.generic_rank == 0:
        return 0.0
    return _worst(lambda z: spectral_norm(a.projector(z) - b.projector(z)), points, salt=17)


def symmetry_check(flag, flavor, points=None, tol=SPAN_TOL):
    """Leg symmetry ``psi_i = sigma psi_{t-i}`` with ``sigma`` conjugation or ``J``.

    ``flavor`` is one of ``real-F``, ``real-Z``, ``quat-F``, ``quat-Z``
    (``F`` needs an odd number of legs, ``Z`` an even number) or ``real`` /
    ``quat`` to accept either parity.
    """
    kind, _, shape = flavor.partition("-")
    if kind not in ("real", "quat"):
        raise DomainError(f"unknown symmetry flavor {flavor!r}")
    count = len(flag)
    if shape == "F" and count % 2 == 0:
        raise DomainError("F-type flags need an odd number of legs")
    if shape == "Z" and count % 2 == 1:
        raise DomainError("Z-type flags need an even number of legs")
    if shape not in ("", "F", "Z"):
        raise DomainError(f"unknown symmetry flavor {flavor!r}")
    if kind == "quat" and flag.n % 2:
        raise DomainError("quaternionic symmetry needs even dimension")
    points = points or _points(3, salt=251)
    t = flag.t
    pairs = {}
    for i in range(count):
        image = flag.legs[t - i].conj() if kind == "real" else flag.legs[t - i].quat()
        pairs[i] = _distance(flag.legs[i], image, points)
    worst = max(pairs.values())
    return {"residual": worst, "pass": worst < tol, "pairs": pairs, "shape": "F" if count % 2 else "Z"}


@dataclass
class LiftReport:
    flag: MovingFlag
    target: MovingSubbundle
    sign: int
    flavor: str = "complex"
    residuals: dict = field(default_factory=dict)
    passed: bool = False
    ops: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    pipeline: str = ""

    def to_json(self, z_ref=None):
        z_ref = z_ref if z_ref is not None else _points(1, salt=261)[0]
        legs = []
        for leg in self.flag.legs:
            frame = leg.frame(z_ref).matrix if leg.generic_rank else np.zeros((self.flag.n, 0))
            legs.append({
                "label": leg.label,
                "rank": leg.generic_rank,
                "frame_at_reference": [[[float(x.real), float(x.imag)] for x in col] for col in frame.T],
            })
        return {
            "schema": "lift/v1",
            "pipeline": self.pipeline,
            "flavor": self.flavor,
            "sign": self.sign,
            "passed": bool(self.passed),
            "reference_point": [float(z_ref.real), float(z_ref.imag)],
            "ranks": self.flag.ranks,
            "legs": legs,
            "residuals": {k: _jsonable(v) for k, v in self.residuals.items()},
            "ops": [list(op) for op in self.ops],
            "extras": {k: _jsonable(v) for k, v in self.extras.items()},
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    return value if isinstance(value, (str, type(None))) else str(value)


def _signed_target(phi_bundle, sign):
    return phi_bundle if sign > 0 else phi_bundle.perp()


def assess(flag, target, sign, pipeline, flavor="complex", ops=(), symmetry=None, extras=None, points=None):
    """Residual table for a candidate lift of ``target`` (``sign`` = -1 means ``target^perp``)."""
    points = points or _points(3, salt=271)
    goal = _signed_target(target, sign)
    residuals = dict(flag.invariants(points))
    j2 = check_J2(flag, points)
    residuals["J2"] = j2["residual"]
    residuals["pi_e"] = _distance(pi_e(flag), goal, points)
    passed = j2["pass"] and residuals["orthogonality"] < SPAN_TOL and residuals["completeness"] < SPAN_TOL
    passed = passed and residuals["pi_e"] < SPAN_TOL
    if symmetry is not None:
        sym = symmetry_check(flag, symmetry, points)
        residuals["symmetry"] = sym["residual"]
        passed = passed and sym["pass"]
    return LiftReport(flag, goal, sign, flavor, residuals, bool(passed), list(ops), dict(extras or {}), pipeline)


def _flavor_for(kind, legs):
    odd = legs % 2 == 1
    if kind == "quat":
        return "quaternionic-grassmann" if odd else "sp-um"
    if kind == "real":
        return "real-grassmann" if odd else "ocs"
    return "complex"


def canonical_lift(source, points=None):
    """Canonical twistor lift of ``Phi_{-1}`` for a nu-invariant model (or uniton factorization)."""
    if isinstance(source, GrassModel):
        model = source
        solution = uhlenbeck_filtration(model).solution
    elif isinstance(source, ExtendedSolution) and source.model is not None:
        model = source.model
        solution = source
    else:
        raise DomainError("canonical_lift needs a GrassModel or an ExtendedSolution with its model")
    sym = symmetry_predicates(solution, model.r)
    if not sym["nu_invariant"]:
        raise DomainError("the extended solution is not nu-invariant")
    y = filt.canonical_F(model)
    z = filt.f_to_az(y, solution)
    flag = flag_from_filtration(z)
    zeros = flag.zero_legs()
    if zeros:
        raise NotNormalizedError(f"canonical lift has zero legs {zeros}; the extended solution is not normalized")
    phi = solution.harmonic_map().grassmannian_bundle
    kind = "complex"
    symmetry = None
    if sym["symplectic"]:
        kind, symmetry = "quat", "quat"
    elif sym["real"]:
        kind, symmetry = "real", "real"
    return assess(flag, phi, 1, "canonical", _flavor_for(kind, len(flag)), symmetry=symmetry,
                  extras={"symmetry_predicates": sym["residuals"]}, points=points)


def burstall_lift(phi, points=None, variants=("iii", "iv")):
    """Lifts from the A_z-image filtration; one report per applicable case."""
    grass = filt.grassmannian_of(phi)
    if grass is None:
        raise DomainError("burstall_lift needs a Grassmannian-valued map")
    z = filt.burstall_filtration(phi)
    cases = {"iii": "a", "iv": "b"}
    if any(v not in cases for v in variants):
        raise DomainError("burstall_lift uses combine variants iii and iv")
    reports = []
    for variant in variants:
        combined = filt.combine(z, variant, grass)
        flag = flag_from_filtration(combined)
        if flag.ranks[0] == 0:
            continue
        norm = normalize_flag(flag, points)
        sign = combined.target * norm.sign
        extras = {"case": cases[variant], "variant": variant}
        reports.append(assess(norm.flag, grass, sign, "burstall", ops=norm.ops, extras=extras, points=points))
    return reports


def strongly_conformal_lifts(phi, w=None, points=None):
    """The lift ``(V, phi, W)`` of ``phi^perp`` with ``Im A'_phi < W < ker A'_{phi^perp}``."""
    grass = filt.grassmannian_of(phi)
    if grass is None:
        raise DomainError("strongly_conformal_lifts needs a Grassmannian-valued map")
    points = points or _points(3, salt=281)
    perp = grass.perp()
    image = gauss_transform(grass, "'", 1)
    if w is None:
        w = image
    ap = a_prime(grass)
    ap_perp = a_prime(perp)

    def sandwich(zz):
        pw = w.projector(zz)
        low = ap(zz)
        lower = spectral_norm(low - pw @ low)
        upper = spectral_norm(ap_perp(zz) @ pw)
        inside = spectral_norm(pw - perp.projector(zz) @ pw)
        jet = w.projector_jet(zz, 1)
        holo = spectral_norm((perp.projector(zz) - jet.value) @ jet.dzbar().value @ jet.value)
        sc = spectral_norm(ap_perp(zz) @ low)
        return lower, upper, inside, holo, sc

    worst = np.zeros(5)
    for idx, zz in enumerate(points):
        vals, _ = at_generic_point(sandwich, zz, salt=idx)
        worst = np.maximum(worst, vals)
    names = ("image_in_W", "W_in_kernel", "W_in_phi_perp", "W_holomorphic", "strongly_conformal")
    table = dict(zip(names, (float(x) for x in worst)))
    bad = {k: v for k, v in table.items() if v > FD_TOL}
    if bad:
        raise ContractError(f"sandwich condition violated: {bad}", residual=max(bad.values()))
    v = perp.intersect(w.perp())
    flag = MovingFlag([v, grass, w], "strongly-conformal")
    unique = image.generic_rank == perp.generic_rank - gauss_transform(perp, "'", 1).generic_rank
    return assess(flag, grass, -1, "strongly-conformal", extras={"sandwich": table, "unique": unique}, points=points)


def uniton_anchored_lift(phi, alpha, points=None, variant="i"):
    """Lift through the uniton ``alpha``; legs from ``2k`` on sum to ``alpha`` before normalizing."""
    if variant not in ("i", "ii"):
        raise DomainError("uniton_anchored_lift uses combine variants i and ii")
    grass = filt.grassmannian_of(phi)
    if grass is None:
        raise DomainError("uniton_anchored_lift needs a Grassmannian-valued map")
    points = points or _points(3, salt=291)
    z, k = filt.uniton_anchored(phi, alpha)
    combined = filt.combine(z, variant, grass)
    flag = flag_from_filtration(combined)
    start = 2 * k
    summed = bundle_sum(flag.legs[start:], flag.n)
    norm = normalize_flag(flag, points)
    sign = combined.target * norm.sign
    extras = {"k": k, "uniton_legs_from": start, "uniton_sum_distance": _distance(summed, alpha, points)}
    return assess(norm.flag, grass, sign, "uniton-anchored", ops=norm.ops, extras=extras, points=points)


def real_ocs_lift(phi, alpha=None, maximal_isotropic=None, points=None, variant="i"):
    """Real lift from a real strict filtration through an isotropic uniton.

    Without ``alpha`` the uniton comes from ``isotropic_seed``; passing
    ``maximal_isotropic = W`` uses ``W + A_z W`` instead.
    """
    if variant not in ("i", "ii"):
        raise DomainError("real_ocs_lift uses combine variants i and ii")
    grass = filt.grassmannian_of(phi)
    if grass is None:
        raise DomainError("real_ocs_lift needs a Grassmannian-valued map")
    points = points or _points(3, salt=301)
    conj_gap = _distance(grass.conj(), grass, points)
    swap_gap = _distance(grass.conj(), grass.perp(), points)
    if conj_gap < SPAN_TOL:
        target_kind = "real-grassmann"
    elif swap_gap < SPAN_TOL:
        target_kind = "ocs"
    else:
        raise ContractError("map is neither real nor an orthogonal complex structure",
                            residual=min(conj_gap, swap_gap))
    if alpha is None:
        if maximal_isotropic is not None:
            az = compute_Az(phi)
            alpha = bundle_sum([maximal_isotropic, filt.az_image(az, maximal_isotropic, 1, "A W")])
        else:
            alpha = filt.isotropic_seed(phi, points)
    z = filt.real_isotropic_filtration(phi, alpha)
    report = filt.structure_predicates(z, grass, points)
    if report.alternating_for_phi or report.alternating_for_phi_perp:
        flag = flag_from_filtration(z)
        base_sign = 1 if report.alternating_for_phi else -1
        route = "alternating"
    elif report.splits:
        combined = filt.combine(z, variant, grass)
        flag = flag_from_filtration(combined)
        base_sign = combined.target
        route = f"combine-{variant}"
    else:
        raise ContractError("real filtration does not split")
    norm = normalize_flag(flag, points, allow_merge=False, symmetric=True)
    sign = base_sign * norm.sign
    extras = {"route": route, "target_kind": target_kind, "filtration_ranks": z.ranks()}
    flavor = _flavor_for("real", len(norm.flag))
    return assess(norm.flag, grass, sign, "real-ocs", flavor, norm.ops, symmetry="real", extras=extras, points=points)
