"""A_z-filtrations of C^n and F-filtrations of a Grassmannian model.

An ``AzFiltration`` is a descending list of moving subbundles
``C^n = Z_0 > Z_1 > ... > Z_{t+1} = 0`` with ``A_z Z_i`` inside ``Z_{i+1}``.
An ``FFiltration`` is the block-model counterpart ``W = Y_0 > ... > Y_{t+1} = lam W``
stepped down by ``F = lam d/dz``; its stages are stored with ``lam W`` included.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bundle import (
    DEFAULT_SEED,
    FD_TOL,
    SPAN_TOL,
    AnalyticMap,
    MovingSubbundle,
    _unitary_source,
    at_generic_point,
    bundle_sum,
    compute_Az,
    generic_points,
    kernel_jet,
    nilorder_at,
    prune_columns,
    spectral_norm,
)
from .errors import ContractError, DomainError
from .grassmodel import (
    ExtendedSolution,
    GrassModel,
    HarmonicMap,
    block_shift,
    shifted_bundle,
    tail_space,
)
from .jets import Jet, power

MAX_SEARCH = 64


def _points(count, salt, seed=DEFAULT_SEED):
    return generic_points(count, seed, salt)


def _worst(fn, points, salt=0):
    """Maximum of ``fn(z)`` over points, redrawing non-generic ones."""
    worst = 0.0
    for idx, z in enumerate(points):
        value, _ = at_generic_point(fn, z, salt=salt + idx)
        worst = max(worst, float(value))
    return worst


def _az_scale(az, z):
    return max(1.0, spectral_norm(az(z)))


def _orth(frame):
    """Orthonormal columns of a frame matrix (empty stays empty)."""
    if frame.shape[1] == 0:
        return frame
    q, _ = np.linalg.qr(frame)
    return q


def _outside(bundle, vectors, z):
    """Norm of the part of ``vectors`` orthogonal to ``bundle`` at ``z``."""
    if vectors.shape[1] == 0:
        return 0.0
    p = bundle.projector(z)
    return spectral_norm(vectors - p @ vectors)


def az_image(az, source, k, label, adjoint=False):
    """``A^k(source)`` (or ``(A_zbar)^k(source)``) with vanishing columns dropped."""

    def span(z0, order):
        a = az.jet(z0, order)
        if adjoint:
            a = -a.H
        m = power(a, k)
        frame = source.frame_jet(z0, order)
        out = m @ frame
        scale = max(1.0, spectral_norm(a.value)) ** k
        floor = SPAN_TOL * scale * max(1.0, spectral_norm(frame.value))
        return prune_columns(out, floor)

    return MovingSubbundle(source.n, span, label)


def _vanishes(az, source, k, points, adjoint=False, target=None):
    """Whether ``A^k(source)`` lies in ``target`` (``0`` when ``target`` is None)."""
    if source.generic_rank == 0:
        return True

    def residual(z):
        a = az(z)
        if adjoint:
            a = -a.conj().T
        f = source.frame(z).matrix
        v = np.linalg.matrix_power(a, k) @ f
        if target is not None:
            v = v - target.projector(z) @ v
        return spectral_norm(v) / max(1.0, spectral_norm(a)) ** k

    return _worst(residual, points, salt=97) < SPAN_TOL


def _same_bundle(a, b, points):
    if a.generic_rank != b.generic_rank:
        return False
    return _worst(lambda z: spectral_norm(a.projector(z) - b.projector(z)), points, salt=83) < SPAN_TOL


class ConjugateMap:
    """The map ``conj(phi)`` for a unitary map given by exact jets."""

    def __init__(self, phi):
        n, ufn, grass = _unitary_source(phi)
        self.n = n
        self._ufn = ufn
        self.grassmannian_bundle = None if grass is None else grass.conj()
        self.source = phi

    def unitary_jet(self, z0, order):
        return self._ufn(z0, order).conj()

    def __call__(self, z):
        return self.unitary_jet(z, 0).value


def conjugate_map(phi):
    if isinstance(phi, MovingSubbundle):
        return phi.conj()
    if isinstance(phi, AnalyticMap):
        return phi.subbundle.conj()
    return ConjugateMap(phi)


def grassmannian_of(phi):
    """The subbundle ``phi`` when the map is Grassmannian-valued, else ``None``."""
    return _unitary_source(phi)[2]


class AzFiltration:
    """``C^n = Z_0 > Z_1 > ... > Z_{t+1} = 0`` with ``A_z Z_i`` inside ``Z_{i+1}``."""

    def __init__(self, stages, base_map, label="", az=None, target=1):
        self.stages = list(stages)
        if len(self.stages) < 2:
            raise DomainError("a filtration needs at least the stages C^n and 0")
        self.base_map = base_map
        self.n = self.stages[0].n
        self.label = label
        self.az = az if az is not None else compute_Az(base_map)
        self.target = target

    @property
    def t(self):
        return len(self.stages) - 2

    def __repr__(self):
        return f"AzFiltration(n={self.n}, t={self.t}, label={self.label!r})"

    def ranks(self):
        return [s.generic_rank for s in self.stages]

    def legs(self):
        return [self.stages[i].ominus(self.stages[i + 1]) for i in range(self.t + 1)]

    def invariants(self, points=None):
        """Worst inclusion, holomorphicity and A_z-step residuals."""
        points = points or _points(3, salt=71)
        az = self.az

        def inclusion(z):
            worst = 0.0
            for i in range(len(self.stages) - 1):
                worst = max(worst, _outside(self.stages[i], self.stages[i + 1].frame(z).matrix, z))
            return worst

        def holomorphic(z):
            a = az.jet(z, 0).value
            abar = -a.conj().T
            worst = 0.0
            for stage in self.stages[1:-1]:
                if stage.generic_rank == 0:
                    continue
                s = stage.frame_jet(z, 1)
                d = s.dzbar().value + abar @ s.value
                scale = max(1.0, spectral_norm(s.value)) * max(1.0, spectral_norm(a))
                worst = max(worst, _outside(stage, d, z) / scale)
            return worst

        def step(z):
            a = az(z)
            worst = 0.0
            for i in range(len(self.stages) - 1):
                f = self.stages[i].frame(z).matrix
                worst = max(worst, _outside(self.stages[i + 1], a @ f, z) / max(1.0, spectral_norm(a)))
            return worst

        return {
            "inclusion": _worst(inclusion, points, 0),
            "holomorphic": _worst(holomorphic, points, 10),
            "az_step": _worst(step, points, 20),
        }

    def check(self, points=None):
        res = self.invariants(points)
        limits = {"inclusion": SPAN_TOL, "holomorphic": FD_TOL, "az_step": SPAN_TOL}
        for name, value in res.items():
            if value > limits[name]:
                raise ContractError(f"A_z-filtration {name} residual {value:.2e}", residual=value)
        return res


class FFiltration:
    """``W = Y_0 > ... > Y_{t+1} = lam W`` in the block model of depth ``depth``."""

    def __init__(self, stages, n, r, depth=None, model=None, label=""):
        self.stages = list(stages)
        self.n = n
        self.r = r
        self.depth = r if depth is None else depth
        self.model = model
        self.label = label

    @property
    def t(self):
        return len(self.stages) - 2

    def __repr__(self):
        return f"FFiltration(n={self.n}, r={self.r}, t={self.t})"

    def ranks(self):
        return [s.generic_rank for s in self.stages]

    def invariants(self, points=None):
        """Worst lambda-closure, dzbar-holomorphicity and F-step residuals."""
        points = points or _points(3, salt=73)
        shift = block_shift(self.n, self.depth, 1)

        def measure(z):
            lam = hol = step = 0.0
            for i, stage in enumerate(self.stages):
                s = stage.frame_jet(z, 1)
                scale = max(1.0, spectral_norm(s.value), spectral_norm(s.dz().value))
                lam = max(lam, _outside(stage, shift @ s.value, z) / scale)
                hol = max(hol, _outside(stage, s.dzbar().value, z) / scale)
                if i + 1 < len(self.stages):
                    step = max(step, _outside(self.stages[i + 1], shift @ s.dz().value, z) / scale)
            return lam, hol, step

        out = {"lambda_closure": 0.0, "holomorphic": 0.0, "F_step": 0.0}
        for idx, z in enumerate(points):
            (lam, hol, step), _ = at_generic_point(measure, z, salt=idx)
            out["lambda_closure"] = max(out["lambda_closure"], float(lam))
            out["holomorphic"] = max(out["holomorphic"], float(hol))
            out["F_step"] = max(out["F_step"], float(step))
        return out


def canonical_F(model, depth=None):
    """``Y_i = W & lam^i H_+ + lam W`` for ``i = 0..r+1``."""
    if not isinstance(model, GrassModel):
        raise DomainError("canonical_F needs a GrassModel")
    depth = model.r if depth is None else depth
    n, r = model.n, model.r
    w = model.bundle(depth)
    lam_w = shifted_bundle(w, n, depth, 1, "lam W")
    stages = [w]
    for i in range(1, r + 1):
        cut = w.intersect(tail_space(n, depth, i))
        stages.append(bundle_sum([cut, lam_w]))
    stages.append(lam_w)
    return FFiltration(stages, n, r, depth, model, "canonical")


def image_F(model, depth=None):
    """``Y_i = F^i(W) + lam W``, the F-filtration matching the A_z-image filtration."""
    depth = model.r if depth is None else depth
    n, r = model.n, model.r
    shift = block_shift(n, depth, 1)
    w = model.bundle(depth)
    lam_w = shifted_bundle(w, n, depth, 1, "lam W")
    stages = [w]
    for i in range(1, n + 2):

        def span(z0, order, i=i):
            raw = model.section_jets(z0, order + i, depth)
            for _ in range(i):
                raw = shift @ raw.dz()
            return raw

        stage = bundle_sum([MovingSubbundle(w.n, span, f"F^{i}W"), lam_w])
        if stage.generic_rank == lam_w.generic_rank:
            stages.append(lam_w)
            break
        stages.append(stage)
    return FFiltration(stages, n, r, depth, model, "images")


def f_to_az(filtration, solution, check=True):
    """``Z_i = P_0 Phi^-1 Y_i`` for an extended solution with ``Phi H_+ = W``."""
    if not isinstance(solution, ExtendedSolution):
        raise DomainError("f_to_az needs an ExtendedSolution")
    if filtration.n != solution.n:
        raise DomainError("filtration and extended solution differ in dimension")
    n = solution.n
    stages = []
    for i, y in enumerate(filtration.stages):
        if i == 0:
            stages.append(MovingSubbundle.full(n))
            continue

        def span(z0, order, y=y):
            frame = y.frame_jet(z0, order)
            out = solution.p0_inverse_jet(z0, order, frame)
            floor = SPAN_TOL * max(1.0, spectral_norm(frame.value))
            return prune_columns(out, floor)

        stages.append(MovingSubbundle(n, span, f"Z{i}"))
    result = AzFiltration(stages, HarmonicMap(solution), f"P0 Phi^-1 ({filtration.label})")
    if check:
        result.check()
        residual = commutation_residual(filtration, solution, result.az)
        if residual > FD_TOL:
            raise ContractError(f"P0 Phi^-1 F != -A_z P0 Phi^-1 (residual {residual:.2e})", residual=residual)
    return result


def commutation_residual(filtration, solution, az=None, points=None):
    """``|P0 Phi^-1 (lam d s) + A_z P0 Phi^-1 s|`` on holomorphic sections of W."""
    model = filtration.model
    if model is None:
        raise DomainError("the commutation check needs the generating model")
    az = az or compute_Az(solution.harmonic_map())
    depth = filtration.depth
    shift = block_shift(model.n, depth, 1)
    points = points or _points(3, salt=79)

    def residual(z):
        s = model.section_jets(z, 1, depth)
        left = solution.p0_inverse_jet(z, 0, Jet.constant(shift @ s.dz().value, 0)).value
        right = az(z) @ solution.p0_inverse_jet(z, 0, Jet.constant(s.value, 0)).value
        scale = max(1.0, spectral_norm(s.value), spectral_norm(s.dz().value)) * _az_scale(az, z)
        return spectral_norm(left + right) / scale

    return _worst(residual, points, salt=5)


def _nilorder(az, n, points):
    worst = 0
    for idx, z in enumerate(points):
        value, _ = at_generic_point(lambda zz: nilorder_at(az(zz), n), z, salt=idx)
        if value is None:
            return None
        worst = max(worst, value)
    return worst


def burstall_filtration(phi, points=None):
    """``Z_i = Im (A_z)^i`` until it vanishes."""
    az = compute_Az(phi)
    n = az.n
    points = points or _points(3, salt=89)
    order = _nilorder(az, n, points)
    if order is None:
        raise DomainError("map is not nilconformal: A_z is not nilpotent")
    full = MovingSubbundle.full(n)
    stages = [full] + [az_image(az, full, i, f"Im A^{i}") for i in range(1, order)]
    stages.append(MovingSubbundle.zero(n))
    return AzFiltration(stages, phi, "images", az)


def kernel_filtration(phi, t, points=None):
    """``Z_i = ker (A_z)^{t+1-i}`` for ``i = 0..t+1``."""
    az = compute_Az(phi)
    n = az.n
    points = points or _points(3, salt=89)
    full = MovingSubbundle.full(n)
    if not _vanishes(az, full, t + 1, points):
        raise DomainError(f"(A_z)^{t + 1} does not vanish")
    stages = [full]
    for i in range(1, t + 1):
        k = t + 1 - i
        stages.append(MovingSubbundle(n, lambda z0, order, k=k: kernel_jet(power(az.jet(z0, order), k)), f"ker A^{k}"))
    stages.append(MovingSubbundle.zero(n))
    return AzFiltration(stages, phi, "kernels", az)


def uniton_residuals(phi, alpha, az=None, points=None):
    """Residuals of D_zbar-holomorphicity and A_z-closure of ``alpha``."""
    az = az or compute_Az(phi)
    points = points or _points(3, salt=91)
    if alpha.generic_rank in (0, alpha.n):
        return {"holomorphic": 0.0, "az_closed": 0.0}

    def holo(z):
        a = az(z)
        s = alpha.frame_jet(z, 1)
        d = s.dzbar().value - a.conj().T @ s.value
        return _outside(alpha, d, z) / (max(1.0, spectral_norm(s.value)) * max(1.0, spectral_norm(a)))

    def closed(z):
        a = az(z)
        return _outside(alpha, a @ alpha.frame(z).matrix, z) / max(1.0, spectral_norm(a))

    return {"holomorphic": _worst(holo, points, 0), "az_closed": _worst(closed, points, 30)}


def _require_uniton(phi, alpha, az):
    res = uniton_residuals(phi, alpha, az)
    if res["holomorphic"] > FD_TOL:
        raise ContractError(f"not a uniton: not holomorphic (residual {res['holomorphic']:.2e})", residual=res["holomorphic"])
    if res["az_closed"] > SPAN_TOL:
        raise ContractError(f"not a uniton: not closed under A_z (residual {res['az_closed']:.2e})", residual=res["az_closed"])
    return res


def uniton_anchored(phi, alpha, points=None):
    """The filtration through a uniton ``alpha``; returns ``(filtration, k)`` with ``Z_k = alpha``."""
    az = compute_Az(phi)
    n = az.n
    points = points or _points(3, salt=93)
    _require_uniton(phi, alpha, az)
    perp = alpha.perp()
    k = 0
    while not _vanishes(az, perp, k, points, adjoint=True):
        k += 1
        if k > n:
            raise ContractError("A_zbar is not nilpotent on the complement of the uniton")
    stages = [MovingSubbundle.full(n)]
    for i in range(1, k):
        stages.append(az_image(az, perp, k - i, f"(Abar^{k - i} alpha^perp)", adjoint=True).perp())
    if k > 0 and alpha.generic_rank:
        stages.append(alpha)
    j = 1
    while not _vanishes(az, alpha, j, points):
        stages.append(az_image(az, alpha, j, f"A^{j} alpha"))
        j += 1
        if j > n:
            raise ContractError("A_z is not nilpotent on the uniton")
    stages.append(MovingSubbundle.zero(n))
    return AzFiltration(stages, phi, "uniton-anchored", az), k


def unitons_to_Z(unitons, n=None, check=True, points=None):
    """``Z_i = Im(pi^perp_{alpha_r} ... pi^perp_{alpha_{r-i+1}})`` for basic unitons."""
    unitons = list(unitons)
    if n is None:
        if not unitons:
            raise DomainError("n is required for an empty uniton list")
        n = unitons[0].n
    r = len(unitons)
    points = points or _points(3, salt=95)
    if check:
        for i in range(2, r + 1):
            partial = ExtendedSolution(unitons[: i - 1], n)
            az = compute_Az(partial.harmonic_map())
            alpha = unitons[i - 1]

            def basic(z, alpha=alpha, az=az):
                if alpha.generic_rank == 0:
                    return 0.0
                a = az(z)
                return spectral_norm(a @ alpha.frame(z).matrix) / max(1.0, spectral_norm(a))

            residual = _worst(basic, points, salt=i)
            if residual > SPAN_TOL:
                raise ContractError(f"uniton {i} is not basic (residual {residual:.2e})", residual=residual, index=i)
    eye = np.eye(n)
    stages = [MovingSubbundle.full(n)]
    for i in range(1, r + 1):

        def span(z0, order, i=i):
            m = Jet.eye(n, order)
            for a in unitons[r - i:]:
                m = (eye - a.projector_jet(z0, order)) @ m
            return prune_columns(m, SPAN_TOL)

        stages.append(MovingSubbundle(n, span, f"Z{i}"))
    stages.append(MovingSubbundle.zero(n))
    solution = ExtendedSolution(unitons, n)
    return AzFiltration(stages, HarmonicMap(solution), "from-unitons")


@dataclass
class StructureReport:
    applicable: bool
    strict: Optional[bool] = None
    splits: Optional[bool] = None
    alternating_for_phi: Optional[bool] = None
    alternating_for_phi_perp: Optional[bool] = None
    ranks: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)


def split_parts(filtration, phi_bundle):
    """``(U_i, V_i) = (Z_i & phi, Z_i & phi^perp)`` for every stage."""
    perp = phi_bundle.perp()
    us, vs = [], []
    for stage in filtration.stages:
        us.append(stage.intersect(phi_bundle))
        vs.append(stage.intersect(perp))
    return us, vs


def structure_predicates(filtration, phi=None, points=None):
    """Strictness, splitting and the alternating conditions."""
    grass = grassmannian_of(phi if phi is not None else filtration.base_map)
    ranks = filtration.ranks()
    if grass is None:
        return StructureReport(applicable=False, ranks=ranks)
    points = points or _points(3, salt=99)
    strict = all(a > b for a, b in zip(ranks, ranks[1:]))
    us, vs = split_parts(filtration, grass)
    splits = all(u.generic_rank + v.generic_rank == z for u, v, z in zip(us, vs, ranks))
    legs = filtration.legs()
    perp = grass.perp()

    def alternating(first, second):
        def residual(z):
            worst = 0.0
            for i, leg in enumerate(legs):
                if leg.generic_rank == 0:
                    continue
                home = first if i % 2 == 0 else second
                worst = max(worst, _outside(home, leg.frame(z).matrix, z))
            return worst

        return _worst(residual, points, salt=3)

    alt_phi = alternating(grass, perp)
    alt_perp = alternating(perp, grass)
    return StructureReport(
        applicable=True,
        strict=strict,
        splits=splits,
        alternating_for_phi=alt_phi < SPAN_TOL,
        alternating_for_phi_perp=alt_perp < SPAN_TOL,
        ranks=ranks,
        residuals={"alternating_phi": alt_phi, "alternating_phi_perp": alt_perp},
    )


def combine(filtration, variant, phi=None):
    """Turn a split A_z-filtration into an alternating one (variants i to iv)."""
    if variant not in ("i", "ii", "iii", "iv"):
        raise DomainError(f"unknown combine variant {variant!r}")
    grass = grassmannian_of(phi if phi is not None else filtration.base_map)
    if grass is None:
        raise DomainError("combine needs a Grassmannian-valued map")
    report = structure_predicates(filtration, grass)
    if not report.splits:
        raise ContractError("filtration does not split along phi and phi^perp")
    n = filtration.n
    t = filtration.t
    us, vs = split_parts(filtration, grass)
    zero = MovingSubbundle.zero(n)
    perp = grass.perp()

    def u(j):
        if j == -1:
            return grass
        return us[j] if 0 <= j <= t + 1 else zero

    def v(j):
        if j == -1:
            return perp
        return vs[j] if 0 <= j <= t + 1 else zero

    stages = []
    if variant in ("i", "ii"):
        for idx in range(2 * t + 3):
            j, odd = divmod(idx, 2)
            if not odd:
                pair = (u(j), v(j))
            elif variant == "i":
                pair = (u(j + 1), v(j))
            else:
                pair = (u(j), v(j + 1))
            stages.append(bundle_sum(pair, n))
    else:
        for idx in range(t + 3):
            j, odd = divmod(idx, 2)
            if variant == "iii":
                pair = (u(2 * j + 1), v(2 * j)) if odd else (u(2 * j - 1), v(2 * j))
            else:
                pair = (u(2 * j), v(2 * j + 1)) if odd else (u(2 * j), v(2 * j - 1))
            stages.append(bundle_sum(pair, n))
    target = 1 if variant in ("i", "iii") else -1
    return AzFiltration(stages, filtration.base_map, f"combine-{variant}", filtration.az, target=target)


def involution_Z(filtration):
    """``Z~_i = conj(Z_{t+1-i})^perp``, an A_z-filtration for ``conj(phi)``."""
    stages = filtration.stages
    t = filtration.t
    new = [stages[t + 1 - i].conj().perp() for i in range(t + 2)]
    new[0] = MovingSubbundle.full(filtration.n)
    new[-1] = MovingSubbundle.zero(filtration.n)
    return AzFiltration(new, conjugate_map(filtration.base_map), f"involuted({filtration.label})")


def reversal_matrix(n, depth):
    """Block reversal ``(y_0..y_D) -> (y_D..y_0)``; ``R y = reversal @ conj(y)``."""
    size = (depth + 1) * n
    out = np.zeros((size, size))
    for j in range(depth + 1):
        k = depth - j
        out[j * n:(j + 1) * n, k * n:(k + 1) * n] = np.eye(n)
    return out


def involution_Y(filtration):
    """``Y~_i = (R Y_{t+1-i})^perp`` with ``R(y)_j = conj(y_{r-j})``."""
    if filtration.depth != filtration.r:
        raise DomainError("involution_Y works in the block model of depth r")
    rev = reversal_matrix(filtration.n, filtration.depth)
    t = filtration.t
    new = []
    for i in range(t + 2):
        src = filtration.stages[t + 1 - i]
        mirrored = MovingSubbundle(src.n, lambda z0, order, src=src: rev @ src.frame_jet(z0, order).conj(), f"R({src.label})")
        new.append(mirrored.perp())
    return FFiltration(new, filtration.n, filtration.r, filtration.depth, None, f"involuted({filtration.label})")


def _require_isotropic(alpha, points):
    if alpha.generic_rank == 0:
        return 0.0

    def residual(z):
        f = alpha.frame(z).matrix
        return spectral_norm(f.T @ f)

    value = _worst(residual, points, salt=7)
    if value > SPAN_TOL:
        raise ContractError(f"subbundle is not isotropic (residual {value:.2e})", residual=value)
    return value


def _dedupe(stages):
    out = [stages[0]]
    for stage in stages[1:]:
        if stage.generic_rank != out[-1].generic_rank:
            out.append(stage)
    return out


def real_isotropic_filtration(phi, alpha, points=None):
    """A real strict A_z-filtration passing through the isotropic uniton ``alpha``."""
    az = compute_Az(phi)
    n = az.n
    points = points or _points(3, salt=101)
    _require_isotropic(alpha, points)
    _require_uniton(phi, alpha, az)
    partial = [alpha] if alpha.generic_rank else []
    j = 1
    while partial and not _vanishes(az, alpha, j, points):
        partial.append(az_image(az, alpha, j, f"A^{j} alpha"))
        j += 1
        if j > n:
            raise AssertionError("A_z is not nilpotent on the uniton")
    chain = [alpha]
    for _ in range(n + 1):
        current = chain[-1]
        mirror = current.conj().perp()
        t = -1
        while not _vanishes(az, mirror, t + 1, points, target=current):
            t += 1
            if t > n:
                raise AssertionError("t(alpha) search did not terminate")
        if t < 1:
            break
        grown = bundle_sum([az_image(az, mirror, t, f"A^{t}(conj alpha^perp)"), current], n)
        chain.append(grown)
    else:
        raise AssertionError("isotropic extension did not terminate")
    head = [MovingSubbundle.full(n)] + [z.conj().perp() for z in reversed(partial[1:])]
    middle = [c.conj().perp() for c in chain] + list(reversed(chain))
    tail = partial[1:] + [MovingSubbundle.zero(n)]
    stages = _dedupe(head + middle + tail)
    stages[0] = MovingSubbundle.full(n)
    return AzFiltration(stages, phi, "real-isotropic", az)


def isotropic_seed(phi, points=None):
    """An isotropic holomorphic subbundle of ``phi^perp`` with ``A^2(conj b^perp & phi^perp) < b``."""
    grass = grassmannian_of(phi)
    if grass is None:
        raise DomainError("isotropic_seed needs a Grassmannian-valued map")
    az = compute_Az(phi)
    n = az.n
    points = points or _points(3, salt=103)
    perp = grass.perp()
    beta = MovingSubbundle.zero(n)
    for _ in range(n + 1):
        cut = beta.conj().perp().intersect(perp)
        u = 0
        while not _vanishes(az, cut, 2 * u + 2, points, target=beta):
            u += 1
            if 2 * u + 2 > 2 * n:
                raise AssertionError("u(beta) search did not terminate")
        if u < 1:
            break
        beta = bundle_sum([az_image(az, cut, 2 * u, f"A^{2 * u} cut"), beta], n)
    else:
        raise AssertionError("isotropic seed iteration did not terminate")
    _require_isotropic(beta, points)
    if not _vanishes(az, beta, 2, points, target=beta):
        raise ContractError("seed is not closed under A_z^2")
    return beta


def beta_condition_residual(phi, beta, points=None):
    grass = grassmannian_of(phi)
    az = compute_Az(phi)
    points = points or _points(3, salt=107)
    cut = beta.conj().perp().intersect(grass.perp())
    if cut.generic_rank == 0:
        return 0.0

    def residual(z):
        a = az(z)
        v = a @ a @ cut.frame(z).matrix
        return _outside(beta, v, z) / max(1.0, spectral_norm(a)) ** 2

    return _worst(residual, points, salt=9)
