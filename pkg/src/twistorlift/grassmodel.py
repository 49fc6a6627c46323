"""Finite Grassmannian models ``W = Phi H_+`` and factored extended solutions.

A section ``sum_k lam**k c_k`` of ``H_+`` modulo ``lam**(D+1) H_+`` is stored as
the block vector ``(c_0, ..., c_D)`` in ``C^{(D+1) n}``; ``D`` is the *depth*
of the block model and defaults to the degree ``r``.  Every stage of a
filtration is a ``MovingSubbundle`` of that block space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional

import numpy as np

from . import pointlin
from .bundle import (
    DEFAULT_SEED,
    SPAN_TOL,
    MovingSubbundle,
    at_generic_point,
    bundle_sum,
    compress,
    compute_Az,
    generic_points,
    kernel_jet,
    prune_columns,
    spectral_norm,
)
from .errors import ContractError, DomainError
from .jets import Jet, hstack
from .meromorphic import LaurentSection, MeroVec

LAMBDA_POINTS = tuple(np.exp(2j * np.pi * k / 8) for k in range(8))
INTERP_POINTS = 33
SCHEMA = "grassmodel/v1"


# block-model helpers
def block_shift(n, depth, k):
    """Matrix of multiplication by ``lam**k`` on blocks ``0..depth`` (truncated)."""
    size = (depth + 1) * n
    out = np.zeros((size, size))
    for j in range(depth + 1):
        t = j + k
        if 0 <= t <= depth:
            out[t * n:(t + 1) * n, j * n:(j + 1) * n] = np.eye(n)
    return out


def tail_space(n, depth, start):
    """The constant bundle ``lam**start H_+`` modulo ``lam**(depth+1)``."""
    size = (depth + 1) * n
    start = max(start, 0)
    cols = np.eye(size)[:, start * n:] if start <= depth else np.zeros((size, 0))
    return MovingSubbundle.constant(cols, f"lam^{start}H+", n=size)


def embed_depth(bundle, n, old_depth, new_depth, tail_from):
    """Re-embed a block bundle containing ``lam**tail_from H_+`` at a larger depth."""
    if new_depth == old_depth:
        return bundle
    pad = np.zeros(((new_depth + 1) * n, (old_depth + 1) * n))
    pad[: (old_depth + 1) * n] = np.eye((old_depth + 1) * n)
    moved = MovingSubbundle((new_depth + 1) * n, lambda z0, order: pad @ bundle.frame_jet(z0, order), bundle.label)
    return bundle_sum([moved, tail_space(n, new_depth, tail_from)])


def shifted_bundle(bundle, n, depth, k, label=""):
    mat = block_shift(n, depth, k)
    return MovingSubbundle(bundle.n, lambda z0, order: mat @ bundle.frame_jet(z0, order), label or f"lam^{k}({bundle.label})")


def block(vec, n, k):
    return vec[k * n:(k + 1) * n]


class GrassModel:
    """The model generated by ``X`` via ``W = X + lam X_(1) + ... + lam^r H_+``."""

    def __init__(self, n, r, generators=(), flags=None):
        if r < 1:
            raise DomainError("degree r must be at least 1")
        gens = list(generators)
        for g in gens:
            if not isinstance(g, LaurentSection):
                raise DomainError("generators must be LaurentSection objects")
            if g.n != n:
                raise DomainError("generator dimension does not match n")
            bad = [e for e in g.exponents() if not 0 <= e <= r - 1]
            if bad:
                raise DomainError(f"generator exponents {bad} outside [0, {r - 1}]")
        self.n = n
        self.r = r
        self.generators = gens
        self.flags = dict(flags or {})
        self._bundles = {}

    def __repr__(self):
        return f"GrassModel(n={self.n}, r={self.r}, generators={len(self.generators)})"

    def _generator_jet(self, gen, z0, order, depth):
        size = (depth + 1) * self.n
        taylor = np.zeros((order + 1, size, 1), dtype=complex)
        for e, vec in gen.terms.items():
            if e <= depth:
                taylor[:, e * self.n:(e + 1) * self.n, 0] = vec.taylor(z0, order)
        return Jet.from_holomorphic(taylor)

    def section_jets(self, z0, order, depth=None, include_tail=True):
        """Holomorphic spanning columns ``lam^k d^m L`` (``m <= k < r``) as one jet."""
        depth = self.r if depth is None else depth
        size = (depth + 1) * self.n
        cols = []
        for gen in self.generators:
            g = self._generator_jet(gen, z0, order + self.r - 1, depth)
            derivs = [g]
            for _ in range(self.r - 1):
                derivs.append(derivs[-1].dz())
            for k in range(self.r):
                shift = block_shift(self.n, depth, k)
                for m in range(k + 1):
                    cols.append(shift @ derivs[m].truncate(order))
        if include_tail:
            cols.append(Jet.constant(np.eye(size)[:, self.r * self.n:], order))
        if not cols:
            return Jet(np.zeros(((order + 1) * (order + 2) // 2, size, 0), dtype=complex), order)
        return hstack(cols)

    def bundle(self, depth=None):
        depth = self.r if depth is None else depth
        if depth < self.r:
            raise DomainError("depth must be at least the degree")
        if depth not in self._bundles:
            self._bundles[depth] = MovingSubbundle(
                (depth + 1) * self.n, lambda z0, order: self.section_jets(z0, order, depth), "W"
            )
        return self._bundles[depth]

    @property
    def W(self):
        return self.bundle()

    def p0_bundle(self):
        """``P_0 W`` as a subbundle of C^n."""
        w = self.W
        n = self.n
        return MovingSubbundle(n, lambda z0, order: w.frame_jet(z0, order)[:n, :], "P0W")

    def closure_residuals(self, points=None):
        """Membership residuals of ``lam s`` and ``lam ds/dz`` in ``W``."""
        points = points or generic_points(3, DEFAULT_SEED, salt=21)
        shift = block_shift(self.n, self.r, 1)
        w = self.W
        worst_lam = worst_f = 0.0
        for idx, z in enumerate(points):
            def residuals(zz):
                s = self.section_jets(zz, 1)
                p = w.projector(zz)
                q = np.eye(p.shape[0]) - p
                a = shift @ s.value
                b = shift @ s.dz().value
                scale = max(1.0, np.linalg.norm(s.value, 2), np.linalg.norm(s.dz().value, 2))
                return np.linalg.norm(q @ a, 2) / scale, np.linalg.norm(q @ b, 2) / scale

            (rl, rf), _ = at_generic_point(residuals, z, salt=idx)
            worst_lam = max(worst_lam, rl)
            worst_f = max(worst_f, rf)
        return {"lambda_closure": float(worst_lam), "F_closure": float(worst_f)}

    def to_json(self):
        return {
            "schema": SCHEMA,
            "n": self.n,
            "r": self.r,
            "generators": [g.to_json() for g in self.generators],
            "flags": {k: bool(self.flags.get(k, False)) for k in ("expect_nu", "expect_real", "expect_symplectic")},
        }

    @classmethod
    def from_json(cls, obj):
        allowed = {"schema", "n", "r", "generators", "flags"}
        if not isinstance(obj, dict):
            raise DomainError("model JSON must be an object")
        unknown = set(obj) - allowed
        if unknown:
            raise DomainError(f"unknown keys {sorted(unknown)}")
        if obj.get("schema", SCHEMA) != SCHEMA:
            raise DomainError(f"unsupported schema {obj.get('schema')!r}")
        for key in ("n", "r", "generators"):
            if key not in obj:
                raise DomainError(f"missing key {key!r}")
        n, r = obj["n"], obj["r"]
        if not isinstance(n, int) or not isinstance(r, int) or n < 1:
            raise DomainError("n and r must be positive integers")
        flags = obj.get("flags", {})
        if not isinstance(flags, dict) or set(flags) - {"expect_nu", "expect_real", "expect_symplectic"}:
            raise DomainError("unknown flag keys")
        gens = [LaurentSection.from_json(g, n) for g in obj["generators"]]
        return cls(n, r, gens, flags)


def generate_W(generators, r, n=None, flags=None):
    gens = list(generators)
    if n is None:
        if not gens:
            raise DomainError("n is required for an empty generator list")
        n = gens[0].n
    return GrassModel(n, r, gens, flags)


# extended solutions
def apply_factor_inverses(projectors, blocks_jet, n, upto=None):
    """Apply ``(pi_j + lam^-1 pi_j^perp)`` for the given projectors (first one first).

    ``blocks_jet`` has shape ``(n * (D + 1), m)``.  Returns a dict mapping each
    exponent ``-len(projectors)..D - len(projectors)`` to its coefficient jet.
    """
    size = blocks_jet.shape[0]
    depth = size // n - 1
    coeffs = {k: blocks_jet[k * n:(k + 1) * n, :] for k in range(depth + 1)}
    eye = np.eye(n)
    for p in projectors:
        q = eye - p
        low, high = min(coeffs), max(coeffs)
        new = {}
        for k in range(low - 1, high + 1):
            term = None
            if k in coeffs:
                term = p @ coeffs[k]
            if k + 1 in coeffs:
                extra = q @ coeffs[k + 1]
                term = extra if term is None else term + extra
            new[k] = term
        # the top exponent lost its lam^(k+1) partner and is no longer reliable
        new.pop(high, None)
        coeffs = new
    return coeffs


class HarmonicMap:
    """``z -> Phi_{-1}(z)`` with exact jets."""

    def __init__(self, solution):
        self.solution = solution
        self.n = solution.n

    def unitary_jet(self, z0, order):
        return self.solution.jet(z0, order, -1.0)

    def __call__(self, z):
        return self.solution.eval(z, -1.0)

    def involution_defect(self, z):
        u = self(z)
        return float(np.linalg.norm(u @ u - np.eye(self.n), 2))

    @cached_property
    def grassmannian_bundle(self):
        """The +1 eigenbundle, or ``None`` when ``Phi_{-1}`` is not an involution."""
        z = generic_points(1, DEFAULT_SEED, salt=61)[0]
        defect, _ = at_generic_point(self.involution_defect, z, salt=61)
        if defect > SPAN_TOL:
            return None
        n = self.n
        return MovingSubbundle(n, lambda z0, order: 0.5 * (self.unitary_jet(z0, order) + np.eye(n)), "phi")


class ExtendedSolution:
    """``Phi = C(lam) (pi_1 + lam pi_1^perp) ... (pi_r + lam pi_r^perp)``."""

    def __init__(self, factors, n, left_constant=None, model=None, depth=None, label=""):
        self.factors = list(factors)
        self.n = n
        self.left_constant = left_constant
        self.model = model
        self.depth = depth if depth is not None else len(self.factors)
        self.label = label

    @property
    def r(self):
        return len(self.factors)

    def __repr__(self):
        return f"ExtendedSolution(n={self.n}, r={self.r})"

    def projector_jets(self, z0, order):
        return [a.projector_jet(z0, order) for a in self.factors]

    def jet(self, z0, order, lam):
        out = Jet.eye(self.n, order)
        eye = np.eye(self.n)
        for p in self.projector_jets(z0, order):
            out = out @ (p + lam * (eye - p))
        if self.left_constant is not None:
            out = np.asarray(self.left_constant(lam)) @ out
        return out

    def eval(self, z, lam):
        return self.jet(z, 0, lam).value

    __call__ = eval

    def harmonic_map(self):
        return HarmonicMap(self)

    def s_matrices(self, z0, order):
        """``S_s`` = sum of products ``Pi_r ... Pi_1`` with ``s`` perp factors."""
        eye = np.eye(self.n)
        sums = [Jet.eye(self.n, order)]
        for p in self.projector_jets(z0, order):
            q = eye - p
            new = []
            for s in range(len(sums) + 1):
                term = None
                if s < len(sums):
                    term = p @ sums[s]
                if s >= 1:
                    extra = q @ sums[s - 1]
                    term = extra if term is None else term + extra
                new.append(term)
            sums = new
        return sums

    def p0_inverse_jet(self, z0, order, blocks_jet):
        """``P_0 Phi^-1`` applied to block columns, via the ``S_s`` sum."""
        if self.left_constant is not None:
            raise DomainError("P0 Phi^-1 is only available without a left constant")
        n = self.n
        depth = blocks_jet.shape[0] // n - 1
        s_mats = self.s_matrices(z0, order)
        out = None
        for s in range(min(depth, self.r) + 1):
            term = s_mats[s] @ blocks_jet[s * n:(s + 1) * n, :]
            out = term if out is None else out + term
        return out

    def residual(self, z, lam, az=None):
        """Relative residual of ``Phi^-1 Phi_z - (1 - lam^-1) A_z``."""
        az = az or compute_Az(self.harmonic_map())
        phi = self.jet(z, 1, lam)
        lhs = phi.value.conj().T @ phi.dz().value if abs(abs(lam) - 1) < 1e-14 else np.linalg.solve(phi.value, phi.dz().value)
        a = az(z)
        rhs = (1 - 1 / lam) * a
        return float(np.linalg.norm(lhs - rhs, 2) / max(1.0, np.linalg.norm(a, 2)))

    def expansion(self, z, npts=INTERP_POINTS):
        """Laurent coefficients ``{k: T_k}`` of ``Phi(z, .)`` by interpolation."""
        lams = np.exp(2j * np.pi * np.arange(npts) / npts)
        vals = np.array([self.eval(z, l) for l in lams])
        coeffs = np.fft.fft(vals, axis=0) / npts
        out = {}
        half = npts // 2
        for idx in range(npts):
            k = idx if idx <= half else idx - npts
            if np.linalg.norm(coeffs[idx], 2) > 1e-10:
                out[k] = coeffs[idx]
        return dict(sorted(out.items()))


@dataclass
class UnitonFactorization:
    filtration: List[MovingSubbundle]
    unitons: List[MovingSubbundle]
    flavor: str
    solution: ExtendedSolution
    depth: int
    model: Optional[GrassModel] = None


def _check_filtration(stages, n, depth, z):
    shift = block_shift(n, depth, 1)
    for i in range(1, len(stages)):
        prev = stages[i - 1]
        cur = stages[i]
        pp = prev.projector(z)
        pc = cur.projector(z)
        fc = cur.frame(z).matrix
        fp = prev.frame(z).matrix
        down = np.linalg.norm(fc - pp @ fc, 2) if fc.shape[1] else 0.0
        lam_prev = shift @ fp
        up = np.linalg.norm(lam_prev - pc @ lam_prev, 2) if fp.shape[1] else 0.0
        worst = max(down, up)
        if worst > SPAN_TOL:
            raise ContractError(f"filtration condition fails at stage {i} (residual {worst:.2e})", residual=worst, index=i)


def extract_unitons(stages, n, depth, model=None, flavor="custom", check=True):
    """Unitons ``alpha_i = P_0 Phi_{i-1}^-1 W_i`` of a filtration ``W_0 = H_+ ... W_m``."""
    stages = list(stages)
    if check:
        at_generic_point(lambda z: _check_filtration(stages, n, depth, z), generic_points(1, salt=31)[0], salt=31)
    unitons = []
    for i in range(1, len(stages)):
        previous = list(unitons)
        stage = stages[i]

        def span(z0, order, previous=previous, stage=stage):
            projs = [a.projector_jet(z0, order) for a in previous]
            frame = stage.frame_jet(z0, order)
            coeffs = apply_factor_inverses(projs, frame, n)
            # a zero uniton shows up as rounding noise, which must not count as rank
            return prune_columns(coeffs[0], SPAN_TOL * max(1.0, spectral_norm(frame.value)))

        unitons.append(MovingSubbundle(n, span, f"alpha{i}"))
    solution = ExtendedSolution(unitons, n, model=model, depth=depth, label=flavor)
    return UnitonFactorization(stages, unitons, flavor, solution, depth, model)


def segal_stages(model, depth=None):
    depth = model.r if depth is None else depth
    w = model.bundle(depth)
    return [bundle_sum([w, tail_space(model.n, depth, i)]) for i in range(model.r + 1)]


def uhlenbeck_stages(model, depth=None):
    depth = model.r if depth is None else depth
    n, r = model.n, model.r
    w = model.bundle(depth)
    stages = []
    for i in range(r + 1):
        cut = w.intersect(tail_space(n, depth, r - i)) if i < r else w
        moved = shifted_bundle(cut, n, depth, -(r - i)) if i < r else w
        stages.append(bundle_sum([moved, tail_space(n, depth, i)]) if i < r else w)
    return stages


def segal_filtration(model):
    return extract_unitons(segal_stages(model), model.n, model.r, model, "segal")


def uhlenbeck_filtration(model):
    return extract_unitons(uhlenbeck_stages(model), model.n, model.r, model, "uhlenbeck")


def osculating_stages(model, max_steps=None):
    """``W_(k)`` for ``k = 0..t`` where ``W_(t) = H_+``; returns (stages, t)."""
    n, r = model.n, model.r
    p0 = model.p0_bundle()
    max_steps = max_steps or n
    t = None
    for k in range(max_steps + 1):
        if _osculating_p0_rank(p0, k) == n:
            t = k
            break
    if t is None:
        raise DomainError("P0 W is not full, so W has no factorization by A_z-images")
    t = max(t, r)
    depth = t

    def osc(k):
        def span(z0, order):
            raw = model.section_jets(z0, order + k, depth)
            cols = [raw.truncate(order)]
            d = raw
            for _ in range(k):
                d = d.dz()
                cols.append(d.truncate(order))
            return hstack(cols)

        return MovingSubbundle((depth + 1) * n, span, f"W_({k})")

    return [osc(t - i) for i in range(t + 1)], t


def _osculating_p0_rank(p0, k):
    def rank(z):
        f = p0.frame_jet(z, k)
        cols = [f.value]
        d = f
        for _ in range(k):
            d = d.dz()
            cols.append(d.value)
        return pointlin.orthonormalize(np.hstack(cols)).rank

    value, _ = at_generic_point(rank, generic_points(1, salt=41)[0], salt=41)
    return value


def osculating_filtration(model):
    stages, t = osculating_stages(model)
    return extract_unitons(stages, model.n, t, model, "osculating")


def eval_Phi(solution, z, lam):
    return solution.eval(z, lam)


def harmonic_map(solution):
    return solution.harmonic_map()


def _lambda_grid():
    return list(LAMBDA_POINTS)


def symmetry_predicates(solution, r=None, points=None, tol=SPAN_TOL):
    """Residuals of the nu, real, symplectic and S^1 symmetry conditions."""
    r = solution.r if r is None else r
    n = solution.n
    points = points or generic_points(4, DEFAULT_SEED, salt=51)
    lams = _lambda_grid()
    res = {"nu_invariant": 0.0, "real": 0.0, "symplectic": None if n % 2 else 0.0, "s1_invariant": 0.0}
    jm = pointlin.QuatStructure(n // 2).matrix if n % 2 == 0 else None
    for idx, z in enumerate(points):
        def measure(zz):
            vals = {l: solution.eval(zz, l) for l in lams}
            minus = vals[lams[4]]
            nu = real = sym = s1 = 0.0
            for l in lams:
                p = vals[l]
                nu = max(nu, np.linalg.norm(p @ minus - solution.eval(zz, -l), 2))
                real = max(real, np.linalg.norm(p - l**r * p.conj(), 2))
                if jm is not None:
                    sym = max(sym, np.linalg.norm(jm @ p.conj() @ jm.T - l ** (-r) * p, 2))
                for m in lams[:3]:
                    s1 = max(s1, np.linalg.norm(p @ vals[m] - solution.eval(zz, l * m), 2))
            return nu, real, sym, s1

        (nu, real, sym, s1), _ = at_generic_point(measure, z, salt=idx)
        res["nu_invariant"] = max(res["nu_invariant"], nu)
        res["real"] = max(res["real"], real)
        if jm is not None:
            res["symplectic"] = max(res["symplectic"], sym)
        res["s1_invariant"] = max(res["s1_invariant"], s1)
    out = {"residuals": {k: (None if v is None else float(v)) for k, v in res.items()}}
    for k, v in res.items():
        out[k] = bool(v is not None and v < tol)
    return out


def nu_align(solution, z0):
    """``Psi = gamma Phi(z0)^-1 Phi`` with ``gamma(lam) = pi_V + lam pi_V^perp``."""
    z0 = complex(z0)
    phi0 = solution.eval(z0, -1.0)
    n = solution.n
    defect = np.linalg.norm(phi0 @ phi0 - np.eye(n), 2)
    if defect > SPAN_TOL:
        raise ContractError(f"Phi_-1(z0) is not an involution (defect {defect:.2e})", residual=defect)
    p_plus = 0.5 * (np.eye(n) + phi0)
    p_plus = 0.5 * (p_plus + p_plus.conj().T)
    inner = solution.left_constant

    def left(lam):
        base = solution.eval(z0, lam)
        gamma = p_plus + lam * (np.eye(n) - p_plus)
        out = gamma @ np.linalg.inv(base)
        return out if inner is None else out @ np.asarray(inner(lam))

    return ExtendedSolution(solution.factors, n, left_constant=left, model=solution.model, depth=solution.depth, label="nu-aligned")


def laurent_support(solution, z):
    coeffs = solution.expansion(z)
    return (min(coeffs), max(coeffs)) if coeffs else (0, 0)


class SmoothSection:
    """A smooth section of C^n given by exact jets."""

    def __init__(self, n, jet_fn, label=""):
        self.n = n
        self.jet_fn = jet_fn
        self.label = label

    def jet(self, z0, order):
        return self.jet_fn(complex(z0), order)

    def __call__(self, z):
        return self.jet(z, 0).value[:, 0]


def laurent_block_jet(section, z0, order, depth):
    n = section.n
    taylor = np.zeros((order + 1, (depth + 1) * n, 1), dtype=complex)
    for e, vec in section.terms.items():
        taylor[:, e * n:(e + 1) * n, 0] = vec.taylor(z0, order)
    return Jet.from_holomorphic(taylor)


def p0_phi_inverse(solution, section):
    """``P_0 (Phi^-1 H) = sum_s S_s P_s(H)`` for ``H`` supported in ``[0, r]``."""
    if section.n != solution.n:
        raise DomainError("section dimension does not match the extended solution")
    bad = [e for e in section.exponents() if not 0 <= e <= solution.r]
    if bad:
        raise DomainError(f"section exponents {bad} outside [0, {solution.r}]")
    depth = solution.r

    def jet(z0, order):
        return solution.p0_inverse_jet(z0, order, laurent_block_jet(section, z0, order, depth))

    return SmoothSection(solution.n, jet, "P0 Phi^-1 H")
