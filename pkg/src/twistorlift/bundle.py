"""Moving subbundles of the trivial bundle C^n over a Riemann surface.

A ``MovingSubbundle`` is described by a function returning, at a point ``z0``,
a jet of a (possibly redundant) spanning matrix.  Every structural operation
(sums, intersections, complements, images of endomorphisms, Gauss transforms)
is a new ``MovingSubbundle`` whose spanning jet is computed from the jets of
its parents, so derivatives stay exact.  "Filling out zeros" is realised by
evaluating only at generic points: the rank at a point is compared with the
generic rank and a ``GenericPointError`` is raised on a drop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import pointlin
from .errors import ContractError, DomainError, GenericPointError, PoleError
from .jets import Jet, hstack, power
from .meromorphic import MeroVec

DEFAULT_SEED = 0xC0FFEE
DISC_CENTER = 0.5 + 0.3j
DISC_RADIUS = 1.0
MAX_REDRAWS = 8
FD_STEP = 1e-5
RANK_TOL = pointlin.RANK_TOL
DROP_TOL = 1e-10
SPAN_TOL = 1e-8
FD_TOL = 1e-6


def generic_points(count, seed=DEFAULT_SEED, salt=0):
    """Seeded pseudo-random points in the disc |z - 0.5 - 0.3i| < 1."""
    rng = np.random.default_rng([seed, salt])
    radius = DISC_RADIUS * np.sqrt(rng.uniform(0.0, 0.95, size=count))
    angle = rng.uniform(0.0, 2 * np.pi, size=count)
    return [complex(c) for c in DISC_CENTER + radius * np.exp(1j * angle)]


def at_generic_point(fn, z, seed=DEFAULT_SEED, salt=0):
    """Evaluate ``fn(z)``, redrawing ``z`` on a pole or rank drop."""
    rng = np.random.default_rng([seed, salt, 7919])
    for attempt in range(MAX_REDRAWS + 1):
        try:
            return fn(z), z
        except (GenericPointError, PoleError):
            if attempt == MAX_REDRAWS:
                raise
            z = complex(z + 0.05 * (rng.normal() + 1j * rng.normal()))
    raise AssertionError("unreachable")


def compress(span, tol=RANK_TOL):
    """Reduce a spanning jet to full column rank at its base point.

    Columns negligible against the largest one are dropped, the others are
    normalised, and the leading right singular vectors select the span.
    Returns the compressed jet and the rank.
    """
    v0 = span.value
    n, m = v0.shape
    if m == 0:
        return span, 0
    norms = np.linalg.norm(v0, axis=0)
    big = norms.max()
    if big == 0:
        return Jet(np.zeros(span.coeffs.shape[:2] + (0,), dtype=complex), span.order), 0
    keep = np.nonzero(norms > DROP_TOL * big)[0]
    scale = np.zeros((m, keep.size))
    scale[keep, np.arange(keep.size)] = 1.0 / norms[keep]
    _, s, vh = np.linalg.svd(v0 @ scale, full_matrices=False)
    k = int(np.sum(s > tol * s[0]))
    return span @ (scale @ vh[:k].conj().T), k


def kernel_jet(mat, rank=None, tol=RANK_TOL, left=None, right=None):
    """Jet of a kernel basis of a constant-rank matrix jet."""
    a, b = mat.shape
    if left is None:
        u, s, vh = np.linalg.svd(mat.value, full_matrices=True)
        v = vh.conj().T
        if rank is None:
            rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    else:
        u, v = left, right
    if rank == 0:
        return Jet.eye(b, mat.order)
    if rank == b:
        return Jet(np.zeros((mat.coeffs.shape[0], b, 0), dtype=complex), mat.order)
    rotated = u.conj().T @ mat @ v
    head = rotated[:rank, :rank]
    tail = rotated[:rank, rank:]
    top = -(head.inv() @ tail)
    bottom = Jet.eye(b - rank, mat.order)
    return v @ Jet(np.concatenate([top.coeffs, bottom.coeffs], axis=1), mat.order)


def spectral_norm(mat):
    return float(np.linalg.norm(mat, 2)) if mat.size else 0.0


def prune_columns(span, floor):
    """Drop columns whose value at the base point has norm below ``floor``."""
    norms = np.linalg.norm(span.value, axis=0)
    keep = np.nonzero(norms > floor)[0]
    return span[:, keep]


def projector_from_span(frame):
    """``S (S* S)^-1 S*`` for a full-rank spanning jet ``S``."""
    if frame.shape[1] == 0:
        return Jet(np.zeros((frame.coeffs.shape[0], frame.shape[0], frame.shape[0]), dtype=complex), frame.order)
    return frame @ (frame.H @ frame).inv() @ frame.H


class MovingSubbundle:
    """A subbundle of C^n given by a spanning-jet function.

    ``span_fn(z0, order)`` returns a ``Jet`` of shape ``(n, m)`` whose columns
    span the fibre near ``z0``.  ``generators`` is kept when the bundle is
    spanned by meromorphic sections.
    """

    def __init__(self, n, span_fn, label="", generators=None, seed=DEFAULT_SEED):
        self.n = n
        self._span_fn = span_fn
        self.label = label
        self.generators = generators
        self.seed = seed
        self._frames = {}
        self._projectors = {}

    def __repr__(self):
        return f"MovingSubbundle(n={self.n}, label={self.label!r})"

    # constructors
    @classmethod
    def from_generators(cls, generators, label="", n=None):
        gens = list(generators)
        if n is None:
            if not gens:
                raise DomainError("ambient dimension needed for an empty generator list")
            n = gens[0].n
        if any(g.n != n for g in gens):
            raise DomainError("generators must share ambient dimension")

        def span(z0, order):
            if not gens:
                return Jet(np.zeros((_jsize(order), n, 0), dtype=complex), order)
            taylor = np.stack([g.taylor(z0, order) for g in gens], axis=2)
            return Jet.from_holomorphic(taylor)

        return cls(n, span, label, generators=gens)

    @classmethod
    def constant(cls, vectors, label="", n=None):
        mat = pointlin._columns(vectors, n)
        return cls(mat.shape[0], lambda z0, order: Jet.constant(mat, order), label or "constant")

    @classmethod
    def zero(cls, n):
        return cls.constant(np.zeros((n, 0)), "0", n)

    @classmethod
    def full(cls, n):
        return cls.constant(np.eye(n), "C^n")

    @classmethod
    def from_jets(cls, n, span_fn, label=""):
        return cls(n, span_fn, label)

    # evaluation
    def span_jet(self, z0, order):
        return self._span_fn(complex(z0), order)

    @cached_property
    def generic_rank(self):
        ranks = []
        for salt in range(12):
            for z in generic_points(3, self.seed, salt):
                try:
                    ranks.append(compress(self.span_jet(z, 0))[1])
                except (PoleError, GenericPointError):
                    continue
            if len(ranks) >= 3:
                break
        if not ranks:
            raise GenericPointError(f"no generic point found for {self.label}")
        return max(ranks)

    def rank_at(self, z):
        return compress(self.span_jet(z, 0))[1]

    def frame_jet(self, z0, order):
        z0 = complex(z0)
        hit = self._frames.get(z0)
        if hit is not None and hit.order >= order:
            return hit.truncate(order)
        jet, k = compress(self.span_jet(z0, order))
        if k != self.generic_rank:
            raise GenericPointError(f"rank {k} != generic rank {self.generic_rank} for {self.label} at {z0}")
        self._frames[z0] = jet
        return jet

    def projector_jet(self, z0, order):
        z0 = complex(z0)
        hit = self._projectors.get(z0)
        if hit is not None and hit.order >= order:
            return hit.truncate(order)
        p = projector_from_span(self.frame_jet(z0, order))
        self._projectors[z0] = p
        return p

    def frame(self, z):
        return pointlin.orthonormalize(self.frame_jet(z, 0).value, n=self.n)

    def projector(self, z):
        return self.projector_jet(z, 0).value

    def rank(self):
        return self.generic_rank

    # derived bundles
    def perp(self):
        parent = self

        def span(z0, order):
            frame = parent.frame_jet(z0, order)
            if frame.shape[1] == 0:
                return Jet.eye(parent.n, order)
            return kernel_jet(frame.H, rank=frame.shape[1])

        return MovingSubbundle(self.n, span, f"({self.label})^perp")

    def conj(self):
        parent = self
        return MovingSubbundle(self.n, lambda z0, order: parent.frame_jet(z0, order).conj(), f"conj({self.label})")

    def quat(self):
        """Image under the quaternionic structure ``J``."""
        if self.n % 2:
            raise DomainError("quaternionic structure needs even dimension")
        jm = pointlin.QuatStructure(self.n // 2).matrix
        parent = self
        return MovingSubbundle(self.n, lambda z0, order: jm @ parent.frame_jet(z0, order).conj(), f"J({self.label})")

    def __add__(self, other):
        return bundle_sum([self, other])

    def intersect(self, other):
        a, b = self, other

        def span(z0, order):
            pa = a.projector_jet(z0, order)
            pb = b.projector_jet(z0, order)
            eye = np.eye(a.n)
            m = (eye - pa) + (eye - pb)
            w, v = np.linalg.eigh(m.value)
            v = v[:, ::-1]
            null = int(np.sum(w < pointlin.INTERSECT_CUTOFF))
            return kernel_jet(m, rank=a.n - null, left=v, right=v)

        return MovingSubbundle(self.n, span, f"({self.label})&({other.label})")

    def ominus(self, other, check=True):
        """``other^perp`` inside ``self`` (requires ``other`` inside ``self``)."""
        big, small = self, other

        def span(z0, order):
            pb = small.projector_jet(z0, order)
            frame = big.frame_jet(z0, order)
            if check and small.generic_rank:
                pe = big.projector_jet(z0, 0).value
                sf = small.frame_jet(z0, 0).value
                viol = np.linalg.norm(sf - pe @ sf, 2) / max(1.0, np.linalg.norm(sf, 2))
                if viol > SPAN_TOL:
                    raise ContractError(f"{small.label} not inside {big.label} (violation {viol:.2e})", residual=viol)
            rest = frame - pb @ frame
            return prune_columns(rest, SPAN_TOL * max(1.0, spectral_norm(frame.value)))

        return MovingSubbundle(self.n, span, f"({self.label})-({other.label})")

    def apply(self, endo_jet_fn, label="", extra_order=0):
        """Image of this bundle under an endomorphism given by ``endo_jet_fn(z0, order)``."""
        parent = self

        def span(z0, order):
            t = endo_jet_fn(z0, order + extra_order)
            return t.truncate(order) @ parent.frame_jet(z0, order)

        return MovingSubbundle(self.n, span, label or f"T({self.label})")

    def contains(self, other, z):
        """Residual of ``other`` inside ``self`` at ``z`` (relative)."""
        if other.generic_rank == 0:
            return 0.0
        p = self.projector(z)
        f = other.frame(z).matrix
        return float(np.linalg.norm(f - p @ f, 2))


def _jsize(order):
    return (order + 1) * (order + 2) // 2


def bundle_sum(bundles, n=None):
    bundles = list(bundles)
    if n is None:
        n = bundles[0].n

    def span(z0, order):
        parts = [b.frame_jet(z0, order) for b in bundles]
        parts = [p for p in parts if p.shape[1]]
        if not parts:
            return Jet(np.zeros((_jsize(order), n, 0), dtype=complex), order)
        return hstack(parts)

    return MovingSubbundle(n, span, "+".join(b.label for b in bundles) or "0")


def image_bundle(n, endo_jet_fn, label=""):
    """Image of an endomorphism field of C^n."""
    return MovingSubbundle(n, lambda z0, order: endo_jet_fn(z0, order), label)


def kernel_bundle(n, endo_jet_fn, label=""):
    return MovingSubbundle(n, lambda z0, order: kernel_jet(endo_jet_fn(z0, order)), label)


@dataclass
class AnalyticMap:
    """A Grassmannian map given by an exact spanning-jet function.

    ``section_jet(z0, order)`` returns the jet of a spanning matrix; ``value``
    is the Cartan embedding ``pi - pi^perp`` and ``dz`` its exact derivative.
    """

    name: str
    n: int
    section_jet: Callable
    description: str = ""

    @cached_property
    def subbundle(self):
        return MovingSubbundle(self.n, self.section_jet, self.name)

    def value(self, z):
        p = self.subbundle.projector(z)
        return 2 * p - np.eye(self.n)

    def dz(self, z):
        return 2 * self.subbundle.projector_jet(z, 1).dz().value

    def unitary_jet(self, z0, order):
        return 2 * self.subbundle.projector_jet(z0, order) - np.eye(self.n)


def superconformal_torus():
    """The superconformal torus in CP^2 built from exponentials."""
    zeta = np.exp(2j * np.pi / 3)
    rates = np.array([1.0, zeta, zeta**2])

    def section(z0, order):
        base = np.exp(rates * z0 - np.conj(rates * z0))

        def coeff(p, q):
            return (base * rates**p * (-np.conj(rates)) ** q / (math.factorial(p) * math.factorial(q)))[:, None]

        return Jet.from_monomials(coeff, (3, 1), order)

    return AnalyticMap("superconformal-torus-cp2", 3, section, "exponential superconformal torus")


def torus_harmonic_sequence(i):
    """Member ``phi_i`` of the harmonic sequence of the torus fixture."""
    zeta = np.exp(2j * np.pi / 3)
    rates = np.array([1.0, zeta, zeta**2])
    twist = rates**i

    def section(z0, order):
        base = twist * np.exp(rates * z0 - np.conj(rates * z0))

        def coeff(p, q):
            return (base * rates**p * (-np.conj(rates)) ** q / (math.factorial(p) * math.factorial(q)))[:, None]

        return Jet.from_monomials(coeff, (3, 1), order)

    return MovingSubbundle(3, section, f"torus-phi{i}")


@dataclass
class BundleEndomorphism:
    """An endomorphism field of C^n with an optional exact jet."""

    n: int
    jet_fn: Optional[Callable] = None
    evaluator: Optional[Callable] = None
    provenance: str = "from_grassmannian"
    label: str = ""

    def __call__(self, z):
        if self.jet_fn is not None:
            return self.jet_fn(complex(z), 0).value
        return self.evaluator(z)

    def jet(self, z0, order):
        if self.jet_fn is None:
            raise DomainError("no exact jet available for this endomorphism")
        return self.jet_fn(complex(z0), order)

    def power(self, k):
        src = self
        return BundleEndomorphism(self.n, lambda z0, order: power(src.jet_fn(z0, order), k), provenance=self.provenance, label=f"({self.label})^{k}")

    def adjoint_bar(self):
        """``A_zbar = -A_z^*`` for the endomorphism ``A_z`` of a unitary map."""
        src = self
        return BundleEndomorphism(self.n, lambda z0, order: -src.jet_fn(z0, order).H, provenance=self.provenance, label=f"bar({self.label})")


def _unitary_source(phi):
    """Return ``(n, unitary_jet_fn, grassmannian_bundle_or_None)``."""
    if isinstance(phi, MovingSubbundle):
        n = phi.n
        return n, lambda z0, order: 2 * phi.projector_jet(z0, order) - np.eye(n), phi
    if isinstance(phi, AnalyticMap):
        return phi.n, phi.unitary_jet, phi.subbundle
    if hasattr(phi, "unitary_jet"):
        return phi.n, phi.unitary_jet, getattr(phi, "grassmannian_bundle", None)
    raise DomainError(f"cannot interpret {type(phi).__name__} as a unitary map")


def fd_wirtinger(f, z, h=FD_STEP):
    """Central-difference ``(d/dz f, d/dzbar f)``."""
    fx = (f(z + h) - f(z - h)) / (2 * h)
    fy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def compute_Az(phi):
    """The endomorphism ``A_z = (1/2) phi^-1 d phi/dz``."""
    if callable(phi) and not isinstance(phi, (MovingSubbundle, AnalyticMap)) and not hasattr(phi, "unitary_jet"):
        n = np.asarray(phi(DISC_CENTER)).shape[0]

        def evaluate(z):
            u = np.asarray(phi(z), dtype=complex)
            return 0.5 * u.conj().T @ fd_wirtinger(phi, z)[0]

        return BundleEndomorphism(n, evaluator=evaluate, provenance="from_unitary_map", label="A_z")
    n, ufn, grass = _unitary_source(phi)

    def jet(z0, order):
        u = ufn(z0, order + 1)
        return 0.5 * (u.H.truncate(order) @ u.dz())

    return BundleEndomorphism(n, jet, provenance="from_grassmannian" if grass is not None else "from_unitary_map", label="A_z")


def second_fundamental_form(phi, psi, kind="'"):
    """``v -> pi_psi(d v)`` on sections of ``phi`` (``kind`` is ' or '')."""
    if kind not in ("'", "''", "′", "″"):
        raise DomainError(f"unknown second fundamental form kind {kind!r}")
    bar = kind in ("''", "″")

    def jet(z0, order):
        pp = phi.projector_jet(z0, order + 1)
        ps = psi.projector_jet(z0, order)
        d = pp.dzbar() if bar else pp.dz()
        return ps @ d @ pp.truncate(order)

    checked = {}

    def guarded(z0, order):
        if not checked:
            pp = phi.projector_jet(z0, 0).value
            ps = psi.projector_jet(z0, 0).value
            defect = float(np.linalg.norm(ps @ pp, 2))
            if defect > SPAN_TOL:
                raise ContractError(f"{phi.label} and {psi.label} are not orthogonal ({defect:.2e})", residual=defect)
            checked[True] = True
        return jet(z0, order)

    mark = "''" if bar else "'"
    return BundleEndomorphism(phi.n, guarded, label=f"A{mark}({phi.label},{psi.label})")


def a_prime(phi):
    """``A'_phi = pi_perp (d/dz pi) pi`` as an endomorphism of C^n."""
    n = phi.n

    def jet(z0, order):
        p = phi.projector_jet(z0, order + 1)
        q = np.eye(n) - p.truncate(order)
        return q @ p.dz() @ p.truncate(order)

    return BundleEndomorphism(n, jet, label=f"A'({phi.label})")


def a_double_prime(phi):
    n = phi.n

    def jet(z0, order):
        p = phi.projector_jet(z0, order + 1)
        q = np.eye(n) - p.truncate(order)
        return q @ p.dzbar() @ p.truncate(order)

    return BundleEndomorphism(n, jet, label=f"A''({phi.label})")


def gauss_transform(phi, direction="'", i=1):
    """Iterated ``d'``- or ``d''``-Gauss transform with zeros filled out."""
    if i < 0:
        direction = "''" if direction in ("'", "′") else "'"
        i = -i
    bar = direction in ("''", "″")
    mark = "''" if bar else "'"
    current = phi
    for step in range(i):
        current = _gauss_step(current, bar, f"G{mark}^{step + 1}({phi.label})")
    return current


def _gauss_step(phi, bar, label):
    form = a_double_prime(phi) if bar else a_prime(phi)

    def span(z0, order):
        frame = phi.frame_jet(z0, order)
        out = form.jet(z0, order) @ frame
        scale = max(1.0, spectral_norm(out.value), spectral_norm(frame.value))
        return prune_columns(out, SPAN_TOL * scale)

    return MovingSubbundle(phi.n, span, label)


@dataclass
class PredicateReport:
    is_harmonic: bool
    harmonic_residual: float
    nilorder: Optional[int]
    is_strongly_conformal: Optional[bool]
    strongly_conformal_residual: Optional[float]
    is_holomorphic: Optional[bool]
    is_antiholomorphic: Optional[bool]
    residuals: dict = field(default_factory=dict)

    def is_nilconformal(self, r=None):
        if self.nilorder is None:
            return False
        return True if r is None else self.nilorder <= r


def harmonic_residual(phi, z, az=None):
    """``|dzbar A_z + [A_zbar, A_z]|`` relative to ``max(1, |A_z|)`` at ``z``."""
    az = az or compute_Az(phi)
    a = az.jet(z, 1)
    a0 = a.value
    abar = -a0.conj().T
    res = a.dzbar().value + abar @ a0 - a0 @ abar
    return float(np.linalg.norm(res, 2) / max(1.0, np.linalg.norm(a0, 2)))


def nilorder_at(az_matrix, n, tol=SPAN_TOL):
    scale = max(1.0, np.linalg.norm(az_matrix, 2))
    m = np.eye(n, dtype=complex)
    for r in range(1, n + 1):
        m = m @ az_matrix
        if np.linalg.norm(m, 2) < tol * scale**r:
            return r
    return None


def predicates(phi, points=None, seed=DEFAULT_SEED, tol=FD_TOL):
    """Harmonicity, nilconformality and conformality predicates over 25 points."""
    if points is None:
        points = generic_points(25, seed, salt=11)
    n, _, grass = _unitary_source(phi)
    az = compute_Az(phi)
    harm = []
    orders = []
    sc, hol, antihol = [], [], []
    ap = a_prime(grass) if grass is not None else None
    ap_perp = a_prime(grass.perp()) if grass is not None else None
    app = a_double_prime(grass) if grass is not None else None
    for idx, z in enumerate(points):
        def evaluate(zz):
            out = {"harm": harmonic_residual(phi, zz, az), "nil": nilorder_at(az(zz), n)}
            if grass is not None:
                a1 = ap(zz)
                a2 = ap_perp(zz)
                out["sc"] = float(np.linalg.norm(a2 @ a1, 2))
                out["hol"] = float(np.linalg.norm(app(zz), 2))
                out["antihol"] = float(np.linalg.norm(a1, 2))
            return out

        vals, _ = at_generic_point(evaluate, z, seed, salt=idx)
        harm.append(vals["harm"])
        orders.append(vals["nil"])
        if grass is not None:
            sc.append(vals["sc"])
            hol.append(vals["hol"])
            antihol.append(vals["antihol"])
    nil = None if any(o is None for o in orders) else max(orders)
    hres = max(harm)
    residuals = {"harmonic": hres}
    if grass is not None:
        residuals.update(strongly_conformal=max(sc), holomorphic=max(hol), antiholomorphic=max(antihol))
    return PredicateReport(
        is_harmonic=hres < tol,
        harmonic_residual=hres,
        nilorder=nil,
        is_strongly_conformal=None if grass is None else max(sc) < tol,
        strongly_conformal_residual=None if grass is None else max(sc),
        is_holomorphic=None if grass is None else max(hol) < tol,
        is_antiholomorphic=None if grass is None else max(antihol) < tol,
        residuals=residuals,
    )


def projector_distance(a, b, z):
    return float(np.linalg.norm(a.projector(z) - b.projector(z), 2))
