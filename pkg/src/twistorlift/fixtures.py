"""Built-in example data: Grassmannian models and one analytic map."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .bundle import AnalyticMap, MovingSubbundle, superconformal_torus
from .errors import DomainError
from .grassmodel import GrassModel
from .meromorphic import LaurentSection, MeroVec, RatFun

SQRT_HALF = np.sqrt(0.5)


@dataclass
class Fixture:
    name: str
    description: str
    flavor: str = "complex"
    model: Optional[GrassModel] = None
    analytic: Optional[AnalyticMap] = None
    data: Dict[str, object] = field(default_factory=dict)

    @property
    def n(self):
        return self.model.n if self.model is not None else self.analytic.n

    def to_json(self):
        out = {"name": self.name, "description": self.description, "flavor": self.flavor}
        if self.model is not None:
            out["model"] = self.model.to_json()
        else:
            out["analytic"] = self.analytic.name
        data = {}
        for key, value in self.data.items():
            if isinstance(value, MeroVec):
                data[key] = value.to_json()
            elif isinstance(value, MovingSubbundle) and value.generators is not None:
                data[key] = {"generators": [g.to_json() for g in value.generators], "rank": value.generic_rank}
        if data:
            out["data"] = data
        return out


def poly(*coeffs):
    return RatFun(list(coeffs))


def monomial(k, c=1.0):
    return RatFun.monomial(k, c)


def vec(components):
    return MeroVec([RatFun.coerce(c) for c in components])


def moment_curve(n):
    """``(1, z, ..., z^(n-1))``."""
    return MeroVec([monomial(k) for k in range(n)])


def hyperbolic_vector(a, b):
    """``sum a_k f_k + b_k g_k`` with ``f_k = (e_{2k-1} + i e_{2k}) / sqrt 2`` and ``g_k = conj f_k``."""
    m = len(a)
    comps = []
    for k in range(m):
        comps.append((a[k] + b[k]) * SQRT_HALF)
        comps.append((a[k] - b[k]) * (1j * SQRT_HALF))
    return MeroVec(comps)


def bilinear_complement_basis(v, pivot):
    """Polynomial sections spanning ``{w : w . v = 0}`` (``v[pivot]`` generically nonzero)."""
    n = v.n
    out = []
    for j in range(n):
        if j == pivot:
            continue
        comps = [RatFun.constant(0.0) for _ in range(n)]
        comps[pivot] = v.components[j]
        comps[j] = -v.components[pivot]
        out.append(MeroVec(comps))
    return out


def symplectic_dual(v):
    """``J_m v`` computed without conjugation, so ``w . (J_m v) = Omega(w, v)``."""
    m = v.n // 2
    c = v.components
    return MeroVec([-x for x in c[m:]] + list(c[:m]))


def _osc(gens, label):
    return MovingSubbundle.from_generators(gens, label)


def holomorphic_line():
    h = moment_curve(3)
    model = GrassModel(3, 1, [LaurentSection({0: h})], {"expect_nu": True})
    return Fixture("holomorphic-line", "holomorphic curve (1, z, z^2) in CP^2, degree 1", model=model,
                   data={"beta1": _osc([h], "beta1")})


def mixed_pair():
    f = moment_curve(4)
    model = GrassModel(4, 2, [LaurentSection({0: f})], {"expect_nu": True})
    return Fixture("mixed-pair", "beta1 = f, beta2 = f_(1) for the twisted cubic in CP^3", model=model,
                   data={"beta1": _osc([f], "beta1"), "beta2": _osc([f, f.differentiate()], "beta2")})


def frenet_pair():
    f = moment_curve(5)
    d2 = f.differentiate(2)
    model = GrassModel(5, 2, [LaurentSection({0: f}), LaurentSection({1: d2})], {"expect_nu": True})
    derivs = [f.differentiate(k) for k in range(4)]
    return Fixture(
        "frenet-pair",
        "beta1 = f, beta2 = f_(2) for the rational normal curve in CP^4",
        model=model,
        data={
            "beta1": _osc(derivs[:1], "beta1"),
            "beta2": _osc(derivs[:3], "beta2"),
            "f_1": _osc(derivs[:2], "f_(1)"),
            "f_2": _osc(derivs[:3], "f_(2)"),
        },
    )


def real_mixed_pair():
    z = monomial(1)
    v = hyperbolic_vector([poly(1.0), z], [-monomial(3), monomial(2)])
    comp = bilinear_complement_basis(v, 0)
    gens = [LaurentSection({0: v})] + [LaurentSection({1: w}) for w in comp]
    model = GrassModel(4, 2, gens, {"expect_nu": True, "expect_real": True})
    return Fixture("real-mixed-pair", "null curve v with beta2 = v^perp under the bilinear form", "real", model,
                   data={"beta1": _osc([v], "beta1"), "beta2": _osc([v] + comp, "beta2"), "v": v})


def totally_isotropic_rp4():
    z = monomial(1)
    a = [poly(1.0), z]
    b = [monomial(4, 1.0 / 6.0), monomial(3, -2.0 / 3.0)]
    base = hyperbolic_vector(a, b)
    f = MeroVec(list(base.components) + [monomial(2)])
    d = [f.differentiate(k) for k in range(3)]
    gens = [LaurentSection({0: f}), LaurentSection({0: d[1]}), LaurentSection({1: d[2]})]
    model = GrassModel(5, 2, gens, {"expect_nu": True, "expect_real": True})
    return Fixture("totally-isotropic-rp4", "totally isotropic curve in CP^4 with beta1 = f_(1)", "real", model,
                   data={"beta1": _osc(d[:2], "f_(1)"), "beta2": _osc(d[:3], "f_(2)"), "f": f})


def quaternionic_mixed_pair():
    z = monomial(1)
    v = MeroVec([poly(1.0), z, monomial(3), monomial(2, -3.0)])
    comp = bilinear_complement_basis(symplectic_dual(v), 2)
    gens = [LaurentSection({0: v})] + [LaurentSection({1: w}) for w in comp]
    model = GrassModel(4, 2, gens, {"expect_nu": True, "expect_symplectic": True})
    return Fixture("quaternionic-mixed-pair", "curve v with Omega(v, v') = 0 and beta2 = (J beta1)^perp", "symplectic",
                   model, data={"beta1": _osc([v], "beta1"), "beta2": _osc([v] + comp, "beta2"), "v": v})


def torus():
    return Fixture("superconformal-torus-cp2", "superconformal exponential torus in CP^2", analytic=superconformal_torus())


def example_82():
    h = moment_curve(4)
    e4 = MeroVec.constant([0, 0, 0, 1])
    model = GrassModel(4, 3, [LaurentSection({0: h, 2: e4})], {"expect_nu": True})
    d = [h.differentiate(k) for k in range(3)]
    return Fixture(
        "example-8.2",
        "W generated by H0 + lam^2 H2 with H0 = (1, z, z^2, z^3), H2 = e4",
        model=model,
        data={"h": _osc(d[:1], "h"), "h_1": _osc(d[:2], "h_(1)"), "h_2": _osc(d[:3], "h_(2)"), "H0": h, "H2": e4},
    )


def real_example():
    z = monomial(1)
    zero = poly(0.0)
    s = [[zero] * 4 for _ in range(4)]

    def put(i, j, value):
        s[i][j] = value
        s[j][i] = -value

    put(0, 1, z)
    put(2, 3, monomial(3, 1.0 / 3.0))
    put(0, 2, monomial(2, 0.5))
    put(1, 3, monomial(2, 0.5))

    def graph(a):
        b = [sum((s[i][j] * a[j] for j in range(4)), poly(0.0)) for i in range(4)]
        return hyperbolic_vector(a, b)

    a0 = [z, zero, zero, poly(1.0)]
    a2 = [zero, -z, poly(1.0), zero]
    h0, h2 = graph(a0), graph(a2)
    h1 = hyperbolic_vector([zero] * 4, [zero, poly(1.0), zero, zero])
    h3 = hyperbolic_vector([zero] * 4, [poly(1.0), zero, zero, zero])
    gens = [LaurentSection({0: h0, 2: h1}), LaurentSection({0: h2, 2: h3})]
    model = GrassModel(8, 3, gens, {"expect_nu": True, "expect_real": True})
    return Fixture("real-example-8.2", "real degree-3 model in C^8 built from a skew 4x4 matrix S(z)", "real", model,
                   data={"H0": h0, "H1": h1, "H2": h2, "H3": h3})


def symplectic_example():
    z = monomial(1)
    h0 = MeroVec([poly(1.0), z, monomial(2), monomial(5), monomial(4, -5.0), monomial(3, 10.0)])
    e1 = MeroVec.constant([1, 0, 0, 0, 0, 0])
    gens = [LaurentSection({0: h0, 2: e1}), LaurentSection({1: h0.differentiate(3)})]
    model = GrassModel(6, 3, gens, {"expect_nu": True, "expect_symplectic": True})
    return Fixture("symplectic-example-8.2", "symplectic degree-3 model in C^6 with H0 totally J-isotropic",
                   "symplectic", model, data={"H0": h0})


REGISTRY: Dict[str, Callable[[], Fixture]] = {
    "holomorphic-line": holomorphic_line,
    "mixed-pair": mixed_pair,
    "frenet-pair": frenet_pair,
    "real-mixed-pair": real_mixed_pair,
    "totally-isotropic-rp4": totally_isotropic_rp4,
    "superconformal-torus-cp2": torus,
    "example-8.2": example_82,
    "real-example-8.2": real_example,
    "symplectic-example-8.2": symplectic_example,
    "quaternionic-mixed-pair": quaternionic_mixed_pair,
}


def names():
    return list(REGISTRY)


def get(name):
    try:
        return REGISTRY[name]()
    except KeyError:
        raise DomainError(f"unknown fixture {name!r}") from None


def random_model(seed, n=None, r=None, generators=None, max_degree=3):
    """A seeded model with random polynomial generators (complex coefficients)."""
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(4, 7))
    r = r or int(rng.integers(1, 4))
    count = generators or int(rng.integers(1, 3))
    gens = []
    for _ in range(count):
        terms = {}
        for e in sorted(set(int(x) for x in rng.integers(0, r, size=int(rng.integers(1, r + 1))))):
            comps = []
            for _ in range(n):
                deg = int(rng.integers(0, max_degree + 1))
                comps.append(RatFun(list(rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1))))
            terms[e] = MeroVec(comps)
        gens.append(LaurentSection(terms))
    return GrassModel(n, r, gens)
