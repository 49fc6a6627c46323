"""Pointwise complex linear algebra on C^n.

Frames are stored as ``n x k`` matrices whose columns are the frame vectors.
The Hermitian product is ``<v, w> = sum v_i conj(w_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError

RANK_TOL = 1e-9
INTERSECT_CUTOFF = 1e-8
PROJECTOR_TOL = 1e-9


def _columns(vs, n=None):
    if isinstance(vs, Frame):
        return vs.matrix
    if isinstance(vs, np.ndarray) and vs.ndim == 2:
        return vs.astype(complex, copy=False)
    vs = [np.asarray(v, dtype=complex).ravel() for v in vs]
    if not vs:
        if n is None:
            raise DomainError("ambient dimension unknown for an empty vector list")
        return np.zeros((n, 0), dtype=complex)
    dims = {v.size for v in vs}
    if len(dims) != 1:
        raise DomainError("vectors must share ambient dimension")
    return np.stack(vs, axis=1)


@dataclass(frozen=True)
class Frame:
    """Orthonormal (or at least spanning) columns in C^n."""

    matrix: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2:
            raise DomainError("frame matrix must be two-dimensional")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "n", m.shape[0])

    @property
    def rank(self):
        return self.matrix.shape[1]

    @property
    def vectors(self):
        return [self.matrix[:, j] for j in range(self.rank)]

    def orthonormality_defect(self):
        g = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(g - np.eye(self.rank)))) if self.rank else 0.0


@dataclass(frozen=True)
class Projector:
    """Hermitian idempotent of a given rank."""

    matrix: np.ndarray
    rank: int

    def __post_init__(self):
        p = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", p)
        defect = max(
            np.max(np.abs(p @ p - p)),
            np.max(np.abs(p - p.conj().T)),
            abs(np.trace(p).real - self.rank),
        ) if p.size else 0.0
        if defect > PROJECTOR_TOL:
            raise ContractError(f"not an orthogonal projector (defect {defect:.2e})", residual=defect)

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class QuatStructure:
    """The conjugate-linear map J(a + b) = (-conj b) + (conj a) on C^m + C^m."""

    m: int

    @property
    def matrix(self):
        """Real matrix ``Jm`` with ``J v = Jm @ conj(v)``."""
        m = self.m
        jm = np.zeros((2 * m, 2 * m))
        jm[:m, m:] = -np.eye(m)
        jm[m:, :m] = np.eye(m)
        return jm

    def __call__(self, v):
        return quat_apply(self, v)


def orthonormalize(vs, tol=RANK_TOL, n=None):
    """Orthonormal frame for the span of ``vs`` using the SVD."""
    a = _columns(vs, n)
    if a.shape[1] == 0:
        return Frame(np.zeros((a.shape[0], 0), dtype=complex))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return Frame(np.zeros((a.shape[0], 0), dtype=complex))
    k = int(np.sum(s > tol * s[0]))
    return Frame(u[:, :k])


def projector(frame):
    f = frame if isinstance(frame, Frame) else Frame(_columns(frame))
    defect = f.orthonormality_defect()
    if defect > 1e-8:
        raise ContractError(f"frame is not orthonormal (defect {defect:.2e})", residual=defect)
    return Projector(f.matrix @ f.matrix.conj().T, f.rank)


def complement(p):
    eye = np.eye(p.n)
    return Projector(eye - p.matrix, p.n - p.rank)


def kernel_frame(a, tol=RANK_TOL):
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    k = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return Frame(vh[k:].conj().T)


def ominus(big, small, tol=1e-8):
    """Orthonormal frame of ``small^perp`` inside ``big``."""
    e = orthonormalize(big)
    f = orthonormalize(small, n=e.n)
    if f.rank:
        violation = float(np.linalg.norm(f.matrix - e.matrix @ (e.matrix.conj().T @ f.matrix), 2))
        if violation > tol:
            raise ContractError(f"subspace not contained (violation {violation:.2e})", residual=violation)
    rest = e.matrix - f.matrix @ (f.matrix.conj().T @ e.matrix)
    out = orthonormalize(rest, n=e.n)
    if out.rank != e.rank - f.rank:
        out = Frame(out.matrix[:, : e.rank - f.rank])
    return out


def subspace_ops(a, b, op):
    """Sum or intersection of two subspaces given by spanning vectors."""
    fa = orthonormalize(a)
    fb = orthonormalize(b, n=fa.n)
    if op == "sum":
        return orthonormalize(np.hstack([fa.matrix, fb.matrix]), n=fa.n)
    if op == "intersect":
        eye = np.eye(fa.n)
        m = (eye - fa.matrix @ fa.matrix.conj().T) + (eye - fb.matrix @ fb.matrix.conj().T)
        w, v = np.linalg.eigh(m)
        return Frame(v[:, w < INTERSECT_CUTOFF])
    raise DomainError(f"unknown subspace operation {op!r}")


def bilinear(v, w):
    """Complex symmetric bilinear form without conjugation."""
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if v.shape[0] != w.shape[0]:
        raise DomainError("bilinear operands must share dimension")
    return v.T @ w


def is_isotropic(vs, tol=1e-9):
    a = _columns(vs)
    if a.shape[1] == 0:
        return True
    f = orthonormalize(a)
    return bool(np.max(np.abs(f.matrix.T @ f.matrix), initial=0.0) < tol)


def quat_apply(j, v):
    v = np.asarray(v, dtype=complex)
    if v.shape[0] % 2:
        raise DomainError("quaternionic structure needs even dimension")
    m = v.shape[0] // 2
    if isinstance(j, QuatStructure) and j.m != m:
        raise DomainError("dimension does not match the quaternionic structure")
    a, b = v[:m], v[m:]
    return np.concatenate([-b.conj(), a.conj()], axis=0)
