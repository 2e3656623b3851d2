"""Finite-dimensional Green-space machinery.

The extension space E (the A-orthogonal complement of the minimal domain in
the maximal one) is represented in a fixed basis by two matrices: the Gram
matrix ``gram`` of A-inner products and the matrix ``jmat`` of A restricted to
E.  Coordinate vectors are columns; all inner products are linear in the
first argument::

    (x, y)_A = y^H @ gram @ x
    [x, y]_A = -(x, J y)_A = y^H @ (gram @ jmat) @ x

Subspaces are stored by a matrix of basis columns.  Lagrangian (selfadjoint)
domains are the d-dimensional subspaces on which the Green form vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateGreenForm,
    DimensionMismatch,
    EigensolverFailure,
    NotAlmostComplex,
    NotHermitian,
    NotIsometry,
    OutOfChart,
    RankMismatch,
    WrongRank,
)

__all__ = [
    "STRUCT_TOL",
    "RANK_TOL",
    "ExtensionSpace",
    "Subspace",
    "LagrangianDomain",
    "GraphChart",
    "SelfAdjointCheck",
    "validate_space",
    "green_form",
    "orthocomplement",
    "adjoint_domain",
    "is_selfadjoint",
    "as_lagrangian",
    "graph_domain",
    "chart_of",
    "gap",
    "principal_angles",
    "intersect",
    "random_hermitian",
    "sample_sa",
    "cayley_split",
]

STRUCT_TOL = 1e-10
RANK_TOL = 1e-8


def _op_norm(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


@dataclass(frozen=True, eq=False)
class ExtensionSpace:
    """The space E with its A-inner product and the isometry J = A|_E."""

    gram: np.ndarray
    jmat: np.ndarray

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @property
    def d(self) -> int:
        """Half-dimension (the deficiency index)."""
        return self.gram.shape[0] // 2

    @cached_property
    def greenmat(self) -> np.ndarray:
        """Matrix of the Green form: ``green(x, y) = y^H greenmat x``."""
        return self.gram @ self.jmat

    @cached_property
    def _chol(self) -> np.ndarray:
        # gram = L L^H; whitened coordinates are L^H x
        return np.linalg.cholesky(self.gram)

    def inner(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """A-inner product ``(x, y)_A``; for matrices returns ``Y^H G X``."""
        x = np.asarray(x)
        y = np.asarray(y)
        if x.shape[0] != self.dim or y.shape[0] != self.dim:
            raise DimensionMismatch(
                f"vectors of length {x.shape[0]}, {y.shape[0]} in a space of dimension {self.dim}")
        return y.conj().T @ self.gram @ x

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(np.real(self.inner(x, x)), 0.0)))

    def whiten(self, x: np.ndarray) -> np.ndarray:
        """Coordinates in which the A-inner product is the Euclidean one."""
        return self._chol.conj().T @ x

    def unwhiten(self, z: np.ndarray) -> np.ndarray:
        return scipy.linalg.solve_triangular(self._chol.conj().T, z, lower=False)

    def apply_j(self, x: np.ndarray) -> np.ndarray:
        return self.jmat @ x

    def span(self, coeffs) -> "Subspace":
        return Subspace(self, np.asarray(coeffs, dtype=complex).reshape(self.dim, -1))

    def whole(self) -> "Subspace":
        return Subspace(self, np.eye(self.dim, dtype=complex))


def validate_space(gram, jmat, tol: float = STRUCT_TOL) -> ExtensionSpace:
    """Check the structural identities of (gram, jmat) and wrap them.

    Raises :class:`NotAlmostComplex` when ``J^2 != -I``, :class:`NotIsometry`
    when ``J^H G J != G`` and :class:`DegenerateGreenForm` when the Green
    matrix is (numerically) singular.  Tolerances are relative to ``|G|``.
    """
    gram = np.asarray(gram, dtype=complex)
    jmat = np.asarray(jmat, dtype=complex)
    n = gram.shape[0]
    if gram.shape != (n, n) or jmat.shape != (n, n) or n % 2 or n == 0:
        raise DimensionMismatch(f"need square matrices of equal even size, got {gram.shape}, {jmat.shape}")
    if _op_norm(gram - gram.conj().T) > tol * _op_norm(gram):
        raise NotHermitian("gram is not Hermitian")
    try:
        np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise NotHermitian("gram is not positive definite") from exc
    eye = np.eye(n)
    if _op_norm(jmat @ jmat + eye) > tol:
        raise NotAlmostComplex(f"|J^2 + I| = {_op_norm(jmat @ jmat + eye):.3e}")
    gnorm = _op_norm(gram)
    if _op_norm(jmat.conj().T @ gram @ jmat - gram) > tol * gnorm:
        raise NotIsometry(f"|J^H G J - G| = {_op_norm(jmat.conj().T @ gram @ jmat - gram):.3e}")
    green = gram @ jmat
    smin = np.linalg.svd(green, compute_uv=False)[-1]
    if smin <= tol * gnorm:
        raise DegenerateGreenForm(f"smallest singular value {smin:.3e}")
    return ExtensionSpace(gram, jmat)


def _mgs(space: ExtensionSpace, x: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt in the A-inner product, two passes per column."""
    q = np.array(x, dtype=complex, copy=True)
    g = space.gram
    k = q.shape[1]
    for j in range(k):
        scale = np.sqrt(max(np.real(q[:, j].conj() @ g @ q[:, j]), 0.0))
        for _ in range(2):
            for i in range(j):
                r = q[:, i].conj() @ g @ q[:, j]
                q[:, j] -= r * q[:, i]
        nrm = np.sqrt(max(np.real(q[:, j].conj() @ g @ q[:, j]), 0.0))
        if scale == 0.0 or nrm <= RANK_TOL * scale:
            raise WrongRank(f"column {j} is (numerically) dependent on the previous ones")
        q[:, j] /= nrm
    return q


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of E given by basis columns (``coeffs`` has shape 2d x k)."""

    space: ExtensionSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[0] != self.space.dim:
            raise DimensionMismatch(f"basis vectors of length {c.shape[0]} in E of dimension {self.space.dim}")
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @cached_property
    def basis(self) -> np.ndarray:
        """Canonical representative with gram-orthonormal columns."""
        if self.dim == 0:
            return self.coeffs
        return _mgs(self.space, self.coeffs)

    @cached_property
    def projector(self) -> np.ndarray:
        """A-orthogonal projector onto the subspace, as a matrix on coordinates."""
        q = self.basis
        return q @ q.conj().T @ self.space.gram

    def contains(self, x: np.ndarray, tol: float = RANK_TOL) -> bool:
        x = np.asarray(x, dtype=complex)
        r = x - self.projector @ x
        return self.space.norm(r) <= tol * max(self.space.norm(x), 1e-300)


class LagrangianDomain(Subspace):
    """A d-dimensional isotropic subspace: a selfadjoint boundary condition."""

    def __post_init__(self):
        super().__post_init__()
        if self.dim != self.space.d:
            raise WrongRank(f"Lagrangian domain must have dimension {self.space.d}, got {self.dim}")
        chk = is_selfadjoint(self)
        if not chk.ok:
            raise NotHermitian(f"subspace is not isotropic for the Green form (residual {chk.residual:.3e})")


@dataclass(frozen=True, eq=False)
class GraphChart:
    """Chart over a Lagrangian base: ``sigma`` is the matrix of A T on base."""

    base: LagrangianDomain
    sigma: np.ndarray = field(default=None)

    def __post_init__(self):
        d = self.base.dim
        s = np.zeros((d, d), dtype=complex) if self.sigma is None else np.asarray(self.sigma, dtype=complex)
        s = s.reshape(d, d)
        if _op_norm(s - s.conj().T) > STRUCT_TOL * max(1.0, _op_norm(s)):
            raise NotHermitian("chart matrix must be Hermitian")
        object.__setattr__(self, "sigma", s)


class SelfAdjointCheck(NamedTuple):
    ok: bool
    residual: float


def green_form(space: ExtensionSpace, u, v):
    """``[u, v]_A = -(u, J v)_A``; skew-Hermitian in (u, v)."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape[0] != space.dim or v.shape[0] != space.dim:
        raise DimensionMismatch("coordinate vectors do not match the space")
    return v.conj().T @ space.greenmat @ u


def orthocomplement(sub: Subspace) -> Subspace:
    """A-orthogonal complement, returned with an orthonormal basis."""
    space = sub.space
    if sub.dim == 0:
        return Subspace(space, np.eye(space.dim, dtype=complex))
    q = sub.basis
    # null space of x -> Q^H G x, computed in whitened coordinates for stability
    wq = space.whiten(q)
    u, s, vh = np.linalg.svd(wq, full_matrices=True)
    z = u[:, q.shape[1]:]
    perp = space.unwhiten(z)
    return Subspace(space, _mgs(space, perp))


def adjoint_domain(sub: Subspace) -> Subspace:
    """Boundary space of the adjoint operator: ``J (D^perp)``."""
    perp = orthocomplement(sub)
    return Subspace(sub.space, sub.space.jmat @ perp.basis)


def is_selfadjoint(sub: Subspace, tol: float = STRUCT_TOL) -> SelfAdjointCheck:
    """Isotropy test for a d-dimensional subspace.

    ``residual`` is the largest Green-form value over pairs of the supplied
    basis columns; the verdict uses the orthonormal representative so that it
    does not depend on how the basis was scaled.
    """
    space = sub.space
    if sub.dim != space.d:
        raise WrongRank(f"selfadjoint domains have dimension {space.d}, got {sub.dim}")
    gm = space.greenmat
    raw = sub.coeffs.conj().T @ gm @ sub.coeffs
    q = sub.basis
    normed = q.conj().T @ gm @ q
    return SelfAdjointCheck(bool(np.max(np.abs(normed)) < tol), float(np.max(np.abs(raw))))


def as_lagrangian(sub: Subspace) -> LagrangianDomain:
    if isinstance(sub, LagrangianDomain):
        return sub
    return LagrangianDomain(sub.space, sub.basis)


def graph_domain(chart: GraphChart) -> LagrangianDomain:
    """The domain ``{u + T u : u in base}`` with ``T = -J sigma``."""
    base = chart.base
    q = base.basis
    j = base.space.jmat
    return LagrangianDomain(base.space, q - j @ (q @ chart.sigma))


def chart_of(dom: Subspace, base: Subspace, tol: float = RANK_TOL) -> GraphChart:
    """Inverse of :func:`graph_domain`: the chart matrix of ``dom`` over ``base``."""
    space = base.space
    if dom.dim != base.dim:
        raise RankMismatch(f"dimensions {dom.dim} and {base.dim}")
    q = base.basis
    x = dom.basis
    c = q.conj().T @ space.gram @ x
    smin = np.linalg.svd(c, compute_uv=False)[-1] if c.size else 1.0
    if smin < tol:
        raise OutOfChart(f"projection onto the base is singular (smallest cosine {smin:.3e})")
    y = x @ np.linalg.inv(c)
    sigma = q.conj().T @ space.gram @ space.jmat @ (y - q)
    sigma = 0.5 * (sigma + sigma.conj().T)
    return GraphChart(as_lagrangian(base), sigma)


def _one_sided_gap(a: Subspace, b: Subspace) -> float:
    # |(I - P_a) Q_b| in the A-norm
    x = b.basis - a.projector @ b.basis
    return _op_norm(a.space.whiten(x))


def gap(d1: Subspace, d2: Subspace, method: str = "projection") -> float:
    """Gap metric: A-operator norm of the difference of the two projectors.

    ``method="angles"`` returns the sine of the largest principal angle
    instead, which coincides for subspaces of equal dimension.
    """
    if d1.dim != d2.dim:
        raise RankMismatch(f"gap between subspaces of dimensions {d1.dim} and {d2.dim}")
    if d1.dim == 0:
        return 0.0
    if method == "angles":
        return float(np.sin(principal_angles(d1, d2).max()))
    space = d1.space
    w1 = space.whiten(d1.basis)
    w2 = space.whiten(d2.basis)
    # in whitened coordinates the projectors are Euclidean-orthogonal
    diff = w1 @ w1.conj().T - w2 @ w2.conj().T
    val = max(_op_norm(diff), _op_norm(-diff))
    return float(min(val, 1.0))


def principal_angles(d1: Subspace, d2: Subspace) -> np.ndarray:
    """Principal angles in ascending order (min(k1, k2) of them)."""
    space = d1.space
    k = min(d1.dim, d2.dim)
    if k == 0:
        return np.zeros(0)
    q1, q2 = d1.basis, d2.basis
    cos = np.linalg.svd(q1.conj().T @ space.gram @ q2, compute_uv=False)[:k]
    small, big = (d1, d2) if d1.dim <= d2.dim else (d2, d1)
    resid = small.basis - big.projector @ small.basis
    sin = np.sort(np.linalg.svd(space.whiten(resid), compute_uv=False))[:k]
    cos = np.clip(cos, 0.0, 1.0)
    sin = np.clip(sin, 0.0, 1.0)
    # cosines are accurate for large angles, sines for small ones
    ang = np.where(cos > np.sqrt(0.5), np.arcsin(sin), np.arccos(cos))
    return np.sort(ang)


def intersect(d1: Subspace, d2: Subspace, tol: float = RANK_TOL) -> Subspace:
    """Numerical intersection: directions whose principal-angle cosine exceeds ``1 - tol``."""
    space = d1.space
    if d1.dim == 0 or d2.dim == 0:
        return Subspace(space, np.zeros((space.dim, 0), dtype=complex))
    q1, q2 = d1.basis, d2.basis
    u, s, vh = np.linalg.svd(q1.conj().T @ space.gram @ q2)
    keep = s > 1.0 - tol
    return Subspace(space, q1 @ u[:, : len(s)][:, keep])


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0, real: bool = False) -> np.ndarray:
    a = rng.standard_normal((d, d))
    if not real:
        a = a + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (a + a.conj().T)


def sample_sa(base: Subspace, rng_seed: int, scale: float = 1.0, real: bool = False) -> LagrangianDomain:
    """Random Lagrangian domain in the chart over ``base``; deterministic per seed."""
    rng = np.random.default_rng(rng_seed)
    sigma = random_hermitian(base.dim, rng, scale, real=real)
    return graph_domain(GraphChart(as_lagrangian(base), sigma))


def cayley_split(space: ExtensionSpace) -> tuple[Subspace, Subspace]:
    """The +i and -i eigenspaces of J, in that order."""
    n = space.dim
    out = []
    for sgn in (1.0, -1.0):
        proj = 0.5 * (np.eye(n) - sgn * 1j * space.jmat)
        u, s, vh = np.linalg.svd(proj)
        rank = int(np.sum(s > RANK_TOL * max(s[0], 1.0)))
        if rank != space.d:
            raise EigensolverFailure(f"eigenspace of J for {'+' if sgn > 0 else '-'}i has dimension {rank}")
        out.append(Subspace(space, u[:, :rank]))
    return out[0], out[1]
