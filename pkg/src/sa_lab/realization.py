"""Concrete semibounded operators: -d^2/dx^2 on (0, 1).

Two function realizations are provided.

``PinnedLaplacian``
    core functions vanish near 0 and at 1; the maximal domain is
    ``{u in H^2 : u(1) = 0}`` and d = 1.
``FullLaplacian``
    core ``C_c^inf(0, 1)``; the maximal domain is ``H^2(0, 1)`` and d = 2.

In both cases the minimal domain is the set of maximal-domain functions whose
boundary traces vanish, so an element of E is fixed by its free traces.  The
basis of E is chosen *trace-cardinal*: the coordinates of u in E are
``(u(0), u'(0))`` for the pinned model and ``(u(0), u'(0), u(1), u'(1))`` for
the full model.  Gram matrix and the matrix of A on E are nevertheless
computed by Gauss-Legendre quadrature of the closed-form solutions of
``u'''' = -u``.

Kernel functions of ``A - lam`` are expressed in a two-function solution basis
of ``-u'' = lam u``.  For ``lam >= -1`` this is ``(cos(mu x), sin(mu x)/mu)``,
analytic through ``lam = 0``; for ``lam < -1`` it is the pair of exponentials
``(exp(-k x), exp(-k (1 - x)))`` anchored at either endpoint, which keeps the
traces bounded down to ``lam = -1e8``.  The change of basis between the two
regimes has positive determinant, so secular functions keep their sign.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.optimize

from . import green
from .errors import (
    BackgroundSpectrum,
    MultiplicityAmbiguity,
    QuadratureFailure,
    RootFindingStall,
    SingularTraceMap,
)
from .green import ExtensionSpace, LagrangianDomain, Subspace

__all__ = [
    "gauss_legendre",
    "ode_traces",
    "ode_eval",
    "ode_l2_gram",
    "ExtensionBasis",
    "EigenSystem",
    "IntervalLaplacian",
    "PinnedLaplacian",
    "FullLaplacian",
    "SyntheticRealization",
    "build_extension_basis",
    "friedrichs_subspace",
    "lower_bound",
]

REGIME_SWITCH = -1.0
NEG_SCAN_LIMIT = 1e8
SCAN_STEP = np.pi / 16
MULTIPLICITY_TOL = 1e-9
# sin/cos modes of u'''' = -u: the primitive 8th roots of unity
OMEGA = np.exp(1j * np.pi * (2 * np.arange(4) + 1) / 4)


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if order < 2:
        raise QuadratureFailure(f"quadrature order must be >= 2, got {order}")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


# -- solutions of -u'' = lam u ---------------------------------------------

def _sin_over(lam: np.ndarray, x) -> np.ndarray:
    """``sin(sqrt(lam) x) / sqrt(lam)``, analytic in lam (sinh for lam < 0)."""
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    lam, x = np.broadcast_arrays(lam, x)
    out = np.array(x, dtype=float, copy=True)
    pos = lam > 1e-14
    neg = lam < -1e-14
    tiny = ~(pos | neg)
    mu = np.sqrt(lam[pos])
    out[pos] = np.sin(mu * x[pos]) / mu
    ka = np.sqrt(-lam[neg])
    out[neg] = np.sinh(ka * x[neg]) / ka
    out[tiny] = x[tiny] * (1.0 - lam[tiny] * x[tiny] ** 2 / 6.0)
    return out


def _cos_of(lam: np.ndarray, x) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    lam, x = np.broadcast_arrays(lam, x)
    out = np.empty(lam.shape)
    pos = lam >= 0
    out[pos] = np.cos(np.sqrt(lam[pos]) * x[pos])
    out[~pos] = np.cosh(np.sqrt(-lam[~pos]) * x[~pos])
    return out


def _anchored(lam) -> np.ndarray:
    return np.asarray(lam, dtype=float) < REGIME_SWITCH


def ode_traces(lam) -> np.ndarray:
    """Traces ``(u(0), u'(0), u(1), u'(1))`` of the two basis solutions.

    Returns an array of shape ``lam.shape + (4, 2)``.
    """
    lam = np.asarray(lam, dtype=float)
    flat = lam.ravel()
    out = np.empty((flat.size, 4, 2))
    anc = _anchored(flat)
    # cos/sin regime
    la = flat[~anc]
    c1 = _cos_of(la, 1.0)
    s1 = _sin_over(la, 1.0)
    out[~anc, 0, 0] = 1.0
    out[~anc, 1, 0] = 0.0
    out[~anc, 2, 0] = c1
    out[~anc, 3, 0] = -la * s1
    out[~anc, 0, 1] = 0.0
    out[~anc, 1, 1] = 1.0
    out[~anc, 2, 1] = s1
    out[~anc, 3, 1] = c1
    # exponential regime
    k = np.sqrt(-flat[anc])
    e = np.exp(-k)
    out[anc, 0, 0] = 1.0
    out[anc, 1, 0] = -k
    out[anc, 2, 0] = e
    out[anc, 3, 0] = -k * e
    out[anc, 0, 1] = e
    out[anc, 1, 1] = k * e
    out[anc, 2, 1] = 1.0
    out[anc, 3, 1] = k
    return out.reshape(lam.shape + (4, 2))


def ode_eval(lam: float, x, deriv: int = 0) -> np.ndarray:
    """Values (or derivatives) of the two basis solutions at points ``x``."""
    lam = float(lam)
    x = np.asarray(x, dtype=float)
    m, odd = divmod(deriv, 2)
    fac = (-lam) ** m
    if lam < REGIME_SWITCH:
        k = np.sqrt(-lam)
        f1 = np.exp(-k * x)
        f2 = np.exp(-k * (1.0 - x))
        if odd:
            f1, f2 = -k * f1, k * f2
    else:
        if odd:
            f1 = -lam * _sin_over(lam, x)
            f2 = _cos_of(lam, x)
        else:
            f1 = _cos_of(lam, x)
            f2 = _sin_over(lam, x)
    return fac * np.stack([f1, f2], axis=-1)


_GRAM_NODES = gauss_legendre(32)


def ode_l2_gram(lam) -> np.ndarray:
    """L^2(0, 1) Gram matrices ``G[i, j] = (phi_j, phi_i)`` of the basis solutions.

    Closed forms are used away from ``lam = 0``; on ``|lam| <= 1`` the
    integrands are low-degree entire functions and 32-point quadrature is exact
    to rounding.
    """
    lam = np.asarray(lam, dtype=float)
    flat = lam.ravel()
    out = np.empty((flat.size, 2, 2))
    anc = _anchored(flat)
    big = flat > 1.0
    mid = ~(anc | big)

    k = np.sqrt(-flat[anc])
    diag = -np.expm1(-2 * k) / (2 * k)
    off = np.exp(-k)
    out[anc, 0, 0] = diag
    out[anc, 1, 1] = diag
    out[anc, 0, 1] = off
    out[anc, 1, 0] = off

    mu = np.sqrt(flat[big])
    s2 = np.sin(2 * mu) / (4 * mu)
    out[big, 0, 0] = 0.5 + s2
    out[big, 1, 1] = (0.5 - s2) / mu**2
    cs = np.sin(mu) ** 2 / (2 * mu**2)
    out[big, 0, 1] = cs
    out[big, 1, 0] = cs

    if np.any(mid):
        xq, wq = _GRAM_NODES
        lm = flat[mid][:, None]
        c = _cos_of(lm, xq[None, :])
        s = _sin_over(lm, xq[None, :])
        out[mid, 0, 0] = (c * c) @ wq
        out[mid, 1, 1] = (s * s) @ wq
        cs = (c * s) @ wq
        out[mid, 0, 1] = cs
        out[mid, 1, 0] = cs
    return out.reshape(lam.shape + (2, 2))


# -- extension space ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExtensionBasis:
    """Validated space E together with its closed-form basis functions.

    ``modes[m, j]`` is the coefficient of ``exp(OMEGA[m] x)`` in basis
    function j.
    """

    space: ExtensionSpace
    modes: np.ndarray
    quad_order: int

    def eval(self, coords, x, deriv: int = 0) -> np.ndarray:
        """Evaluate E elements with coordinate columns ``coords`` at ``x``."""
        x = np.asarray(x, dtype=float)
        coords = np.asarray(coords, dtype=complex)
        ph = (OMEGA[None, :] ** deriv) * np.exp(np.outer(x, OMEGA))
        basis_vals = np.real(ph @ self.modes)
        return basis_vals @ coords


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Lowest eigenpairs of a selfadjoint realization.

    ``coef[k]`` holds the coefficients of the L^2-normalized eigenfunction in
    the solution basis of :func:`ode_eval` at ``lam[k]``; ``traces[k]`` are
    its boundary traces ``(psi(0), psi'(0), psi(1), psi'(1))``.
    """

    model: "IntervalLaplacian"
    domain: Subspace
    lam: np.ndarray
    coef: np.ndarray
    traces: np.ndarray

    def __len__(self) -> int:
        return self.lam.size

    def eval(self, x, k=None, deriv: int = 0) -> np.ndarray:
        """Eigenfunctions at points ``x``; shape ``(len(x), n_selected)``."""
        idx = np.arange(self.lam.size) if k is None else np.atleast_1d(k)
        x = np.asarray(x, dtype=float)
        out = np.empty((x.size, idx.size), dtype=complex)
        for col, i in enumerate(idx):
            out[:, col] = ode_eval(self.lam[i], x, deriv) @ self.coef[i]
        return out

    @property
    def coord_traces(self) -> np.ndarray:
        """Traces restricted to the model's E-coordinates, shape ``(n, 2d)``."""
        return self.traces[:, self.model.trace_rows]


# Boundary form [u, v] = (Au, v) - (u, Av) = x^T OMEGA_B conj(y) on full traces
_BOUNDARY_FORM = np.array(
    [[0, -1, 0, 0],
     [1, 0, 0, 0],
     [0, 0, 0, 1],
     [0, 0, -1, 0]], dtype=float)


class IntervalLaplacian:
    """Shared machinery of the two interval models.

    Subclasses set ``name``, ``d``, ``trace_rows`` (which of the four traces are
    E-coordinates), ``min_rows`` (traces constrained by the minimal domain) and
    implement :meth:`_mode_rows` and :meth:`kernel_coeffs`.
    """

    name: str = ""
    d: int = 0
    trace_rows: list[int] = []
    min_rows: list[int] = []

    def __init__(self, quad_order: int = 96):
        self.quad_order = int(quad_order)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(quad_order={self.quad_order})"

    # -- E ---------------------------------------------------------------
    def _mode_rows(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @cached_property
    def basis(self) -> ExtensionBasis:
        return build_extension_basis(self)

    @property
    def space(self) -> ExtensionSpace:
        return self.basis.space

    @cached_property
    def boundary_form(self) -> np.ndarray:
        r = self.trace_rows
        return _BOUNDARY_FORM[np.ix_(r, r)]

    def from_traces(self, traces) -> Subspace:
        """Subspace spanned by E elements with the given trace rows."""
        t = np.asarray(traces, dtype=complex)
        if t.ndim == 1:
            t = t[None, :]
        if t.shape[1] != len(self.trace_rows):
            raise SingularTraceMap(f"{self.name} model expects {len(self.trace_rows)} traces per vector")
        return Subspace(self.space, t.T.copy())

    def lagrangian(self, traces) -> LagrangianDomain:
        return green.as_lagrangian(self.from_traces(traces))

    def friedrichs(self) -> LagrangianDomain:
        raise NotImplementedError

    def lower_bound(self) -> float:
        # Poincare: core functions vanish at 1 and near 0, so (A u, u) >= pi^2 |u|^2
        return float(np.pi**2)

    # -- kernels ---------------------------------------------------------
    def kernel_coeffs(self, lam) -> np.ndarray:
        """Coefficients (shape ``(..., 2, d)``) of a basis of ker(A_max - lam)."""
        raise NotImplementedError

    def kernel_traces(self, lam) -> np.ndarray:
        """E-coordinate traces of the kernel basis, shape ``(..., 2d, d)``."""
        tr = ode_traces(lam) @ self.kernel_coeffs(lam)
        return tr[..., self.trace_rows, :]

    def bg_check(self, lam) -> np.ndarray | bool:
        """True where ``A_min - lam`` is injective.

        A kernel element of the minimal operator solves ``-u'' = lam u`` with all
        minimal-domain traces zero; this is excluded when the trace rows of the
        solution basis have full column rank.
        """
        lam = np.asarray(lam, dtype=float)
        tr = ode_traces(lam)[..., self.min_rows, :]
        s = np.linalg.svd(tr, compute_uv=False)
        ok = s[..., -1] > 1e-12 * s[..., 0]
        return bool(ok) if ok.ndim == 0 else ok

    def kernel_direct(self, lam: float) -> Subspace:
        """``K_lam``: projection to E of ker(A_max - lam).

        The projection keeps the free traces, because the minimal domain is the
        zero-trace subspace of the maximal one.
        """
        if not self.bg_check(lam):
            raise BackgroundSpectrum(f"lambda = {lam} lies in the background spectrum")
        return Subspace(self.space, self.kernel_traces(float(lam)))

    def kernel_projection_quadrature(self, lam: float) -> Subspace:
        """Same subspace as :meth:`kernel_direct`, by quadrature of A-inner products."""
        if not self.bg_check(lam):
            raise BackgroundSpectrum(f"lambda = {lam} lies in the background spectrum")
        xq, wq = gauss_legendre(self.quad_order)
        q = self.space.whole().basis
        kv = ode_eval(lam, xq) @ self.kernel_coeffs(float(lam))
        kv2 = -lam * kv
        qv = self.basis.eval(q, xq)
        qv2 = self.basis.eval(q, xq, 2)
        # (u, q_j)_A = int u'' conj(q_j'') + u conj(q_j)
        ip = qv2.conj().T @ (wq[:, None] * kv2) + qv.conj().T @ (wq[:, None] * kv)
        return Subspace(self.space, q @ ip)

    # -- secular function --------------------------------------------------
    def constraint(self, dom: Subspace) -> np.ndarray:
        """Rows whose joint null space is the trace space of ``dom``."""
        t = dom.coeffs
        u, s, vh = np.linalg.svd(t, full_matrices=True)
        return u[:, dom.dim:].conj().T

    def _secular_raw(self, cmat: np.ndarray, lam) -> np.ndarray:
        kt = self.kernel_traces(lam)
        kt = kt / np.linalg.norm(kt, axis=-2, keepdims=True)
        return np.linalg.det(cmat @ kt)

    def _secular_phase(self, cmat: np.ndarray) -> complex:
        ref = np.array([-7.3, 1.7, 13.1, 31.9, 70.3, 150.7])
        vals = self._secular_raw(cmat, ref)
        v = vals[np.argmax(np.abs(vals))]
        return np.conj(v) / abs(v)

    def secular_function(self, dom: Subspace):
        """Vectorized real secular function of ``dom``: zeros are the eigenvalues of A_D."""
        cmat = self.constraint(dom)
        phase = self._secular_phase(cmat)

        def f(lam):
            return np.real(phase * self._secular_raw(cmat, lam))

        def mat(lam):
            kt = self.kernel_traces(lam)
            return cmat @ (kt / np.linalg.norm(kt, axis=-2, keepdims=True))

        def mnorm(lam):
            return np.linalg.norm(mat(lam), axis=(-2, -1))

        f.phase = phase
        f.cmat = cmat
        f.mnorm = mnorm if self.d > 1 else None
        f.mat = mat
        return f

    def secular(self, dom: Subspace, lam):
        out = self.secular_function(dom)(np.asarray(lam, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    # -- spectrum ------------------------------------------------------------
    def eigenvalues(self, dom: Subspace, count: int, max_scan: int = 10**7) -> np.ndarray:
        """The lowest ``count`` eigenvalues (always including all negative ones)."""
        if count < 1:
            raise ValueError("count must be >= 1")
        f = self.secular_function(dom)
        neg = _negative_grid()
        length = max(64, 4 * count) * np.pi
        while True:
            grid = np.concatenate([neg, np.arange(0.0, length, SCAN_STEP)])
            roots = _scan_roots(f, grid)
            if len(roots) >= count:
                break
            length *= 2
            if length * 16 > max_scan:
                raise RootFindingStall(f"found {len(roots)} eigenvalues below {length**2:.3e}")
        tau = np.array(sorted(roots))
        lam = tau * np.abs(tau)
        n = max(count, int(np.sum(lam < 0)))
        return lam[:n]

    def eigen_system(self, dom: Subspace, count: int) -> EigenSystem:
        lam = self.eigenvalues(dom, count)
        cmat = self.constraint(dom)
        kc = self.kernel_coeffs(lam)                       # (n, 2, d)
        kt_all = ode_traces(lam) @ kc                      # (n, 4, d)
        kt = kt_all[:, self.trace_rows, :]
        w = np.linalg.norm(kt, axis=-2)                    # (n, d)
        m = cmat @ (kt / w[:, None, :])                    # (n, d, d)
        a = _null_vectors(m)                               # (n, d)
        b = np.einsum("nij,nj->ni", kc, a / w)             # (n, 2)
        g = ode_l2_gram(lam)
        nrm = np.sqrt(np.real(np.einsum("ni,nij,nj->n", b.conj(), g, b)))
        b = b / nrm[:, None]
        # double eigenvalues: take an L^2-orthonormal pair from the null space
        dup = np.nonzero(lam[1:] == lam[:-1])[0]
        for i in dup:
            _, _, vh = np.linalg.svd(m[i])
            pair = kc[i] @ (vh.conj().T / w[i][:, None])
            gi = g[i]
            p0 = pair[:, 0] / np.sqrt(np.real(pair[:, 0].conj() @ gi @ pair[:, 0]))
            p1 = pair[:, 1] - (p0.conj() @ gi @ pair[:, 1]) * p0
            p1 = p1 / np.sqrt(np.real(p1.conj() @ gi @ p1))
            b[i], b[i + 1] = p0, p1
        tr = np.einsum("nij,nj->ni", ode_traces(lam), b)
        # fix the phase by psi'(0) > 0, falling back to psi(0) > 0
        scale = np.max(np.abs(tr), axis=1)
        pick = np.where(np.abs(tr[:, 1]) > 1e-8 * scale, tr[:, 1], tr[:, 0])
        ph = np.conj(pick) / np.abs(pick)
        b = b * ph[:, None]
        tr = tr * ph[:, None]
        return EigenSystem(self, dom, lam, b, tr)

    def pairing(self, u, eig: EigenSystem) -> np.ndarray:
        """``<delta_u, psi_k> = [psi_k, u]_A`` by the boundary Wronskian."""
        u = np.asarray(u, dtype=complex)
        return eig.coord_traces @ self.boundary_form @ np.conj(u)

    def pairing_quadrature(self, u, eig: EigenSystem, k) -> np.ndarray:
        """``(A psi_k, u) - (psi_k, A u)`` by Gauss-Legendre quadrature."""
        xq, wq = gauss_legendre(self.quad_order)
        k = np.atleast_1d(k)
        psi = eig.eval(xq, k)
        uv = self.basis.eval(u, xq)
        au = -self.basis.eval(u, xq, 2)
        apsi = psi * eig.lam[k][None, :]
        return (wq * np.conj(uv)) @ apsi - (wq * np.conj(au)) @ psi

    def oracle_spectrum_fd(self, dom: Subspace, n: int = 4000, count: int = 5) -> np.ndarray:
        from .oracle import fd_spectrum

        return fd_spectrum(self, dom, n, count)


class PinnedLaplacian(IntervalLaplacian):
    name = "pinned"
    d = 1
    trace_rows = [0, 1]
    min_rows = [0, 1, 2]

    def _mode_rows(self):
        # u(0), u'(0) free; u(1) = u''(1) = 0
        pts = np.array([0.0, 0.0, 1.0, 1.0])
        der = np.array([0, 1, 0, 2])
        rhs = np.zeros((4, 2))
        rhs[0, 0] = rhs[1, 1] = 1.0
        return (OMEGA[None, :] ** der[:, None]) * np.exp(np.outer(pts, OMEGA)), rhs

    def kernel_coeffs(self, lam):
        # the solution vanishing at x = 1, a positive multiple of sin(mu (1 - x)) / mu
        tr = ode_traces(lam)
        c = np.stack([tr[..., 2, 1], -tr[..., 2, 0]], axis=-1)
        return c[..., None]

    def friedrichs(self) -> LagrangianDomain:
        return self.lagrangian([[0.0, 1.0]])


class FullLaplacian(IntervalLaplacian):
    name = "full"
    d = 2
    trace_rows = [0, 1, 2, 3]
    min_rows = [0, 1, 2, 3]

    def _mode_rows(self):
        pts = np.array([0.0, 0.0, 1.0, 1.0])
        der = np.array([0, 1, 0, 1])
        return (OMEGA[None, :] ** der[:, None]) * np.exp(np.outer(pts, OMEGA)), np.eye(4)

    def kernel_coeffs(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.broadcast_to(np.eye(2), lam.shape + (2, 2)).copy()

    def friedrichs(self) -> LagrangianDomain:
        return self.lagrangian([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])


def build_extension_basis(model: IntervalLaplacian) -> ExtensionBasis:
    """Closed-form basis of E with gram and J computed by quadrature."""
    rows, rhs = model._mode_rows()
    if np.linalg.cond(rows) > 1e12:
        raise SingularTraceMap(f"trace map of the {model.name} model is singular")
    modes = np.linalg.solve(rows, rhs.astype(complex))
    eb = ExtensionBasis(None, modes, model.quad_order)
    xq, wq = gauss_legendre(model.quad_order)
    eye = np.eye(modes.shape[1])
    v0 = eb.eval(eye, xq)
    v2 = eb.eval(eye, xq, 2)
    v4 = eb.eval(eye, xq, 4)
    w = wq[:, None]
    gram = v2.conj().T @ (w * v2) + v0.conj().T @ (w * v0)
    # (A b_j, b_i)_A = int (A^2 b_j) conj(A b_i) + (A b_j) conj(b_i), A = -d^2/dx^2
    amat = -(v2.conj().T @ (w * v4)) - v0.conj().T @ (w * v2)
    if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(amat))):
        raise QuadratureFailure("non-finite quadrature values")
    jmat = np.linalg.solve(gram, amat)
    space = green.validate_space(0.5 * (gram + gram.conj().T), jmat, tol=1e-8)
    return ExtensionBasis(space, modes, model.quad_order)


def friedrichs_subspace(model) -> LagrangianDomain:
    return model.friedrichs()


def lower_bound(model) -> float:
    return model.lower_bound()


# -- root finding ------------------------------------------------------------

def _negative_grid() -> np.ndarray:
    # tau = -kappa with lam = -kappa^2, increasing order
    kmax = np.sqrt(NEG_SCAN_LIMIT)
    geo = np.exp(np.arange(0.0, np.log(kmax) + 0.005, 0.005))
    kap = np.concatenate([geo[::-1], np.linspace(1.0, 0.0, 65)[1:-1]])
    return -kap


def _lam_of(tau):
    return tau * np.abs(tau)


def _scan_roots(f, grid: np.ndarray) -> list[float]:
    """Roots of ``f`` (in the variable tau, lam = tau |tau|) on an increasing grid."""
    vals = f(_lam_of(grid))
    roots: list[float] = []
    lo, hi = [], []
    zero = vals == 0.0
    roots.extend(grid[zero].tolist())
    sgn = np.sign(vals)
    change = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    lo.extend(grid[change].tolist())
    hi.extend(grid[change + 1].tolist())
    # hidden pairs: |f| dips between two same-sign neighbours
    a = np.abs(vals)
    dip = np.nonzero((a[1:-1] < a[:-2]) & (a[1:-1] < a[2:])
                     & (sgn[:-2] == sgn[1:-1]) & (sgn[1:-1] == sgn[2:]))[0] + 1
    if dip.size:
        sd = sgn[dip]
        xs, fs = _golden_min(lambda t: sd * f(_lam_of(t)), grid[dip - 1], grid[dip + 1])
    for j, i in enumerate(dip):
        if fs[j] < 0:
            lo.extend([grid[i - 1], xs[j]])
            hi.extend([xs[j], grid[i + 1]])
        elif fs[j] < MULTIPLICITY_TOL:
            if getattr(f, "mnorm", None) is not None:
                # a genuine double eigenvalue makes the whole d x d matrix vanish
                r2 = scipy.optimize.minimize_scalar(
                    lambda t: float(f.mnorm(_lam_of(np.array([t])))[0]) ** 2,
                    bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                    options={"xatol": 1e-15 * max(1.0, abs(grid[i]))})
                t = _polish_double(f.mat, float(r2.x))
                if f.mnorm(_lam_of(np.array([t])))[0] < 1e-7:
                    roots.extend([t] * 2)
                    continue
            raise MultiplicityAmbiguity(
                f"secular function has a double root near lambda = {_lam_of(xs[j]):.12g}")
    if lo:
        roots.extend(_bisect(f, np.array(lo), np.array(hi)).tolist())
    return roots


def _golden_min(g, a: np.ndarray, b: np.ndarray, iters: int = 90):
    """Batched golden-section minimization of ``g`` on the brackets ``[a, b]``."""
    r = 0.5 * (np.sqrt(5.0) - 1.0)
    a, b = a.astype(float), b.astype(float)
    c, d = b - r * (b - a), a + r * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iters):
        left = gc < gd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        if np.all(b - a <= 1e-15 * np.maximum(1.0, np.abs(a))):
            break
        c_new = np.where(left, b - r * (b - a), d)
        d_new = np.where(left, c, a + r * (b - a))
        gc_new = np.where(left, 0.0, gd)
        gd_new = np.where(left, gc, 0.0)
        # one fresh evaluation per bracket
        x = np.where(left, c_new, d_new)
        gx = g(x)
        c, d = c_new, d_new
        gc = np.where(left, gx, gc_new)
        gd = np.where(left, gd_new, gx)
    x = np.where(gc < gd, c, d)
    return x, np.minimum(gc, gd)


def _polish_double(mat, t: float, steps: int = 3) -> float:
    """Least-squares zero of the (linear near the root) matrix curve."""
    for _ in range(steps):
        h = 1e-7 * max(1.0, abs(t))
        m0 = mat(_lam_of(np.array([t])))[0]
        dm = (mat(_lam_of(np.array([t + h])))[0] - m0) / h
        den = np.real(np.vdot(dm, dm))
        if den == 0:
            break
        t = t - np.real(np.vdot(dm, m0)) / den
    return t


def _bisect(f, lo: np.ndarray, hi: np.ndarray, iters: int = 200) -> np.ndarray:
    flo = f(_lam_of(lo))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        done = (mid == lo) | (mid == hi)
        if np.all(done):
            break
        fm = f(_lam_of(mid))
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _null_vectors(m: np.ndarray) -> np.ndarray:
    """Null vectors of a stack of (numerically) singular d x d matrices."""
    d = m.shape[-1]
    if d == 1:
        return np.ones(m.shape[:-2] + (1,), dtype=complex)
    if d == 2:
        r0, r1 = m[..., 0, :], m[..., 1, :]
        use0 = np.linalg.norm(r0, axis=-1) >= np.linalg.norm(r1, axis=-1)
        r = np.where(use0[..., None], r0, r1)
        v = np.stack([r[..., 1], -r[..., 0]], axis=-1)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)
    _, _, vh = np.linalg.svd(m)
    return vh[..., -1, :].conj()


# -- synthetic data model ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SyntheticRealization:
    """Eigen-data without functions: eigenvalues and pairing rows.

    ``rows[i, k]`` is ``<delta_{u_i}, psi_k>`` for an A-orthonormal basis
    ``u_i`` of the complement of the base domain.
    """

    eigenvalues: np.ndarray
    rows: np.ndarray
    name: str = field(default="synthetic")

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        rows = np.atleast_2d(np.asarray(self.rows, dtype=complex))
        if rows.shape[1] != lam.size:
            raise ValueError("pairing rows must have one entry per eigenvalue")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("eigenvalues must be strictly increasing")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rules(cls, eig_rule, row_rules, n: int) -> "SyntheticRealization":
        k = np.arange(1, n + 1, dtype=float)
        return cls(eig_rule(k), np.array([r(k) for r in row_rules]))

    @property
    def d(self) -> int:
        return self.rows.shape[0]

    def lower_bound(self) -> float:
        return float(self.eigenvalues[0])

    def bg_check(self, lam) -> bool:
        return True

    def h_minus_one_partial_sums(self) -> np.ndarray:
        """Partial sums of ``|c_k|^2 / (1 + lam_k^2)`` per row."""
        w = np.abs(self.rows) ** 2 / (1.0 + self.eigenvalues**2)
        return np.cumsum(w, axis=1)
