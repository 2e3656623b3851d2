"""Eigen-series engine: delta coefficients, H^{-s} profiles, phi_u and F_D(lam).

Conventions
-----------
For u in the orthocomplement of D in E, ``c_k(u) = <delta_u, psi_k> = [psi_k, u]_A``
is antilinear in u.  On a gram-orthonormal basis ``e_i`` of D^perp the
matrix of F_D(lam) is ``F[i, j] = (F e_j, e_i)_A``, so that

    F = C diag(w) C^H,   C[i, k] = c_k(e_i),
    w_k = (1 + lam lam_k) / ((1 + lam_k^2) (lam_k - lam)).

The terms decay like k^-2 for the interval models; truncated sums receive a
tail correction ``mean(k^2 t_k) / (N + 1/2)`` over the last 64 terms, and the
size of that correction is reported as the tail estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import green
from .errors import (
    ConsistencyFailure,
    NotInComplement,
    SingularF,
    SingularTraceSolve,
    SpectrumCollision,
    TailTooLarge,
)
from .green import Subspace
from .realization import EigenSystem, SyntheticRealization, gauss_legendre

__all__ = [
    "DeltaCoefficients",
    "SobolevEstimate",
    "NormEstimate",
    "FMatrix",
    "PhiU",
    "complement_basis",
    "delta_coefficients",
    "delta_norm_profile",
    "hs_norm",
    "resolvent_apply",
    "phi_u",
    "f_matrix_series",
    "f_matrix_direct",
    "phi_direct",
    "kernel_via_f",
]

DEFAULT_N = 20000
SPECTRUM_MARGIN = 1e-6
COND_CAP = 1e12
TAIL_WINDOW = 64
CONSISTENCY_TOL = 1e-6


def complement_basis(dom: Subspace) -> np.ndarray:
    """Gram-orthonormal basis (coordinate columns) of the orthocomplement."""
    return green.orthocomplement(dom).basis


def _check_margin(lam_k: np.ndarray, lam) -> None:
    dist = np.min(np.abs(lam_k - lam))
    if dist < SPECTRUM_MARGIN * (1.0 + abs(lam)):
        raise SpectrumCollision(f"lambda = {lam} is within {dist:.2e} of the spectrum")


def _tail(terms: np.ndarray, index: np.ndarray) -> np.ndarray:
    """Estimated remainder of a k^-2 series from its last window of terms."""
    if terms.shape[0] < 2 * TAIL_WINDOW:
        return np.zeros(terms.shape[1:], dtype=terms.dtype)
    k = index[-TAIL_WINDOW:].astype(float)
    kk = k.reshape((-1,) + (1,) * (terms.ndim - 1))
    amp = np.mean(kk**2 * terms[-TAIL_WINDOW:], axis=0)
    return amp / (index[-1] + 0.5)


def _eig(model, dom, n, eig):
    if eig is not None and len(eig) >= n:
        return eig
    return model.eigen_system(dom, n)


# -- delta coefficients ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DeltaCoefficients:
    domain: Subspace | None
    u: np.ndarray
    coeffs: np.ndarray
    lam: np.ndarray
    eig: EigenSystem | None = None
    residual: float = 0.0

    @property
    def N(self) -> int:
        return self.coeffs.size


def delta_coefficients(model, dom, u, N: int, eig: EigenSystem | None = None,
                       check: bool = True, require_complement: bool = True) -> DeltaCoefficients:
    """``c_k = <delta_u, psi_k>`` for ``k < N`` with the two pairing identities checked.

    For a :class:`SyntheticRealization`, ``u`` holds the coordinates of the
    element in the basis underlying the declared pairing rows.
    """
    u = np.asarray(u, dtype=complex)
    if isinstance(model, SyntheticRealization):
        c = np.conj(u) @ model.rows[:, :N]
        return DeltaCoefficients(dom, u, c, model.eigenvalues[:N])
    sp = dom.space
    if require_complement:
        nu = sp.norm(u)
        if nu > 0 and sp.norm(dom.projector @ u) > 1e-8 * nu:
            raise NotInComplement("u is not A-orthogonal to the domain")
    eig = _eig(model, dom, N, eig)
    lam = eig.lam[:N] if len(eig) > N else eig.lam
    c = model.pairing(u, eig)[:lam.size]
    res = 0.0
    if check:
        res = _consistency(model, eig, u, c)
        if res > CONSISTENCY_TOL:
            raise ConsistencyFailure(f"pairing identities violated, residual {res:.2e}")
    return DeltaCoefficients(dom, u, c, lam, eig, res)


def _consistency(model, eig, u, c, kmax: int = 10) -> float:
    # (u, psi_k) = lam_k conj(c_k) / (1 + lam_k^2),  (Au, psi_k) = -conj(c_k) / (1 + lam_k^2)
    xq, wq = gauss_legendre(model.quad_order)
    k = np.arange(min(kmax, len(eig)))
    psi = eig.eval(xq, k)
    uv = model.basis.eval(u, xq)
    au = -model.basis.eval(u, xq, 2)
    ip_u = (wq * uv) @ np.conj(psi)
    ip_au = (wq * au) @ np.conj(psi)
    lk = eig.lam[k]
    den = 1.0 + lk**2
    r1 = np.abs(ip_u - lk * np.conj(c[k]) / den)
    r2 = np.abs(ip_au + np.conj(c[k]) / den)
    scale = max(1.0, model.space.norm(u))
    return float(max(r1.max(), r2.max()) / scale)


# -- Sobolev profiles ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SobolevEstimate:
    s: float
    n_grid: np.ndarray
    partial_sums: np.ndarray
    exponent: float
    term_exponent: float
    last_increment: float
    verdict: str
    details: dict = field(default_factory=dict)


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def growth_verdict(slope: float, term_p: float, last_terms: float, total: float) -> str:
    if total == 0.0:
        return "convergent"
    if slope > 0.1 or term_p < 0.95:
        return "divergent"
    if term_p > 1.05 or last_terms < 1e-8 * total:
        return "convergent"
    return "inconclusive"


def delta_norm_profile(coeffs: DeltaCoefficients, s: float, n_grid=None) -> SobolevEstimate:
    """Partial sums of ``sum |c_k|^2 / (1 + |lam_k|)^{2s}`` and a verdict.

    Divergent: the log-log slope of P_N over the top decade exceeds 0.1, or the
    terms decay like k^-p with p < 0.95.  Convergent: p > 1.05, or the last
    increments fall under 1e-8 relative.  Anything else is inconclusive.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    c = np.asarray(coeffs.coeffs)
    lam = np.asarray(coeffs.lam)
    terms = np.abs(c) ** 2 / (1.0 + np.abs(lam)) ** (2 * s)
    psum = np.cumsum(terms)
    n = terms.size
    if n_grid is None:
        n_grid = np.unique(np.geomspace(10, n, 25).astype(int))
    n_grid = np.asarray(n_grid, dtype=int)
    p_grid = psum[n_grid - 1]
    top = n_grid >= n_grid[-1] / 10
    slope = _slope(n_grid[top].astype(float), p_grid[top])
    k = np.arange(1, n + 1)
    hi = k >= n / 10
    term_p = -_slope(k[hi].astype(float), terms[hi])
    last = float(terms[-1])
    total = float(psum[-1])
    verdict = growth_verdict(slope, term_p, float(np.max(terms[-10:])), total)
    return SobolevEstimate(float(s), n_grid, p_grid, slope, term_p, last, verdict,
                           {"total": total, "N": n})


@dataclass(frozen=True)
class NormEstimate:
    value: float
    tail_flag: bool
    last_term: float


def hs_norm(eig_lam, f_coeffs, s: float, tail_tol: float = 1e-6) -> NormEstimate:
    """Truncated ``(.,.)_s`` norm of the element with eigen-coefficients ``f_coeffs``.

    The tail flag is raised when the last tenth of the terms still carries
    more than ``tail_tol`` of the total.
    """
    lam = np.asarray(getattr(eig_lam, "lam", eig_lam), dtype=float)
    f = np.asarray(f_coeffs, dtype=complex)
    lam = lam[:f.size]
    terms = (1.0 + np.abs(lam)) ** (2 * s) * np.abs(f) ** 2
    total = float(terms.sum())
    n_tail = max(1, terms.size // 10)
    tail = float(terms[-n_tail:].sum())
    return NormEstimate(np.sqrt(total), bool(total > 0 and tail > tail_tol * total),
                        float(terms[-1]))


def resolvent_apply(eig, f_coeffs, lam: float) -> np.ndarray:
    """Eigen-coefficients of ``B_D(lam) f``: ``(f, psi_k) / (lam_k - lam)``."""
    lam_k = np.asarray(getattr(eig, "lam", eig))
    f = np.asarray(f_coeffs, dtype=complex)
    lam_k = lam_k[:f.size]
    _check_margin(lam_k, lam)
    return f / (lam_k - lam)


# -- phi_u -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhiU:
    lam: float
    coeffs: np.ndarray        # (phi_u, psi_k)
    e_proj: np.ndarray | None  # coordinates of pi_max phi_u in E
    tail: float


def phi_u(coeffs: DeltaCoefficients, lam: float, tail_correct: bool = True) -> PhiU:
    """The kernel element ``phi_u(lam)`` with ``phi_u - u`` in the domain.

    Its eigen-coefficients are ``conj(c_k) / (lam_k - lam)``.  The E-projection
    is ``u - pi_max(w)`` with ``w = u - phi_u`` in the domain, whose traces are
    summed from the eigenfunction traces.
    """
    c = coeffs.coeffs
    lk = coeffs.lam
    _check_margin(lk, lam)
    a = np.conj(c) / (lk - lam)
    e_proj, tail = None, 0.0
    if coeffs.eig is not None:
        tr = coeffs.eig.coord_traces[:c.size]
        wk = (1.0 + lam * lk) * np.conj(c) / ((1.0 + lk**2) * (lk - lam))
        terms = wk[:, None] * tr
        corr = _tail(terms, np.arange(1, c.size + 1)) if tail_correct else 0.0
        e_proj = coeffs.u + terms.sum(axis=0) + corr
        tail = float(np.linalg.norm(_tail(terms, np.arange(1, c.size + 1))))
    return PhiU(float(lam), a, e_proj, tail)


# -- F_D(lam) ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FMatrix:
    lam: complex
    domain: Subspace | None
    basis: np.ndarray | None   # D^perp basis (coordinate columns) or None
    matrix: np.ndarray
    N: int
    tail: float
    method: str

    @property
    def hermitian_residual(self) -> float:
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T, 2))

    @property
    def max_eig(self) -> float:
        return float(np.max(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))))


def _pairing_matrix(model, dom, basis, eig, n):
    return np.stack([model.pairing(basis[:, i], eig)[:n] for i in range(basis.shape[1])])


def f_matrix_series(model, dom, lam, N: int = DEFAULT_N, eig: EigenSystem | None = None,
                    tail_correct: bool = True, tail_cap: float = 0.1) -> FMatrix:
    """F_D(lam) from its eigen-series on a gram-orthonormal basis of D^perp."""
    if isinstance(model, SyntheticRealization):
        lk = model.eigenvalues[:N]
        cmat = model.rows[:, :N]
        basis = None
    else:
        eig = _eig(model, dom, N, eig)
        lk = eig.lam
        basis = complement_basis(dom)
        cmat = _pairing_matrix(model, dom, basis, eig, lk.size)
    _check_margin(lk, lam)
    w = (1.0 + lam * lk) / ((1.0 + lk**2) * (lk - lam))
    terms = w[:, None, None] * np.einsum("ik,jk->kij", cmat, np.conj(cmat))
    fm = terms.sum(axis=0)
    tail = _tail(terms, np.arange(1, lk.size + 1))
    tail_norm = float(np.linalg.norm(tail, 2))
    if tail_correct:
        fm = fm + tail
    if tail_norm > tail_cap * max(1.0, np.linalg.norm(fm, 2)):
        raise TailTooLarge(f"tail estimate {tail_norm:.2e} exceeds the cap")
    if np.isrealobj(lam) or np.imag(lam) == 0:
        lam = float(np.real(lam))
    return FMatrix(lam, dom, basis, fm, int(lk.size), tail_norm, "series")


def phi_direct(model, dom, lam: float, u: np.ndarray) -> np.ndarray:
    """E-coordinates of ``pi_max phi_u(lam)`` by a trace solve (series-free)."""
    kern = model.kernel_direct(lam).coeffs
    cmat = model.constraint(dom)
    sysm = cmat @ kern
    if np.linalg.cond(sysm) > COND_CAP:
        raise SpectrumCollision(f"lambda = {lam} is (numerically) an eigenvalue of the domain")
    a = np.linalg.solve(sysm, cmat @ u)
    return kern @ a


def f_matrix_direct(model, dom, lam: float, eig: EigenSystem | None = None) -> FMatrix:
    """F_D(lam) = -A(u - pi_max phi_u) on D^perp, with phi_u from kernel traces."""
    if eig is not None:
        _check_margin(eig.lam, lam)
    basis = complement_basis(dom)
    sp = dom.space
    kern = model.kernel_direct(lam).coeffs
    cmat = model.constraint(dom)
    sysm = cmat @ kern
    sv = np.linalg.svd(sysm, compute_uv=False)
    # K_lam meets D exactly when lam is an eigenvalue of A_D
    if sv[-1] < np.linalg.norm(cmat, 2) * np.linalg.norm(sp.whiten(kern), 2) / COND_CAP:
        raise SpectrumCollision(f"lambda = {lam} is an eigenvalue of the domain")
    if sv[-1] < sv[0] / COND_CAP:
        raise SingularTraceSolve(f"trace system singular at lambda = {lam}")
    phis = kern @ np.linalg.solve(sysm, cmat @ basis)
    fu = -sp.apply_j(basis - phis)
    fm = basis.conj().T @ sp.gram @ fu
    return FMatrix(float(lam), dom, basis, fm, 0, 0.0, "direct")


def kernel_via_f(model, dom, lam: float, fmat: FMatrix | None = None, **kw) -> Subspace:
    """``K_lam = {v + F_D(lam)^{-1} A v : v in D}``."""
    if fmat is None:
        fmat = f_matrix_direct(model, dom, lam, **kw)
    sp = dom.space
    qd = dom.basis
    qp = fmat.basis if fmat.basis is not None else complement_basis(dom)
    fm = fmat.matrix
    if np.linalg.cond(fm) > COND_CAP:
        raise SingularF(f"F_D({lam}) is not invertible")
    rhs = qp.conj().T @ sp.gram @ sp.apply_j(qd)
    return Subspace(sp, qd + qp @ np.linalg.solve(fm, rhs))
