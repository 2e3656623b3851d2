"""Spectral (in)stability experiments.

A selfadjoint domain D is spectrally unstable iff it meets the Friedrichs
subspace D_F.  Unstable domains get an explicit curve ``D_lam -> D`` of
domains with eigenvalue ``lam`` (``lam -> -inf``); stable neighbourhoods get a
certificate ``spectrum >= zeta`` from negativity of F_{D_F}.

Chart convention: a domain charted over a base B with Hermitian sigma is the
graph of ``T = -J sigma``.  With ``B = D^perp`` the eigenvalue condition reads
``ker(F_D(lam) - sigma) != 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import green
from .errors import (
    FNotInvertible,
    Inconclusive,
    NotCertifiable,
    NotUnstable,
    NumericError,
    OutOfChart,
)
from .green import GraphChart, LagrangianDomain, Subspace
from .series import (
    COND_CAP,
    complement_basis,
    f_matrix_direct,
    growth_verdict,
    kernel_via_f,
)

__all__ = [
    "InstabilityVerdict",
    "FlowPoint",
    "InstabilityCurvePoint",
    "StabilityCertificate",
    "AuditReport",
    "RegularitySplit",
    "is_unstable",
    "kernel_flow",
    "friedrichs_recover",
    "instability_curve",
    "stability_certificate",
    "negative_count_audit",
    "eigen_witness",
    "regularity_split",
    "default_certificate_grid",
]


@dataclass(frozen=True, eq=False)
class InstabilityVerdict:
    domain: Subspace
    witness: Subspace
    min_angle: float
    verdict: str

    @property
    def unstable(self) -> bool:
        return self.verdict == "unstable"


def is_unstable(model, dom: Subspace, tol: float = green.RANK_TOL) -> InstabilityVerdict:
    df = model.friedrichs()
    wit = green.intersect(dom, df, tol)
    ang = float(np.min(green.principal_angles(dom, df)))
    return InstabilityVerdict(dom, wit, ang, "unstable" if wit.dim > 0 else "stable")


# -- kernel flow -------------------------------------------------------------

@dataclass(frozen=True)
class FlowPoint:
    lam: float
    gap: float | None
    method: str
    reason: str = ""


def kernel_flow(model, base: Subspace, lam_list, fallback: bool = True) -> list[FlowPoint]:
    """Gaps ``gap(K_lam, D_F)`` along a decreasing list of negative lambdas."""
    df = model.friedrichs()
    out = []
    for lam in lam_list:
        lam = float(lam)
        try:
            k = kernel_via_f(model, base, lam)
            out.append(FlowPoint(lam, green.gap(k, df), "f-matrix"))
        except NumericError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            if fallback:
                try:
                    k = model.kernel_direct(lam)
                    out.append(FlowPoint(lam, green.gap(k, df), "direct", reason))
                    continue
                except NumericError as exc2:
                    reason += f"; {type(exc2).__name__}: {exc2}"
            out.append(FlowPoint(lam, None, "skipped", reason))
    return out


def friedrichs_recover(model, lam_deep: float = -1e4, base: Subspace | None = None):
    """Deep kernel ``K_lam`` as the numerical Friedrichs subspace, with a report."""
    if lam_deep > -1e3:
        raise ValueError("lam_deep must be <= -1e3")
    if base is None:
        k = model.kernel_direct(lam_deep)
    else:
        k = kernel_via_f(model, base, lam_deep)
    chk = green.is_selfadjoint(k, tol=1e-8)
    dom = green.as_lagrangian(k) if chk.ok else k
    report = {"lam": lam_deep, "gap": green.gap(k, model.friedrichs()),
              "selfadjoint": bool(chk.ok), "residual": float(chk.residual)}
    return dom, report


# -- instability curve ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InstabilityCurvePoint:
    lam: float
    domain: LagrangianDomain
    gap: float
    sa_residual: float
    hermitian_residual: float
    kernel_intersection: int
    secular_residual: float
    t_norm: float

    def accepted(self, tol: float = 1e-6) -> bool:
        return (self.sa_residual < 1e-8 and self.hermitian_residual < 1e-8
                and self.kernel_intersection >= 1 and abs(self.secular_residual) < tol)


def _orth(sp, x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Gram-orthonormal basis of the column span of x (rank revealing)."""
    if x.shape[1] == 0:
        return x
    w = sp.whiten(x)
    u, s, _ = np.linalg.svd(w, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0])))
    return sp.unwhiten(u[:, :r])


def instability_curve(model, dom: Subspace, lam: float, V: Subspace | None = None) -> InstabilityCurvePoint:
    """A domain ``D_lam`` near ``dom`` having ``lam`` as an eigenvalue.

    Follows the graph construction over D: ``T_lam = T_0`` on ``V_lam`` and
    ``A T_0^* A`` on its orthocomplement ``W_lam`` in D.
    """
    sp = dom.space
    df = model.friedrichs()
    if V is None:
        V = green.intersect(dom, df)
    if V.dim == 0:
        raise NotUnstable("the domain does not meet the Friedrichs subspace")
    fmat = f_matrix_direct(model, df, lam)
    fm = fmat.matrix
    if np.linalg.cond(fm) > COND_CAP:
        raise FNotInvertible(f"F_DF({lam}) is not invertible")
    qp = fmat.basis
    g = sp.gram
    qd = dom.basis
    pd = qd @ qd.conj().T @ g
    eye = np.eye(sp.dim)

    def y(x):  # x in D_F  ->  F^{-1} A x in D_F^perp
        return qp @ np.linalg.solve(fm, qp.conj().T @ g @ sp.apply_j(x))

    qv = V.basis
    yv = y(qv)
    vraw = qv + pd @ yv                       # basis of V_lam, images of V under the deformation
    r = np.linalg.cholesky(vraw.conj().T @ g @ vraw).conj().T
    rinv = np.linalg.inv(r)
    zv = vraw @ rinv
    t0zv = (eye - pd) @ yv @ rinv             # T_0 on V_lam, via S_lam: V_lam -> V
    zw = _orth(sp, qd - zv @ (zv.conj().T @ g @ qd))
    zw = zw[:, :dom.dim - zv.shape[1]]
    # T_0^* : D^perp -> V_lam,  T_1 = A T_0^* A on W_lam
    t1zw = sp.apply_j(zv @ (t0zv.conj().T @ g @ sp.apply_j(zw)))
    graph = np.hstack([zv + t0zv, zw + t1zw])
    chk = green.is_selfadjoint(Subspace(sp, graph), tol=1e-8)
    dl = green.as_lagrangian(Subspace(sp, graph)) if chk.ok else Subspace(sp, graph)
    # A T on D in an orthonormal basis of D
    zd = np.hstack([zv, zw])
    tz = np.hstack([t0zv, t1zw])
    at = zd.conj().T @ g @ sp.apply_j(tz)
    herm = float(np.linalg.norm(at - at.conj().T, 2))
    kl = model.kernel_direct(lam)
    nint = green.intersect(dl, kl, tol=1e-8).dim
    sec = float(model.secular(dl, lam))
    tnorm = float(np.linalg.norm(sp.whiten(tz), 2))
    return InstabilityCurvePoint(float(lam), dl, green.gap(dl, dom), float(chk.residual), herm,
                                 nint, sec, tnorm)


# -- stability certificates ----------------------------------------------------

def default_certificate_grid() -> np.ndarray:
    return -np.logspace(1, 8, 29)


@dataclass(frozen=True, eq=False)
class StabilityCertificate:
    base: Subspace
    M: float
    zeta: float
    kind: str                      # "certificate" (base = D_F) or "evidence"
    lam_grid: np.ndarray
    max_eigs: np.ndarray
    monotone_tail: bool
    target_norm: float | None = None
    scan: list = field(default_factory=list)

    @property
    def scan_ok(self) -> bool:
        return all(s["ok"] for s in self.scan)


def _sample_sigma(rng, d, M, center, real):
    h = green.random_hermitian(d, rng, 1.0, real)
    h /= max(np.linalg.norm(h, 2), 1e-300)
    room = M - np.linalg.norm(center, 2)
    r = rng.uniform(0.0, 0.999 * room)
    return center + r * h


def stability_certificate(model, base: Subspace, M: float, lam_grid=None,
                          target: Subspace | None = None, n_scan: int = 10,
                          seed: int = 0, scan_count: int = 3) -> StabilityCertificate:
    """Threshold zeta with ``F_base(lam) <= -M`` for every grid ``lam <= zeta``.

    Since F_base is increasing in lam, the bound extends from the grid to the
    whole half-line below zeta.  Every domain charted over ``base^perp`` with
    ``||sigma|| < M`` then has spectrum in ``[zeta, inf)``.  With a ``target``
    the chart norm of the target must be below M; ``n_scan`` seeded charts in
    the ball are checked by the secular eigensolver.
    """
    lam_grid = default_certificate_grid() if lam_grid is None else np.asarray(lam_grid, dtype=float)
    lam_grid = np.sort(lam_grid)[::-1]                 # decreasing
    perp = green.orthocomplement(base)
    center = np.zeros((base.dim, base.dim), dtype=complex)
    tnorm = None
    if target is not None:
        try:
            center = green.chart_of(target, perp).sigma
        except OutOfChart as exc:
            raise NotCertifiable(f"target is not in the chart over the base complement: {exc}")
        tnorm = float(np.linalg.norm(center, 2))
        if tnorm >= M:
            raise NotCertifiable(f"target chart norm {tnorm:.4g} is not below M = {M}")
    mx = np.array([f_matrix_direct(model, base, lam).max_eig for lam in lam_grid])
    good = mx <= -M
    # zeta: the largest grid point from which on (downwards) the bound holds throughout
    if not good[-1]:
        raise NotCertifiable(f"max eigenvalue of F stays above -{M} on the grid")
    first_bad = np.nonzero(~good)[0]
    idx = first_bad[-1] + 1 if first_bad.size else 0
    zeta = float(lam_grid[idx])
    decades = np.log10(-lam_grid)
    tail = decades >= decades.max() - 3
    monotone = bool(np.all(np.diff(mx[tail]) <= 1e-9 * np.abs(mx[tail][:-1]).max()))
    kind = "certificate" if green.gap(base, model.friedrichs()) < 1e-8 else "evidence"
    scan = []
    if n_scan:
        rng = np.random.default_rng(seed)
        real = not np.iscomplexobj(center) or np.allclose(center.imag, 0)
        for i in range(n_scan):
            sig = _sample_sigma(rng, base.dim, M, center, real and model.d == 1)
            dom = green.graph_domain(GraphChart(green.as_lagrangian(perp), sig))
            ev = model.eigenvalues(dom, scan_count)
            scan.append({"sigma_norm": float(np.linalg.norm(sig, 2)), "lowest": float(ev[0]),
                         "ok": bool(ev[0] >= zeta)})
    return StabilityCertificate(base, float(M), zeta, kind, lam_grid, mx, monotone, tnorm, scan)


# -- audits --------------------------------------------------------------------

@dataclass(frozen=True)
class AuditReport:
    model: str
    n_samples: int
    seed: int
    bound: float
    d: int
    counts: list
    max_count: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def negative_count_audit(model, n_samples: int, seed: int = 0, scale: float = 5.0) -> AuditReport:
    """Count eigenvalues below the lower bound for sampled selfadjoint domains.

    Samples alternate between charts over D_F and over its complement so that
    both stable and strongly negative domains are covered.
    """
    m = model.lower_bound()
    df = model.friedrichs()
    dfp = green.as_lagrangian(green.orthocomplement(df))
    counts, bad = [], []
    for i in range(n_samples):
        base = df if i % 2 == 0 else dfp
        dom = green.sample_sa(base, seed + i, scale)
        ev = model.eigenvalues(dom, model.d + 2)
        c = int(np.sum(ev < m))
        counts.append(c)
        if c > model.d:
            bad.append({"sample": i, "count": c, "eigenvalues": ev[:c].tolist()})
    return AuditReport(model.name, n_samples, seed, m, model.d, counts, max(counts, default=0), bad)


def eigen_witness(model, lam: float, tol: float = 1e-8) -> LagrangianDomain:
    """``K_lam`` as a selfadjoint domain with eigenvalue ``lam``."""
    k = model.kernel_direct(lam)
    chk = green.is_selfadjoint(k, tol)
    if not chk.ok:
        raise NumericError(f"kernel is not Lagrangian (residual {chk.residual:.2e})")
    dom = green.as_lagrangian(k)
    sec = model.secular(dom, lam)
    if abs(sec) > 1e-6:
        raise NumericError(f"secular residual {sec:.2e} at the witness eigenvalue")
    return dom


@dataclass(frozen=True, eq=False)
class RegularitySplit:
    d0: np.ndarray          # coordinate columns: directions with delta_u in H^{-1/2}
    d1: np.ndarray          # complementary directions
    verdicts: list
    confidence: list
    heuristic: bool = True


def regularity_split(model, dom, s: float = 0.5, N: int = 4000, eig=None) -> RegularitySplit:
    """Heuristic split of D^perp by whether ``delta_u`` lies in H^{-s}.

    The partial-sum matrices ``H_n = sum_{k<=n} c_k c_k^H / (1 + |lam_k|)^{2s}``
    are diagonalized along a geometric n-grid and each eigenvalue sequence is
    profiled like a scalar partial sum.  Directions are
    returned as coordinates in D^perp (synthetic model: in the row basis).
    """
    from .realization import SyntheticRealization

    if isinstance(model, SyntheticRealization):
        cmat = model.rows[:, :N]
        lam = model.eigenvalues[:N]
        basis = np.eye(model.d)
    else:
        if eig is None or len(eig) < N:
            eig = model.eigen_system(dom, N)
        lam = eig.lam[:N]
        basis = complement_basis(dom)
        cmat = np.stack([model.pairing(basis[:, i], eig)[:lam.size] for i in range(basis.shape[1])])
    wts = 1.0 / (1.0 + np.abs(lam)) ** (2 * s)
    n = lam.size
    grid = np.unique(np.geomspace(10, n, 25).astype(int))
    # eigenvalues of the partial-sum matrices H_n grow monotonically in n; a
    # bounded eigenvalue marks a direction with delta_u in H^{-s}
    mus, vecs = [], None
    for m in grid:
        h = (cmat[:, :m] * wts[:m]) @ cmat[:, :m].conj().T
        mu, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
        mus.append(mu)
    mus = np.array(mus)
    top = grid >= grid[-1] / 10
    mid = np.sqrt(grid[1:] * grid[:-1]).astype(float)
    verdicts, conf, d0, d1 = [], [], [], []
    for j in range(vecs.shape[1]):
        slope = _slope(grid[top].astype(float), mus[top, j])
        rate = np.diff(mus[:, j]) / np.diff(grid)
        term_p = -_slope(mid[top[1:]], rate[top[1:]])
        last = float(rate[-1])
        v = growth_verdict(slope, term_p, last, float(mus[-1, j]))
        verdicts.append(v)
        conf.append(float(min(abs(slope - 0.1), abs(term_p - 1.0))))
        (d0 if v == "convergent" else d1).append(basis @ vecs[:, j])
    if "inconclusive" in verdicts:
        raise Inconclusive(f"mixed verdicts {verdicts}")
    width = basis.shape[0]
    as_cols = lambda v: np.array(v).T if v else np.zeros((width, 0), dtype=complex)
    return RegularitySplit(as_cols(d0), as_cols(d1), verdicts, conf)


def _slope(x, y):
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])
