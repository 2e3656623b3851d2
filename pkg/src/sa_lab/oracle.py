"""Independent finite-difference oracle for interval Laplacians.

The boundary condition is read off the trace space of D only (no use of E,
the Green form or the secular function).  A selfadjoint condition on the
boundary data ``gamma = (u(0), u(1))`` and outward derivatives
``nu = (-u'(0), u'(1))`` has the form ``gamma in G0``, ``P_G0 nu = L gamma``
with L Hermitian on G0.  The quadratic form is then

    q(u) = int |u'|^2 - <L gamma, gamma>,    gamma in G0,

which we discretize with P1 elements and a lumped mass matrix.  On interior
nodes this is the usual three-point difference scheme and the whole
discretization is second order.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["robin_data", "fd_operator", "fd_spectrum", "fd_resolvent"]


def robin_data(model, dom) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis U of G0 (2 x r) and the Hermitian r x r matrix L."""
    t = np.zeros((4, dom.dim), dtype=complex)
    t[model.trace_rows, :] = dom.coeffs
    gam = t[[0, 2], :]
    nu = np.stack([-t[1], t[3]])
    if model.name == "pinned":
        # u(1) = 0 is part of every domain; u'(1) is not a coordinate
        gam = gam[:1]
        nu = nu[:1]
    u, s, _ = np.linalg.svd(gam, full_matrices=False)
    r = int(np.sum(s > 1e-10 * max(1.0, s.max(initial=0.0))))
    u = u[:, :r]
    lmat = u.conj().T @ nu @ np.linalg.pinv(gam, rcond=1e-10) @ u
    return u, 0.5 * (lmat + lmat.conj().T)


def fd_operator(model, dom, n: int):
    """Symmetrically scaled FD matrix ``M^{-1/2} K M^{-1/2}`` and helpers.

    Unknowns are the interior nodes followed by the r boundary coordinates.
    Returns ``(mat, z, mass)`` where ``z`` maps unknowns to nodal values and
    ``mass`` is the diagonal of the reduced lumped mass.
    """
    if n < 100:
        raise ValueError("finite-difference oracle needs n >= 100")
    h = 1.0 / n
    u, lmat = robin_data(model, dom)
    nb = u.shape[0]                      # boundary nodes carried (1 pinned, 2 full)
    r = u.shape[1]
    m = n - 1
    # interior stiffness
    main = np.full(m, 2.0 / h)
    off = np.full(m - 1, -1.0 / h)
    k_int = sp.diags([off, main, off], [-1, 0, 1], format="csr", dtype=complex)
    # boundary node 0 couples to interior node 0, node n to interior node m-1
    bnodes = [0] if nb == 1 else [0, m - 1]
    kb = np.zeros((nb, nb), dtype=complex)
    couple = np.zeros((nb, m), dtype=complex)
    for j, inode in enumerate(bnodes):
        kb[j, j] = 1.0 / h
        couple[j, inode] = -1.0 / h
    if r:
        kbb = u.conj().T @ kb @ u - lmat
        kbi = sp.csr_matrix(u.conj().T @ couple)
        rows = sp.bmat([[k_int, kbi.conj().T], [kbi, sp.csr_matrix(kbb)]], format="csr")
    else:
        rows = k_int
    mass = np.concatenate([np.full(m, h), np.full(r, h / 2)])
    sc = 1.0 / np.sqrt(mass)
    mat = sp.diags(sc) @ rows @ sp.diags(sc)
    z = (u, bnodes)
    return mat.tocsr(), z, mass


def _nodal(model, z, w, n):
    u, _ = z
    m = n - 1
    vals = np.zeros(n + 1, dtype=complex)
    vals[1:n] = w[:m]
    bvals = u @ w[m:] if u.shape[1] else np.zeros(u.shape[0])
    vals[0] = bvals[0]
    if u.shape[0] == 2:
        vals[n] = bvals[1]
    return vals


def fd_spectrum(model, dom, n: int = 4000, count: int = 5) -> np.ndarray:
    """Lowest ``count`` eigenvalues of the discretized realization."""
    mat, _, _ = fd_operator(model, dom, n)
    size = mat.shape[0]
    if model.name == "pinned":
        a = mat.toarray() if size <= 400 else None
        if a is None:
            # interior chain plus one boundary unknown appended at the end;
            # reorder so the boundary unknown sits next to interior node 0
            perm = np.r_[size - 1:size, 0:size - 1] if size > n - 1 else np.arange(size)
            t = mat[perm][:, perm]
            d0 = np.real(t.diagonal())
            e0 = np.real(t.diagonal(1))
            return scipy.linalg.eigh_tridiagonal(d0, e0, select="i",
                                                 select_range=(0, count - 1))[0]
        return np.linalg.eigvalsh(a)[:count]
    if size <= 400:
        return np.linalg.eigvalsh(mat.toarray())[:count]
    coarse = fd_spectrum(model, dom, 200, 1)[0]
    sigma = coarse - 1.0 - 0.1 * abs(coarse)
    vals = spla.eigsh(mat, k=count, sigma=sigma, which="LM", return_eigenvectors=False)
    return np.sort(np.real(vals))


def fd_resolvent(model, dom, f, lam: float, n: int = 4000) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``(A_D - lam) w = f`` on the grid; returns nodes and nodal values."""
    mat, z, mass = fd_operator(model, dom, n)
    x = np.linspace(0.0, 1.0, n + 1)
    fx = np.asarray(f(x), dtype=complex)
    u, bnodes = z
    m = n - 1
    rhs = np.concatenate([fx[1:n], u.conj().T @ fx[[0, n][:u.shape[0]]]])
    # scaled system: (Mh^-1/2 K Mh^-1/2 - lam) y = Mh^1/2 f,  w = Mh^-1/2 y
    sq = np.sqrt(mass)
    y = spla.spsolve((mat - lam * sp.identity(mat.shape[0], format="csr")).tocsc(), sq * rhs)
    w = y / sq
    return x, _nodal(model, z, w, n)
