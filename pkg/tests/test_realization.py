import numpy as np
import pytest

from sa_lab import green
from sa_lab.errors import BackgroundSpectrum, MultiplicityAmbiguity
from sa_lab.oracle import fd_resolvent, fd_spectrum
from sa_lab.realization import (
    FullLaplacian,
    PinnedLaplacian,
    SyntheticRealization,
    build_extension_basis,
    friedrichs_subspace,
    gauss_legendre,
    lower_bound,
    ode_eval,
    ode_l2_gram,
    ode_traces,
)


def test_dimensions(pinned, full):
    assert pinned.space.dim == 2 and full.space.dim == 4


def test_structure_quadrature(pinned, full):
    for m in (pinned, full):
        sp = m.space
        j, g = sp.jmat, sp.gram
        assert np.linalg.norm(j @ j + np.eye(sp.dim)) < 1e-8
        assert np.linalg.norm(j.conj().T @ g @ j - g) < 1e-8 * np.linalg.norm(g)


def test_quadrature_doubling(pinned, full):
    for cls in (PinnedLaplacian, FullLaplacian):
        a = build_extension_basis(cls(64)).space.gram
        b = build_extension_basis(cls(128)).space.gram
        assert np.abs(a - b).max() < 1e-10


def test_trace_cardinal_basis(full):
    # coordinates of an E element are its traces
    eb = full.basis
    x = np.array([0.3, -1.0, 2.0, 0.5])
    assert np.allclose(eb.eval(x, [0.0, 1.0]), [x[0], x[2]], atol=1e-12)
    assert np.allclose(eb.eval(x, [0.0, 1.0], 1), [x[1], x[3]], atol=1e-12)
    # and every basis function solves u'''' = -u
    xs = np.linspace(0, 1, 7)
    assert np.abs(eb.eval(x, xs, 4) + eb.eval(x, xs)).max() < 1e-10


def test_ode_basis_consistency():
    for lam in (-1e4, -30.0, -1.0, -0.5, 0.0, 1e-9, 0.7, 50.0, 1e5):
        tr = ode_traces(lam)
        v0 = ode_eval(lam, np.array([0.0, 1.0]))
        v1 = ode_eval(lam, np.array([0.0, 1.0]), 1)
        assert np.allclose(tr[[0, 2]], v0, rtol=1e-12, atol=1e-300)
        assert np.allclose(tr[[1, 3]], v1, rtol=1e-12, atol=1e-300)
        xq, wq = gauss_legendre(400)
        f = ode_eval(lam, xq)
        if abs(lam) < 1e4:
            g = (f * wq[:, None]).T @ f
            assert np.allclose(ode_l2_gram(lam), g, rtol=1e-10, atol=1e-14)


def test_friedrichs(pinned, full):
    df = friedrichs_subspace(pinned)
    t = df.basis[:, 0]
    assert abs(t[0]) < 1e-14 and abs(t[1]) > 0
    assert green.is_selfadjoint(df).ok
    dff = full.friedrichs()
    assert dff.dim == 2
    u0 = full.lagrangian([[0, 1, 0, 0], [0, 0, 1, 0]])
    zero_at_0 = full.from_traces([[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    assert green.intersect(dff, zero_at_0).dim == 2
    assert u0.dim == 2


def test_secular_dirichlet_neumann(pinned):
    k = np.arange(1, 6)
    ev = pinned.eigenvalues(pinned.lagrangian([[0.0, 1.0]]), 5)
    assert np.allclose(ev, (k * np.pi) ** 2, rtol=1e-10, atol=0)
    ev = pinned.eigenvalues(pinned.lagrangian([[1.0, 0.0]]), 5)
    assert np.allclose(ev, ((k - 0.5) * np.pi) ** 2, rtol=1e-10, atol=0)


def test_secular_robin(pinned):
    from scipy.optimize import brentq

    kappa = brentq(lambda x: x - 5 * np.tanh(x), 1, 10)
    ev = pinned.eigenvalues(pinned.lagrangian([[1.0, -5.0]]), 3)
    assert np.sum(ev < 0) == 1
    assert abs(ev[0] + kappa**2) < 1e-9 * kappa**2
    assert abs(kappa - 4.9995) < 1e-3


def test_secular_real_and_smooth_through_zero(full):
    d = green.sample_sa(full.friedrichs(), 11, 2.0)
    f = full.secular_function(d)
    lam = np.linspace(-2, 2, 401)
    raw = full._secular_raw(f.cmat, lam) * f.phase
    assert np.abs(raw.imag).max() < 1e-12
    # the regime switch at lambda = -1 rescales by a positive factor only
    for seed in range(20):
        g = full.secular_function(green.sample_sa(full.friedrichs(), seed, 2.0))
        v = g(np.array([-1 - 1e-9, -1 + 1e-9]))
        assert np.sign(v[0]) == np.sign(v[1])


def test_periodic_double_eigenvalues(full):
    d = full.lagrangian([[1, 0, 1, 0], [0, 1, 0, 1]])
    es = full.eigen_system(d, 5)
    assert np.allclose(es.lam, np.array([0, 4, 4, 16, 16]) * np.pi**2, atol=1e-8)
    xq, wq = gauss_legendre(96)
    v = es.eval(xq)
    assert np.abs(v.conj().T @ (wq[:, None] * v) - np.eye(5)).max() < 1e-8


def test_multiplicity_ambiguity_pinned():
    # a d = 1 secular function with a double zero cannot be resolved
    m = PinnedLaplacian()

    def f(lam):
        return (lam - 5.0) ** 2 + 0.0 * lam

    from sa_lab.realization import _scan_roots

    with pytest.raises(MultiplicityAmbiguity):
        _scan_roots(f, np.linspace(1.0, 3.0, 33))
    assert m.d == 1


def test_eigen_system_orthonormal(pinned, full):
    xq, wq = gauss_legendre(96)
    for m in (pinned, full):
        d = green.sample_sa(m.friedrichs(), 4, 3.0)
        es = m.eigen_system(d, 10)
        assert np.all(np.diff(es.lam) > 0)
        v = es.eval(xq)
        assert np.abs(v.conj().T @ (wq[:, None] * v) - np.eye(len(es))).max() < 1e-8
        # boundary condition: the traces lie in D
        assert all(d.contains(t) for t in es.coord_traces)


def test_sign_convention(pinned):
    es = pinned.eigen_system(pinned.friedrichs(), 4)
    k = np.arange(1, 5)
    assert np.allclose(es.traces[:, 1], np.sqrt(2) * k * np.pi, rtol=1e-12)


def test_pairing_dirichlet_closed_form(pinned):
    df = pinned.friedrichs()
    es = pinned.eigen_system(df, 6)
    u = green.orthocomplement(df).basis[:, 0]
    u = u / u[0]
    c = pinned.pairing(u, es)
    assert np.allclose(c, np.sqrt(2) * np.arange(1, 7) * np.pi, rtol=1e-12)


def test_pairing_quadrature(pinned, full):
    for m in (pinned, full):
        d = green.sample_sa(m.friedrichs(), 2, 1.5)
        es = m.eigen_system(d, 8)
        u = green.orthocomplement(d).basis[:, 0]
        q = m.pairing_quadrature(u, es, np.arange(8))
        assert np.abs(q - m.pairing(u, es)).max() < 1e-8


def test_kernel_direct(pinned, full):
    rng = np.random.default_rng(3)
    for lam in -rng.uniform(0, 1e4, 50):
        assert pinned.kernel_direct(lam).dim == 1
        assert full.kernel_direct(lam).dim == 2
    # pinned kernel is sinh(k (1 - x)): trace ratio u'(0)/u(0) = -k coth k
    lam = -400.0
    t = pinned.kernel_direct(lam).coeffs[:, 0]
    assert abs(t[1] / t[0] + 20 / np.tanh(20)) < 1e-10


def test_kernel_projection_quadrature(pinned, full):
    for m in (pinned, full):
        for lam in (-50.0, -3.0, 0.0, 7.5, 60.0):
            a = m.kernel_direct(lam)
            b = m.kernel_projection_quadrature(lam)
            assert green.gap(a, b) < 1e-8


def test_bg_check(pinned, full):
    lam = np.linspace(-1e4, 1e4, 1000)
    assert np.all(pinned.bg_check(lam)) and np.all(full.bg_check(lam))
    syn = SyntheticRealization(np.arange(1.0, 5.0), np.ones((1, 4)))
    assert syn.bg_check(3.0)


def test_background_spectrum_error():
    class Broken(PinnedLaplacian):
        def bg_check(self, lam):
            return False

    with pytest.raises(BackgroundSpectrum):
        Broken().kernel_direct(-1.0)


def test_lower_bound_core_functions(pinned, full):
    # smooth functions vanishing near 0 and at 1: sum of bumps on [0.05, 1]
    xq, wq = gauss_legendre(400)
    rng = np.random.default_rng(9)
    for _ in range(20):
        a = rng.standard_normal(6)
        s = (xq - 0.05) / 0.95
        mask = s > 0
        base = np.where(mask, s**3 * (1 - s) ** 3, 0.0)
        dbase = np.where(mask, (3 * s**2 * (1 - s) ** 3 - 3 * s**3 * (1 - s) ** 2) / 0.95, 0.0)
        p = np.polynomial.Polynomial(a)
        u = base * p(xq)
        du = dbase * p(xq) + base * p.deriv()(xq)
        # (A u, u) = int |u'|^2 for core functions
        assert wq @ du**2 >= np.pi**2 * (wq @ u**2)
    assert lower_bound(pinned) == lower_bound(full) == np.pi**2
    assert pinned.eigenvalues(pinned.friedrichs(), 1)[0] == pytest.approx(np.pi**2, rel=1e-12)


def test_oracle_richardson(pinned):
    d = pinned.friedrichs()
    err = [abs(fd_spectrum(pinned, d, n, 1)[0] - np.pi**2) for n in (500, 1000, 2000)]
    rates = np.log2(np.array(err[:-1]) / np.array(err[1:]))
    assert np.all(np.abs(rates - 2) < 0.05)


def test_oracle_robin_and_full(pinned, full):
    ev = pinned.eigenvalues(pinned.lagrangian([[1.0, -5.0]]), 1)[0]
    fd = fd_spectrum(pinned, pinned.lagrangian([[1.0, -5.0]]), 4000, 1)[0]
    assert abs(fd - ev) < 1e-3
    dd = full.lagrangian([[0, 1, 0, 0], [0, 0, 0, 1]])
    fd = fd_spectrum(full, dd, 4000, 3)
    assert np.allclose(fd, (np.arange(1, 4) * np.pi) ** 2, rtol=1e-5)


def test_oracle_resolvent(pinned):
    d = pinned.lagrangian([[1.0, -2.0]])
    es = pinned.eigen_system(d, 3)
    x, w = fd_resolvent(pinned, d, lambda x: es.eval(x, 0)[:, 0].real, 0.5, 4000)
    exact = es.eval(x, 0)[:, 0] / (es.lam[0] - 0.5)
    assert np.sqrt(np.mean(np.abs(w - exact) ** 2)) < 1e-4


def test_synthetic_model():
    syn = SyntheticRealization.from_rules(lambda k: (k * np.pi) ** 2, [lambda k: k], 5000)
    assert syn.d == 1
    assert syn.lower_bound() == pytest.approx(np.pi**2)
    ps = syn.h_minus_one_partial_sums()[0]
    assert ps[-1] - ps[-1000] < 1e-4
    with pytest.raises(ValueError):
        SyntheticRealization(np.array([2.0, 1.0]), np.ones((1, 2)))
