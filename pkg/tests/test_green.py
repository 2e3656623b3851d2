import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sa_lab import green
from sa_lab.errors import (
    DegenerateGreenForm,
    DimensionMismatch,
    NotAlmostComplex,
    NotHermitian,
    NotIsometry,
    OutOfChart,
    RankMismatch,
    WrongRank,
)
from sa_lab.green import GraphChart, validate_space
from sa_lab.realization import FullLaplacian

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])
_FULL = FullLaplacian()  # shared by hypothesis tests, which cannot take fixtures


def toy():
    return validate_space(np.eye(2), ROT)


def test_validate_rotation_accepted():
    sp = toy()
    assert sp.d == 1 and sp.dim == 2


def test_validate_rejections():
    with pytest.raises(NotAlmostComplex):
        validate_space(np.eye(2), np.eye(2))
    # J^2 = -I but not unitary for the gram
    with pytest.raises(NotIsometry):
        validate_space(np.eye(2), np.array([[0.0, -2.0], [0.5, 0.0]]))
    with pytest.raises((ValueError, DimensionMismatch, NotAlmostComplex, DegenerateGreenForm)):
        validate_space(np.eye(3), np.eye(3))


def test_validate_model_spaces(pinned, full):
    for m in (pinned, full):
        sp = validate_space(m.space.gram, m.space.jmat, tol=1e-10)
        assert sp.dim == 2 * m.d


def test_green_form_properties(pinned):
    sp = pinned.space
    rng = np.random.default_rng(0)
    u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    assert abs(np.real(green.green_form(sp, u, u))) < 1e-12
    assert abs(green.green_form(sp, v, u) + np.conj(green.green_form(sp, u, v))) < 1e-12
    with pytest.raises(DimensionMismatch):
        green.green_form(sp, u, np.ones(3))


def test_green_form_is_boundary_form(pinned, full):
    # [u, v] = u'(0) v(0)* - u(0) v'(0)* (- u'(1) v(1)* + u(1) v'(1)* for the full model)
    rng = np.random.default_rng(1)
    for m in (pinned, full):
        n = m.space.dim
        for _ in range(5):
            u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            want = u[1] * np.conj(v[0]) - u[0] * np.conj(v[1])
            if n == 4:
                want += -u[3] * np.conj(v[2]) + u[2] * np.conj(v[3])
            assert abs(green.green_form(m.space, u, v) - want) < 1e-12


def test_green_form_quadrature_cross_check(pinned):
    from sa_lab.realization import gauss_legendre

    xq, wq = gauss_legendre(96)
    u = np.array([0.3 + 0.2j, -1.1])
    v = np.array([1.0, 0.4 - 0.7j])
    bu, bv = pinned.basis.eval(u, xq), pinned.basis.eval(v, xq)
    au, av = -pinned.basis.eval(u, xq, 2), -pinned.basis.eval(v, xq, 2)
    quad = wq @ (au * np.conj(bv)) - wq @ (bu * np.conj(av))
    assert abs(quad - green.green_form(pinned.space, u, v)) < 1e-10


def test_green_form_identity(full):
    sp = full.space
    e = np.eye(4)
    for i in range(4):
        for j in range(4):
            lhs = green.green_form(sp, e[:, i], sp.jmat @ e[:, j])
            assert abs(lhs - sp.inner(e[:, i], e[:, j])) < 1e-10


def test_orthocomplement():
    sp = toy()
    perp = green.orthocomplement(sp.span([1.0, 0.0]))
    assert green.gap(perp, sp.span([0.0, 1.0])) < 1e-14


def test_orthocomplement_involution(full, rng):
    d = green.sample_sa(full.friedrichs(), 3)
    pp = green.orthocomplement(green.orthocomplement(d))
    assert green.gap(pp, d) < 1e-12


def test_orthocomplement_df_pinned(pinned):
    df = pinned.friedrichs()
    perp = green.orthocomplement(df)
    assert perp.dim == 1
    assert abs(pinned.space.inner(perp.basis[:, 0], df.basis[:, 0])) < 1e-14
    assert abs(pinned.space.norm(perp.basis[:, 0]) - 1) < 1e-14


def test_adjoint_domain(pinned, full):
    for m in (pinned, full):
        d = green.sample_sa(m.friedrichs(), 7, 2.0)
        assert green.gap(green.adjoint_domain(d), d) < 1e-10
        twice = green.adjoint_domain(green.adjoint_domain(d))
        assert green.gap(twice, d) < 1e-10
    cr = pinned.from_traces([-1j, 1.0])
    assert green.gap(green.adjoint_domain(cr), cr) > 0.1


def test_is_selfadjoint_examples(pinned):
    assert green.is_selfadjoint(pinned.from_traces([0.0, 1.0])).ok
    chk = green.is_selfadjoint(pinned.from_traces([-1j, 1.0]))
    assert not chk.ok and abs(chk.residual - 2.0) < 1e-12
    for th in np.linspace(0, np.pi, 13, endpoint=False):
        assert green.is_selfadjoint(pinned.from_traces([np.sin(th), -np.cos(th)])).ok
    with pytest.raises(WrongRank):
        green.is_selfadjoint(pinned.space.whole())


def test_graph_domain(pinned, full):
    df = pinned.friedrichs()
    assert green.gap(green.graph_domain(GraphChart(df, np.zeros((1, 1)))), df) < 1e-15
    for s in (-3.0, 0.5, 7.0):
        assert green.is_selfadjoint(green.graph_domain(GraphChart(df, np.array([[s]])))).ok
    rng = np.random.default_rng(5)
    sig = green.random_hermitian(2, rng)
    assert green.is_selfadjoint(green.graph_domain(GraphChart(full.friedrichs(), sig)), 1e-10).ok
    with pytest.raises(NotHermitian):
        GraphChart(full.friedrichs(), np.array([[0, 1.0], [0, 0]]))


def test_chart_round_trip(full):
    base = full.friedrichs()
    assert np.abs(green.chart_of(base, base).sigma).max() < 1e-14
    rng = np.random.default_rng(2)
    for _ in range(20):
        sig = green.random_hermitian(2, rng, 3.0)
        back = green.chart_of(green.graph_domain(GraphChart(base, sig)), base).sigma
        assert np.abs(back - sig).max() < 1e-8


def test_chart_out_of_chart(pinned):
    df = pinned.friedrichs()
    perp = green.as_lagrangian(green.orthocomplement(df))
    # D_F is not transversal to D_F, so it has no chart over D_F^perp
    with pytest.raises(OutOfChart):
        green.chart_of(df, perp)
    # the Neumann line meets D_F trivially
    green.chart_of(pinned.lagrangian([[1.0, 0.0]]), perp)


def test_gap_examples(pinned):
    dd = pinned.lagrangian([[0.0, 1.0]])
    nn = pinned.lagrangian([[1.0, 0.0]])
    assert green.gap(dd, dd) == 0.0
    assert abs(green.gap(dd, green.orthocomplement(dd)) - 1) < 1e-14
    a, b = green.gap(dd, nn), green.gap(dd, nn, method="angles")
    assert abs(a - b) < 1e-12
    with pytest.raises(RankMismatch):
        green.gap(dd, pinned.space.whole())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_gap_metric(s1, s2, s3):
    base = _FULL.friedrichs()
    a, b, c = (green.sample_sa(base, s, 2.0) for s in (s1, s2, s3))
    assert green.gap(a, b) == green.gap(b, a)
    assert green.gap(a, c) <= green.gap(a, b) + green.gap(b, c) + 1e-12
    assert 0.0 <= green.gap(a, b) <= 1.0


def test_intersect(pinned, full):
    d = full.friedrichs()
    assert green.intersect(d, d).dim == 2
    dd = pinned.lagrangian([[0.0, 1.0]])
    nn = pinned.lagrangian([[1.0, 0.0]])
    assert green.intersect(dd, nn).dim == 0
    # u(0) = 0 and a Neumann condition at 1: shares exactly the u'(0) direction with D_F
    mixed = full.lagrangian([[0, 1, 0, 0], [0, 0, 1, 0]])
    w = green.intersect(mixed, full.friedrichs())
    assert w.dim == 1


def test_sample_sa(full, pinned):
    base = full.friedrichs()
    assert green.gap(green.sample_sa(base, 1, 0.0), base) < 1e-15
    for seed in range(100):
        assert green.is_selfadjoint(green.sample_sa(base, seed, 3.0), 1e-10).ok
        assert green.is_selfadjoint(green.sample_sa(pinned.friedrichs(), seed, 3.0), 1e-10).ok
    assert green.gap(green.sample_sa(base, 1), green.sample_sa(base, 2)) > 0


def test_perp_of_lagrangian_is_lagrangian(full):
    for seed in range(20):
        d = green.sample_sa(full.friedrichs(), seed, 2.0)
        assert green.is_selfadjoint(green.orthocomplement(d), 1e-10).ok


def test_cayley_split():
    kp, km = green.cayley_split(toy())
    assert green.gap(kp, toy().span([1.0, -1j])) < 1e-14
    assert green.gap(km, toy().span([1.0, 1j])) < 1e-14


def test_cayley_split_models(pinned, full):
    for m in (pinned, full):
        kp, km = green.cayley_split(m.space)
        assert kp.dim == km.dim == m.d
        total = kp.projector + km.projector
        assert np.abs(total - np.eye(m.space.dim)).max() < 1e-10
