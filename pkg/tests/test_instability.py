import numpy as np
import pytest
from scipy.optimize import brentq

from sa_lab import green
from sa_lab.errors import Inconclusive, NotCertifiable, NotUnstable
from sa_lab.instability import (
    eigen_witness,
    friedrichs_recover,
    instability_curve,
    is_unstable,
    kernel_flow,
    negative_count_audit,
    regularity_split,
    stability_certificate,
)
from sa_lab.realization import SyntheticRealization

FLOW = [-10.0, -100.0, -1000.0, -10000.0]


def neumann(m):
    if m.d == 1:
        return m.lagrangian([[1.0, 0.0]])
    return m.lagrangian([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])


def test_verdicts(pinned, full):
    v = is_unstable(pinned, pinned.friedrichs())
    assert v.unstable and v.witness.dim == 1
    for beta in (-3.0, 0.5, 7.0):
        v = is_unstable(pinned, pinned.lagrangian([[1.0, beta]]))
        assert not v.unstable and v.min_angle > 1e-3
    # Dirichlet at 0, Neumann at 1
    mixed = full.lagrangian([[0, 1.0, 0, 0], [0, 0, 1.0, 0]])
    v = is_unstable(full, mixed)
    assert v.unstable and v.witness.dim == 1


def test_kernel_flow_pinned(pinned):
    pts = kernel_flow(pinned, pinned.friedrichs(), FLOW)
    gaps = [p.gap for p in pts]
    assert all(p.method == "f-matrix" for p in pts)
    assert np.all(np.diff(gaps) < 0) and gaps[-1] < 1e-2
    other = kernel_flow(pinned, neumann(pinned), FLOW)
    assert np.allclose(gaps, [p.gap for p in other], atol=1e-6)


def test_kernel_flow_skips_spectrum(pinned):
    d = pinned.lagrangian([[1.0, -2.0]])
    lam0 = pinned.eigenvalues(d, 1)[0]
    pts = kernel_flow(pinned, d, [lam0], fallback=False)
    assert pts[0].method == "skipped" and pts[0].reason


def test_friedrichs_recover(pinned, full):
    for m, tol in ((pinned, 1e-2), (full, 5e-2)):
        dom, rep = friedrichs_recover(m, -1e4)
        assert rep["selfadjoint"] and rep["residual"] < 1e-8 and rep["gap"] < tol
        d2, _ = friedrichs_recover(m, -1e4, base=neumann(m))
        assert green.gap(dom, d2) < 1e-3
    with pytest.raises(ValueError):
        friedrichs_recover(pinned, -10.0)


def test_instability_curve(pinned, full):
    for m, dom in ((pinned, pinned.friedrichs()),
                   (full, full.lagrangian([[0, 1.0, 0, 0], [0, 0, 1.0, 0]]))):
        pts = [instability_curve(m, dom, lam) for lam in (-1e2, -1e3, -1e4)]
        assert all(p.accepted() for p in pts)
        gaps = [p.gap for p in pts]
        assert np.all(np.diff(gaps) < 0)
        lowest = [m.eigenvalues(p.domain, 1)[0] for p in pts]
        assert np.allclose(lowest, [p.lam for p in pts], rtol=1e-6)
    with pytest.raises(NotUnstable):
        instability_curve(pinned, neumann(pinned), -100.0)


@pytest.mark.parametrize("eps", [0.1, 0.01, 0.001])
def test_robin_dive(pinned, eps):
    d = pinned.lagrangian([[eps, -1.0]])     # u(0) + eps u'(0) = 0
    lam = pinned.eigenvalues(d, 1)[0]
    kappa = brentq(lambda k: np.tanh(k) - eps * k, 0.5, 2 / eps)
    assert lam == pytest.approx(-kappa**2, rel=1e-8)
    assert abs(lam * eps**2 + 1) < 1e-3


def test_certificate(pinned):
    df = pinned.friedrichs()
    cert = stability_certificate(pinned, df, 5.0, target=neumann(pinned))
    assert cert.kind == "certificate" and cert.zeta < 0 and cert.monotone_tail
    assert cert.target_norm < 5 and cert.scan_ok and len(cert.scan) == 10
    assert np.all(cert.max_eigs[cert.lam_grid <= cert.zeta] <= -5)
    zero = stability_certificate(pinned, df, 0.0, n_scan=0)
    assert zero.zeta <= -10
    with pytest.raises(NotCertifiable):
        stability_certificate(pinned, neumann(pinned), 50.0, n_scan=0)


def test_certificate_full(full):
    cert = stability_certificate(full, full.friedrichs(), 5.0, n_scan=3)
    assert cert.scan_ok


def test_audit_small(pinned, full):
    for m in (pinned, full):
        rep = negative_count_audit(m, 20, seed=3)
        assert rep.ok and rep.max_count <= m.d
    assert np.sum(pinned.eigenvalues(pinned.friedrichs(), 2) < pinned.lower_bound()) == 0


def test_eigen_witness(pinned):
    w = eigen_witness(pinned, -1000.0)
    kappa = np.sqrt(1000.0)
    t = w.basis[:, 0]
    assert (t[1] / t[0]).real == pytest.approx(-kappa / np.tanh(kappa), rel=1e-8)
    assert not is_unstable(pinned, w).unstable
    w2 = eigen_witness(pinned, np.pi**2 / 2)
    assert abs(pinned.secular(w2, np.pi**2 / 2)) < 1e-6


def test_regularity_split(pinned, pinned_eig):
    sp = regularity_split(pinned, pinned.friedrichs(), eig=pinned_eig, N=20000)
    assert sp.d0.shape[1] == 0 and sp.d1.shape[1] == 1 and sp.heuristic
    syn = SyntheticRealization.from_rules(lambda k: (k * np.pi) ** 2,
                                          [lambda k: 1.0 / k, lambda k: 1.0 / k**2], 4000)
    sp = regularity_split(syn, None)
    assert sp.d0.shape[1] == 2
    mixed = SyntheticRealization.from_rules(lambda k: (k * np.pi) ** 2,
                                            [lambda k: 1.0 / k, lambda k: k * 1.0], 4000)
    sp = regularity_split(mixed, None)
    assert sp.d0.shape[1] == 1 and sp.d1.shape[1] == 1


def test_regularity_inconclusive():
    syn = SyntheticRealization.from_rules(lambda k: (k * np.pi) ** 2, [lambda k: k**0.48], 20000)
    with pytest.raises(Inconclusive):
        regularity_split(syn, None, N=20000)
