import numpy as np
import pytest
from hypothesis import given, strategies as st

from steklov_lab.annulus_oracle import (annulus_eigenpair, annulus_eigenvalues, annulus_gaps,
                                        annulus_mode_dtn, annulus_nodal_length, annulus_quasimode_defect,
                                        annulus_spectrum, disk_eigenpair, f_coefficient, p_k,
                                        radial_eigenvalue)

eps_s = st.floats(0.1, 0.9)
k_s = st.integers(1, 12)


@given(eps_s, k_s)
def test_roots_solve_pk(eps, k):
    lo, hi = annulus_eigenvalues(eps, k)
    for s in (lo, hi):
        # p_k is quadratic in sigma with roots of size k/eps at most
        assert abs(p_k(s, eps, k)) <= 1e-9 * (k / eps) ** 2
    assert lo <= k <= k / eps <= hi


@given(eps_s, k_s)
def test_roots_are_dtn_eigenvalues(eps, k):
    # derived: the Steklov eigenvalues on mode k are the eigenvalues of the 2x2 DtN in L2(dq)
    P = annulus_mode_dtn(eps, k)
    ev = np.sort(np.linalg.eigvals(P).real)
    np.testing.assert_allclose(ev, annulus_eigenvalues(eps, k), rtol=1e-10)


@given(eps_s, k_s)
def test_gaps_match_roots_without_cancellation(eps, k):
    d_lo, d_hi = annulus_gaps(eps, k)
    f = f_coefficient(k, eps)
    assert d_lo <= 0 <= d_hi
    # to first order the lower gap is -f k / (k(1-eps)/eps) = -f eps/(1-eps)
    assert d_lo == pytest.approx(-f * eps / (1 - eps), rel=2 * f + 1e-12)


def test_gaps_far_below_rounding():
    # the direct difference sigma - k would be exactly 0 here
    d_lo, _ = annulus_gaps(0.5, 40)
    assert -1e-20 < d_lo < 0
    assert annulus_eigenvalues(0.5, 40)[0] == 40.0


def test_radial_mode():
    eps = 0.5
    pair = annulus_eigenpair(eps, 0)
    assert pair.sigma == pytest.approx(radial_eigenvalue(eps))
    # derived: u = 1 + sigma log r satisfies the Steklov condition on both circles
    assert pair.radial_derivative(1.0) == pytest.approx(pair.sigma * pair.radial(1.0))
    assert -pair.radial_derivative(eps) == pytest.approx(pair.sigma * pair.radial(eps))
    ev = np.sort(np.linalg.eigvals(annulus_mode_dtn(eps, 0)).real)
    np.testing.assert_allclose(ev, [0.0, pair.sigma], atol=1e-12)


@pytest.mark.parametrize("branch", ["near-k", "near-k/eps"])
@pytest.mark.parametrize("k", [1, 3, 8])
def test_eigenpair_steklov_condition_and_norm(k, branch):
    eps = 0.4
    p = annulus_eigenpair(eps, k, branch)
    assert p.radial_derivative(1.0) == pytest.approx(p.sigma * p.radial(1.0), rel=1e-10)
    assert -p.radial_derivative(eps) == pytest.approx(p.sigma * p.radial(eps), rel=1e-9, abs=1e-12)
    o, i = p.boundary_norms()
    assert o ** 2 + i ** 2 == pytest.approx(1.0)


@given(eps_s, k_s)
def test_nodal_circle_only_on_inner_branch(eps, k):
    # derived: beta = (k - sigma)/(k + sigma) is positive below k and negative above
    assert annulus_eigenpair(eps, k, "near-k").r0 is None
    r0 = annulus_eigenpair(eps, k, "near-k/eps").r0
    if r0 is not None:
        assert eps < r0 < 1


def test_nodal_length_formula():
    p = annulus_eigenpair(0.5, 4, "near-k")
    assert annulus_nodal_length(0.5, p) == pytest.approx(8 * 0.5)
    q = annulus_eigenpair(0.5, 4, "near-k/eps")
    assert annulus_nodal_length(0.5, q) == pytest.approx(4 + 2 * np.pi * q.r0)


def test_spectrum_sorted_with_multiplicity():
    levels = annulus_spectrum(0.5, 30)
    vals = [lv.value for lv in levels]
    assert len(levels) == 31 and vals == sorted(vals)
    assert levels[0].branch == "const" and vals[0] == 0
    assert sum(lv.branch == "radial" for lv in levels) == 1


@given(st.floats(0.2, 0.8), st.integers(2, 20))
def test_quasimode_defect_decays(eps, m):
    # derived: the outer-mode defect is 2 sqrt(eps) m eps^m to leading order, from below
    d = annulus_quasimode_defect(eps, m, 0)
    lead = 2 * np.sqrt(eps) * m * eps ** m
    assert d <= lead * (1 + 1e-9)
    assert annulus_quasimode_defect(eps, 60, 0) == pytest.approx(2 * np.sqrt(eps) * 60 * eps ** 60, rel=1e-2)


def test_disk_pair():
    p = disk_eigenpair(3)
    assert p.eigenvalue == 3 and p.nodal_length == 6
    z = np.array([0.5 * np.exp(1j * np.pi / 6)])
    assert p(z)[0] == pytest.approx(0.125 * np.cos(np.pi / 2) / np.sqrt(np.pi), abs=1e-15)
    with pytest.raises(ValueError):
        disk_eigenpair(-1)


def test_bad_eps():
    with pytest.raises(ValueError):
        annulus_eigenvalues(1.2, 2)
    with pytest.raises(ValueError):
        annulus_gaps(0.5, 0)
