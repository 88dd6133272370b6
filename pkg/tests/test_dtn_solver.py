import numpy as np
import pytest
from hypothesis import given, strategies as st

from steklov_lab import annulus, disk, solve_spectrum
from steklov_lab.annulus_oracle import annulus_mode_dtn, annulus_spectrum
from steklov_lab.dtn_solver import (assemble_eigensystem, boundary_trace, comparison_sequence,
                                    gram_matrix, spectrum_gap_report)


@pytest.mark.parametrize("m", [0, 1, 4])
def test_eigensystem_reproduces_annulus_dtn(m):
    # derived: S P = A on each concentric mode block, P the 2x2 annulus DtN
    eps, M = 0.5, 8
    dom = annulus(eps)
    A, B = assemble_eigensystem(dom, M)
    n = 2 * M + 1
    idx = [M + m, n + M + m]
    P = annulus_mode_dtn(eps, m, dom.scale_factor)
    np.testing.assert_allclose(B.matrix[np.ix_(idx, idx)] @ P, A.matrix[np.ix_(idx, idx)], atol=1e-14)


def test_disk_spectrum_is_integers(disk_spectrum):
    # published: lambda_{2n-1} = lambda_{2n} = n on the unit disk
    lam = disk_spectrum.eigenvalues
    expect = np.array([0] + [n for n in range(1, 22) for _ in range(2)], float)
    np.testing.assert_allclose(lam, expect[:len(lam)], atol=1e-10)
    assert len(lam) == 42
    assert disk_spectrum.flagged == []


def test_disk_eigenfunctions_are_trig_modes(disk_spectrum):
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    for n in (1, 2, 9, 10):
        k = (n + 1) // 2
        phi = boundary_trace(disk_spectrum, n, 0, th)
        # project out cos/sin of order k; nothing else remains
        basis = np.stack([np.cos(k * th), np.sin(k * th)], 1)
        coef, *_ = np.linalg.lstsq(basis, phi, rcond=None)
        np.testing.assert_allclose(basis @ coef, phi, atol=1e-10)
        # unit L2(dq) norm on the unit circle: amplitude 1/sqrt(pi)
        assert np.hypot(*coef) == pytest.approx(1 / np.sqrt(np.pi), rel=1e-10)


def test_eigenvectors_orthonormal_in_weighted_gram(cosine_spectrum):
    W = gram_matrix(cosine_spectrum.domain, cosine_spectrum.M)
    V = cosine_spectrum.vectors
    np.testing.assert_allclose(V.T @ W @ V, np.eye(V.shape[1]), atol=1e-9)


def test_annulus_spectrum_small(small_annulus_spectrum):
    oracle = np.array([lv.value for lv in annulus_spectrum(0.5, 40)])
    n = len(small_annulus_spectrum.eigenvalues)
    np.testing.assert_allclose(small_annulus_spectrum.eigenvalues, oracle[:n], rtol=1e-9, atol=1e-12)


def test_scale_invariance():
    # trivial: the internal rescaling of the geometry never shows in the eigenvalues
    a = solve_spectrum(annulus(0.5), 64, 30).eigenvalues
    b = solve_spectrum(annulus(0.5, scale_factor=0.4), 64, 30).eigenvalues
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_capacity_one_scale_rejected():
    # the scaled outer circle of radius 1 makes the log single layer singular on constants
    from steklov_lab.geometry import GeometryError
    with pytest.raises(GeometryError, match="capacity"):
        solve_spectrum(disk(scale_factor=1.0), 16, 4)


def test_rotation_invariance(three_circles, three_spectrum):
    rot = solve_spectrum(three_circles.rotated(1.1), 64, 30)
    np.testing.assert_allclose(rot.eigenvalues, three_spectrum.eigenvalues, rtol=1e-9, atol=1e-12)


def test_scaling_law():
    # derived: dilating the domain by c divides every eigenvalue by c
    from steklov_lab.geometry import Circle, KoebeDomain
    dom = KoebeDomain(Circle((0, 0), 2.0), (Circle((0.6, 0), 0.4),), scale_factor=0.25)
    small = KoebeDomain(Circle((0, 0), 1.0), (Circle((0.3, 0), 0.2),))
    np.testing.assert_allclose(solve_spectrum(dom, 32, 10).eigenvalues,
                               solve_spectrum(small, 32, 10).eigenvalues / 2, atol=1e-11)


def test_n_max_guard():
    with pytest.raises(ValueError):
        solve_spectrum(disk(), 16, 20)


@given(st.lists(st.floats(0.5, 8), min_size=1, max_size=3), st.integers(0, 30))
def test_comparison_sequence_counts(lengths, n):
    # derived: values are 2 pi m / L_j, sorted, with each m >= 1 doubled per component
    cs = comparison_sequence(lengths, n)
    assert len(cs) == n + 1
    assert np.all(np.diff(cs.values) >= -1e-12)
    L = np.asarray(lengths)[cs.component]
    np.testing.assert_allclose(cs.values, 2 * np.pi * cs.mode / L, rtol=1e-12)
    assert np.sum(cs.values == 0) == min(len(lengths), n + 1)


def test_gap_report_disk(disk_spectrum):
    rep = spectrum_gap_report(disk_spectrum)
    assert np.max(rep.gap) < 1e-10
    assert rep.fit is None and "unresolvable" in rep.status
    assert rep.multiplicity_tags[1] == rep.multiplicity_tags[2]
    assert rep.to_csv().splitlines()[0] == "n;lambda;mu;gap;residual;multiplicity_tag"


def test_gap_report_annulus(annulus_spectrum):
    # published: the gaps decay exponentially; the outer component rate is near 2 log eps per mode
    rep = spectrum_gap_report(annulus_spectrum)
    fit = rep.component_fits[0]
    assert fit is not None and fit.slope < 0
    assert fit.slope == pytest.approx(2 * np.log(0.5), rel=0.2)


def test_spectrum_json(disk_spectrum):
    import json
    doc = json.loads(disk_spectrum.to_json())
    assert doc["domain_hash"] == disk_spectrum.domain_hash
    assert len(doc["eigenvalues"]) == len(disk_spectrum.eigenvalues)
