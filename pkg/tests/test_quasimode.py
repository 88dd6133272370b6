import numpy as np
import pytest
from hypothesis import given, strategies as st

from steklov_lab import annulus, disk, weight_preset
from steklov_lab.annulus_oracle import annulus_quasimode_defect
from steklov_lab.geometry import arclength_map
from steklov_lab.quasimode import (ClusterPartition, ModeOutOfRange, OutsideCollar, cluster_spectrum,
                                   coefficient_matrix, collar_width, decompose_eigenfunction,
                                   decomposition_csv, default_cluster_eps, defect_scan,
                                   global_quasimode, interior_quasimode_eval, near_orthogonality_report,
                                   quasimode_defect, rate_constants, smoothstep_cutoff,
                                   strip_coordinates)
from steklov_lab.rates import fit_exponential


def partition_for(sp) -> tuple:
    L = arclength_map(sp.domain).lengths
    coeffs = coefficient_matrix(sp)
    part = cluster_spectrum(sp.eigenvalues, coeffs.comparison.values, default_cluster_eps(L),
                            sp.domain.n_components, float(L.max()))
    return coeffs, part


@given(st.lists(st.floats(0.5, 10), min_size=1, max_size=4))
def test_default_eps_admissible(lengths):
    L = np.array(lengths)
    assert 0 < default_cluster_eps(L) < np.pi / (2 * len(L) * L.max())


def test_cluster_identical_sequences():
    # trivial: when lambda = mu every cluster holds matching counts
    mus = np.array([0, 1, 1, 2, 2, 3, 3, 4, 4.0])
    eps = 0.2
    part = cluster_spectrum(mus, mus, eps, 1, 2 * np.pi)
    assert isinstance(part, ClusterPartition)
    assert part.complete.all()
    for i in range(part.n_clusters):
        lam, mu = part.members(i)
        np.testing.assert_array_equal(lam, mu)
    # intervals are disjoint and ordered
    iv = part.intervals
    assert np.all(iv[1:, 0] > iv[:-1, 1])
    assert "i;A;B;members" in part.to_csv()


def test_cluster_rejects_bad_input():
    mus = np.array([0, 1, 1, 2.0])
    with pytest.raises(ValueError):
        cluster_spectrum(mus, mus, 1.0, 1, 2 * np.pi)
    with pytest.raises(ValueError):
        cluster_spectrum(mus[::-1], mus, 0.1, 1, 2 * np.pi)
    with pytest.raises(ValueError):
        cluster_spectrum(mus, mus[:2], 0.1, 1, 2 * np.pi)


def test_disk_coefficients_are_exact(disk_spectrum):
    # derived: disk eigenfunctions are the model trig modes, so each row has unit mass
    # inside its own cluster and f_n vanishes
    coeffs, part = partition_for(disk_spectrum)
    np.testing.assert_allclose(coeffs.row_norms, 1.0, atol=1e-10)
    for n in range(1, len(disk_spectrum.eigenvalues)):
        d = decompose_eigenfunction(disk_spectrum, part, coeffs, n)
        assert d.f_norm < 1e-10
        assert d.parts[0].m == (n + 1) // 2
        assert d.frequency_violations() == []
    text = decomposition_csv([d])
    assert text.splitlines()[0] == "n;component;m;b_plus;b_minus;f_norm"


def test_disk_defect_exact():
    for m in (0, 3, 17, 32):
        assert quasimode_defect(disk(), 64, m, 0) < 1e-12
    with pytest.raises(ModeOutOfRange):
        quasimode_defect(disk(), 64, 40, 0)
    with pytest.raises(ModeOutOfRange):
        quasimode_defect(disk(), 64, 2, 1)


@pytest.mark.parametrize("m", [2, 5, 10])
@pytest.mark.parametrize("j", [0, 1])
def test_annulus_defect_matches_mode_reduction(m, j):
    # derived: on concentric circles the defect reduces to the 2x2 mode-m problem
    assert quasimode_defect(annulus(0.5), 64, m, j) == pytest.approx(annulus_quasimode_defect(0.5, m, j),
                                                                      rel=1e-10)


def test_defect_scan_cosine_disk():
    # published: the defect decays exponentially in |m| for an analytic weight
    scan = defect_scan(disk(weight_preset("cosine-bump", 0.3)), 64, 0)
    assert scan.fit.slope < 0 and scan.fit.r2 > 0.9
    assert len(scan.to_rows()) == 5


def test_annulus_decomposition_per_branch(annulus_spectrum):
    # the residual f_n decays exponentially along each branch separately
    coeffs, part = partition_for(annulus_spectrum)
    floor = 100 * float(np.max(annulus_spectrum.residuals))
    decs = [decompose_eigenfunction(annulus_spectrum, part, coeffs, n)
            for n in range(len(annulus_spectrum.eigenvalues))]
    for comp in (0, 1):
        sel = [d for d in decs if d.cluster > 0 and np.argmax(annulus_spectrum.component_norms(d.n)) == comp]
        fit = fit_exponential([d.eigenvalue for d in sel], [d.f_norm for d in sel], floor)
        assert fit.slope < 0 and fit.r2 >= 0.9
    assert all(d.frequency_violations() == [] for d in decs if d.cluster > 0)


def test_near_orthogonality_disk(disk_spectrum):
    coeffs, part = partition_for(disk_spectrum)
    rep = near_orthogonality_report(coeffs, part)
    assert rep.rows and max(r.dev_cols for r in rep.rows) < 1e-9


def test_interior_quasimode_is_harmonic_extension_on_disk(disk_spectrum):
    # derived: on the disk the continuation of e^{i m theta} is (r/rho)^m e^{i m theta},
    # which is the eigenfunction itself wherever the cutoff equals one
    from steklov_lab.nodal import InteriorField
    coeffs, part = partition_for(disk_spectrum)
    n = 9
    d = decompose_eigenfunction(disk_spectrum, part, coeffs, n)
    w = collar_width(disk())
    z = (1 - 0.4 * w) * np.exp(1j * np.linspace(0, 2 * np.pi, 13))
    np.testing.assert_allclose(interior_quasimode_eval(d, disk(), z, 0), InteriorField(disk_spectrum, n)(z),
                               atol=1e-10)
    with pytest.raises(OutsideCollar):
        interior_quasimode_eval(d, disk(), np.array([0.1]), 0)
    assert global_quasimode(d, disk(), np.array([0.0]))[0] == 0


def test_smoothstep_and_strip():
    np.testing.assert_allclose(smoothstep_cutoff([0, 0.05, 0.1, 0.2, 0.3], 0.2), [1, 1, 1, 0, 0])
    assert 0 < smoothstep_cutoff(0.15, 0.2) < 1
    z = strip_coordinates(disk(), 0, np.array([0.5j]))
    assert z[0] == pytest.approx(np.pi / 2 + 1j * np.log(2))


def test_rate_constants_disk_and_annulus():
    # derived: constant weights have no third derivative, so delta = min(Gamma, 1) tau / 2
    rc = rate_constants(disk())
    assert rc.tau == pytest.approx(0.2) and rc.delta == pytest.approx(0.1)
    np.testing.assert_allclose(rc.N, 0.0, atol=1e-15)
    ra = rate_constants(annulus(0.5))
    assert ra.delta == pytest.approx(0.5 * 0.2 / 2)
    assert ra.provenance["tau"] == "collar width"
    with pytest.raises(ValueError):
        rate_constants(disk(), tau=-1)


def test_rate_constants_weighted_shrinks_delta(cosine_disk):
    rc = rate_constants(cosine_disk)
    assert rc.N[0] > 0 and rc.delta < rate_constants(disk()).delta


@pytest.mark.parametrize("k", [2, 6, 10])
def test_inner_to_outer_norm_ratio(annulus_spectrum, k):
    # derived: on the sigma ~ k branch u = r^k + beta r^-k with beta ~ (1+eps)/(1-eps) eps^2k,
    # so ||u||_inner / ||u||_outer -> 2 sqrt(eps) eps^k / (1 - eps)
    from steklov_lab.annulus_oracle import annulus_eigenpair
    eps = 0.5
    pair = annulus_eigenpair(eps, k)
    n = int(np.argmin(np.abs(annulus_spectrum.eigenvalues - pair.sigma)))
    o, i = annulus_spectrum.component_norms(n)
    po, pi = pair.boundary_norms()
    assert i / o == pytest.approx(pi / po, rel=1e-9)
    assert i / o == pytest.approx(2 * np.sqrt(eps) * eps ** k / (1 - eps), rel=4 * eps ** k + 1e-9)
