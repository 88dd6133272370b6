"""Spectral clustering, boundary quasimode decomposition and interior quasimodes.

The model basis e_j is the real trigonometric basis in weighted arclength on
each circle, orthonormal in L^2(g dq):

    1/sqrt(L),  sqrt(2/L) cos(2 pi m s / L),  sqrt(2/L) sin(2 pi m s / L).

An eigenfunction phi_n splits as psi_n + f_n, psi_n being its projection on the
model functions whose frequency falls in the same cluster interval as lambda_n.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dtn_solver import (ComparisonSequence, SteklovSpectrum, assemble_eigensystem,
                         comparison_sequence)
from .geometry import KoebeDomain, arclength_map, validate_domain
from .layer_ops import BoundaryDensity
from .rates import RateFit, TooFewSamples, fit_exponential


class GapScanFailed(RuntimeError):
    pass


class ClusterUnderResolved(RuntimeError):
    pass


class ModeOutOfRange(ValueError):
    pass


class OutsideCollar(ValueError):
    pass


def default_cluster_eps(lengths) -> float:
    lengths = np.asarray(lengths, dtype=float)
    return 0.9 * np.pi / (2 * len(lengths) * lengths.max())


# ----------------------------------------------------------------------------------------
# Clustering

@dataclass
class ClusterPartition:
    intervals: np.ndarray          # (n_clusters, 2) rows [A_i, B_i]
    eps: float
    lam_cluster: np.ndarray        # lambda index -> cluster
    mu_cluster: np.ndarray         # mu index -> cluster (-1 beyond the last interval)
    N: int                         # |lambda_n - mu_n| < eps/2 for all paired n >= N
    complete: np.ndarray           # cluster holds as many lambdas as mus

    @property
    def n_clusters(self) -> int:
        return len(self.intervals)

    def related(self, n: int, j: int) -> bool:
        return self.lam_cluster[n] == self.mu_cluster[j]

    def members(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.lam_cluster == i)[0], np.nonzero(self.mu_cluster == i)[0]

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        buf.write(header)
        w = csv.writer(buf, delimiter=";", lineterminator="\n")
        w.writerow(["i", "A", "B", "members"])
        for i, (a, b) in enumerate(self.intervals):
            lam, _ = self.members(i)
            w.writerow([i, repr(float(a)), repr(float(b)), " ".join(str(n) for n in lam)])
        return buf.getvalue()


def _gap_after(mus, n):
    return mus[n + 1] - mus[n] if n + 1 < len(mus) else np.inf


def cluster_spectrum(lambdas, mus, eps: float, k: int, L: float) -> ClusterPartition:
    """Disjoint intervals separating the spectrum into clusters by the greedy gap scan.

    ``mus`` may extend beyond ``lambdas``; index pairing is used only to locate
    the index N past which |lambda_n - mu_n| < eps/2.  The end of the finite mu
    list counts as a gap.
    """
    lam = np.asarray(lambdas, dtype=float)
    mus = np.asarray(mus, dtype=float)
    if len(mus) < len(lam):
        raise ValueError("need at least as many mu values as lambda values")
    if np.any(np.diff(lam) < -1e-12) or np.any(np.diff(mus) < -1e-12):
        raise ValueError("lambdas and mus must be sorted")
    bound = np.pi / (2 * k * L)
    if not 0 < eps < bound:
        raise ValueError(f"cluster gap eps={eps:g} must lie in (0, pi/(2kL) = {bound:g})")

    paired = np.abs(lam - mus[: len(lam)])
    bad = np.nonzero(paired >= eps / 2)[0]
    N = int(bad.max() + 1) if bad.size else 0

    m = N + 1
    while m < len(mus) and mus[m] < mus[m - 1] + 2 * eps:
        m += 1
    window = np.pi / L
    intervals = []
    if m >= len(mus):
        intervals.append((0.0, max(lam.max(initial=0.0), mus.max()) + eps / 2))
    else:
        intervals.append((0.0, mus[m] - 1.5 * eps))
        while m < len(mus):
            n = m
            while _gap_after(mus, n) < 2 * eps:
                n += 1
                if mus[n] - mus[m] > window + 1e-12:
                    raise GapScanFailed(f"no gap of length {2 * eps:g} within pi/L of mu={mus[m]:g}")
            intervals.append((mus[m] - eps / 2, mus[n] + eps / 2))
            m = n + 1
    iv = np.array(intervals)

    def locate(values):
        idx = np.full(len(values), -1)
        for i, (a, b) in enumerate(iv):
            idx[(values >= a - 1e-12) & (values <= b + 1e-12)] = i
        return idx

    lam_c = locate(lam)
    if np.any(lam_c < 0):
        miss = np.nonzero(lam_c < 0)[0]
        raise GapScanFailed(f"eigenvalues {miss.tolist()} fall between cluster intervals")
    mu_c = locate(mus)
    used = int(lam_c.max()) + 1
    iv = iv[:used]
    mu_c = np.where(mu_c < used, mu_c, -1)
    complete = np.array([(lam_c == i).sum() == (mu_c == i).sum() for i in range(used)])
    return ClusterPartition(iv, float(eps), lam_c, mu_c, N, complete)


# ----------------------------------------------------------------------------------------
# Model basis and coefficient matrix

def _quad_size(M: int) -> int:
    return int(2 ** np.ceil(np.log2(4 * (2 * M + 1))))


def model_basis_samples(domain: KoebeDomain, comparison: ComparisonSequence, n_theta: int):
    """Values of each model function on each component's uniform theta grid.

    Returns (theta, E) with E of shape (n_components, n_theta, len(comparison)).
    """
    amap = arclength_map(domain)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    E = np.zeros((domain.n_components, n_theta, len(comparison)))
    for c in range(domain.n_components):
        L = amap[c].length
        s = amap[c].forward(theta).real
        sel = np.nonzero(comparison.component == c)[0]
        for j in sel:
            m, kind = comparison.mode[j], comparison.kind[j]
            if kind == "const":
                E[c, :, j] = 1 / np.sqrt(L)
            elif kind == "cos":
                E[c, :, j] = np.sqrt(2 / L) * np.cos(2 * np.pi * m * s / L)
            else:
                E[c, :, j] = np.sqrt(2 / L) * np.sin(2 * np.pi * m * s / L)
    return theta, E


def _quad_weights(domain: KoebeDomain, theta) -> np.ndarray:
    """Trapezoid weights of g dq on each component's grid."""
    n = len(theta)
    return np.array([c.radius * w(theta) * 2 * np.pi / n
                     for c, w in zip(domain.circles, domain.weight.components)])


@dataclass
class CoefficientMatrix:
    a: np.ndarray                  # a[n, j] = <phi_n, e_j>
    comparison: ComparisonSequence
    tail: np.ndarray               # 1 - sum_j a[n, j]^2 over the retained j

    @property
    def row_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.a ** 2, axis=1))


def coefficient_matrix(spectrum: SteklovSpectrum, comparison: ComparisonSequence | None = None,
                       mu_max: float | None = None) -> CoefficientMatrix:
    """Inner products of eigenfunctions with the model basis in L^2(g dq).

    Retains model functions with mu_j <= mu_max (default 2 lambda_max).
    """
    domain = spectrum.domain
    lam_max = float(spectrum.eigenvalues.max())
    if mu_max is None:
        mu_max = 2 * max(lam_max, 1.0)
    if comparison is None:
        L = arclength_map(domain).lengths
        count = int(sum(2 * np.floor(mu_max * Lj / (2 * np.pi)) + 1 for Lj in L))
        comparison = comparison_sequence(L, count)
    keep = np.nonzero(comparison.values <= mu_max + 1e-12)[0]
    comparison = ComparisonSequence(comparison.values[keep], comparison.component[keep],
                                    comparison.mode[keep], tuple(comparison.kind[i] for i in keep))
    n_theta = _quad_size(spectrum.M)
    theta, E = model_basis_samples(domain, comparison, n_theta)
    W = _quad_weights(domain, theta)
    n_eig = len(spectrum.eigenvalues)
    a = np.zeros((n_eig, len(comparison)))
    for n in range(n_eig):
        vals = spectrum.eigenfunction(n).samples(n_theta).real
        for c in range(domain.n_components):
            a[n] += (vals[c] * W[c]) @ E[c]
    tail = 1.0 - np.sum(a ** 2, axis=1)
    return CoefficientMatrix(a, comparison, tail)


# ----------------------------------------------------------------------------------------
# Decomposition

@dataclass
class ComponentQuasimode:
    component: int
    m: int
    b_plus: float      # psi_j = b_plus cos(2 pi m s/L) + b_minus sin(2 pi m s/L)
    b_minus: float
    norm: float

    @property
    def nonzero(self) -> bool:
        return self.norm > 0


@dataclass
class QuasimodeDecomposition:
    n: int
    eigenvalue: float
    parts: list[ComponentQuasimode]
    psi_norm: float
    f_norm: float
    tail: float
    lengths: np.ndarray
    cluster: int = 0
    psi_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def single_mode(self) -> bool:
        """Clusters past the first carry one mode per component; the first may not."""
        return self.cluster > 0

    def frequency_violations(self, L: float | None = None) -> list[int]:
        """Components whose mode frequency misses lambda_n by more than 2 pi / L."""
        L = float(self.lengths.max()) if L is None else L
        out = []
        for p in self.parts:
            if p.nonzero and abs(self.eigenvalue - 2 * np.pi * p.m / self.lengths[p.component]) > 2 * np.pi / L:
                out.append(p.component)
        return out


def decompose_eigenfunction(spectrum: SteklovSpectrum, partition: ClusterPartition,
                            coeffs: CoefficientMatrix, n: int, zero_tol: float = 1e-14) -> QuasimodeDecomposition:
    """phi_n = psi_n + f_n with psi_n the same-cluster part of the model expansion.

    ``parts`` gives psi_n per component as b_+ cos + b_- sin at one mode.  In the
    first cluster several modes may share a component; ``parts`` then keeps the
    heaviest mode while ``psi_norm`` still counts the whole projection.
    """
    if not 0 <= n < len(spectrum.eigenvalues):
        raise IndexError(f"eigenvalue index {n} outside computed range")
    comp = coeffs.comparison
    mu_c = partition.mu_cluster[: len(comp)]
    if len(mu_c) < len(comp):
        mu_c = np.concatenate([mu_c, np.full(len(comp) - len(mu_c), -1)])
    same = mu_c == partition.lam_cluster[n]
    first = partition.lam_cluster[n] == 0
    row = coeffs.a[n]
    L = arclength_map(spectrum.domain).lengths
    parts = []
    for c in range(spectrum.domain.n_components):
        sel = np.nonzero(same & (comp.component == c))[0]
        if sel.size == 0:
            parts.append(ComponentQuasimode(c, 0, 0.0, 0.0, 0.0))
            continue
        norm = float(np.sqrt(np.sum(row[sel] ** 2)))
        significant = sel[np.abs(row[sel]) > zero_tol]
        ms = set(int(comp.mode[j]) for j in significant)
        if len(ms) > 1 and not first:
            raise ClusterUnderResolved(
                f"cluster of eigenvalue {n} holds modes {sorted(ms)} on component {c}")
        if len(ms) > 1:
            # the first interval may hold several modes; keep the heaviest one
            mass = {mm: np.sum(row[sel][comp.mode[sel] == mm] ** 2) for mm in ms}
            m = max(mass, key=mass.get)
        else:
            m = ms.pop() if ms else int(comp.mode[sel[0]])
        bp = bm = 0.0
        for j in sel[comp.mode[sel] == m]:
            if comp.kind[j] == "const":
                bp += row[j] / np.sqrt(L[c])
            elif comp.kind[j] == "cos":
                bp += row[j] * np.sqrt(2 / L[c])
            else:
                bm += row[j] * np.sqrt(2 / L[c])
        if norm <= zero_tol:
            norm, bp, bm = 0.0, 0.0, 0.0
        parts.append(ComponentQuasimode(c, m, float(bp), float(bm), norm))
    psi2 = float(np.sum(row[same] ** 2))
    f2 = float(np.sum(row[~same] ** 2))
    return QuasimodeDecomposition(n, float(spectrum.eigenvalues[n]), parts, np.sqrt(psi2),
                                  np.sqrt(f2), float(coeffs.tail[n]), L, int(partition.lam_cluster[n]),
                                  np.nonzero(same)[0])


def decomposition_csv(decomps: list[QuasimodeDecomposition], header: str = "") -> str:
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, delimiter=";", lineterminator="\n")
    w.writerow(["n", "component", "m", "b_plus", "b_minus", "f_norm"])
    for d in decomps:
        for p in d.parts:
            w.writerow([d.n, p.component, p.m, repr(p.b_plus), repr(p.b_minus), repr(d.f_norm)])
    return buf.getvalue()


# ----------------------------------------------------------------------------------------
# Defects and near-orthogonality

def trig_mode_density(domain: KoebeDomain, M: int, m: int, j: int) -> BoundaryDensity:
    """Fourier coefficients of e^{2 pi i m s_j / L_j} on component j (zero elsewhere)."""
    amap = arclength_map(domain)
    n = _quad_size(M)
    theta = 2 * np.pi * np.arange(n) / n
    vals = np.zeros((domain.n_components, n), dtype=complex)
    s = amap[j].forward(theta).real
    vals[j] = np.exp(2j * np.pi * m * s / amap[j].length)
    return BoundaryDensity.from_samples(vals, M)


def quasimode_defect(domain: KoebeDomain, M: int, m: int, j: int) -> float:
    """||A e - mu B e|| / ||B e|| for the trigonometric mode e = e_{m,j}, mu = 2 pi |m| / L_j.

    Measured in L^2(dq) and in the units of the input domain's eigenvalues.
    """
    if abs(m) > M // 2:
        raise ModeOutOfRange(f"|m|={abs(m)} exceeds M/2={M // 2}")
    if not 0 <= j < domain.n_components:
        raise ModeOutOfRange(f"no boundary component {j}")
    A, B = assemble_eigensystem(domain, M)
    e = trig_mode_density(domain, M, m, j).flat
    L = arclength_map(domain).lengths[j]
    scale = domain.scale_factor
    mu_s = 2 * np.pi * abs(m) / L / scale
    w = np.sqrt(np.repeat([2 * np.pi * c.radius for c in domain.circles], 2 * M + 1))
    Be = B.matrix @ e
    r = A.matrix @ e - mu_s * Be
    return float(scale * np.linalg.norm(w * r) / np.linalg.norm(w * Be))


@dataclass
class DefectScan:
    component: int
    modes: np.ndarray
    defects: np.ndarray
    fit: RateFit | None

    def to_rows(self):
        return [(self.component, int(m), float(d)) for m, d in zip(self.modes, self.defects)]


def defect_scan(domain: KoebeDomain, M: int, j: int, ms=(4, 8, 12, 16, 20),
                noise_floor: float = 0.0) -> DefectScan:
    ms = np.asarray(ms)
    d = np.array([quasimode_defect(domain, M, int(m), j) for m in ms])
    try:
        fit = fit_exponential(ms, d, noise_floor)
    except TooFewSamples:
        fit = None
    return DefectScan(j, ms, d, fit)


@dataclass
class OrthogonalityRow:
    cluster: int
    shape: tuple[int, int]
    dev_cols: float        # ||M^T M - I||_inf
    dev_rows: float        # ||M M^T - I||_inf


@dataclass
class OrthogonalityReport:
    rows: list[OrthogonalityRow]
    fit_cols: RateFit | None
    fit_rows: RateFit | None


def near_orthogonality_report(coeffs: CoefficientMatrix, partition: ClusterPartition,
                              noise_floor: float = 1e-14) -> OrthogonalityReport:
    """Per complete cluster: entrywise deviation of M_i^T M_i and M_i M_i^T from I."""
    rows = []
    mu_c = partition.mu_cluster[: coeffs.a.shape[1]]
    for i in range(partition.n_clusters):
        if not partition.complete[i]:
            continue
        ns = np.nonzero(partition.lam_cluster == i)[0]
        js = np.nonzero(mu_c == i)[0]
        if ns.size == 0 or js.size == 0:
            continue
        Mi = coeffs.a[np.ix_(ns, js)]
        dc = float(np.max(np.abs(Mi.T @ Mi - np.eye(len(js)))))
        dr = float(np.max(np.abs(Mi @ Mi.T - np.eye(len(ns)))))
        rows.append(OrthogonalityRow(i, Mi.shape, dc, dr))
    idx = np.array([r.cluster for r in rows])

    def fit(vals):
        try:
            return fit_exponential(idx, vals, noise_floor)
        except TooFewSamples:
            return None

    return OrthogonalityReport(rows, fit(np.array([r.dev_cols for r in rows])),
                               fit(np.array([r.dev_rows for r in rows])))


# ----------------------------------------------------------------------------------------
# Interior quasimodes

def collar_width(domain: KoebeDomain) -> float:
    from .geometry import validate_domain as _v
    gap = _v(domain).min_gap
    return float(min(0.2 * domain.outer.radius, 0.5 * gap))


def smoothstep_cutoff(d, w: float):
    """1 for d <= w/2, 0 for d >= w, quintic smoothstep in between."""
    t = np.clip((np.asarray(d, dtype=float) - w / 2) / (w / 2), 0.0, 1.0)
    return 1 - t ** 3 * (10 - 15 * t + 6 * t * t)


def strip_coordinates(domain: KoebeDomain, j: int, points):
    """z = theta + i xi with x = c_j + rho_j e^{iz}; xi > 0 inside circle j."""
    from .geometry import _as_complex
    circle = domain.circles[j]
    w = _as_complex(points) - circle.c
    theta = np.angle(w) % (2 * np.pi)
    xi = np.log(circle.radius / np.abs(w))
    return theta + 1j * xi


def interior_quasimode_eval(decomposition: QuasimodeDecomposition, domain: KoebeDomain, points,
                            j: int, width: float | None = None, check: bool = True) -> np.ndarray:
    """chi_j(x) (b_+ u_+ + b_- u_-) with u_+- the harmonic continuation of the component mode.

    On the outer circle the continuation is e^{2 pi i m s^C(z)/L}; on inner circles
    e^{-2 pi i m s^C(z)/L}, combined so that the result equals psi_{n,j} on the circle.
    """
    from .geometry import _as_complex
    z_pts = _as_complex(points)
    w = collar_width(domain) if width is None else width
    d = np.abs(domain.distance_to_boundary(z_pts)[..., j])
    if check and np.any((d > w) | ~domain.contains(z_pts, margin=-1e-12)):
        raise OutsideCollar(f"points outside the width-{w:g} collar of component {j}")
    part = decomposition.parts[j]
    if not part.nonzero:
        return np.zeros(z_pts.shape)
    amap = arclength_map(domain)
    L = amap[j].length
    z = strip_coordinates(domain, j, z_pts)
    sC = amap[j].forward(z)
    kappa = 2 * np.pi * part.m / L
    if j == 0:
        val = np.real((part.b_plus - 1j * part.b_minus) * np.exp(1j * kappa * sC))
    else:
        val = np.real((part.b_plus + 1j * part.b_minus) * np.exp(-1j * kappa * sC))
    return smoothstep_cutoff(d, w) * val


def global_quasimode(decomposition: QuasimodeDecomposition, domain: KoebeDomain, points,
                     width: float | None = None) -> np.ndarray:
    """Sum over components of the cut-off interior quasimodes (zero outside all collars)."""
    from .geometry import _as_complex
    z = _as_complex(points)
    w = collar_width(domain) if width is None else width
    out = np.zeros(z.shape)
    d = np.abs(domain.distance_to_boundary(z))
    for j in range(domain.n_components):
        inside = d[..., j] < w
        if np.any(inside):
            out[inside] += interior_quasimode_eval(decomposition, domain, z[inside], j, w, check=False)
    return out


# ----------------------------------------------------------------------------------------
# Rate constants

@dataclass
class RateConstants:
    tau: float
    gamma: np.ndarray          # min s_j'(theta)
    N: np.ndarray              # max |d^3_theta Im s_j^C| on the strip |xi| < tau
    delta: float
    tau0: float | None = None
    defect_rates: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "gamma": self.gamma.tolist(), "N": self.N.tolist(),
                "delta": self.delta, "tau0": self.tau0, "defect_rates": self.defect_rates,
                "provenance": self.provenance}


def rate_constants(domain: KoebeDomain, tau: float | None = None, tau0: float | None = None,
                   defect_rates: dict | None = None, n_grid: int = 256) -> RateConstants:
    """delta = min_j {Gamma_j tau/2 - N_j tau^3, tau/2}; tau defaults to the collar width."""
    validate_domain(domain)
    prov = {"tau": "configured" if tau is not None else "collar width",
            "tau0": "fitted" if tau0 is not None else "absent",
            "defect_rates": "fitted" if defect_rates else "absent"}
    tau = collar_width(domain) if tau is None else float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    amap = arclength_map(domain)
    theta = np.linspace(0, 2 * np.pi, n_grid, endpoint=False)
    xi = np.linspace(-tau, tau, 33)
    zz = theta[None, :] + 1j * xi[:, None]
    gam, Ns = [], []
    for comp in amap.components:
        gam.append(comp.gamma)
        third = comp.derivative(zz, order=3)
        Ns.append(float(np.max(np.abs(np.imag(third)))))
    gam, Ns = np.array(gam), np.array(Ns)
    delta = float(min(np.min(gam * tau / 2 - Ns * tau ** 3), tau / 2))
    if not delta > 0:
        raise ValueError(f"delta={delta:g} is not positive; choose a smaller tau")
    return RateConstants(tau, gam, Ns, delta, tau0, dict(defect_rates or {}), prov)
