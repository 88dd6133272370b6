"""Discrete Steklov eigenproblem ``A phi = lambda B phi`` and the comparison sequence mu_n.

``A = (I - N)/2`` and ``B = S g`` on the scaled geometry; eigenvalues are
rescaled back to the input domain.  Eigenfunctions are normalized in
L^2(boundary, g dq), the measure in which the model multiplier is self-adjoint.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .geometry import KoebeDomain, arclength_map, validate_domain
from .layer_ops import (BoundaryDensity, BoundaryOperatorMatrix, assemble_double_layer,
                        assemble_single_layer, complex_to_real, real_basis_transform,
                        weight_multiplication, weight_multiplication_block)
from .rates import RateFit, TooFewSamples, fit_exponential

SCHEMA_VERSION = 1
MULTIPLICITY_TOL = 1e-8


class EigenSolveFailed(RuntimeError):
    pass


class SpuriousModes(RuntimeError):
    pass


class GapBelowNoiseFloor(RuntimeError):
    pass


@lru_cache(maxsize=8)
def _operators(domain: KoebeDomain, M: int):
    S = assemble_single_layer(domain, M)
    N = assemble_double_layer(domain, M)
    G = weight_multiplication(domain, M)
    return S, N, G


def assemble_eigensystem(domain: KoebeDomain, M: int) -> tuple[BoundaryOperatorMatrix, BoundaryOperatorMatrix]:
    """(A, B) with A = (I - N)/2 and B = S g, complex Fourier basis, scaled geometry."""
    validate_domain(domain)
    S, N, G = _operators(domain, M)
    n = S.shape[0]
    A = BoundaryOperatorMatrix(0.5 * (np.eye(n) - N.matrix), "A", domain.hash, M, S.n_components,
                               N.quad_nodes)
    B = BoundaryOperatorMatrix(S.matrix @ G.matrix, "B", domain.hash, M, S.n_components,
                               S.quad_nodes)
    return A, B


def _real_inverse_transform(M: int, k: int) -> np.ndarray:
    n = 2 * M + 1
    Ti = np.zeros((n, n), dtype=complex)
    Ti[0, M] = 1.0
    for m in range(1, M + 1):
        Ti[2 * m - 1, M + m] = 1.0
        Ti[2 * m - 1, M - m] = 1.0
        Ti[2 * m, M + m] = 1j
        Ti[2 * m, M - m] = -1j
    return np.kron(np.eye(k), Ti)


def to_real_basis(mat: np.ndarray, M: int, k: int) -> np.ndarray:
    T = real_basis_transform(M, k)
    Ti = _real_inverse_transform(M, k)
    return (Ti @ mat @ T).real


def gram_matrix(domain: KoebeDomain, M: int, weighted: bool = True) -> np.ndarray:
    """Gram matrix of the L^2(g dq) (or dq) inner product in the real trig basis."""
    k = domain.n_components
    n = 2 * M + 1
    Wc = np.zeros((k * n, k * n), dtype=complex)
    for j, (c, w) in enumerate(zip(domain.circles, domain.weight.components)):
        G = weight_multiplication_block(w, M) if weighted else np.eye(n)
        Wc[j * n:(j + 1) * n, j * n:(j + 1) * n] = 2 * np.pi * c.radius * G
    T = real_basis_transform(M, k)
    W = (T.conj().T @ Wc @ T).real
    return 0.5 * (W + W.T)


@dataclass
class SteklovSpectrum:
    domain: KoebeDomain
    M: int
    eigenvalues: np.ndarray       # ascending, rescaled to the input domain
    vectors: np.ndarray           # real trig-basis coefficients, one column per eigenvalue
    residuals: np.ndarray         # ||A phi - lambda_s B phi|| / ||B phi||, in eigenvalue units
    imag_max: float
    b_condition: float
    flagged: list[int] = field(default_factory=list)
    n_truncated: int = 0

    @property
    def n_max(self) -> int:
        return len(self.eigenvalues) - 1

    @property
    def domain_hash(self) -> str:
        return self.domain.hash

    def eigenfunction(self, n: int) -> BoundaryDensity:
        return BoundaryDensity.from_real(self.vectors[:, n], self.domain.n_components)

    @property
    def eigenfunctions(self) -> list[BoundaryDensity]:
        return [self.eigenfunction(n) for n in range(len(self.eigenvalues))]

    def component_norms(self, n: int) -> np.ndarray:
        return self.eigenfunction(n).l2_norms(self.domain)

    def multiplicity_groups(self, tol: float = MULTIPLICITY_TOL) -> list[list[int]]:
        return _groups(self.eigenvalues, tol)

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "domain_hash": self.domain_hash,
            "domain": self.domain.to_dict(),
            "M_max": self.M,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residuals": [float(v) for v in self.residuals],
            "b_condition": float(self.b_condition),
            "flagged": list(self.flagged),
            "n_truncated": self.n_truncated,
        }
        return json.dumps(doc, indent=1, sort_keys=True)


def _groups(values, tol):
    groups, cur = [], [0] if len(values) else []
    for i in range(1, len(values)):
        if values[i] - values[i - 1] < tol:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    if cur:
        groups.append(cur)
    return groups


def _orthonormal_real_basis(V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Real W-orthonormal basis for the (real) span of complex eigenvectors V."""
    d = V.shape[1]
    X = np.concatenate([V.real, V.imag], axis=1)
    G = X.T @ W @ X
    evals, evecs = np.linalg.eigh(0.5 * (G + G.T))
    top = evecs[:, ::-1][:, :d] / np.sqrt(evals[::-1][:d])
    Q = X @ top
    # fix a deterministic orientation: largest coefficient positive
    for c in range(Q.shape[1]):
        i = np.argmax(np.abs(Q[:, c]))
        if Q[i, c] < 0:
            Q[:, c] = -Q[:, c]
    return Q


def solve_spectrum(domain: KoebeDomain, M: int, n_max: int, residual_tol: float = 1e-8,
                   strict: bool = False) -> SteklovSpectrum:
    """Smallest n_max+1 Steklov eigenpairs by a dense QZ solve of (A, B) in the real trig basis."""
    k = domain.n_components
    dim = k * (2 * M + 1)
    if n_max > dim // 4:
        raise ValueError(f"n_max={n_max} exceeds dimension/4={dim // 4}; raise M_max")
    A, B = assemble_eigensystem(domain, M)
    Ar = to_real_basis(A.matrix, M, k)
    Br = to_real_basis(B.matrix, M, k)
    b_cond = float(np.linalg.cond(Br))
    try:
        alpha, beta, vr = _qz(Ar, Br)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveFailed(str(exc)) from exc
    finite = np.abs(beta) > 1e-14 * np.abs(alpha)
    lam = alpha[finite] / beta[finite]
    vr = vr[:, finite]
    order = np.lexsort((lam.imag, lam.real))
    lam, vr = lam[order], vr[:, order]
    if lam.size < n_max + 1:
        raise EigenSolveFailed("fewer finite eigenvalues than requested")
    lam, vr = lam[: n_max + 1], vr[:, : n_max + 1]
    scale = domain.scale_factor
    imag_max = float(np.max(np.abs(lam.imag)) * scale) if lam.size else 0.0
    values = lam.real * scale

    W = gram_matrix(domain, M)
    vecs = np.zeros((dim, n_max + 1))
    for grp in _groups(values, MULTIPLICITY_TOL):
        vecs[:, grp] = _orthonormal_real_basis(vr[:, grp], W)
    # first eigenvalue is exactly zero; pin the constant sign
    resid = np.empty(n_max + 1)
    for i in range(n_max + 1):
        v = vecs[:, i]
        Bv = Br @ v
        resid[i] = np.linalg.norm(Ar @ v - (values[i] / scale) * Bv) / np.linalg.norm(Bv) * scale

    L = arclength_map(domain).lengths
    reliable = values <= np.pi * M / L.max()
    n_trunc = int((~reliable).sum())
    flagged = [int(i) for i in np.nonzero(resid > residual_tol * (1 + np.abs(values)))[0]]
    if imag_max > 1e-8:
        flagged = sorted(set(flagged) | {int(i) for i in np.nonzero(np.abs(lam.imag) * scale > 1e-8)[0]})
    if strict and flagged:
        raise SpuriousModes(f"eigenpairs {flagged} exceed the residual tolerance")
    keep = np.nonzero(reliable)[0]
    return SteklovSpectrum(domain, M, values[keep], vecs[:, keep], resid[keep], imag_max, b_cond,
                           [i for i in flagged if i in set(keep)], n_trunc)


def _qz(Ar, Br):
    alpha_beta = sla.eig(Ar, Br, right=True, homogeneous_eigvals=True)
    (alpha, beta), vr = alpha_beta
    return alpha, beta, vr


# ----------------------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonSequence:
    values: np.ndarray
    component: np.ndarray
    mode: np.ndarray
    kind: tuple[str, ...]         # "const" | "cos" | "sin"

    def __len__(self):
        return len(self.values)


def comparison_sequence(lengths, n_max: int) -> ComparisonSequence:
    """Sorted union of the progressions {0, a, a, 2a, 2a, ...}, a = 2 pi / L_j."""
    lengths = np.asarray(lengths, dtype=float)
    if np.any(lengths <= 0):
        raise ValueError("boundary lengths must be positive")
    entries = []
    kind_rank = {"const": 0, "cos": 1, "sin": 2}
    for j, L in enumerate(lengths):
        for m in range(0, n_max + 2):
            mu = 2 * np.pi * m / L
            if m == 0:
                entries.append((mu, j, m, "const"))
            else:
                entries.append((mu, j, m, "cos"))
                entries.append((mu, j, m, "sin"))
    entries.sort(key=lambda e: (round(e[0], 10), e[1], e[2], kind_rank[e[3]]))
    entries = entries[: n_max + 1]
    return ComparisonSequence(np.array([e[0] for e in entries]), np.array([e[1] for e in entries]),
                              np.array([e[2] for e in entries]), tuple(e[3] for e in entries))


@dataclass
class GapReport:
    n: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    gap: np.ndarray
    residual: np.ndarray
    component: np.ndarray
    mode: np.ndarray
    noise_floor: float
    n0: int
    flagged_pairs: list[int]
    fit: RateFit | None
    component_fits: dict[int, RateFit | None]
    status: str
    multiplicity_tags: list[str]

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            buf.write(header)
        w = csv.writer(buf, delimiter=";", lineterminator="\n")
        w.writerow(["n", "lambda", "mu", "gap", "residual", "multiplicity_tag"])
        for i in range(len(self.n)):
            w.writerow([int(self.n[i]), repr(float(self.lam[i])), repr(float(self.mu[i])),
                        repr(float(self.gap[i])), repr(float(self.residual[i])),
                        self.multiplicity_tags[i]])
        return buf.getvalue()


def spectrum_gap_report(spectrum: SteklovSpectrum, comparison: ComparisonSequence | None = None,
                        noise_factor: float = 100.0, strict: bool = False) -> GapReport:
    """|lambda_n - mu_n| by sorted index, with exponential fits over resolvable gaps.

    The overall fit is log gap against n; per-component fits are against the mode
    number m of the comparison entry, which is the natural abscissa when several
    progressions interleave.
    """
    lam = spectrum.eigenvalues
    n = len(lam)
    if comparison is None:
        comparison = comparison_sequence(arclength_map(spectrum.domain).lengths, n - 1)
    mu = comparison.values[:n]
    gap = np.abs(lam - mu)
    floor = noise_factor * float(np.max(spectrum.residuals)) if n else 0.0
    floor = max(floor, noise_factor * np.finfo(float).eps * (1 + float(lam.max(initial=0))))

    L = arclength_map(spectrum.domain).lengths
    half = 0.5 * np.min(2 * np.pi / L)
    bad = np.nonzero(gap > half)[0]
    n0 = int(bad.max() + 1) if bad.size else 0
    distinct = np.unique(np.round(comparison.values, 10))
    flagged = []
    for i in range(n):
        others = distinct[np.abs(distinct - mu[i]) > 1e-9]
        spacing = np.min(np.abs(others - mu[i])) if others.size else np.inf
        if gap[i] > 0.5 * spacing:
            flagged.append(i)

    idx = np.arange(n)
    sel = idx >= n0
    fit, status = None, "ok"
    try:
        fit = fit_exponential(idx[sel], gap[sel], floor)
    except TooFewSamples:
        status = "exponential decay consistent, rate unresolvable"
        if strict:
            raise GapBelowNoiseFloor(status) from None
    comp_fits: dict[int, RateFit | None] = {}
    for c in np.unique(comparison.component[:n]):
        s = sel & (comparison.component[:n] == c) & (comparison.mode[:n] > 0)
        try:
            comp_fits[int(c)] = fit_exponential(comparison.mode[:n][s], gap[s], floor)
        except TooFewSamples:
            comp_fits[int(c)] = None
    tags = []
    for gid, grp in enumerate(_groups(lam, MULTIPLICITY_TOL)):
        tags.extend([f"x{len(grp)}@{gid}"] * len(grp))
    return GapReport(idx, lam, mu, gap, spectrum.residuals, comparison.component[:n],
                     comparison.mode[:n], floor, n0, flagged, fit, comp_fits, status, tags)


def boundary_trace(spectrum: SteklovSpectrum, n: int, j: int, theta) -> np.ndarray:
    """phi_n on component j at angles theta (real)."""
    return spectrum.eigenfunction(n)(j, theta).real


def real_coefficients(density: BoundaryDensity) -> np.ndarray:
    return np.array([complex_to_real(c) for c in density.coeffs])
