"""Closed-form Steklov data for the unit disk and the concentric annulus A(1, eps).

On the annulus the mode-k eigenfunctions are C (r^k + beta r^-k) T(k theta) with
beta = (k - sigma)/(k + sigma), and sigma a root of

    p_k(sigma) = sigma^2 - sigma k ((eps+1)/eps) ((1+eps^2k)/(1-eps^2k)) + k^2/eps.

One root sits exponentially close to k, the other to k/eps.  Mode 0 adds the
radial eigenfunction 1 + sigma_0 log r with sigma_0 = (1 + eps) / (eps log(1/eps)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AnnulusSpec:
    eps: float

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"annulus inner radius must lie in (0, 1), got {self.eps}")


@dataclass(frozen=True)
class AnnulusEigenpair:
    eps: float
    k: int
    sigma: float
    beta: float
    C: float                # unit L2(dq) norm of the cosine trace over both circles
    branch: str             # "near-k" | "near-k/eps" | "radial"
    underflow: bool = False

    @property
    def r0(self) -> float | None:
        """Radius of the circular nodal line, if it lies inside the annulus."""
        if self.k == 0:
            return float(np.exp(-1.0 / self.sigma))
        if self.beta >= 0:
            return None
        r0 = (-self.beta) ** (1.0 / (2 * self.k))
        return r0 if self.eps < r0 < 1 else None

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        if self.k == 0:
            return self.C * (1 + self.sigma * np.log(r))
        return self.C * (r ** self.k + self.beta * r ** (-self.k))

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.k == 0:
            return self.C * self.sigma / r
        return self.C * self.k * (r ** (self.k - 1) - self.beta * r ** (-self.k - 1))

    def __call__(self, points, phase: float = 0.0):
        z = np.asarray(points)
        if not np.iscomplexobj(z):
            z = z[..., 0] + 1j * z[..., 1]
        return self.radial(np.abs(z)) * np.cos(self.k * np.angle(z) - phase)

    def boundary_norms(self) -> tuple[float, float]:
        """L2(dq) norms of the cosine trace on (outer, inner)."""
        c = 2 * np.pi if self.k == 0 else np.pi
        outer = abs(float(self.radial(1.0))) * np.sqrt(c)
        inner = abs(float(self.radial(self.eps))) * np.sqrt(c * self.eps)
        return outer, inner


def f_coefficient(k: int, eps: float) -> float:
    """f(k, eps) = k ((eps+1)/eps) 2 eps^2k / (1 - eps^2k), the O(k eps^2k) perturbation."""
    e2k = eps ** (2 * k)
    return k * ((eps + 1) / eps) * 2 * e2k / (1 - e2k)


def p_k(sigma, eps: float, k: int):
    e2k = eps ** (2 * k)
    return sigma ** 2 - sigma * k * ((eps + 1) / eps) * ((1 + e2k) / (1 - e2k)) + k * k / eps


def _roots(b: float, c: float) -> tuple[float, float]:
    """Both roots of d^2 + b d + c, each without cancellation, ascending."""
    disc = np.sqrt(b * b - 4 * c)
    q = -0.5 * (b + np.copysign(disc, b))
    r1, r2 = q, c / q
    return (min(r1, r2), max(r1, r2))


def _underflows(eps: float, k: int) -> bool:
    return k * eps ** (2 * k) < np.finfo(float).eps


def annulus_gaps(eps: float, k: int) -> tuple[float, float]:
    """(sigma_- - k, sigma_+ - k/eps) computed without cancellation.

    With sigma = k + d, p_k becomes d^2 + d (k(eps-1)/eps - f) - f k; with
    sigma = k/eps + d it becomes d^2 + d (k(1-eps)/eps - f) - f k/eps.
    """
    AnnulusSpec(eps)
    if k < 1:
        raise ValueError("k must be >= 1 (k = 0 is the constant mode)")
    f = f_coefficient(k, eps)
    d_lo = _roots(k * (eps - 1) / eps - f, -f * k)[0]
    d_hi = _roots(k * (1 - eps) / eps - f, -f * k / eps)[1]
    return float(d_lo), float(d_hi)


def annulus_eigenvalues(eps: float, k: int) -> tuple[float, float]:
    """(sigma_-, sigma_+): the roots of p_k near k and near k/eps."""
    if _underflows(eps, k):
        AnnulusSpec(eps)
        return float(k), k / eps
    d_lo, d_hi = annulus_gaps(eps, k)
    return k + d_lo, k / eps + d_hi


def radial_eigenvalue(eps: float) -> float:
    AnnulusSpec(eps)
    return (1 + eps) / (eps * np.log(1 / eps))


def annulus_eigenpair(eps: float, k: int, branch: str = "near-k") -> AnnulusEigenpair:
    if k == 0:
        sigma = radial_eigenvalue(eps)
        outer = 2 * np.pi
        inner = (1 + sigma * np.log(eps)) ** 2 * 2 * np.pi * eps
        return AnnulusEigenpair(eps, 0, sigma, np.nan, 1 / np.sqrt(outer + inner), "radial")
    lo, hi = annulus_eigenvalues(eps, k)
    if branch == "near-k":
        sigma = lo
    elif branch == "near-k/eps":
        sigma = hi
    else:
        raise ValueError(f"unknown branch {branch!r}")
    beta = (k - sigma) / (k + sigma)
    outer = (1 + beta) ** 2 * np.pi
    inner = (eps ** k + beta * eps ** (-k)) ** 2 * np.pi * eps
    C = 1.0 / np.sqrt(outer + inner)
    return AnnulusEigenpair(eps, k, float(sigma), float(beta), float(C), branch, _underflows(eps, k))


@dataclass(frozen=True)
class OracleLevel:
    value: float
    k: int
    branch: str             # "const" | "radial" | "near-k" | "near-k/eps"


def annulus_spectrum(eps: float, n_max: int) -> list[OracleLevel]:
    """Sorted Steklov eigenvalues of A(1, eps) with multiplicity, n = 0..n_max."""
    levels = [OracleLevel(0.0, 0, "const"), OracleLevel(radial_eigenvalue(eps), 0, "radial")]
    k = 1
    while True:
        lo, hi = annulus_eigenvalues(eps, k)
        levels += [OracleLevel(lo, k, "near-k")] * 2 + [OracleLevel(hi, k, "near-k/eps")] * 2
        # every later root exceeds k+1 - tiny, so stop once enough values lie below it
        if sum(lv.value < k + 0.5 for lv in levels) > n_max:
            break
        k += 1
    levels.sort(key=lambda lv: lv.value)
    return levels[: n_max + 1]


def annulus_mode_dtn(eps: float, m: int, outer_radius: float = 1.0) -> np.ndarray:
    """2x2 DtN on Fourier mode m: (trace outer, trace inner) -> outward normal derivatives.

    Outward normal is d/dr on the outer circle and -d/dr on the inner one.
    """
    AnnulusSpec(eps)
    if m < 0:
        raise ValueError("m must be >= 0")
    R, r = outer_radius, eps * outer_radius
    if m == 0:
        # u = a + b log r
        V = np.array([[1.0, np.log(R)], [1.0, np.log(r)]])
        Nm = np.array([[0.0, 1.0 / R], [0.0, -1.0 / r]])
    else:
        V = np.array([[R ** m, R ** -m], [r ** m, r ** -m]])
        Nm = np.array([[m * R ** (m - 1), -m * R ** (-m - 1)],
                       [-m * r ** (m - 1), m * r ** (-m - 1)]])
    return Nm @ np.linalg.inv(V)


def annulus_mode_single_layer(eps: float, m: int, outer_radius: float = 1.0) -> np.ndarray:
    """2x2 block of S on mode m (m >= 1): rows are targets (outer, inner)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    R, r = outer_radius, eps * outer_radius
    t = (r / R) ** m
    return np.array([[R / (2 * m), r / (2 * m) * t],
                     [R / (2 * m) * t, r / (2 * m)]])


def annulus_quasimode_defect(eps: float, m: int, component: int = 0) -> float:
    """Defect of the trigonometric mode e_m on one annulus circle, from the 2x2 reduction.

    The defect is ||S (P - mu) e|| / ||S e|| in L2(dq), mu = m / rho_j; invariant
    under rescaling the annulus.
    """
    P = annulus_mode_dtn(eps, m)
    S = annulus_mode_single_layer(eps, m)
    rho = (1.0, eps)
    e = np.zeros(2)
    e[component] = 1.0
    mu = m / rho[component]
    w = np.sqrt(2 * np.pi * np.array(rho))
    num = w * (S @ ((P - mu * np.eye(2)) @ e))
    den = w * (S @ e)
    return float(np.linalg.norm(num) / np.linalg.norm(den))


def annulus_nodal_length(eps: float, pair: AnnulusEigenpair) -> float:
    """2k radial segments of length 1 - eps, plus the circle r = r0 when it lies inside."""
    if pair.k == 0:
        r0 = pair.r0
        return float(2 * np.pi * r0) if eps < r0 < 1 else 0.0
    length = 2 * pair.k * (1 - eps)
    r0 = pair.r0
    if r0 is not None:
        length += 2 * np.pi * r0
    return float(length)


@dataclass(frozen=True)
class DiskEigenpair:
    n: int
    eigenvalue: float
    nodal_length: float

    def __call__(self, points, phase: float = 0.0):
        z = np.asarray(points)
        if not np.iscomplexobj(z):
            z = z[..., 0] + 1j * z[..., 1]
        if self.n == 0:
            return np.ones(z.shape) / np.sqrt(2 * np.pi)
        return np.abs(z) ** self.n * np.cos(self.n * np.angle(z) - phase) / np.sqrt(np.pi)


def disk_eigenpair(n: int) -> DiskEigenpair:
    """Mode n on the unit disk: eigenvalue n, eigenfunction r^n cos(n theta), nodal length 2n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return DiskEigenpair(n, float(n), 2.0 * n)
