"""Single and double layer operators on unions of circles, in a per-circle Fourier basis.

Conventions (free Green's function ``G(x, y) = -(1/2pi) log|x - y|``)::

    S f(q)   =  int G(q, q') f(q') dq'                 (positive on small circles)
    N f(q)   = -2 int d_nu(q') G(q, q') f(q') dq'       (N 1 = 1)
    Sl f(x)  =  int G(x, q) f(q) dq
    Dl f(x)  = -int d_nu(q) G(x, q) f(q) dq             (Dl 1 = 1 inside)

``nu`` is the outward normal of the domain, which points into each inner disk.
With these signs the Dirichlet-to-Neumann map ``P`` satisfies ``S P = (I - N)/2``
and a harmonic ``u`` with trace ``f`` is ``u = Dl f + Sl(P f)``.

Densities are stored as complex Fourier coefficients in each circle's angle,
modes ``-M..M``; column ``m + M`` of a component row holds mode ``m``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .geometry import Circle, KoebeDomain, _as_complex


class QuadratureNotConverged(RuntimeError):
    pass


class TooCloseToBoundary(ValueError):
    pass


def modes(M: int) -> np.ndarray:
    return np.arange(-M, M + 1)


@dataclass(frozen=True)
class BoundaryDensity:
    """Per-component Fourier coefficients of a function on the boundary circles."""

    coeffs: np.ndarray  # (n_components, 2M+1) complex

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        if c.shape[1] % 2 != 1:
            raise ValueError("coefficient vectors must have odd length 2M+1")
        object.__setattr__(self, "coeffs", c)

    @property
    def M(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    @classmethod
    def from_flat(cls, vec, n_components: int) -> "BoundaryDensity":
        return cls(np.asarray(vec).reshape(n_components, -1))

    @classmethod
    def from_real(cls, vec, n_components: int) -> "BoundaryDensity":
        vec = np.asarray(vec).reshape(n_components, -1)
        return cls(np.array([real_to_complex(v) for v in vec]))

    def to_real(self) -> np.ndarray:
        return np.concatenate([complex_to_real(c) for c in self.coeffs])

    @classmethod
    def from_samples(cls, values, M: int) -> "BoundaryDensity":
        """Coefficients from values on the uniform grids theta_b = 2 pi b / n (one row per component)."""
        values = np.atleast_2d(values)
        n = values.shape[1]
        if n < 2 * M + 1:
            raise ValueError("need at least 2M+1 samples")
        spec = np.fft.fft(values, axis=1) / n
        return cls(spec[:, modes(M) % n])

    @classmethod
    def from_function(cls, funcs, M: int, n: int | None = None) -> "BoundaryDensity":
        n = n or 4 * M + 8
        theta = 2 * np.pi * np.arange(n) / n
        return cls.from_samples(np.array([f(theta) for f in funcs]), M)

    def samples(self, n: int) -> np.ndarray:
        """Values on theta_b = 2 pi b / n for each component (complex)."""
        M = self.M
        if n < 2 * M + 1:
            raise ValueError("need at least 2M+1 nodes")
        spec = np.zeros((self.n_components, n), dtype=complex)
        spec[:, modes(M) % n] = self.coeffs
        return np.fft.ifft(spec, axis=1) * n

    def __call__(self, j: int, theta):
        theta = np.asarray(theta)
        e = np.exp(1j * np.multiply.outer(theta, modes(self.M)))
        return e @ self.coeffs[j]

    def padded(self, M: int) -> "BoundaryDensity":
        if M < self.M:
            raise ValueError("cannot pad to fewer modes")
        out = np.zeros((self.n_components, 2 * M + 1), dtype=complex)
        out[:, M - self.M:M + self.M + 1] = self.coeffs
        return BoundaryDensity(out)

    def l2_norms(self, domain: KoebeDomain, weighted: bool = True) -> np.ndarray:
        """Per-component L2 norms in the measure g dq (or dq when weighted=False)."""
        out = np.empty(self.n_components)
        for j, (circle, w) in enumerate(zip(domain.circles, domain.weight.components)):
            c = self.coeffs[j]
            if weighted:
                G = weight_multiplication_block(w, self.M)
                val = 2 * np.pi * circle.radius * np.real(np.vdot(c, G @ c))
            else:
                val = 2 * np.pi * circle.radius * np.real(np.vdot(c, c))
            out[j] = np.sqrt(max(val, 0.0))
        return out


def real_to_complex(r) -> np.ndarray:
    """[a0, a1, b1, ..., aM, bM] (f = a0 + sum a cos + b sin) -> c_{-M..M}."""
    r = np.asarray(r)
    M = (r.shape[0] - 1) // 2
    c = np.zeros(2 * M + 1, dtype=complex)
    c[M] = r[0]
    a, b = r[1::2], r[2::2]
    c[M + 1:] = 0.5 * (a - 1j * b)
    c[:M][::-1] = 0.5 * (a + 1j * b)
    return c


def complex_to_real(c) -> np.ndarray:
    c = np.asarray(c)
    M = (c.shape[0] - 1) // 2
    r = np.empty(2 * M + 1)
    r[0] = c[M].real
    pos, neg = c[M + 1:], c[:M][::-1]
    r[1::2] = (pos + neg).real
    r[2::2] = (1j * (pos - neg)).real
    return r


def real_basis_transform(M: int, n_components: int) -> np.ndarray:
    """Matrix T with complex_coeffs = T @ real_coeffs, block diagonal over components."""
    n = 2 * M + 1
    T1 = np.zeros((n, n), dtype=complex)
    T1[M, 0] = 1.0
    for m in range(1, M + 1):
        T1[M + m, 2 * m - 1] = 0.5
        T1[M + m, 2 * m] = -0.5j
        T1[M - m, 2 * m - 1] = 0.5
        T1[M - m, 2 * m] = 0.5j
    return np.kron(np.eye(n_components), T1)


def circle_log_multiplier(m: int, perimeter: float) -> float:
    """Eigenvalue of G_j h(s) = -(1/2pi) int_0^L log|e^{2pi i s/L} - e^{2pi i s'/L}| h(s') ds'
    on the mode e^{2 pi i m s / L}: L / (4 pi |m|), and 0 on constants."""
    if m == 0:
        return 0.0
    return perimeter / (4 * np.pi * abs(m))


@dataclass(frozen=True)
class BoundaryOperatorMatrix:
    matrix: np.ndarray
    tag: str                     # "S" | "N" | "P" | "weight" | "A" | "B"
    domain_hash: str
    M: int
    n_components: int
    quad_nodes: int = 0

    @property
    def shape(self):
        return self.matrix.shape

    def block(self, i: int, j: int) -> np.ndarray:
        n = 2 * self.M + 1
        return self.matrix[i * n:(i + 1) * n, j * n:(j + 1) * n]

    def __matmul__(self, other):
        if isinstance(other, BoundaryDensity):
            return BoundaryDensity.from_flat(self.matrix @ other.flat, self.n_components)
        return self.matrix @ other

    def to_real(self) -> np.ndarray:
        T = real_basis_transform(self.M, self.n_components)
        Ti = np.linalg.inv(T)
        return np.real_if_close(Ti @ self.matrix @ T, tol=1e6).real

    def dump_csv(self, path) -> None:
        """Row-major dump: two header comment lines, then one row per matrix row (re, im pairs)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# tag={self.tag}; domain_hash={self.domain_hash}; M_max={self.M}; "
                     f"n_components={self.n_components}; shape={self.shape[0]}x{self.shape[1]}\n")
            fh.write("# row-major; each entry written as re;im\n")
            w = csv.writer(fh, delimiter=";", lineterminator="\n")
            for row in self.matrix:
                w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def load_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            vals = np.array([float(v) for v in line.strip().split(";")])
            rows.append(vals[0::2] + 1j * vals[1::2])
    return np.array(rows)


def _kernel(kind: str, target: Circle, source: Circle, orient: float, nq: int) -> np.ndarray:
    th = 2 * np.pi * np.arange(nq) / nq
    x = target.point(th)[:, None]
    y = source.point(th)[None, :]
    d = y - x
    if kind == "S":
        return -np.log(np.abs(d)) / (2 * np.pi)
    nu = orient * np.exp(1j * th)[None, :]
    return np.real(d * np.conj(nu)) / (np.pi * np.abs(d) ** 2)


def _offdiag_block(kind: str, target: Circle, source: Circle, orient: float, M: int,
                   nq: int) -> np.ndarray:
    K = _kernel(kind, target, source, orient, nq)
    F = np.fft.fft(np.fft.ifft(K, axis=1), axis=0) * (source.radius * 2 * np.pi / nq)
    idx = modes(M) % nq
    return F[np.ix_(idx, idx)]


def _converged_block(kind, target, source, orient, M, nq0, tol, max_nodes):
    nq = nq0
    prev = _offdiag_block(kind, target, source, orient, M, nq)
    while True:
        nq *= 2
        cur = _offdiag_block(kind, target, source, orient, M, nq)
        err = np.max(np.abs(cur - prev))
        if err <= tol:
            return cur, nq // 2
        if nq >= max_nodes:
            raise QuadratureNotConverged(
                f"{kind} block changed by {err:.3g} on doubling to {nq} nodes")
        prev = cur


def _assemble(kind: str, domain: KoebeDomain, M: int, nq: int | None, tol: float,
              max_nodes: int) -> BoundaryOperatorMatrix:
    if M < 8:
        raise ValueError("M_max must be at least 8")
    circles = domain.scaled()
    orient = domain.orientation
    k = len(circles)
    n = 2 * M + 1
    mat = np.zeros((k * n, k * n), dtype=complex)
    m = modes(M)
    nq0 = nq or max(4 * M, 64)
    used = 0
    for j, cj in enumerate(circles):
        if kind == "S":
            diag = np.where(m == 0, -cj.radius * np.log(cj.radius),
                            [circle_log_multiplier(mm, 2 * np.pi * cj.radius) for mm in m])
            mat[j * n:(j + 1) * n, j * n:(j + 1) * n] = np.diag(diag)
        else:
            mat[j * n + M, j * n + M] = orient[j]
        for i, ci in enumerate(circles):
            if i == j:
                continue
            blk, used_i = _converged_block(kind, ci, cj, orient[j], M, nq0, tol, max_nodes)
            used = max(used, used_i)
            mat[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk
    return BoundaryOperatorMatrix(mat, kind, domain.hash, M, k, used)


def assemble_single_layer(domain: KoebeDomain, M: int, nq: int | None = None, tol: float = 1e-10,
                          max_nodes: int = 1 << 14) -> BoundaryOperatorMatrix:
    """S on the scaled geometry; diagonal circle blocks in closed form."""
    return _assemble("S", domain, M, nq, tol, max_nodes)


def assemble_double_layer(domain: KoebeDomain, M: int, nq: int | None = None, tol: float = 1e-10,
                          max_nodes: int = 1 << 14) -> BoundaryOperatorMatrix:
    """N on the scaled geometry; each circle's own kernel is the constant orient/(2 pi rho)."""
    return _assemble("N", domain, M, nq, tol, max_nodes)


def weight_multiplication_block(weight, M: int) -> np.ndarray:
    """Matrix of f -> g f on modes -M..M (convolution with g's coefficients, truncated)."""
    gk = weight.complex_coefficients()
    K = (gk.shape[0] - 1) // 2
    n = 2 * M + 1
    out = np.zeros((n, n), dtype=complex)
    for k in range(-K, K + 1):
        if abs(k) >= n:
            continue
        out += np.diag(np.full(n - abs(k), gk[K + k]), -k)
    return out


def weight_multiplication(domain: KoebeDomain, M: int) -> BoundaryOperatorMatrix:
    blocks = [weight_multiplication_block(w, M) for w in domain.weight.components]
    k = len(blocks)
    n = 2 * M + 1
    mat = np.zeros((k * n, k * n), dtype=complex)
    for j, b in enumerate(blocks):
        mat[j * n:(j + 1) * n, j * n:(j + 1) * n] = b
    return BoundaryOperatorMatrix(mat, "weight", domain.hash, M, k)


def euclidean_weights(domain: KoebeDomain, M: int, scaled: bool = False) -> np.ndarray:
    """Diagonal of the Gram matrix of the dq inner product in the complex Fourier basis."""
    circles = domain.scaled() if scaled else domain.circles
    return np.repeat([2 * np.pi * c.radius for c in circles], 2 * M + 1)


# ----------------------------------------------------------------------------------------
# Off-boundary evaluation

def _quad_nodes(circle: Circle, dist: float, M: int) -> int:
    n = max(4 * M + 8, int(np.ceil(48 * circle.radius / max(dist, 1e-12))))
    return int(min(n, 1 << 16))


def evaluate_layer(domain: KoebeDomain, density: BoundaryDensity, kind: Literal["single", "double"],
                   points, floor: float | None = None) -> np.ndarray:
    """Sl f or Dl f at points off the boundary by periodic trapezoid quadrature.

    Uses the unscaled geometry.  The node count grows like rho / distance, so the
    trapezoid error stays near 1e-12 down to the distance floor.
    """
    z = np.atleast_1d(_as_complex(points))
    floor = 0.01 * domain.outer.radius if floor is None else floor
    dist = np.min(np.abs(domain.distance_to_boundary(z)), axis=-1)
    if np.any(dist < floor):
        raise TooCloseToBoundary(
            f"{int((dist < floor).sum())} points closer than {floor:g} to the boundary")
    out = np.zeros(z.shape)
    flat = z.ravel()
    res = np.zeros(flat.shape)
    for j, (circle, sgn) in enumerate(zip(domain.circles, domain.orientation)):
        nq = _quad_nodes(circle, float(dist.min()), density.M)
        th = 2 * np.pi * np.arange(nq) / nq
        f = density.samples(nq)[j].real
        q = circle.point(th)
        w = circle.radius * 2 * np.pi / nq
        for start in range(0, flat.size, 2048):
            x = flat[start:start + 2048, None]
            d = q[None, :] - x
            if kind == "single":
                K = -np.log(np.abs(d)) / (2 * np.pi)
            else:
                nu = sgn * np.exp(1j * th)[None, :]
                K = np.real(d * np.conj(nu)) / (2 * np.pi * np.abs(d) ** 2)
            res[start:start + 2048] += (K @ f) * w
    out = res.reshape(z.shape)
    return out


def _horner(coef, zeta, deriv: bool):
    """sum_m coef[m] zeta^m and its zeta-derivative."""
    acc = np.full(zeta.shape, coef[-1], dtype=complex)
    dacc = np.zeros(zeta.shape, dtype=complex)
    for a in coef[-2::-1]:
        if deriv:
            dacc = dacc * zeta + acc
        acc = acc * zeta + a
    return acc, dacc


def layer_series_pair(domain: KoebeDomain, double: BoundaryDensity | None, single: BoundaryDensity | None,
                      points, gradient: bool = False):
    """Dl(double) + Sl(single) by the exact multipole expansion of each circle's layer potentials.

    On each circle mode m of the density contributes R_m(r) e^{i m theta} with
    R_m = (r/rho)^|m| inside and (rho/r)^|m| outside, so the whole series is a
    power series in zeta = w/rho (inside) or rho/w (outside), summed by Horner.
    Valid at every point off the circles, including arbitrarily close to them;
    points on a circle (to rounding) get the limit from the domain side.
    """
    z = np.atleast_1d(_as_complex(points))
    flat = z.ravel().astype(complex)
    val = np.zeros(flat.shape)
    gx = np.zeros(flat.shape)
    gy = np.zeros(flat.shape)
    dens = [d for d in (double, single) if d is not None]
    if not dens:
        raise ValueError("need at least one density")
    M = max(d.M for d in dens)
    mpos = np.arange(1, M + 1)

    def split(d, j):
        if d is None:
            return 0.0, np.zeros(M, dtype=complex)
        c = d.padded(M).coeffs[j] if d.M < M else d.coeffs[j]
        return c[M], c[M + 1:] + np.conj(c[:M][::-1])

    for j, (circle, sgn) in enumerate(zip(domain.circles, domain.orientation)):
        rho = circle.radius
        d0, dA = split(double, j)
        s0, sA = split(single, j)
        A_in = sgn * 0.5 * dA + rho / (2 * mpos) * sA
        A_out = -sgn * 0.5 * dA + rho / (2 * mpos) * sA
        w = flat - circle.c
        r = np.abs(w)
        inside = r < rho * (1 + 1e-12 * sgn)
        if inside.any():
            wi = w[inside]
            zeta = wi / rho
            F, dF = _horner(np.concatenate([[0.0], A_in]), zeta, gradient)
            val[inside] += F.real + np.real(sgn * d0 - rho * np.log(rho) * s0)
            if gradient:
                dF = dF / rho
                gx[inside] += dF.real
                gy[inside] -= dF.imag
        out = ~inside
        if out.any():
            wo = w[out]
            zeta = rho / wo
            H, dH = _horner(np.concatenate([[0.0], np.conj(A_out)]), zeta, gradient)
            ro = r[out]
            val[out] += H.real - rho * np.log(ro) * np.real(s0)
            if gradient:
                dH = dH * (-rho / wo ** 2)
                gx[out] += dH.real - rho * np.real(s0) * wo.real / ro ** 2
                gy[out] += -dH.imag - rho * np.real(s0) * wo.imag / ro ** 2
    if gradient:
        return val.reshape(z.shape), gx.reshape(z.shape), gy.reshape(z.shape)
    return val.reshape(z.shape)


def layer_series(domain: KoebeDomain, density: BoundaryDensity, kind: Literal["single", "double"],
                 points, gradient: bool = False):
    """Sl f or Dl f by the exact multipole expansion; see layer_series_pair."""
    if kind == "single":
        return layer_series_pair(domain, None, density, points, gradient)
    if kind == "double":
        return layer_series_pair(domain, density, None, points, gradient)
    raise ValueError(f"unknown layer kind {kind!r}")
