"""Circular (Koebe-model) domains: outer circle minus disjoint inner disks.

Each boundary circle carries a positive real-analytic weight ``g`` given as a
truncated real Fourier series in the circle's angle.  The weighted arclength
``s_j(theta) = rho_j * int_0^theta g_j`` is the coordinate in which the model
multiplier acts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class GeometryError(ValueError):
    pass


class OverlapError(GeometryError):
    pass


class OutsideOuter(GeometryError):
    pass


class NonPositiveWeight(GeometryError):
    pass


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0 or not np.isfinite(self.radius):
            raise GeometryError(f"circle radius must be positive, got {self.radius}")

    @property
    def c(self) -> complex:
        return complex(*self.center)

    def point(self, theta):
        """Boundary point(s) as complex numbers."""
        return self.c + self.radius * np.exp(1j * np.asarray(theta))


@dataclass(frozen=True)
class WeightSeries:
    """g(theta) = mean + sum_k cos[k-1] cos(k theta) + sin[k-1] sin(k theta)."""

    mean: float = 1.0
    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()

    def __post_init__(self):
        n = max(len(self.cos), len(self.sin))
        c = tuple(float(v) for v in self.cos) + (0.0,) * (n - len(self.cos))
        s = tuple(float(v) for v in self.sin) + (0.0,) * (n - len(self.sin))
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "cos", c)
        object.__setattr__(self, "sin", s)
        vals = (self.mean,) + c + s
        if not all(np.isfinite(v) for v in vals):
            raise NonPositiveWeight("weight coefficients must be finite")

    @property
    def n_modes(self) -> int:
        return len(self.cos)

    @property
    def is_constant(self) -> bool:
        return not any(self.cos) and not any(self.sin)

    def __call__(self, theta):
        theta = np.asarray(theta)
        out = np.full(theta.shape, self.mean, dtype=np.result_type(theta, float))
        for k, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            out = out + a * np.cos(k * theta) + b * np.sin(k * theta)
        return out

    def complex_coefficients(self) -> np.ndarray:
        """Coefficients g_k, k = -K..K, of g = sum g_k e^{ik theta}."""
        K = self.n_modes
        out = np.zeros(2 * K + 1, dtype=complex)
        out[K] = self.mean
        for k in range(1, K + 1):
            a, b = self.cos[k - 1], self.sin[k - 1]
            out[K + k] = 0.5 * (a - 1j * b)
            out[K - k] = 0.5 * (a + 1j * b)
        return out

    def antiderivative(self, z):
        """int_0^z g, continued holomorphically to complex z."""
        z = np.asarray(z)
        out = self.mean * z
        for k, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            out = out + a * np.sin(k * z) / k + b * (1.0 - np.cos(k * z)) / k
        return out

    def derivative(self, z, order: int = 1):
        """d^order g / dtheta^order at (possibly complex) z."""
        z = np.asarray(z)
        out = np.zeros(z.shape, dtype=np.result_type(z, float))
        for k, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            # derivative of a cos + b sin rotates (a, b) by a quarter turn per order
            ca, cb = a, b
            for _ in range(order):
                ca, cb = k * cb, -k * ca
            out = out + ca * np.cos(k * z) + cb * np.sin(k * z)
        return out

    def rotated(self, phi: float) -> "WeightSeries":
        """Weight seen from an angle origin shifted by phi: g(theta - phi)."""
        cs, sn = [], []
        for k, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            c, s = np.cos(k * phi), np.sin(k * phi)
            cs.append(a * c - b * s)
            sn.append(a * s + b * c)
        return WeightSeries(self.mean, tuple(cs), tuple(sn))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "cos": list(self.cos), "sin": list(self.sin)}


WEIGHT_PRESETS = {
    "unit": lambda amplitude=0.5: WeightSeries(1.0),
    "cosine-bump": lambda amplitude=0.5: WeightSeries(1.0, (amplitude,)),
}


def weight_preset(name: str, amplitude: float = 0.5) -> WeightSeries:
    try:
        return WEIGHT_PRESETS[name](amplitude)
    except KeyError:
        raise GeometryError(f"unknown weight preset {name!r}") from None


@dataclass(frozen=True)
class ConformalWeight:
    """One weight series per boundary component (outer first)."""

    components: tuple[WeightSeries, ...]

    @classmethod
    def uniform(cls, n_components: int, series: WeightSeries | None = None) -> "ConformalWeight":
        series = series or WeightSeries(1.0)
        return cls(tuple(series for _ in range(n_components)))

    @property
    def max_modes(self) -> int:
        return max(w.n_modes for w in self.components)

    @property
    def is_constant(self) -> bool:
        return all(w.is_constant and w.mean == 1.0 for w in self.components)


@dataclass(frozen=True)
class KoebeDomain:
    outer: Circle
    inners: tuple[Circle, ...] = ()
    weight: ConformalWeight | None = None
    scale_factor: float = 0.5
    min_gap: float | None = None  # default 1e-3 * outer radius

    def __post_init__(self):
        object.__setattr__(self, "inners", tuple(self.inners))
        if self.weight is None:
            object.__setattr__(self, "weight", ConformalWeight.uniform(1 + len(self.inners)))
        if len(self.weight.components) != 1 + len(self.inners):
            raise GeometryError("weight must have one series per boundary component")
        if not self.scale_factor > 0:
            raise GeometryError("scale_factor must be positive")
        if self.min_gap is None:
            object.__setattr__(self, "min_gap", 1e-3 * self.outer.radius)

    @property
    def circles(self) -> tuple[Circle, ...]:
        return (self.outer,) + self.inners

    @property
    def n_components(self) -> int:
        return 1 + len(self.inners)

    @property
    def orientation(self) -> np.ndarray:
        """+1 where the domain's outward normal is the circle's outward normal."""
        return np.array([1.0] + [-1.0] * len(self.inners))

    def scaled(self, factor: float | None = None) -> tuple[Circle, ...]:
        f = self.scale_factor if factor is None else factor
        return tuple(Circle((c.center[0] * f, c.center[1] * f), c.radius * f) for c in self.circles)

    def rotated(self, phi: float) -> "KoebeDomain":
        """Rigid rotation of the whole domain about the origin."""
        rot = np.exp(1j * phi)

        def turn(c: Circle) -> Circle:
            z = c.c * rot
            return Circle((z.real, z.imag), c.radius)

        weight = ConformalWeight(tuple(w.rotated(phi) for w in self.weight.components))
        return replace(self, outer=turn(self.outer), inners=tuple(turn(c) for c in self.inners),
                       weight=weight)

    def to_dict(self) -> dict:
        return {
            "outer": {"center": list(self.outer.center), "radius": self.outer.radius},
            "inners": [{"center": list(c.center), "radius": c.radius} for c in self.inners],
            "weights": [w.to_dict() for w in self.weight.components],
            "scale_factor": self.scale_factor,
            "min_gap": self.min_gap,
        }

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def distance_to_boundary(self, points) -> np.ndarray:
        """Signed distance, positive inside the domain, per component stacked last."""
        z = _as_complex(points)
        d = np.empty(z.shape + (self.n_components,))
        for j, (c, sgn) in enumerate(zip(self.circles, self.orientation)):
            d[..., j] = sgn * (c.radius - np.abs(z - c.c))
        return d

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        return np.all(self.distance_to_boundary(points) > margin, axis=-1)


def _as_complex(points) -> np.ndarray:
    p = np.asarray(points)
    if np.iscomplexobj(p):
        return p
    if p.shape and p.shape[-1] == 2:
        return p[..., 0] + 1j * p[..., 1]
    return p.astype(complex)


def annulus(eps: float, weight: WeightSeries | None = None, **kw) -> KoebeDomain:
    if not 0 < eps < 1:
        raise GeometryError("annulus inner radius must lie in (0, 1)")
    w = ConformalWeight.uniform(2, weight)
    return KoebeDomain(Circle((0, 0), 1.0), (Circle((0, 0), eps),), w, **kw)


def disk(weight: WeightSeries | None = None, **kw) -> KoebeDomain:
    return KoebeDomain(Circle((0, 0), 1.0), (), ConformalWeight.uniform(1, weight), **kw)


@dataclass(frozen=True)
class DomainCheck:
    domain: KoebeDomain
    min_gap: float
    min_weight: tuple[float, ...] = field(default=())


def validate_domain(domain: KoebeDomain) -> DomainCheck:
    """Check disjointness, containment and weight positivity; report the smallest gap."""
    outer = domain.outer
    gaps = []
    for c in domain.inners:
        g = outer.radius - (abs(c.c - outer.c) + c.radius)
        if g <= 0:
            raise OutsideOuter(f"inner circle {c} is not strictly inside the outer circle")
        gaps.append(g)
    for a in range(len(domain.inners)):
        for b in range(a + 1, len(domain.inners)):
            ca, cb = domain.inners[a], domain.inners[b]
            g = abs(ca.c - cb.c) - ca.radius - cb.radius
            if g <= 0:
                raise OverlapError(f"inner circles {a} and {b} intersect or touch (gap {g:.3g})")
            gaps.append(g)
    gap = min(gaps) if gaps else np.inf
    if gap < domain.min_gap:
        raise OverlapError(f"minimal gap {gap:.3g} below configured minimum {domain.min_gap:.3g}")
    # the log single layer loses invertibility when the scaled outer circle has radius 1
    scaled_radius = outer.radius * domain.scale_factor
    if abs(np.log(scaled_radius)) < 0.1:
        raise GeometryError(f"scaled outer radius {scaled_radius:.3g} is near logarithmic capacity one; "
                            f"choose scale_factor well away from {1 / outer.radius:.3g}")

    mins = []
    for j, w in enumerate(domain.weight.components):
        n = max(64, 8 * (w.n_modes + 1))
        vals = w(np.linspace(0, 2 * np.pi, n, endpoint=False))
        if not np.all(np.isfinite(vals)):
            raise NonPositiveWeight(f"weight on component {j} is not finite")
        if vals.min() <= 0:
            raise NonPositiveWeight(f"weight on component {j} reaches {vals.min():.3g} <= 0")
        mins.append(float(vals.min()))
    return DomainCheck(domain, float(gap), tuple(mins))


@dataclass(frozen=True)
class ComponentArclength:
    radius: float
    weight: WeightSeries
    length: float          # L_j = int g dq_j
    perimeter: float       # 2 pi rho_j
    gamma: float           # min ds/dtheta

    def forward(self, theta):
        """s_j(theta); holomorphic in theta."""
        return self.radius * self.weight.antiderivative(theta)

    def derivative(self, theta, order: int = 1):
        if order == 1:
            return self.radius * self.weight(theta)
        return self.radius * self.weight.derivative(theta, order - 1)

    def inverse(self, s, tol: float = 1e-14, maxiter: int = 60):
        """theta(s) for s in [0, L_j], by safeguarded Newton on the monotone map."""
        s = np.asarray(s, dtype=float)
        lo = np.zeros_like(s)
        hi = np.full_like(s, 2 * np.pi)
        theta = s * (2 * np.pi / self.length)
        for _ in range(maxiter):
            r = self.forward(theta) - s
            lo = np.where(r < 0, theta, lo)
            hi = np.where(r > 0, theta, hi)
            step = r / self.derivative(theta)
            new = theta - step
            bad = (new <= lo) | (new >= hi)
            new = np.where(bad, 0.5 * (lo + hi), new)
            if np.all(np.abs(new - theta) <= tol * (1 + np.abs(theta))):
                theta = new
                break
            theta = new
        return theta


@dataclass(frozen=True)
class ArclengthMap:
    components: tuple[ComponentArclength, ...]

    @property
    def lengths(self) -> np.ndarray:
        return np.array([c.length for c in self.components])

    def __getitem__(self, j: int) -> ComponentArclength:
        return self.components[j]

    def __len__(self):
        return len(self.components)


def arclength_map(domain: KoebeDomain) -> ArclengthMap:
    """Weighted boundary lengths by trapezoid quadrature (exact for band-limited g)."""
    comps = []
    for circle, w in zip(domain.circles, domain.weight.components):
        n = 4 * (w.n_modes + 1) + 16
        theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
        vals = w(theta)
        length = circle.radius * vals.sum() * (2 * np.pi / n)
        dense = w(np.linspace(0, 2 * np.pi, max(256, 16 * (w.n_modes + 1)), endpoint=False))
        comps.append(ComponentArclength(circle.radius, w, float(length),
                                        2 * np.pi * circle.radius, float(circle.radius * dense.min())))
    return ArclengthMap(tuple(comps))


def weight_decay_rate(series: WeightSeries) -> float:
    """Fitted exponential decay rate of |g_k|; +inf when too few modes to fit.

    Stands in for the analytic modulus of g, which is not computable from
    finitely many coefficients.
    """
    from .rates import TooFewSamples, fit_exponential

    mags = np.hypot(series.cos, series.sin)
    ks = np.arange(1, len(mags) + 1)
    try:
        fit = fit_exponential(ks, mags, noise_floor=1e-300)
    except TooFewSamples:
        return np.inf
    return float(-fit.slope)


def nearest_boundary(domain: KoebeDomain, points) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest boundary circle and the (positive-inside) distance to it."""
    d = domain.distance_to_boundary(points)
    j = np.argmin(np.abs(d), axis=-1)
    return j, np.take_along_axis(d, j[..., None], axis=-1)[..., 0]


def circle_angles(circle: Circle, points) -> tuple[np.ndarray, np.ndarray]:
    z = _as_complex(points) - circle.c
    return np.abs(z), np.angle(z) % (2 * np.pi)


__all__: Sequence[str] = [
    "Circle", "WeightSeries", "ConformalWeight", "KoebeDomain", "ArclengthMap",
    "ComponentArclength", "validate_domain", "arclength_map", "annulus", "disk",
    "weight_preset", "GeometryError", "OverlapError", "OutsideOuter", "NonPositiveWeight",
]
