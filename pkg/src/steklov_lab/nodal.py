"""Interior eigenfunctions, nodal-set tracing and interior diagnostics.

Interior values come from the Green representation u = Dl phi + Sl(lambda g phi),
evaluated either by periodic quadrature (bulk only) or by the exact multipole
series of each circle's layer potentials (valid up to the boundary).  On the
disk and the concentric annulus the closed forms are used instead, with mode
and phase read off the computed boundary trace.

Nodal sets are traced by marching squares on parameter patches: a polar grid
in each boundary collar and a Cartesian grid in the bulk, with quadtree
refinement of cells whose 3x3 sub-samples disagree with their corners, and
crossing points polished along cell edges by false position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .annulus_oracle import AnnulusEigenpair, annulus_eigenpair, annulus_eigenvalues
from .dtn_solver import SteklovSpectrum
from .geometry import KoebeDomain, _as_complex, arclength_map
from .layer_ops import (BoundaryDensity, TooCloseToBoundary, evaluate_layer, layer_series_pair,
                        weight_multiplication_block)
from .quasimode import collar_width, rate_constants
from .rates import RateFit, TooFewSamples, fit_exponential

SCHEMA_VERSION = 1


class NoStrategy(ValueError):
    pass


class ResolutionTooCoarse(RuntimeError):
    pass


class DiskOutsideDomain(ValueError):
    pass


# ----------------------------------------------------------------------------------------
# Interior evaluation

def preset_kind(domain: KoebeDomain) -> str | None:
    """'disk' or 'annulus' for the closed-form presets (unit outer circle at the origin, g = 1)."""
    if not domain.weight.is_constant:
        return None
    o = domain.outer
    if o.center != (0.0, 0.0) or o.radius != 1.0:
        return None
    if not domain.inners:
        return "disk"
    if len(domain.inners) == 1 and domain.inners[0].center == (0.0, 0.0):
        return "annulus"
    return None


@dataclass
class _Oracle:
    k: int
    A: float
    B: float
    radial_fn: object      # r -> R(r)
    radial_dr: object      # r -> R'(r)
    pair: AnnulusEigenpair | None = None


def _oracle_for(spectrum: SteklovSpectrum, n: int, kind: str) -> _Oracle:
    phi = spectrum.eigenfunction(n)
    lam = float(spectrum.eigenvalues[n])
    M = phi.M
    mass = np.abs(phi.coeffs) ** 2
    folded = mass[:, M:].copy()
    folded[:, 1:] += mass[:, :M][:, ::-1]
    comp, k = np.unravel_index(np.argmax(folded), folded.shape)
    c_k = phi.coeffs[comp, M + k]
    if k == 0:
        A, B = float(c_k.real), 0.0
    else:
        A, B = float(2 * c_k.real), float(-2 * c_k.imag)
    if kind == "disk":
        rho = 1.0
        return _Oracle(int(k), A, B, lambda r, k=k: r ** k,
                       lambda r, k=k: k * r ** (k - 1) if k > 0 else 0 * r)
    eps = spectrum.domain.inners[0].radius
    if k == 0 and abs(lam) < 0.5 * min(1.0, eps):
        return _Oracle(0, A, B, lambda r: np.ones_like(r), lambda r: np.zeros_like(r))
    if k == 0:
        pair = annulus_eigenpair(eps, 0)
    else:
        lo, hi = annulus_eigenvalues(eps, int(k))
        pair = annulus_eigenpair(eps, int(k), "near-k" if abs(lam - lo) <= abs(lam - hi) else "near-k/eps")
    rho = 1.0 if comp == 0 else eps
    scale = float(pair.radial(rho))
    return _Oracle(int(k), A, B, lambda r: pair.radial(r) / scale,
                   lambda r: pair.radial_derivative(r) / scale, pair)


@dataclass
class InteriorField:
    """Interior extension of the n-th boundary eigenfunction."""

    spectrum: SteklovSpectrum
    n: int
    strategy: str = "auto"          # auto | oracle | series | quadrature
    floor: float | None = None
    _oracle: _Oracle | None = field(default=None, repr=False)
    _phi: BoundaryDensity | None = field(default=None, repr=False)
    _flux: BoundaryDensity | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= self.n < len(self.spectrum.eigenvalues):
            raise IndexError(f"eigenvalue index {self.n} outside computed range")
        kind = preset_kind(self.domain)
        if self.strategy == "auto":
            self.strategy = "oracle" if kind else "series"
        if self.strategy == "oracle":
            if kind is None:
                raise NoStrategy("closed-form evaluation needs the disk or annulus preset")
            self._oracle = _oracle_for(self.spectrum, self.n, kind)
        elif self.strategy not in ("series", "quadrature"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        phi = self.spectrum.eigenfunction(self.n)
        lam = self.eigenvalue
        flux = np.array([weight_multiplication_block(w, phi.M) @ c
                         for w, c in zip(self.domain.weight.components, phi.coeffs)])
        self._phi = phi
        self._flux = BoundaryDensity(lam * flux)
        if self.floor is None:
            self.floor = 0.01 * self.domain.outer.radius

    @property
    def domain(self) -> KoebeDomain:
        return self.spectrum.domain

    @property
    def eigenvalue(self) -> float:
        return float(self.spectrum.eigenvalues[self.n])

    def _oracle_eval(self, z, gradient):
        o = self._oracle
        w = z
        r = np.abs(w)
        th = np.angle(w)
        T = o.A * np.cos(o.k * th) + o.B * np.sin(o.k * th)
        R = o.radial_fn(r)
        val = R * T
        if not gradient:
            return val
        Tp = o.k * (-o.A * np.sin(o.k * th) + o.B * np.cos(o.k * th))
        r_safe = np.where(r > 0, r, 1.0)
        ur = o.radial_dr(r) * T
        ut = np.where(r > 0, R / r_safe, 0.0) * Tp
        cs, sn = np.cos(th), np.sin(th)
        return val, cs * ur - sn * ut, sn * ur + cs * ut

    def evaluate(self, points, gradient: bool = False):
        z = np.asarray(_as_complex(points))
        if self.strategy == "oracle":
            return self._oracle_eval(z, gradient)
        if self.strategy == "quadrature":
            if gradient:
                raise NoStrategy("quadrature strategy has no gradient; use 'series'")
            try:
                return (evaluate_layer(self.domain, self._phi, "double", z, self.floor)
                        + evaluate_layer(self.domain, self._flux, "single", z, self.floor))
            except TooCloseToBoundary as exc:
                raise NoStrategy(str(exc)) from exc
        return layer_series_pair(self.domain, self._phi, self._flux, z, gradient=gradient)

    def __call__(self, points):
        return self.evaluate(points)

    def gradient(self, points):
        _, gx, gy = self.evaluate(points, gradient=True)
        return gx, gy


def evaluate_interior(spectrum: SteklovSpectrum, n: int, points, gradient: bool = False,
                      strategy: str = "auto"):
    return InteriorField(spectrum, n, strategy).evaluate(points, gradient=gradient)


# ----------------------------------------------------------------------------------------
# Dominant / residual classification

@dataclass
class Classification:
    tags: list[str]            # "dominant" | "residual" per component
    norms: np.ndarray
    threshold: float
    delta: float
    eigenvalue: float

    @property
    def dominant(self) -> np.ndarray:
        return np.array([t == "dominant" for t in self.tags])


def classify_components(norms, delta: float, lam: float) -> Classification:
    """Component j is dominant when ||u||_{L2(dD_j)} >= exp(-delta lambda / 3)."""
    norms = np.asarray(norms, dtype=float)
    thr = float(np.exp(-delta * lam / 3))
    tags = ["dominant" if v >= thr else "residual" for v in norms]
    return Classification(tags, norms, thr, float(delta), float(lam))


# ----------------------------------------------------------------------------------------
# Contour extraction

@dataclass
class Patch:
    name: str
    u: tuple[float, float, int]     # lo, hi, cells
    v: tuple[float, float, int]
    to_xy: object                   # (u, v) -> complex
    keep: object = None             # (xy centers, half diagonal) -> bool mask of cells to trace
    clip: object = None             # segments (p, q) -> list of clipped pieces


@dataclass
class NodalSet:
    polylines: list[np.ndarray]     # complex vertex arrays
    kinds: list[str]                # "open-arc" | "closed-loop"
    segments: dict[str, np.ndarray]  # region -> (n, 2) complex segment endpoints
    grid: dict
    band: float                     # max |u| at traced vertices relative to the field scale
    scale: float
    midpoint_band: float = 0.0      # same at segment midpoints

    def region_lengths(self) -> dict[str, float]:
        return {k: float(np.sum(np.abs(s[:, 1] - s[:, 0]))) if len(s) else 0.0
                for k, s in self.segments.items()}


def _signs(f):
    return f > 0


def _polish(field, to_xy, P, Q, fP, fQ, iters: int = 30, tol: float = 1e-13):
    """Zero of the field on each segment P->Q (param space) by the Illinois method."""
    t_lo = np.zeros(len(P))
    t_hi = np.ones(len(P))
    f_lo, f_hi = fP.astype(float).copy(), fQ.astype(float).copy()
    t = t_lo.copy()
    active = np.ones(len(P), dtype=bool)
    side = np.zeros(len(P), dtype=int)
    for _ in range(iters):
        if not active.any():
            break
        denom = f_hi - f_lo
        t_new = np.where(denom != 0, (t_lo * f_hi - t_hi * f_lo) / np.where(denom != 0, denom, 1), 0.5 * (t_lo + t_hi))
        t_new = np.clip(t_new, t_lo, t_hi)
        idx = np.nonzero(active)[0]
        f_new = np.zeros(len(P))
        f_new[idx] = field(to_xy(*(P[idx] + t_new[idx, None] * (Q[idx] - P[idx])).T))
        t = np.where(active, t_new, t)
        same_lo = (f_new > 0) == (f_lo > 0)
        upd = active & same_lo
        t_lo = np.where(upd, t_new, t_lo)
        f_lo = np.where(upd, f_new, f_lo)
        f_hi = np.where(upd & (side == 1), 0.5 * f_hi, f_hi)
        upd2 = active & ~same_lo
        t_hi = np.where(upd2, t_new, t_hi)
        f_hi = np.where(upd2, f_new, f_hi)
        f_lo = np.where(upd2 & (side == -1), 0.5 * f_lo, f_lo)
        side = np.where(upd, 1, np.where(upd2, -1, side))
        active &= (np.abs(t_hi - t_lo) > tol) & (f_new != 0)
    return P + t[:, None] * (Q - P)


_SUB = 5
_OFFSET = (np.sqrt(2) - 1, (np.sqrt(5) - 1) / 2 - 0.5)


def _perimeter(n):
    e = n - 1
    path = [(0, j) for j in range(e)] + [(i, e) for i in range(e)]
    path += [(e, j) for j in range(e, 0, -1)] + [(i, 0) for i in range(e, 0, -1)]
    return np.array(path)


_PERIM = _perimeter(_SUB)


def _changes(signs_seq):
    return np.sum(signs_seq != np.roll(signs_seq, -1, axis=0), axis=0)


def _trace_patch(field, patch: Patch, max_depth: int):
    u0, u1, nu = patch.u
    v0, v1, nv = patch.v
    du, dv = (u1 - u0) / nu, (v1 - v0) / nv
    iu, iv = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    cu = (u0 + iu.ravel() * du)
    cv = (v0 + iv.ravel() * dv)
    if patch.keep is not None:
        centers = patch.to_xy(cu + du / 2, cv + dv / 2)
        half = 0.5 * np.abs(patch.to_xy(cu + du, cv + dv) - patch.to_xy(cu, cv))
        mask = patch.keep(centers, half)
        cu, cv = cu[mask], cv[mask]
    sizes = (np.full(cu.shape, du), np.full(cv.shape, dv))
    leaves = []
    n_refined = 0
    depth = 0
    while cu.size:
        hu, hv = sizes
        # SUB x SUB samples per cell
        offs = np.linspace(0.0, 1.0, _SUB)
        UU = np.broadcast_to(cu[None, None, :] + offs[None, :, None] * hu[None, None, :], (_SUB, _SUB, cu.size))
        VV = np.broadcast_to(cv[None, None, :] + offs[:, None, None] * hv[None, None, :], (_SUB, _SUB, cu.size))
        F = field(patch.to_xy(UU.ravel(), VV.ravel())).reshape(_SUB, _SUB, cu.size)   # F[v, u, cell]
        S = _signs(F)
        perim = S[_PERIM[:, 0], _PERIM[:, 1]]
        e = _SUB - 1
        corners = np.array([S[0, 0], S[0, e], S[e, e], S[e, 0]])
        c_fine, c4 = _changes(perim), _changes(corners)
        inner = S[1:e, 1:e].reshape(-1, cu.size)
        hidden = (c4 == 0) & np.any(inner != S[0, 0], axis=0)
        flag = (c_fine != c4) | hidden | (c4 == 4)
        if depth >= max_depth:
            flag[:] = False
        leaf = ~flag
        leaves.append((cu[leaf], cv[leaf], hu[leaf], hv[leaf], F[:, :, leaf]))
        if flag.any():
            n_refined += int(flag.sum())
            fu, fv, fhu, fhv = cu[flag], cv[flag], hu[flag] / 2, hv[flag] / 2
            cu = np.concatenate([fu, fu + fhu, fu, fu + fhu])
            cv = np.concatenate([fv, fv, fv + fhv, fv + fhv])
            sizes = (np.tile(fhu, 4), np.tile(fhv, 4))
        else:
            cu = np.zeros(0)
        depth += 1

    # marching squares on the leaves
    P_list, Q_list, fP_list, fQ_list, pair_a, pair_b = [], [], [], [], [], []
    count = 0
    for lu, lv, hu, hv, F in leaves:
        if lu.size == 0:
            continue
        a = np.stack([lu, lv], 1)
        b = np.stack([lu + hu, lv], 1)
        c = np.stack([lu + hu, lv + hv], 1)
        d = np.stack([lu, lv + hv], 1)
        e = _SUB - 1
        fa, fb, fc, fd, fm = F[0, 0], F[0, e], F[e, e], F[e, 0], F[e // 2, e // 2]
        edges = [(a, b, fa, fb), (b, c, fb, fc), (d, c, fd, fc), (a, d, fa, fd)]
        crossed = np.array([_signs(e[2]) != _signs(e[3]) for e in edges])   # (4, cells)
        ids = np.full((4, lu.size), -1)
        for k, (p, q, fp, fq) in enumerate(edges):
            sel = np.nonzero(crossed[k])[0]
            ids[k, sel] = count + np.arange(sel.size)
            count += sel.size
            P_list.append(p[sel]); Q_list.append(q[sel]); fP_list.append(fp[sel]); fQ_list.append(fq[sel])
        ncross = crossed.sum(0)
        two = np.nonzero(ncross == 2)[0]
        for cell in two:
            e = np.nonzero(crossed[:, cell])[0]
            pair_a.append(ids[e[0], cell]); pair_b.append(ids[e[1], cell])
        four = np.nonzero(ncross == 4)[0]
        for cell in four:
            if _signs(fm[cell]) == _signs(fa[cell]):
                pairs = ((0, 1), (2, 3))
            else:
                pairs = ((0, 3), (1, 2))
            for e0, e1 in pairs:
                pair_a.append(ids[e0, cell]); pair_b.append(ids[e1, cell])
    if count == 0:
        return np.zeros((0, 2), dtype=complex), n_refined, 0
    P = np.concatenate(P_list); Q = np.concatenate(Q_list)
    fP = np.concatenate(fP_list); fQ = np.concatenate(fQ_list)
    # orient edges canonically so shared edges polish identically
    swap = (P[:, 0] > Q[:, 0]) | ((P[:, 0] == Q[:, 0]) & (P[:, 1] > Q[:, 1]))
    P[swap], Q[swap] = Q[swap].copy(), P[swap].copy()
    fP[swap], fQ[swap] = fQ[swap].copy(), fP[swap].copy()
    X = _polish(field, patch.to_xy, P, Q, fP, fQ)
    pts = patch.to_xy(X[:, 0], X[:, 1])
    segs = np.stack([pts[np.array(pair_a, dtype=int)], pts[np.array(pair_b, dtype=int)]], 1)
    return segs, n_refined, len(leaves)


def _seam_polish(field, pts, constraints, tol=1e-12, iters=8):
    """Move clipped endpoints along their seam circle onto the zero set (secant steps)."""
    pts = pts.copy()
    for c, rad, _ in constraints:
        on = np.abs(np.abs(pts - c) - rad) <= 1e-9 * rad
        if not on.any():
            continue
        th = np.angle(pts[on] - c)
        h = 1e-7
        for _ in range(iters):
            f0 = field(c + rad * np.exp(1j * th))
            f1 = field(c + rad * np.exp(1j * (th + h)))
            slope = (f1 - f0) / h
            step = np.where(slope != 0, -f0 / np.where(slope != 0, slope, 1), 0.0)
            step = np.clip(step, -1e-3, 1e-3)
            th = th + step
            if np.all(np.abs(step) < tol):
                break
        pts[on] = c + rad * np.exp(1j * th)
    return pts


def _clip_segments(segs, constraints):
    """Keep the parts of segments satisfying every constraint (center, radius, inside?)."""
    out = []
    for p, q in segs:
        lo, hi = 0.0, 1.0
        pieces = [(0.0, 1.0)]
        dvec = q - p
        for c, rad, inside in constraints:
            w = p - c
            A = abs(dvec) ** 2
            B = 2 * (w.real * dvec.real + w.imag * dvec.imag)
            C = abs(w) ** 2 - rad * rad
            disc = B * B - 4 * A * C
            if A == 0:
                ok = (C <= 0) == inside
                pieces = pieces if ok else []
                continue
            if disc <= 0:
                t1 = t2 = None
            else:
                sq = np.sqrt(disc)
                t1, t2 = (-B - sq) / (2 * A), (-B + sq) / (2 * A)
            if inside:
                allowed = [] if t1 is None else [(t1, t2)]
            else:
                allowed = [(-np.inf, np.inf)] if t1 is None else [(-np.inf, t1), (t2, np.inf)]
            new = []
            for a, b in pieces:
                for x, y in allowed:
                    s, e = max(a, x), min(b, y)
                    if e > s:
                        new.append((s, e))
            pieces = new
        for s, e in pieces:
            out.append((p + s * dvec, p + e * dvec))
    return np.array(out, dtype=complex).reshape(-1, 2)


def _assemble_polylines(all_segs: np.ndarray, tol: float):
    if len(all_segs) == 0:
        return [], []
    pts = np.concatenate([all_segs[:, 0], all_segs[:, 1]])
    tree = cKDTree(np.stack([pts.real, pts.imag], 1))
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(tol):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(pts))])
    ns = len(all_segs)
    a, b = roots[:ns], roots[ns:]
    adj: dict[int, list[tuple[int, int]]] = {}
    for s in range(ns):
        if a[s] == b[s]:
            continue
        adj.setdefault(a[s], []).append((s, b[s]))
        adj.setdefault(b[s], []).append((s, a[s]))
    used = np.zeros(ns, dtype=bool)
    used[a == b] = True
    coord = {r: pts[r] for r in set(roots.tolist())}
    lines, kinds = [], []

    def walk(start, seg, nxt):
        path = [coord[start]]
        cur = start
        while True:
            used[seg] = True
            path.append(coord[nxt])
            cur = nxt
            if len(adj[cur]) != 2:
                break
            cand = [(s, o) for s, o in adj[cur] if not used[s]]
            if not cand:
                break
            seg, nxt = cand[0]
        return np.array(path), cur

    for node, nb in adj.items():
        if len(nb) != 2:
            for s, o in nb:
                if not used[s]:
                    path, _ = walk(node, s, o)
                    lines.append(path); kinds.append("open-arc")
    for node, nb in adj.items():
        for s, o in nb:
            if not used[s]:
                path, end = walk(node, s, o)
                lines.append(path)
                kinds.append("closed-loop" if end == node else "open-arc")
    return lines, kinds


@dataclass
class GridSpec:
    h: float | None = None                  # bulk cell size; default from lambda
    cells_per_wavelength: float = 16.0
    max_depth: int = 6
    collar: float | None = None             # collar width; default min(0.2 R, gap/2)
    components: tuple[int, ...] | None = None   # collars to trace (default: all)

    def refined(self) -> "GridSpec":
        h = None if self.h is None else self.h / 2
        return GridSpec(h, 2 * self.cells_per_wavelength, self.max_depth, self.collar, self.components)


def _patches(domain: KoebeDomain, lam: float, spec: GridSpec, traced: list[int]):
    R = domain.outer.radius
    w = collar_width(domain) if spec.collar is None else spec.collar
    wl = 2 * np.pi / max(lam, 1.0)
    h = spec.h if spec.h is not None else min(0.02 * R, wl / spec.cells_per_wavelength)
    h = min(h, w / 4)
    L = arclength_map(domain).lengths
    patches = []
    for j, (circle, sgn) in enumerate(zip(domain.circles, domain.orientation)):
        if j not in traced:
            continue
        n_theta = int(max(256, np.ceil(spec.cells_per_wavelength * lam * L[j] / (2 * np.pi))))
        n_theta = int(max(n_theta, np.ceil(2 * np.pi * circle.radius / h)))
        n_r = int(max(4, np.ceil(w / min(h, w / 8))))
        r_lo, r_hi = (circle.radius - w, circle.radius) if sgn > 0 else (circle.radius, circle.radius + w)
        c = circle.c
        t0 = _OFFSET[0] * 2 * np.pi / n_theta
        patches.append(Patch(f"collar_{j}", (r_lo, r_hi, n_r), (t0, t0 + 2 * np.pi, n_theta),
                             lambda r, t, c=c: c + r * np.exp(1j * t)))
    cx, cy = domain.outer.center
    n = int(np.ceil(2 * R / h)) + 1
    # irrational offsets keep symmetry lines of the presets off the grid lines
    x0, y0 = cx - R - _OFFSET[0] * h, cy - R - _OFFSET[1] * h
    constraints = [(circ.c, circ.radius - w if sgn > 0 else circ.radius + w, sgn > 0)
                   for circ, sgn in zip(domain.circles, domain.orientation)]

    def keep(centers, half):
        d = domain.distance_to_boundary(centers)
        return np.all(d - w > -half[..., None] - 1e-12, axis=-1)

    def clip(segs, field):
        out = _clip_segments(segs, constraints)
        if len(out):
            out = _seam_polish(field, out.ravel(), constraints).reshape(-1, 2)
        return out

    patches.append(Patch("bulk", (x0, x0 + n * h, n), (y0, y0 + n * h, n),
                         lambda x, y: x + 1j * y, keep, clip))
    return patches, {"h": h, "collar": w, "n_bulk": n}


def trace_nodal_set(field: InteriorField, spec: GridSpec | None = None) -> NodalSet:
    spec = spec or GridSpec()
    domain = field.domain
    lam = field.eigenvalue
    traced = list(range(domain.n_components)) if spec.components is None else list(spec.components)
    patches, grid = _patches(domain, lam, spec, traced)
    grid["max_depth"] = spec.max_depth
    segments = {}
    refined = {}
    for p in patches:
        segs, n_ref, _ = _trace_patch(field, p, spec.max_depth)
        if p.clip is not None and len(segs):
            segs = p.clip(segs, field)
        segments[p.name] = segs
        refined[p.name] = n_ref
        if p.name.startswith("collar"):
            grid[f"{p.name}_cells"] = [p.u[2], p.v[2]]
    for j in range(domain.n_components):
        segments.setdefault(f"collar_{j}", np.zeros((0, 2), dtype=complex))
    grid["refined_cells"] = refined
    all_segs = np.concatenate([s for s in segments.values()]) if segments else np.zeros((0, 2), complex)
    lines, kinds = _assemble_polylines(all_segs, 1e-7 * domain.outer.radius)
    # field scale and band over the traced vertices
    probe = np.linspace(-1, 1, 101)
    X, Y = np.meshgrid(probe, probe)
    zz = domain.outer.c + domain.outer.radius * (X + 1j * Y)
    zz = zz[domain.contains(zz)]
    scale = float(np.max(np.abs(field(zz)))) if zz.size else 0.0
    band = mid = 0.0
    if len(all_segs) and scale > 0:
        band = float(np.max(np.abs(field(all_segs.ravel())))) / scale
        mid = float(np.max(np.abs(field(all_segs.mean(axis=1))))) / scale
    return NodalSet(lines, kinds, segments, grid, band, scale, mid)


def nodal_length(nodal: NodalSet) -> float:
    return float(sum(nodal.region_lengths().values()))


@dataclass
class NodalReport:
    n: int
    eigenvalue: float
    length: float
    ratio: float
    regions: dict[str, float]
    tags: list[str]
    norms: list[float]
    grid: dict
    coarse_length: float
    converged: bool
    excluded: list[dict]
    band: float
    domain_hash: str

    def to_json(self, config_hash: str = "") -> str:
        doc = {"schema_version": SCHEMA_VERSION, "domain_hash": self.domain_hash,
               "config_hash": config_hash, "n": self.n, "lambda": self.eigenvalue,
               "length": self.length, "ratio": self.ratio, "regions": self.regions,
               "tags": self.tags, "norms": self.norms, "grid": self.grid,
               "coarse_length": self.coarse_length, "converged": self.converged,
               "excluded": self.excluded, "band": self.band}
        return json.dumps(doc, indent=1, sort_keys=True, default=float)


def nodal_report(spectrum: SteklovSpectrum, n: int, spec: GridSpec | None = None,
                 delta: float | None = None, strategy: str = "auto", strict: bool = False,
                 exclude_residual: bool = False):
    """Trace at two resolutions; report the fine-grid length and the refinement flag.

    Residual collars are traced unless ``exclude_residual`` is set; the series
    evaluation stays accurate there.  The quadrature strategy cannot reach the
    collars and traces the bulk only.  Returns (NodalReport, fine-grid NodalSet).
    """
    spec = spec or GridSpec()
    field_ = InteriorField(spectrum, n, strategy)
    domain = spectrum.domain
    lam = field_.eigenvalue
    norms = spectrum.component_norms(n)
    if delta is None:
        delta = rate_constants(domain).delta
    cls = classify_components(norms, delta, lam)
    traced = list(range(domain.n_components))
    if field_.strategy == "quadrature":
        traced = []
    elif exclude_residual and field_.strategy != "oracle":
        traced = [j for j in traced if cls.tags[j] == "dominant"]
    excluded = [{"component": j, "bound": cls.threshold}
                for j in range(domain.n_components) if j not in traced]
    base = GridSpec(spec.h, spec.cells_per_wavelength, spec.max_depth, spec.collar, tuple(traced))
    if abs(lam) < 1e-8:
        empty = NodalSet([], [], {"bulk": np.zeros((0, 2), complex)}, {}, 0.0, 1.0)
        rep = NodalReport(n, lam, 0.0, 0.0, {"bulk": 0.0}, cls.tags, norms.tolist(), {}, 0.0,
                          True, excluded, 0.0, domain.hash)
        return rep, empty
    coarse = trace_nodal_set(field_, base)
    fine_spec = base.refined()
    fine_spec.h = coarse.grid["h"] / 2
    fine = trace_nodal_set(field_, fine_spec)
    Lc, Lf = nodal_length(coarse), nodal_length(fine)
    converged = abs(Lf - Lc) <= 0.01 * max(Lf, 1e-300)
    if strict and not converged:
        raise ResolutionTooCoarse(f"length changed from {Lc:.6g} to {Lf:.6g} under refinement")
    rep = NodalReport(n, lam, Lf, Lf / lam, fine.region_lengths(), cls.tags, norms.tolist(),
                      fine.grid, Lc, bool(converged), excluded, fine.band, domain.hash)
    return rep, fine


def collar_sign_changes(field: InteriorField, j: int, depth: float, n: int = 4096) -> int:
    """Sign changes of u around the circle at the given depth inside component j's collar."""
    circle = field.domain.circles[j]
    sgn = field.domain.orientation[j]
    r = circle.radius - sgn * depth
    th = 2 * np.pi * np.arange(n) / n
    vals = field(circle.c + r * np.exp(1j * th))
    s = vals > 0
    return int(np.sum(s != np.roll(s, 1)))


# ----------------------------------------------------------------------------------------
# SVG

def nodal_svg(nodal: NodalSet, domain: KoebeDomain, title: str = "") -> str:
    """Fixed 1000x1000 view box: boundary circles in grey (stroke 2), nodal lines black (stroke 1.5)."""
    R = domain.outer.radius
    c = domain.outer.c

    def tx(z):
        z = (np.asarray(z) - c) / R
        return 500 + 480 * z.real, 500 - 480 * z.imag

    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="1000" height="1000" viewBox="0 0 1000 1000">']
    if title:
        out.append(f"<title>{title}</title>")
    out.append('<rect width="1000" height="1000" fill="white"/>')
    for circ in domain.circles:
        x, y = tx(circ.c)
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{480 * circ.radius / R:.3f}" '
                   'fill="none" stroke="#888888" stroke-width="2"/>')
    for line in nodal.polylines:
        x, y = tx(line)
        pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------------------------------
# Decay and frequency diagnostics

@dataclass
class DecayProfile:
    component: int
    depths: np.ndarray
    sup: np.ndarray
    eigenvalue: float
    fit: RateFit | None
    decaying: bool


def admissible_depths(domain: KoebeDomain, component: int, depths) -> np.ndarray:
    """Depths whose sampling circle about component j stays inside the domain."""
    circle = domain.circles[component]
    sgn = domain.orientation[component]
    th = 2 * np.pi * np.arange(256) / 256
    keep = [d for d in depths if circle.radius - sgn * d > 0
            and np.all(domain.contains(circle.c + (circle.radius - sgn * d) * np.exp(1j * th)))]
    return np.array(keep, dtype=float)


def decay_profile(field: InteriorField, component: int, depths, n_angles: int | None = None,
                  noise_floor: float = 0.0) -> DecayProfile:
    """sup |u| on circles at the given depths inside component j; fit log sup vs depth * lambda."""
    depths = np.asarray(depths, dtype=float)
    lam = field.eigenvalue
    circle = field.domain.circles[component]
    sgn = field.domain.orientation[component]
    n_ang = n_angles or int(max(512, 32 * lam))
    th = 2 * np.pi * np.arange(n_ang) / n_ang
    sup = np.empty(depths.size)
    for i, d in enumerate(depths):
        r = circle.radius - sgn * d
        pts = circle.c + r * np.exp(1j * th)
        if not r > 0 or not np.all(field.domain.contains(pts)):
            raise ValueError(f"depth {d:g} leaves the domain")
        sup[i] = np.max(np.abs(field(pts)))
    fit = None
    try:
        fit = fit_exponential(depths * lam, sup, noise_floor)
    except TooFewSamples:
        pass
    decaying = bool(fit is not None and lam > 1e-8 and fit.slope < -1e-3)
    return DecayProfile(component, depths, sup, lam, fit, decaying)


@dataclass
class SyntheticField:
    """A field given by value and gradient callables on complex points."""

    value: object
    grad: object
    domain: KoebeDomain | None = None

    def __call__(self, points):
        return self.value(np.asarray(_as_complex(points)))

    def gradient(self, points):
        return self.grad(np.asarray(_as_complex(points)))


def harmonic_polynomial(n: int, coeff: complex = 1.0) -> SyntheticField:
    """Re(coeff z^n) with its exact gradient."""
    def value(z):
        return np.real(coeff * z ** n)

    def grad(z):
        d = coeff * n * z ** (n - 1) if n > 0 else 0 * z
        return np.real(d), -np.imag(d)

    return SyntheticField(value, grad)


def almgren_frequency(field, center, r: float, n_r: int = 64, n_theta: int = 64) -> float:
    """N = 2 r int_{B_r} |grad u|^2 / int_{dB_r} u^2 by Gauss-Legendre x trapezoid quadrature."""
    if not r > 0:
        raise ValueError("radius must be positive")
    c = complex(*center) if not np.iscomplexobj(center) and np.ndim(center) else complex(center)
    domain = getattr(field, "domain", None)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    ring = c + r * np.exp(1j * th)
    if domain is not None and not np.all(domain.contains(ring)):
        raise DiskOutsideDomain(f"disk of radius {r:g} about {c} leaves the domain")
    x, wx = np.polynomial.legendre.leggauss(n_r)
    rr = 0.5 * r * (x + 1)
    wr = 0.5 * r * wx
    pts = c + rr[:, None] * np.exp(1j * th[None, :])
    gx, gy = field.gradient(pts.ravel())
    energy = np.sum(((gx ** 2 + gy ** 2).reshape(pts.shape) * rr[:, None]) * wr[:, None]) * (2 * np.pi / n_theta)
    bound = np.sum(field(ring) ** 2) * r * (2 * np.pi / n_theta)
    if bound == 0:
        raise ZeroDivisionError("u vanishes on the sphere")
    return float(2 * r * energy / bound)
