"""Run configuration: TOML domain files and solver/tracing parameters."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import (Circle, ConformalWeight, GeometryError, KoebeDomain, WeightSeries, annulus, disk,
                       weight_preset)


class ConfigError(ValueError):
    pass


def _weight(spec) -> WeightSeries:
    if spec is None:
        return WeightSeries(1.0)
    if "preset" in spec:
        return weight_preset(spec["preset"], float(spec.get("amplitude", 0.5)))
    return WeightSeries(float(spec.get("mean", 1.0)), tuple(spec.get("cos", ())), tuple(spec.get("sin", ())))


def domain_from_dict(d: dict) -> KoebeDomain:
    """Build a domain from a [domain] table.

    Either ``preset = "disk" | "annulus"`` (with ``eps``), or explicit ``outer`` and
    ``inners`` circles.  ``weight`` applies to every component, ``weights`` lists
    one series per component.
    """
    kw = {}
    if "scale_factor" in d:
        kw["scale_factor"] = float(d["scale_factor"])
    if "min_gap" in d:
        kw["min_gap"] = float(d["min_gap"])
    preset = d.get("preset")
    if preset == "disk":
        return disk(_weight(d.get("weight")), **kw)
    if preset == "annulus":
        if "eps" not in d:
            raise ConfigError("annulus preset needs eps")
        return annulus(float(d["eps"]), _weight(d.get("weight")), **kw)
    if preset is not None:
        raise ConfigError(f"unknown domain preset {preset!r}")
    try:
        outer = Circle(tuple(d["outer"]["center"]), float(d["outer"]["radius"]))
        inners = tuple(Circle(tuple(c["center"]), float(c["radius"])) for c in d.get("inners", []))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed circle specification: {exc}") from exc
    n = 1 + len(inners)
    if "weights" in d:
        ws = tuple(_weight(w) for w in d["weights"])
        if len(ws) != n:
            raise GeometryError(f"{len(ws)} weights given for {n} boundary components")
        weight = ConformalWeight(ws)
    else:
        weight = ConformalWeight.uniform(n, _weight(d.get("weight")))
    return KoebeDomain(outer, inners, weight, **kw)


@dataclass
class RunConfig:
    domain_spec: dict
    m_max: int = 128
    n_max: int = 40
    cluster_eps: float | None = None        # default 0.9 pi / (2 k L)
    delta: float | None = None              # default from rate_constants
    collar: float | None = None             # default min(0.2 R, gap / 2)
    cells_per_wavelength: float = 16.0
    max_depth: int = 6
    defect_modes: tuple[int, ...] = (4, 8, 12, 16, 20)
    decay_depths: tuple[float, ...] = (0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2)
    out: str = "out"
    seed: int = 0
    source: str = field(default="", compare=False)

    def __post_init__(self):
        m = self.m_max
        if not (isinstance(m, int) and 32 <= m <= 4096 and m & (m - 1) == 0):
            raise ConfigError(f"m_max must be a power of two in [32, 4096], got {m}")
        if self.n_max < 1:
            raise ConfigError("n_max must be positive")
        for name in ("cluster_eps", "delta", "collar"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.cells_per_wavelength > 0 or self.max_depth < 0:
            raise ConfigError("grid resolutions must be positive")
        if any(d <= 0 for d in self.decay_depths):
            raise ConfigError("decay depths must be positive")
        self.defect_modes = tuple(int(m) for m in self.defect_modes)
        self.decay_depths = tuple(float(d) for d in self.decay_depths)

    @property
    def domain(self) -> KoebeDomain:
        return domain_from_dict(self.domain_spec)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def config_from_dict(doc: dict, source: str = "") -> RunConfig:
    if "domain" not in doc:
        raise ConfigError("configuration needs a [domain] table")
    solver = doc.get("solver", {})
    qm = doc.get("quasimode", {})
    nodal = doc.get("nodal", {})
    run = doc.get("run", {})
    kw = dict(domain_spec=doc["domain"], source=source)
    for key in ("m_max", "n_max"):
        if key in solver:
            kw[key] = solver[key]
    if "eps" in qm:
        kw["cluster_eps"] = float(qm["eps"])
    if "defect_modes" in qm:
        kw["defect_modes"] = tuple(qm["defect_modes"])
    for key in ("delta", "collar", "cells_per_wavelength", "max_depth"):
        if key in nodal:
            kw[key] = nodal[key]
    if "decay_depths" in nodal:
        kw["decay_depths"] = tuple(nodal["decay_depths"])
    for key in ("out", "seed"):
        if key in run:
            kw[key] = run[key]
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc, str(path))
