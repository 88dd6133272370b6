"""steklov-lab command line: spectrum | quasimode | nodal | decay | oracle | report.

Exit codes: 0 success, 1 invalid domain or configuration, 2 flagged spurious
modes, 3 failed oracle cross-check.  Outputs carry the domain and config hashes
and contain no timestamps, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import nodal as nd
from .annulus_oracle import (annulus_eigenpair, annulus_eigenvalues, annulus_nodal_length, annulus_spectrum,
                             radial_eigenvalue)
from .config import ConfigError, RunConfig, load_config
from .dtn_solver import SCHEMA_VERSION, solve_spectrum, spectrum_gap_report
from .geometry import GeometryError, annulus, arclength_map, validate_domain
from .quasimode import (cluster_spectrum, coefficient_matrix, decompose_eigenfunction, decomposition_csv,
                        default_cluster_eps, defect_scan, near_orthogonality_report, rate_constants)

log = logging.getLogger("steklov_lab")

EXIT_OK, EXIT_DOMAIN, EXIT_SPURIOUS, EXIT_ORACLE = 0, 1, 2, 3


class Outputs:
    """Writes artifacts into one directory with a common provenance header."""

    def __init__(self, out: Path, domain_hash: str, config_hash: str):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.meta = {"schema_version": SCHEMA_VERSION, "domain_hash": domain_hash, "config_hash": config_hash}

    @property
    def csv_header(self) -> str:
        return "# " + ";".join(f"{k}={v}" for k, v in self.meta.items()) + "\n"

    def csv(self, name: str, header: list[str], rows) -> Path:
        buf = io.StringIO()
        buf.write(self.csv_header)
        w = csv.writer(buf, delimiter=";", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return self.text(name, buf.getvalue())

    def json(self, name: str, doc: dict) -> Path:
        doc = {**self.meta, **doc}
        return self.text(name, json.dumps(doc, indent=1, sort_keys=True, default=_jsonable) + "\n")

    def text(self, name: str, body: str) -> Path:
        path = self.out / name
        path.write_text(body)
        log.info("wrote %s", path)
        return path


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v)}")


def _fit(f):
    return None if f is None else f.to_dict()


def _solve(cfg: RunConfig, M: int | None = None):
    domain = cfg.domain
    validate_domain(domain)
    n_max = min(cfg.n_max, domain.n_components * (2 * (M or cfg.m_max) + 1) // 4)
    return solve_spectrum(domain, M or cfg.m_max, n_max)


def cmd_spectrum(cfg: RunConfig, args) -> int:
    sp = _solve(cfg)
    out = Outputs(args.out, sp.domain_hash, cfg.hash)
    rep = spectrum_gap_report(sp)
    out.text("spectrum.csv", rep.to_csv(out.csv_header))
    doc = json.loads(sp.to_json())
    doc.update({"gap_fit": _fit(rep.fit), "gap_status": rep.status, "noise_floor": rep.noise_floor,
                "n0": rep.n0, "flagged_pairs": rep.flagged_pairs,
                "component_fits": {str(k): _fit(v) for k, v in rep.component_fits.items()},
                "multiplicity_groups": sp.multiplicity_groups()})
    out.json("spectrum.json", doc)
    if sp.flagged:
        log.error("flagged eigenpairs (residual above tolerance): %s", sp.flagged)
        return EXIT_SPURIOUS
    return EXIT_OK


def cmd_quasimode(cfg: RunConfig, args) -> int:
    sp = _solve(cfg)
    domain = sp.domain
    out = Outputs(args.out, sp.domain_hash, cfg.hash)
    L = arclength_map(domain).lengths
    ms = [m for m in cfg.defect_modes if m <= sp.M // 2]
    rows, fits = [], {}
    for j in range(domain.n_components):
        scan = defect_scan(domain, sp.M, j, ms)
        rows += scan.to_rows()
        fits[str(j)] = _fit(scan.fit)
    out.csv("defects.csv", ["component", "m", "defect"], rows)

    eps = cfg.cluster_eps or default_cluster_eps(L)
    coeffs = coefficient_matrix(sp)
    part = cluster_spectrum(sp.eigenvalues, coeffs.comparison.values, eps, domain.n_components, float(L.max()))
    decomps = [decompose_eigenfunction(sp, part, coeffs, n) for n in range(len(sp.eigenvalues))]
    out.text("decomposition.csv", decomposition_csv(decomps, out.csv_header))
    out.text("clusters.csv", part.to_csv(out.csv_header))
    orth = near_orthogonality_report(coeffs, part)
    out.json("quasimode.json", {
        "eps": eps, "N": part.N, "defect_fits": fits,
        "f_norms": [d.f_norm for d in decomps],
        "frequency_violations": {str(d.n): d.frequency_violations() for d in decomps
                                 if d.cluster > 0 and d.frequency_violations()},
        "orthogonality": [{"cluster": r.cluster, "shape": list(r.shape), "dev_cols": r.dev_cols,
                           "dev_rows": r.dev_rows} for r in orth.rows],
        "orthogonality_fit": _fit(orth.fit_cols),
    })
    return EXIT_OK


def _indices(sp, args) -> list[int]:
    if args.all or args.n is None:
        return list(range(len(sp.eigenvalues)))
    if not 0 <= args.n < len(sp.eigenvalues):
        raise ConfigError(f"--n {args.n} outside the computed range 0..{len(sp.eigenvalues) - 1}")
    return [args.n]


def _grid(cfg: RunConfig) -> nd.GridSpec:
    return nd.GridSpec(None, cfg.cells_per_wavelength, cfg.max_depth, cfg.collar)


def cmd_nodal(cfg: RunConfig, args) -> int:
    sp = _solve(cfg)
    out = Outputs(args.out, sp.domain_hash, cfg.hash)
    rows = []
    regions = [f"collar_{j}" for j in range(sp.domain.n_components)] + ["bulk"]
    for n in _indices(sp, args):
        rep, ns = nd.nodal_report(sp, n, _grid(cfg), cfg.delta)
        out.text(f"nodal_{n:04d}.json", rep.to_json(cfg.hash) + "\n")
        out.text(f"nodal_{n:04d}.svg", nd.nodal_svg(ns, sp.domain, f"n={n} lambda={rep.eigenvalue:.10g} "
                                                                    f"domain={sp.domain_hash} config={cfg.hash}"))
        rows.append([n, rep.eigenvalue, rep.length, rep.ratio] + [rep.regions.get(r, 0.0) for r in regions]
                    + [int(rep.converged)])
    out.csv("nodal.csv", ["n", "lambda", "length", "ratio"] + regions + ["converged"], rows)
    ratios = [r[3] for r in rows if r[1] > 1e-8]
    if ratios:
        log.info("L/lambda over traced eigenfunctions: min %.4g max %.4g", min(ratios), max(ratios))
    return EXIT_OK


def cmd_decay(cfg: RunConfig, args) -> int:
    sp = _solve(cfg)
    out = Outputs(args.out, sp.domain_hash, cfg.hash)
    delta = cfg.delta or rate_constants(sp.domain).delta
    rows, fits = [], {}
    for n in _indices(sp, args):
        lam = float(sp.eigenvalues[n])
        if lam < 1e-8:
            continue
        field = nd.InteriorField(sp, n)
        cls = nd.classify_components(sp.component_norms(n), delta, lam)
        j = int(np.argmax(cls.norms))
        depths = nd.admissible_depths(sp.domain, j, cfg.decay_depths)
        if len(depths) < 3:
            continue
        prof = nd.decay_profile(field, j, depths)
        rows += [[n, j, d, s] for d, s in zip(prof.depths, prof.sup)]
        fits[str(n)] = {"component": j, "tags": cls.tags, "fit": _fit(prof.fit), "decaying": prof.decaying}
    out.csv("decay.csv", ["n", "component", "depth", "sup"], rows)
    out.json("decay.json", {"delta": delta, "profiles": fits})
    return EXIT_OK


def cmd_oracle(args) -> int:
    eps, k_max, M = args.eps, args.k_max, args.m_max or 256
    if not 0 < eps < 1:
        raise ConfigError("eps must lie in (0, 1)")
    domain = annulus(eps)
    cfg = RunConfig({"preset": "annulus", "eps": eps}, m_max=M, n_max=4 * k_max + 2, seed=args.seed)
    out = Outputs(args.out, domain.hash, cfg.hash)
    rows = []
    rad = annulus_eigenpair(eps, 0)
    rows.append([0, "radial", radial_eigenvalue(eps), "", rad.r0, annulus_nodal_length(eps, rad)])
    for k in range(1, k_max + 1):
        for branch in ("near-k", "near-k/eps"):
            p = annulus_eigenpair(eps, k, branch)
            rows.append([k, branch, p.sigma, p.beta, "" if p.r0 is None else p.r0, annulus_nodal_length(eps, p)])
    out.csv("oracle.csv", ["k", "branch", "sigma", "beta", "r0", "nodal_length"], rows)

    # cross-check: every oracle root up to k_max must appear in the computed spectrum
    targets = [radial_eigenvalue(eps)] + [v for k in range(1, k_max + 1) for v in annulus_eigenvalues(eps, k)]
    need = sum(lv.value <= max(targets) + 1e-9 for lv in annulus_spectrum(eps, 8 * k_max + 8))
    sp = solve_spectrum(domain, M, min(need + 2, 2 * (2 * M + 1) // 4))
    lam = sp.eigenvalues
    errs = [float(np.min(np.abs(lam - t)) / t) for t in targets]
    worst = max(errs)
    ok = worst <= args.tol
    out.json("oracle.json", {"eps": eps, "k_max": k_max, "M_max": M, "max_rel_error": worst,
                             "tolerance": args.tol, "passed": ok})
    if not ok:
        log.error("oracle cross-check failed: max relative error %.3g > %.3g", worst, args.tol)
        return EXIT_ORACLE
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    code = cmd_spectrum(cfg, args)
    if code != EXIT_OK:
        return code
    for cmd in (cmd_quasimode, cmd_nodal, cmd_decay):
        cmd(cfg, args)
    sp = _solve(cfg)
    # seeded spot check: series and quadrature evaluations agree in the bulk
    rng = np.random.default_rng(cfg.seed)
    R = sp.domain.outer.radius
    pts = sp.domain.outer.c + 0.9 * R * np.sqrt(rng.uniform(size=400)) * np.exp(2j * np.pi * rng.uniform(size=400))
    pts = pts[sp.domain.contains(pts, margin=0.05 * R)][:64]
    n = min(len(sp.eigenvalues) - 1, 10)
    a = nd.InteriorField(sp, n, "series")(pts)
    b = nd.InteriorField(sp, n, "quadrature")(pts)
    out = Outputs(args.out, sp.domain_hash, cfg.hash)
    out.json("report.json", {"files": sorted(p.name for p in out.out.iterdir() if p.name != "report.json"),
                             "strategy_check": {"n": n, "points": len(pts),
                                                "max_abs_diff": float(np.max(np.abs(a - b), initial=0.0))}})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steklov-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "quasimode", "nodal", "decay", "report"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="TOML run configuration")
        s.add_argument("--out", help="output directory (overrides [run].out)")
        s.add_argument("--n", type=int, help="eigenvalue index")
        s.add_argument("--all", action="store_true", help="every computed eigenvalue")
        s.add_argument("--m-max", type=int, help="Fourier truncation (power of two, 32..4096)")
        s.add_argument("--seed", type=int)
    s = sub.add_parser("oracle")
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--k-max", type=int, default=20)
    s.add_argument("--m-max", type=int, default=256)
    s.add_argument("--tol", type=float, default=1e-7)
    s.add_argument("--out", default="out/oracle")
    s.add_argument("--seed", type=int, default=0)
    return p


COMMANDS = {"spectrum": cmd_spectrum, "quasimode": cmd_quasimode, "nodal": cmd_nodal,
            "decay": cmd_decay, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "oracle":
            return cmd_oracle(args)
        cfg = load_config(args.config)
        overrides = {}
        if args.m_max is not None:
            overrides["m_max"] = args.m_max
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            doc = {**cfg.to_dict(), **overrides}
            cfg = RunConfig(**doc, source=cfg.source)
        args.out = args.out or cfg.out
        cfg.domain  # parse errors surface here
        return COMMANDS[args.command](cfg, args)
    except (GeometryError, ConfigError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
