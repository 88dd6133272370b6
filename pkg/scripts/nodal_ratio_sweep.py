"""L(Z)/lambda over a window of eigenvalues, for any run configuration.

    python scripts/nodal_ratio_sweep.py configs/three_circles.toml --lam-min 5 --lam-max 20
"""

import argparse

import numpy as np

from steklov_lab import solve_spectrum
from steklov_lab.config import load_config
from steklov_lab.nodal import GridSpec, nodal_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--lam-min", type=float, default=5.0)
    ap.add_argument("--lam-max", type=float, default=40.0)
    args = ap.parse_args()
    cfg = load_config(args.config)
    sp = solve_spectrum(cfg.domain, cfg.m_max, cfg.n_max)
    spec = GridSpec(None, cfg.cells_per_wavelength, cfg.max_depth, cfg.collar)
    lam = sp.eigenvalues
    ratios = []
    print("n;lambda;length;ratio;converged")
    for n in range(1, len(lam)):
        if not args.lam_min <= lam[n] <= args.lam_max:
            continue
        rep, _ = nodal_report(sp, n, spec, cfg.delta)
        ratios.append(rep.ratio)
        print(f"{n};{rep.eigenvalue:.10g};{rep.length:.6g};{rep.ratio:.4f};{int(rep.converged)}")
    if ratios:
        print(f"# max/min L/lambda = {max(ratios) / min(ratios):.3f} over {len(ratios)} eigenfunctions")
    else:
        print("# no eigenvalues in the window")


if __name__ == "__main__":
    main()
