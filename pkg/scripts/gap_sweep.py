"""Fitted decay slope of the annulus gaps |lambda - k| against 2 log eps, over a range of eps.

    python scripts/gap_sweep.py --eps 0.2 0.3 0.5 0.7 --m-max 256
"""

import argparse

import numpy as np

from steklov_lab import annulus, solve_spectrum
from steklov_lab.annulus_oracle import annulus_eigenvalues, annulus_gaps
from steklov_lab.rates import TooFewSamples, fit_exponential


def sweep(eps: float, M: int, n_max: int):
    sp = solve_spectrum(annulus(eps), M, n_max)
    floor = 100 * float(np.max(sp.residuals))
    ks, gaps, oracle = [], [], []
    for k in range(1, 60):
        lo, _ = annulus_eigenvalues(eps, k)
        if lo > sp.eigenvalues[-1] - 1:
            break
        ks.append(k)
        gaps.append(abs(k - sp.eigenvalues[np.argmin(np.abs(sp.eigenvalues - lo))]))
        oracle.append(-annulus_gaps(eps, k)[0])
    try:
        fit = fit_exponential(ks, gaps, floor)
        ofit = fit_exponential(ks, oracle, floor)
    except TooFewSamples:
        return None
    return fit, ofit, floor


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.25, 0.4, 0.5, 0.6])
    ap.add_argument("--m-max", type=int, default=256)
    ap.add_argument("--n-max", type=int, default=100)
    args = ap.parse_args()
    print("eps;slope;oracle_slope;2_log_eps;rel_dev;samples;floor")
    for eps in args.eps:
        res = sweep(eps, args.m_max, args.n_max)
        if res is None:
            print(f"{eps};;;{2 * np.log(eps):.4f};;0;")
            continue
        fit, ofit, floor = res
        target = 2 * np.log(eps)
        print(f"{eps};{fit.slope:.4f};{ofit.slope:.4f};{target:.4f};"
              f"{abs(fit.slope - target) / abs(target):.3f};{fit.n_samples};{floor:.2e}")


if __name__ == "__main__":
    main()
