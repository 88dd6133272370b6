"""Least-squares exponential rate fits: log y = intercept + slope * x."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TooFewSamples(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    n_samples: int
    n_excluded: int

    def predict(self, x):
        return np.exp(self.intercept + self.slope * np.asarray(x))

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "n_samples": self.n_samples, "n_excluded": self.n_excluded}


def fit_exponential(xs, ys, noise_floor: float = 0.0) -> RateFit:
    """Ordinary least squares on (x, log y), dropping samples with y <= noise_floor."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have the same length")
    keep = np.isfinite(ys) & np.isfinite(xs) & (ys > noise_floor) & (ys > 0)
    n_excl = int((~keep).sum())
    x, y = xs[keep], np.log(ys[keep])
    if x.size < 3:
        raise TooFewSamples(f"{x.size} samples above the noise floor; need at least 3")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise TooFewSamples("all abscissae coincide")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    ss_tot = np.sum((y - ym) ** 2)
    ss_res = np.sum((y - intercept - slope * x) ** 2)
    # a flat series is fitted perfectly
    r2 = 1.0 if ss_tot <= 1e-28 * max(1.0, ym * ym) * x.size else 1.0 - ss_res / ss_tot
    r2 = float(min(1.0, max(0.0, r2)))
    return RateFit(float(slope), float(intercept), r2, int(x.size), n_excl)
