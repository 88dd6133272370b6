"""Steklov eigenvalues, quasimodes and nodal sets on circular multiply-connected domains."""

from .geometry import (Circle, ConformalWeight, KoebeDomain, WeightSeries, annulus, arclength_map,
                       disk, validate_domain, weight_preset)
from .dtn_solver import comparison_sequence, solve_spectrum, spectrum_gap_report

__version__ = "0.1.0"
