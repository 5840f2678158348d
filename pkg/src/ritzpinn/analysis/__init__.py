"""Error metrics, complexity estimators and sample-size sweeps."""
from .complexity import (ConcentrationAudit, PiecewiseLinear, UniformTask, concentration_audit,
                         empirical_covering, empirical_rademacher, exact_rademacher, sample_class_nets)
from .errors import h1_error, h2_error, relative_h1_error, sandwich_check
from .sweeps import RateReport, loglog_fit, mc_gap_slope, rate_sweep, reference_exponent

__all__ = ["ConcentrationAudit", "PiecewiseLinear", "UniformTask", "concentration_audit",
           "empirical_covering", "empirical_rademacher", "exact_rademacher", "sample_class_nets",
           "h1_error", "h2_error", "relative_h1_error", "sandwich_check", "RateReport", "loglog_fit",
           "mc_gap_slope", "rate_sweep", "reference_exponent"]
