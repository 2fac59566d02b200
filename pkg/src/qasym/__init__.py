"""Arbitrary-precision q-series, Diophantine records and theta asymptotics."""

from .asymptotics import (
    TheoremPoint,
    VerifyRow,
    aq_error_bound,
    cbh_error_bound,
    irrational_point,
    main_term,
    rational_point,
    residual,
)
from .diophantine import (
    cf_expand,
    chaotic_exponent_estimate,
    inhom_ostrowski,
    inhom_records_bruteforce,
    liouville_param,
    parse_scaling_param,
)
from .fitting import FitReport, fit_line
from .harness import ExperimentSpec, run_sweep
from .qseries import CBHParams, aq_direct, cbh_direct, qpoch_inf, qpoch_n, theta

__version__ = "0.1.0"
