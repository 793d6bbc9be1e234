"""Malware time series from OSV snapshots and their ARDL analysis."""

from .ardl import (
    ArdlFit,
    ArdlOrders,
    ModelData,
    MultiplierResult,
    Target,
    Transform,
    build_design,
    dynamic_multipliers,
    fit_ardl,
    fit_ols,
    long_run_multiplier,
)
from .diagnostics import acf, adf_test, jarque_bera, qq_points, share_exceedance
from .osv import (
    Ecosystem,
    EventRow,
    OsvRecord,
    RecordKind,
    classify_record,
    count_references,
    parse_record,
    scan_snapshot,
)
from .selection import SelectionTrace, autocorr_present, select_orders
from .series import Granularity, SeriesBundle, aggregate, descriptive_report, ecosystem_breakdown

__version__ = "0.1.0"
