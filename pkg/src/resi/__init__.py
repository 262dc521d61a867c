"""Regional entropy of seismic information (RESI) from earthquake catalogs."""

from resi.alarms import AlarmConfig, activity, high_activity, high_hr, hr_sat, hr_sat_series
from resi.baselines import PiConfig, RiConfig, high_topn, pi_index, pi_series, ri_index, ri_series
from resi.catalog import CatalogFilter, Event, EventTable, ParseError, parse_record, read_catalog
from resi.clustering import ClusterPartition, cluster_probabilities, make_clusters
from resi.entropy import ResiPoint, aggregate_resi, entropy_h, hr_avr, resi, resi_series
from resi.evaluation import EvalReport, delay, evaluate_all, prec
from resi.grid import GridSpec, Region, TimeWindow, bin_events, make_windows, mesh_index

__version__ = "0.1.0"

__all__ = [
    "AlarmConfig", "CatalogFilter", "ClusterPartition", "EvalReport", "Event", "EventTable",
    "GridSpec", "ParseError", "PiConfig", "Region", "ResiPoint", "RiConfig", "TimeWindow",
    "activity", "aggregate_resi", "bin_events", "cluster_probabilities", "delay", "entropy_h",
    "evaluate_all", "high_activity", "high_hr", "high_topn", "hr_avr", "hr_sat", "hr_sat_series",
    "make_clusters", "make_windows", "mesh_index", "parse_record", "pi_index", "pi_series",
    "prec", "read_catalog", "resi", "resi_series", "ri_index", "ri_series",
]
