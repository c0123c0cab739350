"""Travel-time-difference data on 2-D Riemannian manifolds with boundary: synthesis and reconstruction."""

from .dataset import DataSet, TTDRecord, load_dataset, save_dataset
from .distance import closest_boundary_set, distance, distance_field, set_threads
from .domain import BoundaryAtlas, ParamDomain, build_domain, make_atlas
from .geodesic import exit_time, shoot_geodesic
from .metric import MetricField, boundary_metric_restriction, metric_at
from .synthesis import arrival_times, synth_dataset, ttd_matrix
from .tolerances import Tolerances

__version__ = "0.1.0"

__all__ = [
    "BoundaryAtlas", "DataSet", "MetricField", "ParamDomain", "TTDRecord", "Tolerances",
    "arrival_times", "boundary_metric_restriction", "build_domain", "closest_boundary_set", "distance",
    "distance_field", "exit_time", "load_dataset", "make_atlas", "metric_at", "save_dataset", "set_threads",
    "shoot_geodesic", "synth_dataset", "ttd_matrix",
]
