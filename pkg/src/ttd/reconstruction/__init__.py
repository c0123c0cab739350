"""Reconstruction from travel-time-difference data alone (plus the metric-known DD locator)."""

from .boundary import (BoundaryFunction, DegenerateDataError, EmptyDataError, PreconditionError,
                       boundary_defining_function, boundary_distance_matrix, depth_proxy,
                       recover_boundary_distance, recover_boundary_metric)
from .charts import (BoundaryChartRecord, ChartError, InteriorChartRecord, build_boundary_chart,
                     build_interior_chart, jacobian_proxy)
from .cutlocus import classify_cut_locus, closest_boundary_from_data, competing_minima, local_minima
from .dd import DDResult, dd_locate, distance_gradient
from .embedding import Correspondence, embedding_distance, embedding_distances, match_manifolds
from .geodimage import GeodesicImage, recover_geodesic_image

__all__ = [
    "BoundaryChartRecord", "BoundaryFunction", "ChartError", "Correspondence", "DDResult",
    "DegenerateDataError", "EmptyDataError", "GeodesicImage", "InteriorChartRecord", "PreconditionError",
    "boundary_defining_function", "boundary_distance_matrix", "build_boundary_chart", "build_interior_chart",
    "classify_cut_locus", "closest_boundary_from_data", "competing_minima", "dd_locate", "depth_proxy",
    "distance_gradient", "embedding_distance", "embedding_distances", "jacobian_proxy", "local_minima",
    "match_manifolds", "recover_boundary_distance", "recover_boundary_metric", "recover_geodesic_image",
]
