"""Metric-geometry laboratory for Wasserstein-type distances, barycenters and reach probes."""

from reachlab.errors import DomainError, PreconditionError
from reachlab.spaces import (
    Circle,
    Euclidean,
    FiniteGraph,
    FlatTorus,
    GeodesicPath,
    MetricSpace,
    Point,
    Sphere2,
    convexity_probe,
    space_from_descriptor,
)
from reachlab.transport import (
    DiscreteMeasure,
    TransportPlan,
    dirac_to_measure_cost,
    displacement_geodesic,
    wasserstein_p,
)
from reachlab.barycenter import (
    BarycenterResult,
    ProjectConfig,
    project,
    submetry_check,
    two_point_min_value,
    two_point_t0,
)
from reachlab.orlicz import (
    OrliczCost,
    orlicz_distance_dirac,
    orlicz_project_two_point,
    orlicz_two_point_threshold,
)
from reachlab.diagrams import (
    EmbeddingSpec,
    PartialMatching,
    PersistenceDiagram,
    bottleneck,
    embed,
    matching_cost,
    midpoint_diagram,
    wasserstein_diagram,
)
from reachlab.probes import (
    probe_density_unp,
    probe_dgm_null_reach,
    probe_multi_geodesic_null_reach,
    probe_orlicz_null_reach,
    probe_unique_barycenters,
    probe_w1_null_reach,
    replay,
    run_probe,
)
from reachlab.report import ProbeReport, Verdict

__version__ = "0.1.0"
