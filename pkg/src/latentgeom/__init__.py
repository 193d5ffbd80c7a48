"""Local-geometry traversal frames and warpage metrics for piecewise-affine
latent mapping networks."""

from .errors import (
    BoundaryWarning,
    InvalidDirectionError,
    RankDeficiencyError,
    ShapeError,
    UnderSampledError,
    WeightFileError,
)
from .network import (
    LayerSpec,
    MappingNetwork,
    forward,
    jacobian,
    linear_approximation_at,
    load_network,
    save_network,
)
from .local_basis import LocalFrame, approx_manifold_point, local_basis, local_pca_oracle
from .traversal import (
    FixedStepPolicy,
    TraversalMode,
    TraversalPath,
    UniformRandomStepPolicy,
    guided_iterative_traverse,
    iterative_traverse,
    linear_traverse,
)
from .grassmann import (
    Subspace,
    from_vectors,
    geodesic_metric,
    principal_angles,
    projection_metric,
    random_orthogonal_frame,
)
from .global_basis import GlobalBasis, ganspace_basis, sefa_basis
from .deviation import ProjectionResult, project_to_manifold, traversal_deviation
from .evaluation import (
    ExperimentReport,
    eps_sweep,
    subspace_grid,
    sv_histogram,
    warpage_suite,
)

__version__ = "0.1.0"
