"""Iterative slice matching for distribution alignment.

Moves an empirical or Gaussian source measure toward a target by repeatedly
matching one-dimensional projections, either along a fresh random orthonormal
basis per iteration or along a single random direction.  Ships with an exact
closed-form covariance flow for Gaussian pairs, Monte-Carlo sliced-distance
estimators, and a diagnostics suite of numerically checkable identities and
inequalities.
"""

from .measures import (
    Direction,
    GaussianState,
    ParticleCloud,
    empirical_covariance,
    load_cloud_csv,
    project,
    save_cloud_csv,
    second_moment,
)
from .randgeom import OrthoBasis, RngStream, sample_haar_basis, sample_sphere
from .ot1d import ProjectedSample, quantile_map, sorted_match_displacement, w2sq_1d
from .scheme import (
    RunRecord,
    SamplingMode,
    StepSchedule,
    run_scheme,
    slice_map_basis,
    slice_map_single,
    step_size,
    sw2sq_mc,
)
from .gaussian import (
    DegenerateFlowError,
    FlowState,
    run_gaussian_flow,
    sw2sq_gaussian_mc,
    symmetric_eigs,
    tau,
    update_covariance_basis,
    update_covariance_single,
    w2sq_gaussian,
)

__version__ = "0.1.0"
