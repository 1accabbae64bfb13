"""Python bindings of the horolab C++ core."""

from ._horolab import (
    ConjugateScanResult,
    DAtriReport,
    HorolabError,
    HorosphericalProfile,
    ManifoldSpec,
    TangentVector,
    __version__,
    bump,
    busemann,
    conjugate_scan,
    datri_check,
    default_anchor,
    det_a,
    distance,
    euclidean,
    experiments,
    heisenberg,
    hyperbolic,
    jacobi_operator,
    make_model,
    orthonormal_frame,
    product,
    profile,
    profiles,
    run_config,
    sample_unit_vectors,
    sectional_curvature,
    sl2r,
    stable_tensor,
    unit_vector,
    verify_paper,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
