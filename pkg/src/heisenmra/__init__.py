"""Heisenberg-group geometry, self-similar lattice tiles and Haar multiresolution analysis."""

__version__ = "0.1.0"

from .heisenberg import (  # noqa: E402
    GroupPoint,
    LatticePoint,
    Model,
    ModelMismatchError,
    algebra_check,
    cometric,
    convert_model,
    dilate,
    group_inv,
    group_mul,
    hormander_rank,
    left_invariant_frame,
)
from .metrics import (  # noqa: E402
    ConvergenceError,
    ControlPath,
    cc_distance_shoot,
    cc_distance_upper,
    contraction_distance,
    contraction_distance_shoot,
    distance,
    estimate_constant,
    integrate_path,
    shoot,
)
from .isometry import (  # noqa: E402
    FiniteGroupAction,
    LeftTranslation,
    RotationVertical,
    check_infinitesimal_isometry,
    conjugate_isometry,
    coset_representatives,
    fixed_point_center,
)
from .voxels import VoxelSet, read_voxels, write_voxels  # noqa: E402
from .fundamental import (  # noqa: E402
    DirichletSpec,
    dirichlet_cell,
    enumerate_orbit_images,
    verify_fundamental_set,
)
from .ifs import (  # noqa: E402
    IfsSystem,
    TileResult,
    attractor_fixed_point,
    build_ifs,
    tile_measure,
    verify_self_similarity,
    verify_tiling,
)
from .mra import (  # noqa: E402
    GramReport,
    MraReport,
    ScalingFunction,
    WaveletBank,
    build_wavelet_bank,
    gram_riesz_bounds,
    mra_diagnostics,
    project_onto_level,
    two_scale_residual,
)
from .estimators import DirichletDomain, HaarMRA, MinimaxCenter, SelfSimilarTile  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
