"""Spring-network elasticity on simplicial meshes and its homogenization."""

from .chains import (
    ChainParams,
    GrowthBounds,
    GrowthReport,
    PairPotential,
    chain_energy,
    chain_energy_derivative,
    check_growth_condition,
    inv_langevin_series,
    quadratic_spring_energy,
)
from .volumetric import (
    NonPositiveJacobianError,
    VolumetricParams,
    w_vol,
    w_vol_eta,
    w_vol_gradient,
    w_vol_j,
)
from .meshing import (
    AdmissibilityReport,
    DegenerateGeometryError,
    InfeasibleLatticeError,
    Mesh,
    StochasticLatticeSpec,
    boundary_layer,
    build_stochastic_mesh,
    check_admissibility,
    delaunay_triangulate,
    element_gradient,
    periodic_mesh_2d,
    periodic_mesh_3d,
    read_mesh,
    rescale_and_clip,
    stochastic_lattice,
    write_mesh,
)
from .assembly import (
    BoundaryCondition,
    CoincidentVerticesError,
    EnergyModel,
    FullyConstrainedError,
    InvertedElementError,
    apply_bc,
    energy_gradient,
    total_energy,
)
from .optim import (
    MinimizeResult,
    MinimizeSettings,
    OptimizationError,
    affine_init,
    lbfgs,
    minimize,
)
from .homogenize import (
    CellProblem,
    CounterexampleResult,
    HomogEstimate,
    PeriodicCell,
    StochasticCell,
    anisotropy_counterexample,
    cell_energy_density,
    estimate_whom,
    frame_invariance_probe,
    isotropy_probe,
    periodic_cell_estimator,
    rank_one_convexity_sample,
    single_cell_oracle_2d,
    solve_cell_problem,
    stochastic_cell_estimator,
)

__version__ = "0.1.0"
