"""Parent-Hamiltonian spectral-gap optimization along MPS interpolation paths."""

__version__ = "0.1.0"

from .tensors import (  # noqa: F401
    Mps,
    InjectivityMap,
    RandomMpsFamily,
    SiteTensor,
    aklt_tensor,
    block_tensor,
    contract_to_statevector,
    ghz_tensor,
    is_injective,
    make_mps,
    random_family_tensor,
)
from .parent import (  # noqa: F401
    KernelBasis,
    MixingMatrix,
    SparseHamiltonian,
    aklt_kernel_basis,
    assemble,
    canonical_mixing,
    ghz_kernel_basis,
    kernel_basis_svd,
    s_from_generator,
    s_from_matrix,
)
from .symmetry import (  # noqa: F401
    SectorMap,
    SectorSpec,
    STemplate,
    build_sector,
    ground_sector_spec,
    symmetric_s_template,
    symmetrize_check,
)
from .spectra import (  # noqa: F401
    EigenResult,
    GapResult,
    OverlapMatrix,
    chi_matrix,
    lowest_eigenpairs,
    pair_energy,
    spectral_gap,
)
from .gapopt import (  # noqa: F401
    Objective,
    OdeOptions,
    OptimalityReport,
    OptimizerOptions,
    OptState,
    PathResult,
    certify,
    gradient,
    maximize,
    ode_follow,
    sweep,
)
