from .tables import (
    DEFAULT_PRUNE_THRESHOLD,
    IntegralTables,
    orthonormalizer,
    random_tables,
    symmetrize_eri,
    symmetrize_matrix,
    transform_tables,
)
from .gaussian import (
    BasisSet,
    MolecularSystem,
    Nucleus,
    Shell,
    boys,
    build_gaussian_integrals,
    even_tempered,
    overlap_kinetic_attraction,
    point_charge_matrix,
)
from .fcidump import load_fcidump, save_fcidump
