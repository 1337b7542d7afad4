"""Orthogonal trace-sum maximization: solvers, certificates, and bounds."""

__version__ = "0.1.0"

from .blockspec import BlockSpec, BlockSymMatrix, StiefelBlocks
from .errors import (
    DegenerateRank,
    GapWarning,
    InfeasibleProjection,
    InvalidConfig,
    InvalidInput,
    MissingGroundTruth,
    OtsmError,
    RankDeficient,
)
from .linalg import (
    AlignmentResult,
    SymEig,
    op_norm,
    polar_factor,
    procrustes_align,
    project_box_hyperplane,
    qr_orthonormalize,
    sym_eig,
)
from .matio import dump_matrix, load_matrix
from .generate import (
    MAXBET,
    MAXDIFF,
    Instance,
    assemble_instance,
    dump_instance,
    gen_noise,
    gen_theta,
    load_instance,
    noiseless_optimum,
)
from .ascent import (
    AscentOptions,
    SolveTrace,
    init_spectral,
    objective,
    solve_block_ascent,
    sweep,
)
from .certificate import (
    CertificateReport,
    DualCertificate,
    PrimalDecomposition,
    build_dual_certificate,
    build_primal_decomposition,
    certify_global,
    check_assumption,
    multipliers,
    qualify_candidate,
)
from .sdp import (
    GramSolution,
    SdpOptions,
    TightnessReport,
    round_rank_r,
    solve_sdp,
    tightness_report,
)
from .bounds import (
    BoundsReport,
    ConsistencyBounds,
    DiscordanceReport,
    check_deterministic_conditions,
    check_discordance,
    consistency_bounds,
    estimation_error,
    evaluate_bounds,
    sigma_thresholds,
)
from .experiment import (
    CellResult,
    ExperimentConfig,
    reproduce_table,
    run_cell,
    run_grid,
    write_results,
)
