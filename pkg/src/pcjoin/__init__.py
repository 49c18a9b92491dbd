"""Partition-constraint statistics, decompositions, bounds, and joins for full CQs."""

from .relations import (
    Atom,
    Catalog,
    ConstraintViolationError,
    CoverageError,
    Instance,
    ParameterError,
    ParseError,
    PcjoinError,
    Query,
    Relation,
    ScaleExceededError,
    SchemaError,
    TrieIndex,
    build_trie,
    load_csv,
    parse_query,
    project,
    read_csv,
    select_eq,
    write_csv,
)
from .stats import (
    ConstraintSet,
    DegreeConstraint,
    PartitionConstraint,
    PcProfile,
    cc,
    check_dc,
    check_instance,
    check_pc_witness,
    compute_dc,
    dc,
    nonkey_pc_profile,
    pc,
    pc_value,
)
from .decompose import (
    AugmentingPath,
    DecompositionState,
    DegreeBucketQueue,
    Partitioning,
    decompose_approx,
    decompose_bruteforce,
    decompose_exact,
    find_augmenting_path,
)
from .bounds import (
    BoundResult,
    CoverLP,
    ESTIMATORS,
    agm_bound,
    chain_dc_bound,
    extended_bound,
    solve_cover_lp,
)
from .joins import (
    VaatProfile,
    generic_join,
    hexagon_join,
    lifted_join_detailed,
    nested_loop_join_oracle,
    pc_lifted_join,
    prefix_join_size,
    vaat_profile,
)
from . import generators

__version__ = "0.1.0"
