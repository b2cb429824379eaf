"""Statistical annealing and block restructuring of parameter matrices."""
from .annealing import AnnealedSystem, InitDistribution, TestConfig, anneal
from .boolmat import BoolMatrix, boolean_product, mutual_reachability, star_closure
from .indexmaps import Embedding, Permutation, Projection, apply_permutation
from .linalg import ChannelBundle, channel_forward, matvec
from .runtime import (
    RestructuredSystem,
    build_system,
    infer,
    infer_subdivided,
    redistribute_update,
    subdivide_block,
    verify_equivalence,
)
from .structure import Analysis, NodeAttributeTable, StructuralPredicate, analyze
from .training import (
    ActivationTrace,
    build_co_occurrence,
    coupling_partition,
    generate_planted_system,
    local_update_step,
    verify_block_invariance,
    verify_block_minimality,
)

__all__ = [
    "ActivationTrace", "AnnealedSystem", "Analysis", "BoolMatrix", "ChannelBundle", "Embedding",
    "InitDistribution", "NodeAttributeTable", "Permutation", "Projection", "RestructuredSystem",
    "StructuralPredicate", "TestConfig", "analyze", "anneal", "apply_permutation", "boolean_product",
    "build_co_occurrence", "build_system", "channel_forward", "coupling_partition",
    "generate_planted_system", "infer", "infer_subdivided", "local_update_step", "matvec",
    "mutual_reachability", "redistribute_update", "star_closure", "subdivide_block",
    "verify_block_invariance", "verify_block_minimality", "verify_equivalence",
]
