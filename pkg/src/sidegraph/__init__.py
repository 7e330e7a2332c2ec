"""Compression of correlated Erdos-Renyi graphs and their structures with side information."""

from .graphs import (
    CapabilityError,
    LabelledGraph,
    Permutation,
    StructureKey,
    apply_permutation,
    automorphism_count,
    canonicalize,
    compose,
    distinct_labelings,
    enumerate_graphs,
    enumerate_permutations,
    enumerate_structures,
)
from .logmath import LogProb
from .model import (
    EntropyReport,
    JointEdgeDistribution,
    SourceVariant,
    entropy_report,
    exact_conditional_entropy,
    log_conditional,
    log_joint_graph_prob,
    log_structure_prob,
    max_perm_log_joint,
    sample_pair,
    subsampling_model,
)

__version__ = "0.1.0"
