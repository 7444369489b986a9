"""Stochastic-chaining generalization bounds and their Monte Carlo checks."""

from stochastic_chaining.chain_core import (
    NEG_INF,
    BoundReport,
    CgfSpec,
    ChainLevel,
    ChainSpec,
    TruncationPolicy,
    evaluate_cgf_bound,
    evaluate_kl_bound,
    evaluate_mi_bound,
    expand_chain,
    legendre_dual,
    legendre_dual_inverse,
    partition_chain,
)

__all__ = [
    "NEG_INF",
    "BoundReport",
    "CgfSpec",
    "ChainLevel",
    "ChainSpec",
    "TruncationPolicy",
    "evaluate_cgf_bound",
    "evaluate_kl_bound",
    "evaluate_mi_bound",
    "expand_chain",
    "legendre_dual",
    "legendre_dual_inverse",
    "partition_chain",
]

__version__ = "0.1.0"
