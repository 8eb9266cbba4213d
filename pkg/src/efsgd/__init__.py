"""Distributed-optimization lab for communication-compressed and delayed SGD.

A single-process parameter-server simulator covering error-compensated (EC),
quantized and delayed (D) variants of distributed SGD, their DIANA shift and
LSVRG variance-reduction add-ons, the compression operators they rely on, and
the theoretical stepsize calculator that goes with them.
"""

from efsgd.compressors import (
    ContractiveCompressor,
    UnbiasedQuantizer,
    RngStream,
    bit_cost,
    compress,
    parse_operator,
    quantize,
)
from efsgd.objectives import (
    Dataset,
    LogisticProblem,
    ReferenceSolution,
    Shard,
    make_synthetic_problem,
    parse_libsvm,
    shard_dataset,
    solve_reference,
)
from efsgd.methods import MethodSpec, method_names, resolve_method
from efsgd.engine import RunConfig, RunTrace, Simulation, run
from efsgd import theory

__all__ = [
    "ContractiveCompressor",
    "UnbiasedQuantizer",
    "RngStream",
    "bit_cost",
    "compress",
    "parse_operator",
    "quantize",
    "Dataset",
    "Shard",
    "LogisticProblem",
    "ReferenceSolution",
    "parse_libsvm",
    "shard_dataset",
    "solve_reference",
    "make_synthetic_problem",
    "MethodSpec",
    "method_names",
    "resolve_method",
    "RunConfig",
    "RunTrace",
    "Simulation",
    "run",
    "theory",
]
