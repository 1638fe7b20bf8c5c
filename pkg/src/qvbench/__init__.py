"""Quantum volume benchmarking toolkit.

Generates random model circuits, transpiles them to hardware coupling
constraints, simulates them under stochastic Pauli noise, and applies the
heavy-output-generation test to measure quantum volume.
"""

from ._version import __version__
from .circuit import Circuit, Gate, GateKind, Layer, circuit_unitary, gate_matrix, layerize
from .coupling import CouplingGraph, all_to_all, grid, line, loop, resolve_graph
from .model import ModelCircuitSpec, build_model_circuit, haar_su4, sample_layer
from .protocol import (
    DepthResult,
    QVReport,
    ScalingParams,
    TrialConfig,
    achievable_depth,
    estimate_volume,
    find_threshold_eps,
    is_heavy,
    quantum_volume,
    run_qv_sweep,
    threshold,
)
from .qasm import QasmError, emit_qasm, parse_qasm
from .simulator import (
    HeavySet,
    NoiseModel,
    Statevector,
    heavy_fraction,
    heavy_set,
    ideal_probabilities,
    sample_outputs,
)
from .transpiler import MappingResult, MappingViolation, PassPipeline, run_pipeline
from .weyl import (
    ExpansionChoice,
    KakFactors,
    WeylCoordinates,
    avg_fidelity,
    cdf_f2,
    cdf_f2m,
    effective_fidelity,
    expansion_fidelity,
    kak_decompose,
    mirror_coords,
    select_expansion,
    synthesize,
    trace_product,
    weyl_density,
    weyl_of,
)

__all__ = [name for name in dir() if not name.startswith("_")]
