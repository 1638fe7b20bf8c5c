"""Compare the numba and pure-numpy statevector kernels.

The kernel backend is fixed at import time from QVBENCH_KERNELS, so this
script re-executes itself once per backend and reports trajectory
throughput on a transpiled model circuit.

Run:

    python3 benchmarks/bench_kernels.py [width] [depth]
"""

import json
import os
import subprocess
import sys
import time


def measure(width: int, depth: int, shots: int, repeats: int) -> dict:
    from qvbench._kernels import BACKEND
    from qvbench.coupling import grid
    from qvbench.model import ModelCircuitSpec, build_model_circuit
    from qvbench.protocol import derive_seed
    from qvbench.simulator import NoiseModel, compile_circuit, sample_outputs
    from qvbench.transpiler import PassPipeline, run_pipeline

    circuit = build_model_circuit(ModelCircuitSpec(width, depth, derive_seed(1, width, depth)))
    mapped = run_pipeline(circuit, grid(width), PassPipeline("standard")).circuit
    compiled = compile_circuit(mapped)
    noise = NoiseModel(eps1=0.001, eps2=0.01, epsM=0.02)

    sample_outputs(compiled, noise, 10, 0)  # warm up (jit compilation)
    best = float("inf")
    for r in range(repeats):
        start = time.perf_counter()
        sample_outputs(compiled, noise, shots, r)
        best = min(best, time.perf_counter() - start)
    return {
        "backend": BACKEND,
        "gates": len(mapped.gates),
        "shots": shots,
        "seconds": best,
        "us_per_shot": best / shots * 1e6,
    }


def main() -> int:
    width = int(sys.argv[1]) if len(sys.argv) > 1 else 6
    depth = int(sys.argv[2]) if len(sys.argv) > 2 else 6
    shots, repeats = 2000, 5

    if os.environ.get("_QVBENCH_BENCH_CHILD"):
        print(json.dumps(measure(width, depth, shots, repeats)))
        return 0

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, QVBENCH_KERNELS=backend, _QVBENCH_BENCH_CHILD="1")
        proc = subprocess.run(
            [sys.executable, __file__, str(width), str(depth)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        results[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

    print(f"model circuit m=d={width} -> {results['numba']['gates']} basis gates, "
          f"{shots} noisy trajectories (best of {repeats})")
    for backend, r in results.items():
        print(f"  {backend:6s}: {r['seconds']*1e3:8.1f} ms  ({r['us_per_shot']:7.1f} us/shot)")
    speedup = results["numpy"]["seconds"] / results["numba"]["seconds"]
    print(f"  speedup: {speedup:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
