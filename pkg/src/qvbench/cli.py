"""Command-line front end.

Subcommands: generate, transpile, run-qv, approx-stats, estimate, rerun.
Every command writes a manifest.json holding the resolved options and
input hashes; `rerun` replays a manifest byte-identically (worker count
may differ, outputs may not).

Exit codes: 0 success (a failed volume test is still a valid result),
1 usage or configuration error, 2 numerical or invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .circuit import Circuit, GateKind
from .coupling import CouplingGraph, resolve_graph
from .model import ModelCircuitSpec, build_model_circuit
from .protocol import (
    SCHEMA_VERSION,
    TrialConfig,
    derive_seed,
    estimate_table,
    estimate_volume,
    run_qv_sweep,
)
from .qasm import emit_qasm, parse_qasm
from .simulator import NoiseModel, heavy_set
from .transpiler import PassPipeline, pass_unroll, run_pipeline
from .weyl import approx_application_stats, cdf_f2, cdf_f2m


class ConfigError(ValueError):
    """Bad command-line or configuration input (exit code 1)."""


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, options: dict, inputs: list[Path]) -> None:
    _write_json(
        out_dir / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "artifact_version": __version__,
            "kernels": BACKEND,
            "command": command,
            "options": options,
            "input_hashes": {str(p): _sha256(p) for p in inputs},
        },
    )


def _resolve_graph(spec: str) -> CouplingGraph:
    try:
        return resolve_graph(spec)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"graph: cannot resolve {spec!r}: {exc}") from exc


def _resolve_noise(spec) -> NoiseModel:
    if spec is None:
        return NoiseModel()
    if isinstance(spec, str):
        try:
            data = json.loads(Path(spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"noise: cannot read {spec!r}: {exc}") from exc
    else:
        data = spec
    try:
        return NoiseModel.from_config(data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"noise: {exc}") from exc


def _resolve_pipeline(data: dict) -> PassPipeline:
    try:
        return PassPipeline(
            name=data.get("name", "standard"),
            basis_fidelity=data.get("fb"),
            seed=int(data.get("seed", 0)),
            swap_trials=int(data.get("swap_trials", 40)),
            loco=bool(data.get("loco", False)),
            placement=data.get("placement", "identity"),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"pipeline: {exc}") from exc


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- generate --------------------------------------------------------------------

def cmd_generate(args) -> int:
    out = _out_dir(args.out)
    for i in range(args.count):
        circuit_seed = derive_seed(args.seed, args.m, args.d, i, 0)
        circuit = build_model_circuit(ModelCircuitSpec(args.m, args.d, circuit_seed))
        hs = heavy_set(circuit)
        expanded = pass_unroll(circuit)
        (out / f"circuit_{i:03d}.qasm").write_text(emit_qasm(expanded), encoding="utf-8")
        _write_json(
            out / f"heavy_{i:03d}.json",
            {
                "schema_version": SCHEMA_VERSION,
                "m": args.m,
                "d": args.d,
                "circuit_seed": circuit_seed,
                "p_med": hs.p_med,
                "ideal_heavy_prob": hs.ideal_heavy_prob,
                "members": hs.bitstrings(),
            },
        )
    _write_manifest(
        out,
        "generate",
        {"m": args.m, "d": args.d, "count": args.count, "seed": args.seed},
        [],
    )
    return 0


# -- transpile --------------------------------------------------------------------

def cmd_transpile(args) -> int:
    src = Path(args.input)
    try:
        circuit = parse_qasm(src.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"input: {exc}") from exc
    graph = _resolve_graph(args.graph)
    pipeline = _resolve_pipeline(
        {"name": args.pipeline, "fb": args.fb, "seed": args.seed, "swap_trials": args.trials,
         "loco": args.loco}
    )
    result = run_pipeline(circuit, graph, pipeline)
    out = _out_dir(args.out)
    (out / "transpiled.qasm").write_text(emit_qasm(result.circuit), encoding="utf-8")
    counts = {k.value: result.circuit.count(k) for k in GateKind if result.circuit.count(k)}
    _write_json(
        out / "mapping.json",
        {
            "schema_version": SCHEMA_VERSION,
            "n": graph.n,
            "permutation": list(result.permutation),
            "output_permutation": list(result.circuit.output_permutation),
            "cx_count": result.circuit.count(GateKind.CX),
            "gate_counts": counts,
        },
    )
    _write_manifest(
        out,
        "transpile",
        {
            "input": str(src),
            "graph": args.graph,
            "pipeline": args.pipeline,
            "fb": args.fb,
            "seed": args.seed,
            "trials": args.trials,
            "loco": args.loco,
        },
        [src] + ([Path(args.graph)] if Path(args.graph).exists() else []),
    )
    return 0


# -- run-qv ----------------------------------------------------------------------

_CONFIG_FIELDS = {
    "schema_version", "m_list", "square_only", "circuits", "shots", "z",
    "seed", "d_max", "graph", "noise", "pipeline",
}


def _load_qv_config(path: Path) -> dict:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: {exc}") from exc
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"config: unknown fields {sorted(unknown)}")
    for req in ("m_list", "graph"):
        if req not in data:
            raise ConfigError(f"config.{req}: missing required field")
    if not isinstance(data["m_list"], list) or not all(
        isinstance(m, int) and m >= 1 for m in data["m_list"]
    ):
        raise ConfigError("config.m_list: expected a list of positive integers")
    return data


_OVERRIDE_FLAGS = ("circuits", "shots", "seed", "graph", "noise", "pipeline", "fb")


def cmd_run_qv(args) -> int:
    cfg_path = Path(args.config)
    data = _load_qv_config(cfg_path)
    overrides = {k: getattr(args, k) for k in _OVERRIDE_FLAGS if getattr(args, k) is not None}
    for key in ("circuits", "shots", "seed", "graph"):
        if key in overrides:
            data[key] = overrides[key]
    if "noise" in overrides:
        data["noise"] = overrides["noise"]
    pipeline_cfg = dict(data.get("pipeline", {}))
    if "pipeline" in overrides:
        pipeline_cfg["name"] = overrides["pipeline"]
    if "fb" in overrides:
        pipeline_cfg["fb"] = overrides["fb"]
    graph = _resolve_graph(data["graph"])
    noise = _resolve_noise(data.get("noise"))
    pipeline = _resolve_pipeline(pipeline_cfg)
    try:
        cfg = TrialConfig(
            graph=graph,
            noise=noise,
            pipeline=pipeline,
            n_c=int(data.get("circuits", 200)),
            n_s=int(data.get("shots", 100)),
            z=float(data.get("z", 2.0)),
            seed=int(data.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from exc
    info = {k: data[k] for k in sorted(data) if k != "schema_version"}
    info["pipeline"] = pipeline_cfg
    report = run_qv_sweep(
        cfg,
        data["m_list"],
        square_only=bool(data.get("square_only", True)),
        d_max=data.get("d_max"),
        jobs=args.jobs,
        config_info=info,
    )
    out = _out_dir(args.out)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    inputs = [cfg_path]
    if isinstance(data.get("noise"), str) and Path(data["noise"]).exists():
        inputs.append(Path(data["noise"]))
    _write_manifest(
        out, "run-qv", {"config": str(cfg_path), "jobs": args.jobs, **overrides}, inputs
    )
    print(f"log2 V_Q = {report.log2_vq} (achieved at m = {report.achieved_m})")
    return 0


# -- approx-stats ------------------------------------------------------------------

def cmd_approx_stats(args) -> int:
    stats = approx_application_stats(args.fb, args.samples, args.mirror, args.seed)
    out = _out_dir(args.out)
    _write_json(out / "stats.json", {"schema_version": SCHEMA_VERSION, **stats})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["fidelity", "cdf_two_applications", "cdf_two_applications_mirror"])
    for f in np.linspace(0.2, 1.0, 161):
        writer.writerow([f"{f:.5f}", f"{cdf_f2(float(f)):.10f}", f"{cdf_f2m(float(f)):.10f}"])
    (out / "cdf.csv").write_text(buf.getvalue(), encoding="utf-8")
    _write_manifest(
        out,
        "approx-stats",
        {"fb": args.fb, "samples": args.samples, "mirror": args.mirror, "seed": args.seed},
        [],
    )
    print(
        f"fractions={['%.4f' % f for f in stats['fractions']]} "
        f"mean={stats['mean_applications']:.3f} F_e={stats['effective_fidelity']:.4f}"
    )
    return 0


# -- estimate ----------------------------------------------------------------------

def cmd_estimate(args) -> int:
    if args.eps < 0:
        raise ConfigError("eps must be non-negative")
    if args.eps == 0:
        print(f"warning: eps = 0 saturates at the largest tested width m = {args.m_max}")
    rows = estimate_table(args.eps, args.topology, m_max=args.m_max)
    m_star, log2_vq = estimate_volume(args.eps, args.topology, m_max=args.m_max)
    out = _out_dir(args.out)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m", "eps_eff", "d_tilde", "min_m_d"])
    for r in rows:
        writer.writerow(
            [r["m"], f"{r['eps_eff']:.8g}",
             "inf" if np.isinf(r["d_tilde"]) else f"{r['d_tilde']:.8g}", r["min_m_d"]]
        )
    (out / "estimate.csv").write_text(buf.getvalue(), encoding="utf-8")
    _write_json(
        out / "estimate.json",
        {
            "schema_version": SCHEMA_VERSION,
            "eps": args.eps,
            "topology": args.topology,
            "best_m": m_star,
            "log2_vq_estimate": log2_vq,
        },
    )
    _write_manifest(
        out,
        "estimate",
        {"eps": args.eps, "topology": args.topology, "m_max": args.m_max},
        [],
    )
    print(f"estimated log2 V_Q = {log2_vq} at m = {m_star}")
    return 0


# -- rerun -------------------------------------------------------------------------

def cmd_rerun(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"manifest: {exc}") from exc
    for fname, expected in manifest.get("input_hashes", {}).items():
        p = Path(fname)
        if not p.exists() or _sha256(p) != expected:
            raise ConfigError(f"manifest input {fname} is missing or changed")
    opts = manifest["options"]
    command = manifest["command"]
    argv = []
    if command == "generate":
        argv = [
            "generate", "-m", str(opts["m"]), "-d", str(opts["d"]),
            "--count", str(opts["count"]), "--seed", str(opts["seed"]),
        ]
    elif command == "transpile":
        argv = [
            "transpile", "--in", opts["input"], "--graph", opts["graph"],
            "--pipeline", opts["pipeline"], "--seed", str(opts["seed"]),
            "--trials", str(opts["trials"]),
        ]
        if opts.get("fb") is not None:
            argv += ["--fb", str(opts["fb"])]
        if opts.get("loco"):
            argv += ["--loco"]
    elif command == "run-qv":
        argv = ["run-qv", "--config", opts["config"]]
        for key in _OVERRIDE_FLAGS:
            if opts.get(key) is not None:
                argv += [f"--{key}", str(opts[key])]
        if args.jobs is not None:
            argv += ["--jobs", str(args.jobs)]
    elif command == "approx-stats":
        argv = [
            "approx-stats", "--fb", str(opts["fb"]), "--samples", str(opts["samples"]),
            "--seed", str(opts["seed"]),
        ]
        if opts.get("mirror"):
            argv += ["--mirror"]
    elif command == "estimate":
        argv = [
            "estimate", "--eps", str(opts["eps"]), "--topology", opts["topology"],
            "--m-max", str(opts["m_max"]),
        ]
    else:
        raise ConfigError(f"manifest: unknown command {command!r}")
    argv += ["--out", args.out]
    return main(argv)


# -- parser ------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qvbench", description="Quantum volume benchmarking toolkit")
    parser.add_argument("--version", action="version", version=f"qvbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write seeded model circuits and heavy sets")
    p.add_argument("-m", type=int, required=True, help="circuit width")
    p.add_argument("-d", type=int, required=True, help="circuit depth")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("transpile", help="map a circuit onto a coupling graph")
    p.add_argument("--in", dest="input", required=True, help="input qasm file")
    p.add_argument("--graph", required=True, help="preset like line(4), device name, or file")
    p.add_argument("--pipeline", choices=("standard", "kak", "approx"), default="standard")
    p.add_argument("--fb", type=float, default=None, help="basis fidelity for approx")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=40, help="swap-search trials per round")
    p.add_argument("--loco", action="store_true", help="bandwidth-reducing relabeling")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_transpile)

    p = sub.add_parser("run-qv", help="measure quantum volume from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--circuits", type=int, default=None, help="override config circuits")
    p.add_argument("--shots", type=int, default=None, help="override config shots")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--graph", default=None, help="override config graph")
    p.add_argument("--noise", default=None, help="override config noise file")
    p.add_argument("--pipeline", choices=("standard", "kak", "approx"), default=None)
    p.add_argument("--fb", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_run_qv)

    p = sub.add_parser("approx-stats", help="basis-application statistics over Haar targets")
    p.add_argument("--fb", type=float, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--mirror", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_approx_stats)

    p = sub.add_parser("estimate", help="quasi-analytic volume estimate table")
    p.add_argument("--eps", type=float, required=True, help="two-qubit error probability")
    p.add_argument("--topology", choices=("grid", "loop", "all-to-all"), default="grid")
    p.add_argument("--m-max", type=int, default=40)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("rerun", help="replay a previous run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
