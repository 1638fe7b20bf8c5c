"""Text serialization of circuits in a strict OPENQASM 2.0 subset.

Grammar: fixed header, one `qreg q[m];`, one `creg c[m];`, then one gate
per line from {u1, u2, u3, cx, h, swap, barrier, measure}. Angles are
written with 17 significant digits so round-trips are bit-exact. A
non-identity output permutation on a measurement-free circuit is kept in
a `// output_permutation:` comment line.
"""

from __future__ import annotations

import re

from .circuit import Circuit, Gate, GateKind

HEADER = "OPENQASM 2.0;"

_GATE_ARITY = {
    "u1": (1, 1),  # (params, qubits)
    "u2": (2, 1),
    "u3": (3, 1),
    "cx": (0, 2),
    "h": (0, 1),
    "swap": (0, 2),
}

_PERM_COMMENT = "// output_permutation:"


class QasmError(ValueError):
    """Parse failure with 1-based line and column position."""

    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_qasm(c: Circuit) -> str:
    """Serialize a circuit (SU4 blocks must already be expanded)."""
    lines = [HEADER, f"qreg q[{c.m}];", f"creg c[{c.m}];"]
    if not c.has_identity_permutation and not any(
        g.kind is GateKind.MEASURE for g in c.gates
    ):
        lines.append(_PERM_COMMENT + " " + " ".join(str(p) for p in c.output_permutation))
    for g in c.gates:
        if g.kind is GateKind.SU4:
            raise ValueError("expand su4 blocks before emitting qasm")
        if g.kind is GateKind.MEASURE:
            q = g.qubits[0]
            lines.append(f"measure q[{q}] -> c[{c.output_permutation[q]}];")
            continue
        name = g.kind.value
        args = ",".join(f"q[{q}]" for q in g.qubits)
        if g.params:
            lines.append(f"{name}({','.join(_fmt(p) for p in g.params)}) {args};")
        else:
            lines.append(f"{name} {args};")
    return "\n".join(lines) + "\n"


_QUBIT_RE = re.compile(r"^q\[(\d+)\]$")
_REG_RE = re.compile(r"^(qreg q|creg c)\[(\d+)\];$")
_GATE_RE = re.compile(r"^([a-z_][a-z0-9_]*)\s*(\(([^)]*)\))?\s+(.*);$")
_MEASURE_RE = re.compile(r"^measure\s+q\[(\d+)\]\s*->\s*c\[(\d+)\];$")


def _parse_float(tok: str, lineno: int, col: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise QasmError(lineno, col, f"bad angle {tok!r}") from None


def parse_qasm(text: str) -> Circuit:
    """Parse the subset grammar back into a Circuit."""
    m = None
    creg = None
    perm = None
    gates: list[Gate] = []
    measure_map: dict[int, int] = {}
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(_PERM_COMMENT):
            perm = tuple(int(t) for t in line[len(_PERM_COMMENT):].split())
            continue
        if line.startswith("//"):
            continue
        if not saw_header:
            if line != HEADER:
                raise QasmError(lineno, 1, f"expected header {HEADER!r}")
            saw_header = True
            continue
        reg = _REG_RE.match(line)
        if reg:
            kind, size = reg.group(1), int(reg.group(2))
            if kind == "qreg q":
                if m is not None:
                    raise QasmError(lineno, 1, "duplicate qreg declaration")
                m = size
            else:
                if creg is not None:
                    raise QasmError(lineno, 1, "duplicate creg declaration")
                creg = size
            continue
        if m is None or creg is None:
            raise QasmError(lineno, 1, "gate before register declarations")
        meas = _MEASURE_RE.match(line)
        if meas:
            q, cbit = int(meas.group(1)), int(meas.group(2))
            if q >= m:
                raise QasmError(lineno, line.index("[") + 2, f"qubit index {q} out of range")
            if cbit >= creg:
                raise QasmError(lineno, 1, f"classical index {cbit} out of range")
            measure_map[q] = cbit
            gates.append(Gate(GateKind.MEASURE, (q,)))
            continue
        g = _GATE_RE.match(line)
        if not g:
            raise QasmError(lineno, 1, f"cannot parse statement {line!r}")
        name, _, params_str, args_str = g.groups()
        col = line.index(name) + 1
        if name == "barrier":
            params: tuple[float, ...] = ()
        elif name in _GATE_ARITY:
            n_params, n_qubits = _GATE_ARITY[name]
            toks = [t.strip() for t in params_str.split(",")] if params_str else []
            if len(toks) != n_params:
                raise QasmError(lineno, col, f"{name} takes {n_params} params, got {len(toks)}")
            params = tuple(_parse_float(t, lineno, col) for t in toks)
        else:
            raise QasmError(lineno, col, f"unknown gate {name!r}")
        qubits = []
        for tok in (t.strip() for t in args_str.split(",")):
            qm = _QUBIT_RE.match(tok)
            if not qm:
                raise QasmError(lineno, line.index(tok) + 1 if tok in line else col,
                                f"bad qubit reference {tok!r}")
            q = int(qm.group(1))
            if q >= m:
                raise QasmError(lineno, line.index(tok) + 1, f"qubit index {q} out of range")
            qubits.append(q)
        if name != "barrier":
            n_qubits = _GATE_ARITY[name][1]
            if len(qubits) != n_qubits:
                raise QasmError(lineno, col, f"{name} takes {n_qubits} qubits, got {len(qubits)}")
        try:
            gates.append(Gate(GateKind(name), tuple(qubits), params))
        except ValueError as exc:
            raise QasmError(lineno, col, str(exc)) from None
    if not saw_header:
        raise QasmError(1, 1, "empty input")
    if m is None or creg is None:
        raise QasmError(1, 1, "missing register declarations")
    if perm is None and measure_map:
        if sorted(measure_map) == list(range(m)) and sorted(measure_map.values()) == list(range(m)):
            perm = tuple(measure_map[q] for q in range(m))
    return Circuit(m, tuple(gates), perm)
