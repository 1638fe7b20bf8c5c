"""Circuit rewriting passes and pipelines.

standard  : unroll, swap-map, unroll, cx-reorient, cx-cancel, unroll, 1q-merge
kak       : standard + two-qubit block collection and exact resynthesis
approx    : standard + approximate block resynthesis at a given basis fidelity

All passes are pure circuit -> circuit functions; randomized ones take an
explicit seed. The mapping pass reports the final layout permutation W
with gates(U') = W * U, and composes the inverse into the circuit's
output permutation so the mapped circuit stays observationally equal.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .circuit import (
    Circuit,
    Gate,
    GateKind,
    apply_matrix_1q,
    apply_matrix_2q,
    gate_matrix,
    layerize,
    u1 as u1_gate,
    u2 as u2_gate,
    u3 as u3_gate,
    cx as cx_gate,
    h as h_gate,
    swap as swap_gate,
)
from .coupling import CouplingGraph, UNREACHABLE
from .weyl import _u3_params, exact_synthesis, select_expansion, synthesize, weyl_of

_MERGE_TOL = 1e-9


class MappingViolation(ValueError):
    """A two-qubit gate cannot be placed on the coupling graph."""


@dataclass(frozen=True)
class PassPipeline:
    """Named pass sequence with its options."""

    name: str = "standard"
    basis_fidelity: float | None = None
    seed: int = 0
    swap_trials: int = 40
    loco: bool = False
    placement: str = "identity"

    def __post_init__(self):
        if self.name not in ("standard", "kak", "approx"):
            raise ValueError(f"unknown pipeline {self.name!r}")
        if self.name == "approx":
            if self.basis_fidelity is None or not 0 < self.basis_fidelity <= 1:
                raise ValueError("approx pipeline needs basis_fidelity in (0, 1]")
        if self.placement not in ("identity", "search"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.swap_trials < 1:
            raise ValueError("swap_trials must be >= 1")


@dataclass(frozen=True)
class MappingResult:
    """Mapped circuit plus the layout permutation W (W[logical] = physical)."""

    circuit: Circuit
    permutation: tuple[int, ...]


# -- unrolling ----------------------------------------------------------------

def _remap(gates, mapping) -> list[Gate]:
    return [
        Gate(g.kind, tuple(mapping[q] for q in g.qubits), g.params, g.matrix)
        for g in gates
    ]


def pass_unroll(c: Circuit) -> Circuit:
    """Expand macros: H -> u2(0, pi); SWAP -> 3 CX; SU4 -> exact CX+u3 synthesis."""
    out: list[Gate] = []
    for g in c.gates:
        if g.kind is GateKind.H:
            out.append(u2_gate(0.0, np.pi, g.qubits[0]))
        elif g.kind is GateKind.SWAP:
            a, b = g.qubits
            out.extend([cx_gate(a, b), cx_gate(b, a), cx_gate(a, b)])
        elif g.kind is GateKind.SU4:
            sub = exact_synthesis(g.matrix)
            out.extend(_remap(sub.gates, {0: g.qubits[1], 1: g.qubits[0]}))
        else:
            out.append(g)
    return c.with_gates(out)


# -- swap mapping --------------------------------------------------------------

def _initial_layout(c: Circuit, graph: CouplingGraph, placement: str) -> list[int]:
    if placement == "identity" or c.m == graph.n:
        return list(range(c.m))
    if graph.n > 20:
        raise ValueError("placement search supports at most 20 physical qubits")
    dist = graph.distances()
    best = None
    for subset in itertools.combinations(range(graph.n), c.m):
        sub = np.array(subset)
        d = dist[np.ix_(sub, sub)]
        if (d == UNREACHABLE).any():
            continue
        score = int(d.sum())
        if best is None or score < best[0]:
            best = (score, subset)
    if best is None:
        raise MappingViolation("no connected region of the required size")
    # order the region by BFS from its lowest-index node
    subset = list(best[1])
    ordered = [subset[0]]
    frontier = [subset[0]]
    remaining = set(subset[1:])
    while remaining:
        nxt = sorted(
            v for u in frontier for v in graph.neighbors(u) if v in remaining
        )
        if not nxt:
            ordered.extend(sorted(remaining))
            break
        frontier = []
        for v in nxt:
            if v in remaining:
                remaining.discard(v)
                ordered.append(v)
                frontier.append(v)
    return ordered[: c.m]


@dataclass
class _RoutingUnit:
    """Consecutive layers whose two-qubit pairs repeat; routed as one group.

    Once a pair becomes adjacent its whole queue (its 2q gates plus the 1q
    gates on its qubits, in stream order) is emitted, so a block's repeated
    CX gates never pay for routing twice.
    """

    queues: dict[tuple[int, int], list[Gate]]
    loose: list[Gate]  # 1q gates on qubits outside every pair
    barrier: Gate | None = None


def _routing_units(layers) -> list[_RoutingUnit]:
    units: list[_RoutingUnit] = []
    current: _RoutingUnit | None = None
    for layer in layers:
        if any(g.kind is GateKind.BARRIER for g in layer.gates):
            units.append(_RoutingUnit({}, [], barrier=layer.gates[0]))
            current = None
            continue
        pairs = {frozenset(g.qubits) for g in layer.gates if len(g.qubits) == 2}
        if current is None or (pairs and not pairs <= set(current.queues)):
            current = _RoutingUnit({frozenset(p): [] for p in pairs}, [])
            units.append(current)
        qubit_pair = {q: key for key in current.queues for q in key}
        for g in layer.gates:
            if len(g.qubits) == 2:
                current.queues[frozenset(g.qubits)].append(g)
            elif g.qubits[0] in qubit_pair:
                current.queues[qubit_pair[g.qubits[0]]].append(g)
            else:
                current.loose.append(g)
    return units


def pass_swap_map(
    c: Circuit,
    graph: CouplingGraph,
    seed: int = 0,
    trials: int = 40,
    placement: str = "identity",
) -> MappingResult:
    """Route two-qubit gates onto the graph with greedy randomized swap layers.

    Rounds per routing unit: emit every gate group whose pair is currently
    adjacent, then pick the depth-one swap layer (over `trials` randomized
    greedy candidates) that most reduces the summed shortest-path distance
    of pending pairs, with a weak lookahead toward upcoming pairs.
    """
    n = graph.n
    if c.m > n:
        raise MappingViolation(f"circuit width {c.m} exceeds graph size {n}")
    dist = graph.distances()
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x51)))
    l2p = list(_initial_layout(c, graph, placement))
    p2l = [UNREACHABLE] * n
    for lq, pq in enumerate(l2p):
        p2l[pq] = lq

    out: list[Gate] = []
    undirected = sorted(graph.undirected)
    units = _routing_units(layerize(c))
    unit_pairs = [[tuple(sorted(key)) for key in u.queues] for u in units]

    def do_swap(p: int, q: int):
        out.append(swap_gate(p, q))
        la, lb = p2l[p], p2l[q]
        p2l[p], p2l[q] = lb, la
        if la != UNREACHABLE:
            l2p[la] = q
        if lb != UNREACHABLE:
            l2p[lb] = p

    def route_cost(layout, pending, extended) -> float:
        """Excess distance of pending pairs plus a weak lookahead term."""
        total = 0.0
        for a, b in pending:
            d = dist[layout[a], layout[b]]
            if d == UNREACHABLE:
                raise MappingViolation(
                    f"qubits {layout[a]} and {layout[b]} are in disconnected regions"
                )
            total += d - 1
        for a, b in extended:
            total += 0.3 * (dist[layout[a], layout[b]] - 1)
        return total

    for t, unit in enumerate(units):
        if unit.barrier is not None:
            out.extend(_remap([unit.barrier], l2p))
            continue
        for g in unit.loose:
            out.extend(_remap([g], l2p))
        pending = list(unit.queues)
        seen: set[tuple[int, int]] = set()
        extended: list[tuple[int, int]] = []
        for pairs in unit_pairs[t + 1 : t + 4]:
            for pair in pairs:
                if pair not in seen:
                    seen.add(pair)
                    extended.append(pair)
        extended = extended[:8]
        guard = 0
        while pending:
            guard += 1
            if guard > 100 * (n + len(pending) + 1):
                raise RuntimeError("swap search failed to converge")
            ready = [key for key in pending if dist[tuple(l2p[q] for q in key)] == 1]
            if ready:
                for key in ready:
                    out.extend(_remap(unit.queues[key], l2p))
                pending = [key for key in pending if key not in ready]
                continue
            pairs = [tuple(key) for key in pending]
            base = route_cost(l2p, pairs, extended)
            ends = {l2p[q] for key in pending for q in key}
            cands = [e for e in undirected if e[0] in ends or e[1] in ends]
            best = None  # (cost, n_swaps, swaps)
            for _ in range(trials):
                order = rng.permutation(len(cands))
                used: set[int] = set()
                chosen: list[tuple[int, int]] = []
                lay = list(l2p)
                pl = list(p2l)
                cost = base
                for ci in order:
                    p, q = cands[ci]
                    if p in used or q in used:
                        continue
                    la, lb = pl[p], pl[q]
                    pl[p], pl[q] = lb, la
                    if la != UNREACHABLE:
                        lay[la] = q
                    if lb != UNREACHABLE:
                        lay[lb] = p
                    new_cost = route_cost(lay, pairs, extended)
                    if new_cost < cost:
                        cost = new_cost
                        chosen.append((p, q))
                        used.update((p, q))
                    else:  # undo
                        pl[p], pl[q] = la, lb
                        if la != UNREACHABLE:
                            lay[la] = p
                        if lb != UNREACHABLE:
                            lay[lb] = q
                if best is None or (cost, len(chosen)) < (best[0], len(best[2])):
                    best = (cost, len(chosen), chosen)
            if best and best[2]:
                for p, q in best[2]:
                    do_swap(p, q)
            else:
                # no improving swap layer: walk the first pending pair together
                a, b = tuple(pending[0])
                pa, pb = l2p[a], l2p[b]
                step = min(
                    v for v in graph.neighbors(pa) if dist[v, pb] == dist[pa, pb] - 1
                )
                do_swap(pa, step)

    # unused physical wires pick up the leftover labels in order
    final_perm = [0] * n
    used_labels = set()
    for p in range(n):
        if p2l[p] != UNREACHABLE:
            final_perm[p] = c.output_permutation[p2l[p]]
            used_labels.add(final_perm[p])
    spare = iter(sorted(set(range(n)) - used_labels))
    for p in range(n):
        if p2l[p] == UNREACHABLE:
            final_perm[p] = next(spare)
    mapped = Circuit(n, tuple(out), tuple(final_perm))
    return MappingResult(mapped, tuple(l2p))


# -- directional and cancellation passes ---------------------------------------

def pass_cnot_reorient(c: Circuit, graph: CouplingGraph) -> Circuit:
    """Flip CX gates onto directed edges via H conjugation; fail if neither direction exists."""
    out: list[Gate] = []
    for g in c.gates:
        if g.kind is not GateKind.CX:
            out.append(g)
            continue
        a, b = g.qubits
        if graph.has_edge(a, b):
            out.append(g)
        elif graph.has_edge(b, a):
            out.extend(
                [h_gate(a), h_gate(b), cx_gate(b, a), h_gate(a), h_gate(b)]
            )
        else:
            raise MappingViolation(f"no edge between qubits {a} and {b} in either direction")
    return c.with_gates(out)


def pass_cnot_cancel(c: Circuit) -> Circuit:
    """Collapse runs of identically-oriented CX on the same pair to their parity.

    Gates on disjoint qubits in between do not block the cancellation;
    barriers and measurements do.
    """
    out: list[Gate] = []
    for g in c.gates:
        if g.kind is GateKind.CX:
            touched = set(g.qubits)
            cancelled = False
            for k in range(len(out) - 1, -1, -1):
                prev = out[k]
                if prev.kind is GateKind.BARRIER or set(prev.qubits) & touched:
                    if prev.kind is GateKind.CX and prev.qubits == g.qubits:
                        del out[k]
                        cancelled = True
                    break
            if not cancelled:
                out.append(g)
        else:
            out.append(g)
    return c.with_gates(out)


# -- single-qubit merging -------------------------------------------------------

_1Q_MERGEABLE = frozenset({GateKind.U1, GateKind.U2, GateKind.U3, GateKind.H})


def _minimal_1q_gates(v: np.ndarray, q: int) -> list[Gate]:
    """At most one gate reproducing v up to phase, preferring fewer pulses."""
    if abs(v[0, 1]) < _MERGE_TOL and abs(v[1, 0]) < _MERGE_TOL:
        lam = float(np.angle(v[1, 1] * np.conj(v[0, 0])))
        if abs(lam) < _MERGE_TOL:
            return []
        return [u1_gate(lam, q)]
    theta, phi, lam = _u3_params(v)
    if abs(theta - np.pi / 2) < _MERGE_TOL:
        return [u2_gate(phi, lam, q)]
    return [u3_gate(theta, phi, lam, q)]


def _merge_run(run: list[Gate], q: int) -> list[Gate]:
    if len(run) == 1:
        g = run[0]
        minimal = _minimal_1q_gates(gate_matrix(g), q)
        if minimal and minimal[0].kind is g.kind:
            return [g]  # already minimal; keep exact angles
        return minimal
    v = np.eye(2, dtype=complex)
    for g in run:
        v = gate_matrix(g) @ v
    return _minimal_1q_gates(v, q)


def pass_1q_optimize(c: Circuit) -> Circuit:
    """Merge consecutive single-qubit gates per qubit into at most one gate."""
    out: list[Gate] = []
    runs: dict[int, list[Gate]] = defaultdict(list)

    def flush(qubits):
        for q in sorted(qubits):
            if runs[q]:
                out.extend(_merge_run(runs[q], q))
                runs[q] = []

    for g in c.gates:
        if g.kind in _1Q_MERGEABLE:
            runs[g.qubits[0]].append(g)
        else:
            flush(g.qubits)
            out.append(g)
    flush(list(runs))
    return c.with_gates(out)


# -- two-qubit block collection and resynthesis ---------------------------------

@dataclass
class TwoQubitBlock:
    """Contiguous gates confined to one qubit pair; `pair` is the first CX's order."""

    pair: tuple[int, int]
    indices: list[int]
    anchor: int

    def unitary(self, c: Circuit) -> np.ndarray:
        a, b = self.pair
        u = np.eye(4, dtype=complex)
        for idx in self.indices:
            g = c.gates[idx]
            mat = gate_matrix(g)
            if len(g.qubits) == 1:
                u = apply_matrix_1q(u, mat, 1 if g.qubits[0] == a else 0, 2)
            elif g.qubits == (a, b):
                u = apply_matrix_2q(u, mat, 1, 0, 2)
            else:
                u = apply_matrix_2q(u, mat, 0, 1, 2)
        return u


def pass_block_collect(c: Circuit) -> tuple[list[TwoQubitBlock], list[int]]:
    """Disjoint maximal two-qubit blocks (in topological order) plus unblocked gate indices."""
    open_blocks: dict[int, TwoQubitBlock] = {}
    pending: dict[int, list[int]] = defaultdict(list)
    blocks: list[TwoQubitBlock] = []
    unblocked: list[int] = []

    def close(q: int):
        blk = open_blocks.pop(q, None)
        if blk is not None:
            for qq in blk.pair:
                open_blocks.pop(qq, None)

    for idx, g in enumerate(c.gates):
        if g.kind in (GateKind.BARRIER, GateKind.MEASURE):
            for q in g.qubits:
                close(q)
                unblocked.extend(pending.pop(q, []))
            unblocked.append(idx)
            continue
        if len(g.qubits) == 1:
            q = g.qubits[0]
            if q in open_blocks:
                open_blocks[q].indices.append(idx)
            else:
                pending[q].append(idx)
        else:
            a, b = g.qubits
            blk = open_blocks.get(a)
            if blk is not None and blk is open_blocks.get(b):
                blk.indices.append(idx)
            else:
                close(a)
                close(b)
                lead = sorted(pending.pop(a, []) + pending.pop(b, []))
                blk = TwoQubitBlock((a, b), lead + [idx], idx)
                open_blocks[a] = open_blocks[b] = blk
                blocks.append(blk)
    for q in sorted(pending):
        unblocked.extend(pending[q])
    return blocks, sorted(unblocked)


def pass_block_optimize(c: Circuit, basis_fidelity: float | None = None) -> Circuit:
    """Resynthesize each two-qubit block: exactly (basis_fidelity None) or approximately."""
    blocks, unblocked = pass_block_collect(c)
    items: list[tuple[int, list[Gate]]] = [(idx, [c.gates[idx]]) for idx in unblocked]
    for blk in blocks:
        u = blk.unitary(c)
        if basis_fidelity is None:
            sub = exact_synthesis(u)
        else:
            choice = select_expansion(weyl_of(u), basis_fidelity, allow_mirror=False)
            sub = synthesize(u, choice)
        a, b = blk.pair
        items.append((blk.anchor, _remap(sub.gates, {1: a, 0: b})))
    items.sort(key=lambda kv: kv[0])
    gates: list[Gate] = []
    for _, gs in items:
        gates.extend(gs)
    return c.with_gates(gates)


# -- interaction-locality reordering (weighted reverse Cuthill-McKee) -----------

def interaction_matrix(c: Circuit) -> np.ndarray:
    """Symmetric CX counts between qubit pairs."""
    a = np.zeros((c.m, c.m))
    for g in c.gates:
        if g.kind is GateKind.CX:
            i, j = g.qubits
            a[i, j] += 1
            a[j, i] += 1
    return a


def _bandwidth(a: np.ndarray, position: list[int]) -> int:
    bw = 0
    for i, j in zip(*np.nonzero(a)):
        if i < j:
            bw = max(bw, abs(position[i] - position[j]))
    return bw


def _weighted_rcm(a: np.ndarray) -> list[int]:
    m = a.shape[0]
    deg = (a > 0).sum(axis=1)
    wdeg = a.sum(axis=1)
    visited = [False] * m
    order: list[int] = []
    while len(order) < m:
        start = min(
            (q for q in range(m) if not visited[q]), key=lambda q: (deg[q], wdeg[q], q)
        )
        visited[start] = True
        queue = [start]
        while queue:
            u = queue.pop(0)
            order.append(u)
            nbrs = [v for v in range(m) if a[u, v] > 0 and not visited[v]]
            # repeated interactions first, then sparser nodes
            nbrs.sort(key=lambda v: (-a[u, v], deg[v], v))
            for v in nbrs:
                visited[v] = True
                queue.append(v)
    return order[::-1]


def pass_loco(c: Circuit) -> Circuit:
    """Relabel qubits by weighted reverse Cuthill-McKee if it shrinks the bandwidth."""
    a = interaction_matrix(c)
    if not a.any():
        return c
    bw_old = _bandwidth(a, list(range(c.m)))
    order = _weighted_rcm(a)
    newlabel = [0] * c.m
    for pos, old in enumerate(order):
        newlabel[old] = pos
    if _bandwidth(a, newlabel) >= bw_old:
        return c
    gates = _remap(c.gates, newlabel)
    perm = tuple(c.output_permutation[order[p]] for p in range(c.m))
    return Circuit(c.m, tuple(gates), perm)


# -- pipelines -------------------------------------------------------------------

def run_pipeline(c: Circuit, graph: CouplingGraph, pipeline: PassPipeline) -> MappingResult:
    """Apply the named pass sequence; the result respects the graph."""
    x = pass_unroll(c)
    if pipeline.loco:
        x = pass_loco(x)
    mapped = pass_swap_map(
        x, graph, seed=pipeline.seed, trials=pipeline.swap_trials, placement=pipeline.placement
    )
    x = pass_unroll(mapped.circuit)  # expand inserted SWAPs
    x = pass_cnot_reorient(x, graph)
    x = pass_cnot_cancel(x)
    x = pass_unroll(x)  # expand reorientation Hs
    x = pass_1q_optimize(x)
    if pipeline.name in ("kak", "approx"):
        fb = None if pipeline.name == "kak" else pipeline.basis_fidelity
        x = pass_block_optimize(x, fb)
        x = pass_cnot_reorient(x, graph)
        x = pass_unroll(x)
        x = pass_1q_optimize(x)
    return MappingResult(x, mapped.permutation)
