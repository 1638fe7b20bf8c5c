"""Directed qubit connectivity graphs, presets, and the JSON file format."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

UNREACHABLE = -1


@dataclass(frozen=True)
class CouplingGraph:
    """Directed edges (control, target) over n physical qubits."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(
            self, "edges", frozenset((int(c), int(t)) for c, t in self.edges)
        )
        for c, t in self.edges:
            if c == t:
                raise ValueError(f"self-loop edge ({c}, {t})")
            if not (0 <= c < self.n and 0 <= t < self.n):
                raise ValueError(f"edge ({c}, {t}) outside 0..{self.n - 1}")

    @property
    def undirected(self) -> frozenset[tuple[int, int]]:
        return frozenset((min(c, t), max(c, t)) for c, t in self.edges)

    def has_edge(self, c: int, t: int) -> bool:
        return (c, t) in self.edges

    def connected(self, a: int, b: int) -> bool:
        key = (min(a, b), max(a, b))
        return key in self.undirected

    def neighbors(self, q: int) -> list[int]:
        out = set()
        for a, b in self.undirected:
            if a == q:
                out.add(b)
            elif b == q:
                out.add(a)
        return sorted(out)

    def distances(self) -> np.ndarray:
        """All-pairs shortest path lengths on the undirected skeleton (-1 if unreachable)."""
        dist = np.full((self.n, self.n), UNREACHABLE, dtype=np.int64)
        adj = [self.neighbors(q) for q in range(self.n)]
        for src in range(self.n):
            dist[src, src] = 0
            queue = [src]
            while queue:
                nxt = []
                for u in queue:
                    for v in adj[u]:
                        if dist[src, v] == UNREACHABLE:
                            dist[src, v] = dist[src, u] + 1
                            nxt.append(v)
                queue = nxt
        return dist

    def to_json(self) -> str:
        return json.dumps(
            {"schema_version": 1, "n": self.n, "edges": sorted(self.edges)},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "CouplingGraph":
        data = json.loads(text)
        return cls(int(data["n"]), frozenset((c, t) for c, t in data["edges"]))


def _bidirectional(n: int, pairs) -> CouplingGraph:
    edges = set()
    for a, b in pairs:
        edges.add((a, b))
        edges.add((b, a))
    return CouplingGraph(n, frozenset(edges))


def all_to_all(n: int) -> CouplingGraph:
    return _bidirectional(n, ((a, b) for a in range(n) for b in range(a + 1, n)))


def line(n: int) -> CouplingGraph:
    return _bidirectional(n, ((i, i + 1) for i in range(n - 1)))


def loop(n: int) -> CouplingGraph:
    if n < 3:
        return line(n)
    pairs = [(i, i + 1) for i in range(n - 1)] + [(n - 1, 0)]
    return _bidirectional(n, pairs)


def grid_positions(n: int) -> list[tuple[int, int]]:
    """(row, col) per qubit: largest square, then a right column, then a bottom row."""
    s = int(np.floor(np.sqrt(n)))
    pos = [(r, c) for r in range(s) for c in range(s)]
    extra = n - s * s
    right = min(extra, s)
    pos += [(r, s) for r in range(right)]
    pos += [(s, c) for c in range(extra - right)]
    return pos[:n]


def grid(n: int) -> CouplingGraph:
    pos = grid_positions(n)
    index = {p: i for i, p in enumerate(pos)}
    pairs = []
    for (r, c), i in index.items():
        for dr, dc in ((0, 1), (1, 0)):
            j = index.get((r + dr, c + dc))
            if j is not None:
                pairs.append((i, j))
    return _bidirectional(n, pairs)


_PRESET_RE = re.compile(r"^(all-to-all|line|loop|grid)\((\d+)\)$")
_PRESET_FNS = {"all-to-all": all_to_all, "line": line, "loop": loop, "grid": grid}
DEVICE_NAMES = ("tenerife", "melbourne", "tokyo", "johannesburg")


def load_device(name: str) -> CouplingGraph:
    text = resources.files("qvbench.data").joinpath(f"{name}.json").read_text()
    return CouplingGraph.from_json(text)


def resolve_graph(spec: str) -> CouplingGraph:
    """Parse 'line(4)'-style presets, shipped device names, or a JSON file path."""
    m = _PRESET_RE.match(spec)
    if m:
        return _PRESET_FNS[m.group(1)](int(m.group(2)))
    if spec in DEVICE_NAMES:
        return load_device(spec)
    with open(spec, encoding="utf-8") as fh:
        return CouplingGraph.from_json(fh.read())
