"""Undirected capacitated graphs, bidirected arc views, flows, and cuts.

Conventions shared by every module in this package:

* Vertices are integers ``0 .. n-1``.
* An undirected edge ``e`` with endpoints ``(us[e], vs[e])`` and integer
  capacity ``caps[e]`` induces two antiparallel arcs of equal capacity:
  arc ``e`` runs ``us[e] -> vs[e]`` and arc ``e + m`` runs ``vs[e] -> us[e]``.
* Per-arc quantities (flows, residual capacities) are dense ``float64``
  arrays of length ``2 * m`` in that arc order, so ``reverse_arc(a)`` is
  just ``(a + m) % (2 * m)``.

Capacities are 64-bit integers; flows are 64-bit floats.  Every "is zero" /
"is nonnegative" comparison in the package uses the single absolute
tolerance ``graph.tolerance == 1e-9 * W`` where ``W`` is the largest
capacity in the instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "CapacitatedGraph",
    "BidirectedView",
    "FlowAssignment",
    "ResidualView",
    "SubgraphMask",
    "VertexCut",
    "add_flows",
    "directed_cut_value",
    "divergence",
    "net_flow_across",
    "residual_view",
    "st_demand",
    "undirected_cut_value",
]


class CapacitatedGraph:
    """Immutable undirected graph with positive integer edge capacities.

    Parallel input edges are merged by summing capacities and self-loops are
    rejected, so the stored edge list is simple.  The constructor builds
    CSR-style adjacency indexes over the bidirected arc set for O(deg)
    neighborhood scans.  Instances never mutate after construction and are
    safe to share across threads.

    Args:
        vertex_count: number of vertices ``n``; ids are ``0 .. n-1``.
        edges: iterable of ``(u, v, capacity)`` triples.
        max_capacity: optional upper bound enforced on every capacity.
    """

    def __init__(
        self,
        vertex_count: int,
        edges: Iterable[tuple[int, int, int]],
        max_capacity: Optional[int] = None,
    ) -> None:
        if vertex_count < 1:
            raise ValueError("graph needs at least one vertex")
        self.n = int(vertex_count)

        merged: dict[tuple[int, int], int] = {}
        for u, v, c in edges:
            u, v, c = int(u), int(v), int(c)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) references a vertex outside 0..{self.n - 1}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u} is not allowed")
            if c < 1:
                raise ValueError(f"edge ({u},{v}) has non-positive capacity {c}")
            if max_capacity is not None and c > max_capacity:
                raise ValueError(f"edge ({u},{v}) capacity {c} exceeds bound {max_capacity}")
            key = (u, v) if u < v else (v, u)
            merged[key] = merged.get(key, 0) + c
        if max_capacity is not None:
            for (u, v), c in merged.items():
                if c > max_capacity:
                    raise ValueError(f"merged edge ({u},{v}) capacity {c} exceeds bound {max_capacity}")

        items = sorted(merged.items())
        self.m = len(items)
        self.us = np.fromiter((u for (u, _), _ in items), dtype=np.int64, count=self.m)
        self.vs = np.fromiter((v for (_, v), _ in items), dtype=np.int64, count=self.m)
        self.caps = np.fromiter((c for _, c in items), dtype=np.int64, count=self.m)

        # Bidirected arc arrays: arc e is us->vs, arc e+m is vs->us.
        self.tails = np.concatenate([self.us, self.vs])
        self.heads = np.concatenate([self.vs, self.us])
        self.arc_caps = np.concatenate([self.caps, self.caps]).astype(np.float64)

        order = np.argsort(self.tails, kind="stable")
        self._out_arcs = order.astype(np.int64)
        self._out_indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(self._out_indptr, self.tails + 1, 1)
        np.cumsum(self._out_indptr, out=self._out_indptr)

        order = np.argsort(self.heads, kind="stable")
        self._in_arcs = order.astype(np.int64)
        self._in_indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(self._in_indptr, self.heads + 1, 1)
        np.cumsum(self._in_indptr, out=self._in_indptr)

        self._arc_lookup: Optional[dict[tuple[int, int], int]] = None

    # ------------------------------------------------------------------
    # basic properties

    @property
    def max_capacity(self) -> int:
        """Largest edge capacity W (1 for an edgeless graph)."""
        return int(self.caps.max()) if self.m else 1

    @property
    def tolerance(self) -> float:
        """Global absolute tolerance eta = 1e-9 * W used by all checks."""
        return 1e-9 * self.max_capacity

    @property
    def num_arcs(self) -> int:
        return 2 * self.m

    def edge_list(self) -> list[tuple[int, int, int]]:
        return [(int(u), int(v), int(c)) for u, v, c in zip(self.us, self.vs, self.caps)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CapacitatedGraph):
            return NotImplemented
        return self.n == other.n and self.edge_list() == other.edge_list()

    def __repr__(self) -> str:
        return f"CapacitatedGraph(n={self.n}, m={self.m}, W={self.max_capacity})"

    # ------------------------------------------------------------------
    # arc helpers

    def reverse_arc(self, a: int) -> int:
        return (a + self.m) % (2 * self.m)

    def edge_of_arc(self, a) -> int:
        return a % self.m

    def out_arcs(self, v: int) -> np.ndarray:
        """Arc ids with tail v."""
        return self._out_arcs[self._out_indptr[v] : self._out_indptr[v + 1]]

    def in_arcs(self, v: int) -> np.ndarray:
        """Arc ids with head v."""
        return self._in_arcs[self._in_indptr[v] : self._in_indptr[v + 1]]

    def arc_index(self, u: int, v: int) -> int:
        """Arc id of u->v; raises KeyError when the edge does not exist."""
        if self._arc_lookup is None:
            lookup = {}
            for a in range(2 * self.m):
                lookup[(int(self.tails[a]), int(self.heads[a]))] = a
            self._arc_lookup = lookup
        return self._arc_lookup[(u, v)]

    def bidirected(self) -> "BidirectedView":
        return BidirectedView(self)

    # ------------------------------------------------------------------
    # structure

    def connected_components(self, active_edges: Optional[np.ndarray] = None) -> np.ndarray:
        """Component label per vertex, using only edges where active_edges is True."""
        parent = np.arange(self.n, dtype=np.int64)

        def find(x: int) -> int:
            root = x
            while parent[root] != root:
                root = parent[root]
            while parent[x] != root:
                parent[x], x = root, parent[x]
            return root

        for e in range(self.m):
            if active_edges is not None and not active_edges[e]:
                continue
            ru, rv = find(int(self.us[e])), find(int(self.vs[e]))
            if ru != rv:
                parent[max(ru, rv)] = min(ru, rv)
        labels = np.fromiter((find(v) for v in range(self.n)), dtype=np.int64, count=self.n)
        return labels

    def is_connected(self) -> bool:
        labels = self.connected_components()
        return bool(np.all(labels == labels[0]))

    def induced(
        self, vertices: Sequence[int], active_edges: Optional[np.ndarray] = None
    ) -> tuple["CapacitatedGraph", np.ndarray, np.ndarray]:
        """Subgraph induced on a vertex subset.

        Returns ``(subgraph, kept_vertices, kept_edges)`` where
        ``kept_vertices[i]`` is the original id of subgraph vertex ``i`` and
        ``kept_edges[j]`` is the original edge id of subgraph edge ``j``.
        Edges outside ``active_edges`` (when given) are dropped.
        """
        keep = np.asarray(sorted(set(int(v) for v in vertices)), dtype=np.int64)
        remap = -np.ones(self.n, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        in_sub = remap[self.us] >= 0
        in_sub &= remap[self.vs] >= 0
        if active_edges is not None:
            in_sub &= active_edges
        edge_ids = np.nonzero(in_sub)[0].astype(np.int64)
        sub_edges = [
            (int(remap[self.us[e]]), int(remap[self.vs[e]]), int(self.caps[e])) for e in edge_ids
        ]
        sub = CapacitatedGraph(len(keep), sub_edges)
        # CapacitatedGraph sorts its edge list; recover the id mapping.
        pos = {}
        for e in edge_ids:
            a, b = int(remap[self.us[e]]), int(remap[self.vs[e]])
            pos[(min(a, b), max(a, b))] = int(e)
        kept_edges = np.fromiter(
            (pos[(int(u), int(v))] for u, v in zip(sub.us, sub.vs)), dtype=np.int64, count=sub.m
        )
        return sub, keep, kept_edges


class BidirectedView:
    """Directed view of an undirected graph: two antiparallel arcs per edge."""

    def __init__(self, graph: CapacitatedGraph) -> None:
        self.graph = graph
        self.tails = graph.tails
        self.heads = graph.heads
        self.arc_caps = graph.arc_caps

    @property
    def n(self) -> int:
        return self.graph.n


@dataclass(frozen=True)
class SubgraphMask:
    """Set of undirected edges removed relative to a base graph."""

    removed: frozenset[int]

    def active(self, m: int) -> np.ndarray:
        out = np.ones(m, dtype=bool)
        if self.removed:
            out[list(self.removed)] = False
        return out


class FlowAssignment:
    """Nonnegative flow values on the bidirected arcs of a graph.

    Values are absolute (same scale as capacities).  Antiparallel arcs may
    both carry flow; sums never cancel.  Cancellation is a separate,
    explicit normalization (:meth:`cancel_antiparallel`) used by verifiers.
    """

    def __init__(self, graph: CapacitatedGraph, values: Optional[np.ndarray] = None) -> None:
        self.graph = graph
        if values is None:
            values = np.zeros(graph.num_arcs, dtype=np.float64)
        else:
            values = np.asarray(values, dtype=np.float64)
            if values.shape != (graph.num_arcs,):
                raise ValueError(f"expected {graph.num_arcs} arc values, got {values.shape}")
            if values.size and values.min() < -graph.tolerance:
                raise ValueError("flow values must be nonnegative")
            values = np.maximum(values, 0.0)
        self.values = values

    @classmethod
    def from_arc_dict(
        cls, graph: CapacitatedGraph, flows: Mapping[tuple[int, int], float]
    ) -> "FlowAssignment":
        values = np.zeros(graph.num_arcs, dtype=np.float64)
        for (u, v), x in flows.items():
            values[graph.arc_index(u, v)] = float(x)
        return cls(graph, values)

    def flow(self, u: int, v: int) -> float:
        return float(self.values[self.graph.arc_index(u, v)])

    def congestion(self) -> float:
        """max over arcs of flow/capacity; 0 for the empty flow."""
        if self.graph.m == 0:
            return 0.0
        return float(np.max(self.values / self.graph.arc_caps))

    def congestion_vector(self) -> np.ndarray:
        """Per-arc flow/capacity ratios."""
        return self.values / self.graph.arc_caps

    @classmethod
    def from_congestion(cls, graph: CapacitatedGraph, ratios: np.ndarray) -> "FlowAssignment":
        return cls(graph, np.asarray(ratios, dtype=np.float64) * graph.arc_caps)

    def copy(self) -> "FlowAssignment":
        return FlowAssignment(self.graph, self.values.copy())

    def scaled(self, factor: float) -> "FlowAssignment":
        if factor < 0:
            raise ValueError("flow scale must be nonnegative")
        return FlowAssignment(self.graph, self.values * factor)

    def cancel_antiparallel(self) -> "FlowAssignment":
        """Cancel min(f(u,v), f(v,u)) on every arc pair.

        Preserves divergence exactly; the result carries flow in at most one
        direction per edge.
        """
        m = self.graph.m
        fwd, bwd = self.values[:m], self.values[m:]
        low = np.minimum(fwd, bwd)
        return FlowAssignment(self.graph, np.concatenate([fwd - low, bwd - low]))

    def __repr__(self) -> str:
        nz = int(np.count_nonzero(self.values))
        return f"FlowAssignment(arcs={self.graph.num_arcs}, nonzero={nz})"


class ResidualView:
    """Directed arc capacities of a (possibly masked) graph under a flow.

    Arc capacities follow ``c'(u,v) = c(u,v) - f(u,v) + f(v,u)``.  Flow on
    masked edges is dropped before the computation (the restriction of the
    flow to the masked graph); masked arcs expose capacity 0.  Derived
    capacities below ``-tolerance`` raise; small negatives are clamped to 0.
    """

    def __init__(
        self,
        graph: CapacitatedGraph,
        flow: FlowAssignment,
        mask: Optional[SubgraphMask] = None,
    ) -> None:
        if flow.graph is not graph:
            raise ValueError("flow was built for a different graph")
        self.graph = graph
        self.flow = flow
        self.mask = mask

        m = graph.m
        active = mask.active(m) if mask is not None else np.ones(m, dtype=bool)
        self.active_edges = active
        act2 = np.concatenate([active, active])
        restricted = np.where(act2, flow.values, 0.0)
        self.restricted_values = restricted
        caps = np.where(act2, graph.arc_caps, 0.0)
        fwd, bwd = restricted[:m], restricted[m:]
        raw = caps - restricted + np.concatenate([bwd, fwd])
        low = float(raw.min()) if raw.size else 0.0
        if low < -graph.tolerance:
            raise ValueError(f"negative residual capacity {low} beyond tolerance; flow infeasible")
        self.arc_caps = np.maximum(raw, 0.0)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def tails(self) -> np.ndarray:
        return self.graph.tails

    @property
    def heads(self) -> np.ndarray:
        return self.graph.heads

    def capacity(self, u: int, v: int) -> float:
        return float(self.arc_caps[self.graph.arc_index(u, v)])


def residual_view(
    graph: CapacitatedGraph, flow: FlowAssignment, mask: Optional[SubgraphMask] = None
) -> ResidualView:
    """Residual arc-capacity view of ``graph`` (optionally masked) under ``flow``."""
    return ResidualView(graph, flow, mask)


@dataclass(frozen=True)
class VertexCut:
    """Vertex subset S defining the cut (S, V \\ S).

    ``source``/``sink`` are optional; when present they must sit on the
    correct sides.
    """

    side: frozenset[int]
    source: Optional[int] = None
    sink: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.side:
            raise ValueError("cut side must be nonempty")
        if self.source is not None and self.source not in self.side:
            raise ValueError(f"source {self.source} must lie inside the cut side")
        if self.sink is not None and self.sink in self.side:
            raise ValueError(f"sink {self.sink} must lie outside the cut side")

    def member_mask(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[list(self.side)] = True
        return out

    def sorted_ids(self) -> list[int]:
        return sorted(int(v) for v in self.side)

    def __repr__(self) -> str:
        ids = self.sorted_ids()
        shown = ids if len(ids) <= 8 else ids[:8] + ["..."]
        return f"VertexCut(side={shown}, s={self.source}, t={self.sink})"


def _as_arc_view(g) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Normalize graph-like inputs to (tails, heads, arc_caps, n)."""
    return g.tails, g.heads, g.arc_caps, g.n


def directed_cut_value(g, cut: VertexCut) -> float:
    """Total capacity of arcs with tail in S and head outside S.

    Accepts a CapacitatedGraph (interpreted as its bidirected view), a
    BidirectedView, or a ResidualView.  Raises on improper cuts (S empty or
    S = V).
    """
    tails, heads, caps, n = _as_arc_view(g)
    if len(cut.side) >= n:
        raise ValueError("improper cut: side covers every vertex")
    mask = cut.member_mask(n)
    crossing = mask[tails] & ~mask[heads]
    return float(caps[crossing].sum())


def undirected_cut_value(
    graph: CapacitatedGraph, cut: VertexCut, active_edges: Optional[np.ndarray] = None
) -> float:
    """Total capacity of undirected edges with exactly one endpoint in S."""
    if len(cut.side) >= graph.n:
        raise ValueError("improper cut: side covers every vertex")
    mask = cut.member_mask(graph.n)
    crossing = mask[graph.us] != mask[graph.vs]
    if active_edges is not None:
        crossing &= active_edges
    return float(graph.caps[crossing].sum())


def divergence(flow: FlowAssignment) -> np.ndarray:
    """Net outflow per vertex: sum of outgoing minus incoming flow.

    The result sums to zero up to float rounding; it is the demand the flow
    routes.
    """
    g = flow.graph
    out = np.bincount(g.tails, weights=flow.values, minlength=g.n)
    inc = np.bincount(g.heads, weights=flow.values, minlength=g.n)
    return out - inc


def net_flow_across(flow: FlowAssignment, cut: VertexCut) -> float:
    """Flow leaving S minus flow entering S."""
    g = flow.graph
    mask = cut.member_mask(g.n)
    tail_in = mask[g.tails]
    head_in = mask[g.heads]
    forward = flow.values[tail_in & ~head_in].sum()
    backward = flow.values[~tail_in & head_in].sum()
    return float(forward - backward)


def add_flows(f: FlowAssignment, g: FlowAssignment) -> FlowAssignment:
    """Arcwise sum; antiparallel arcs are never cancelled here."""
    if f.graph is not g.graph:
        raise ValueError("flows live on different graphs")
    return FlowAssignment(f.graph, f.values + g.values)


def st_demand(n: int, s: int, t: int, value: float = 1.0) -> np.ndarray:
    """Demand vector routing ``value`` units from s to t."""
    d = np.zeros(n, dtype=np.float64)
    d[s] += value
    d[t] -= value
    return d
