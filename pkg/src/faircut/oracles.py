"""Exact combinatorial oracles: max-flow, min-congestion routing, fairness.

These certify the approximate pipeline at desk scale.  Max-flow is a Dinic
(level graph + blocking flow) implementation; it is exact on integer
capacities and works on float capacities with the global tolerance.  The
fairness check reduces to a flow-with-lower-bounds feasibility problem and
the minimal fairness factor is found by binary search.

The per-arc fairness requirement is interpreted in the net sense: the
witness must push at least ``c(u,v)/alpha`` net flow across every cut arc.
(A reading that allowed opposite flow on the reverse arc to coexist would be
vacuous: a zero-value eddy on each cut edge would make every cut 1-fair.)
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .graph import (
    CapacitatedGraph,
    FlowAssignment,
    ResidualView,
    VertexCut,
    undirected_cut_value,
)

__all__ = [
    "FairnessCertificate",
    "FairnessRefusal",
    "max_flow_exact",
    "min_congestion_routing",
    "min_fair_alpha",
    "verify_fairness",
]

# Binary-search precision knobs, fixed and referenced by the tests.
CONGESTION_INTERVAL_REL = 1e-10
ALPHA_INTERVAL_REL = 1e-6


class _Dinic:
    """Array-backed Dinic max-flow over an explicit directed arc list."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list = []

    def add_arc(self, u: int, v: int, cap) -> int:
        """Add arc u->v with the given capacity; returns its id."""
        a = len(self.to)
        self.adj[u].append(a)
        self.to.append(v)
        self.cap.append(cap)
        self.adj[v].append(a + 1)
        self.to.append(u)
        self.cap.append(cap * 0)  # zero of the same numeric type
        return a

    def _bfs(self, s: int, t: int, zero) -> bool:
        self.level = [-1] * self.n
        self.level[s] = 0
        q = deque([s])
        to, cap, adj, level = self.to, self.cap, self.adj, self.level
        while q:
            u = q.popleft()
            for a in adj[u]:
                v = to[a]
                if level[v] < 0 and cap[a] > zero:
                    level[v] = level[u] + 1
                    q.append(v)
        return self.level[t] >= 0

    def _dfs(self, s: int, t: int, zero):
        """One blocking-flow phase on the current level graph."""
        to, cap, adj, level = self.to, self.cap, self.adj, self.level
        it = [0] * self.n
        total = 0
        path: list[int] = []
        u = s
        while True:
            if u == t:
                bottleneck = min(cap[a] for a in path)
                for a in path:
                    cap[a] -= bottleneck
                    cap[a ^ 1] += bottleneck
                total += bottleneck
                # Retreat to the shallowest saturated arc on the path.
                k = 0
                while cap[path[k]] > zero:
                    k += 1
                u = to[path[k] ^ 1]
                del path[k:]
                continue
            advanced = False
            while it[u] < len(adj[u]):
                a = adj[u][it[u]]
                v = to[a]
                if cap[a] > zero and level[v] == level[u] + 1:
                    path.append(a)
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                if u == s:
                    return total
                level[u] = -1  # dead end; prune from this phase
                u = to[path.pop() ^ 1]

    def solve(self, s: int, t: int, zero=0):
        total = 0
        while self._bfs(s, t, zero):
            total += self._dfs(s, t, zero)
        return total

    def reachable(self, s: int, zero=0) -> set[int]:
        seen = {s}
        q = deque([s])
        to, cap, adj = self.to, self.cap, self.adj
        while q:
            u = q.popleft()
            for a in adj[u]:
                v = to[a]
                if v not in seen and cap[a] > zero:
                    seen.add(v)
                    q.append(v)
        return seen


def _zero_for(graph_like) -> float:
    if isinstance(graph_like, ResidualView):
        return graph_like.graph.tolerance
    return 0


def max_flow_exact(
    g: Union[CapacitatedGraph, ResidualView], s: int, t: int
) -> tuple[float, FlowAssignment, VertexCut]:
    """Exact maximum (s,t)-flow with a minimum cut.

    On a CapacitatedGraph the bidirected arcs are used and the value is
    integral.  On a ResidualView the residual arc capacities are used.  When
    s cannot reach t the value is 0 and the cut is s's reachable set.

    Returns:
        (value, flow, mincut) where the flow is cancellation-free and
        attains the value, and the min cut separates s from t.
    """
    if s == t:
        raise ValueError("source and sink must differ")
    if isinstance(g, CapacitatedGraph):
        base, arc_caps = g, g.arc_caps
        integral = True
    else:
        base, arc_caps = g.graph, g.arc_caps
        integral = False

    solver = _Dinic(base.n)
    ids = np.full(base.num_arcs, -1, dtype=np.int64)
    orig = {}
    for a in range(base.num_arcs):
        c = arc_caps[a]
        if c <= 0:
            continue
        cap = int(c) if integral else float(c)
        ids[a] = solver.add_arc(int(base.tails[a]), int(base.heads[a]), cap)
        orig[a] = cap
    zero = _zero_for(g) if not integral else 0
    value = solver.solve(s, t, zero=zero)

    used = np.zeros(base.num_arcs, dtype=np.float64)
    for a in orig:
        used[a] = orig[a] - solver.cap[ids[a]]
    # Cancel per antiparallel pair so the returned flow is one-directional.
    m = base.m
    fwd, bwd = used[:m], used[m:]
    low = np.minimum(fwd, bwd)
    flow = FlowAssignment(base, np.concatenate([fwd - low, bwd - low]))

    reach = solver.reachable(s, zero=zero)
    if t in reach:
        raise RuntimeError("max-flow terminated with sink still reachable")
    cut = VertexCut(frozenset(reach), source=s, sink=t)
    return value, flow, cut


def _component_balanced(g: CapacitatedGraph, d: np.ndarray, tol: float) -> bool:
    labels = g.connected_components()
    for root in np.unique(labels):
        if abs(float(d[labels == root].sum())) > tol:
            return False
    return True


def min_congestion_routing(
    g: CapacitatedGraph, d: np.ndarray
) -> tuple[float, FlowAssignment]:
    """Minimum congestion needed to route demand ``d`` in the bidirected graph.

    Reduces feasibility at a candidate congestion ``kappa`` to a
    super-source/super-sink max-flow (arcs scaled to ``kappa * c``) and
    binary-searches ``kappa``.  The returned flow routes ``d`` with
    congestion at most ``opt * (1 + 1e-6)``.

    Raises:
        ValueError: if some connected component's demand does not balance
            (no finite congestion can route it).
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (g.n,):
        raise ValueError(f"demand must have {g.n} entries")
    tol = 1e-9 * max(1.0, float(np.abs(d).sum()))
    if abs(float(d.sum())) > tol:
        raise ValueError("demand entries must sum to zero")
    supply = float(d[d > 0].sum())
    if supply <= tol:
        return 0.0, FlowAssignment(g)
    if not _component_balanced(g, d, tol):
        raise ValueError("demand crosses disconnected components; no routing exists")

    src, snk = g.n, g.n + 1
    feas_tol = 1e-12 * supply  # relative: float noise in the flow sums is far below this

    def attempt(kappa: float):
        solver = _Dinic(g.n + 2)
        arc_ids = []
        for a in range(g.num_arcs):
            arc_ids.append(solver.add_arc(int(g.tails[a]), int(g.heads[a]), kappa * float(g.arc_caps[a])))
        for v in range(g.n):
            if d[v] > 0:
                solver.add_arc(src, v, float(d[v]))
            elif d[v] < 0:
                solver.add_arc(v, snk, float(-d[v]))
        value = solver.solve(src, snk, zero=0.0)
        ok = value >= supply - feas_tol
        return ok, solver, arc_ids

    violated: Optional[frozenset] = None

    def record_violation(solver) -> None:
        nonlocal violated
        reach = solver.reachable(src, zero=1e-12 * supply)
        side = frozenset(v for v in reach if v < g.n)
        if side:
            violated = side

    hi = 1.0
    ok, solver, arc_ids = attempt(hi)
    doublings = 0
    while not ok:
        record_violation(solver)
        hi *= 2.0
        doublings += 1
        if doublings > 80:
            raise RuntimeError("congestion search failed to bracket; demand appears unroutable")
        ok, solver, arc_ids = attempt(hi)
    lo = 0.0 if doublings == 0 else hi / 2.0

    while hi - lo > CONGESTION_INTERVAL_REL * max(hi, 1e-30) and hi - lo > 1e-18:
        mid = 0.5 * (lo + hi)
        ok, cand_solver, cand_ids = attempt(mid)
        if ok:
            hi, solver, arc_ids = mid, cand_solver, cand_ids
        else:
            record_violation(cand_solver)
            lo = mid

    # Polish to an exact combinatorial value: the violated cut at the last
    # infeasible candidate pins the optimum as demand-inside over boundary
    # capacity, computed from exact sums instead of the bisection endpoint.
    # Any set's ratio is a lower bound on the optimum, so a ratio above the
    # final infeasible endpoint can only be more accurate than hi itself.
    opt = float(hi)
    if violated is not None and len(violated) < g.n:
        mask = np.zeros(g.n, dtype=bool)
        mask[list(violated)] = True
        boundary = float(g.caps[mask[g.us] != mask[g.vs]].sum())
        if boundary > 0:
            ratio = float(d[list(violated)].sum()) / boundary
            if ratio >= lo * (1.0 - 1e-12):
                opt = ratio

    used = np.zeros(g.num_arcs, dtype=np.float64)
    for a in range(g.num_arcs):
        aid = arc_ids[a]
        used[a] = hi * float(g.arc_caps[a]) - solver.cap[aid]
    m = g.m
    fwd, bwd = used[:m], used[m:]
    low = np.minimum(fwd, bwd)
    flow = FlowAssignment(g, np.maximum(np.concatenate([fwd - low, bwd - low]), 0.0))
    return opt, flow


@dataclass(frozen=True)
class FairnessCertificate:
    """Witness that a cut is alpha-fair.

    The witness flow is feasible, routes ``value`` units from source to
    sink, and pushes at least ``c(u,v)/alpha`` across every cut arc (the
    reverse arcs of cut edges carry nothing, so the bound holds in the net
    sense too).
    """

    alpha: float
    witness_flow: FlowAssignment
    value: float


@dataclass(frozen=True)
class FairnessRefusal:
    """No feasible flow meets the per-arc bound; carries the blocking set.

    ``blocking_set`` is the violated cut found in the auxiliary network:
    the lower bounds demand more capacity into its complement than exists.
    """

    alpha: float
    blocking_set: frozenset[int]
    deficit: float


def verify_fairness(
    g: CapacitatedGraph, cut: VertexCut, alpha: float
) -> Union[FairnessCertificate, FairnessRefusal]:
    """Decide whether ``cut`` is alpha-fair, producing a witness or refusal.

    A feasible (s,t)-flow must send at least ``c(u,v)/alpha`` across every
    arc leaving the cut side.  The decision reduces to standard circulation
    feasibility with lower bounds: subtract the bounds, route the induced
    excess from an auxiliary source, and close the (s,t) pair with a
    return arc.
    """
    if alpha < 1:
        raise ValueError(f"fairness factor must be at least 1, got {alpha}")
    s, t = cut.source, cut.sink
    if s is None or t is None:
        raise ValueError("cut must carry source and sink designations")
    if not (0 < len(cut.side) < g.n):
        raise ValueError("improper cut")

    mask = cut.member_mask(g.n)
    crossing = mask[g.us] != mask[g.vs]
    total_cap = float(g.caps.sum())
    excess = np.zeros(g.n, dtype=np.float64)

    solver = _Dinic(g.n + 2)
    aux_src, aux_snk = g.n, g.n + 1
    edge_arcs: list[tuple[int, int, int, float]] = []  # (edge, arc_id, direction, lower)
    for e in range(g.m):
        u, v, c = int(g.us[e]), int(g.vs[e]), float(g.caps[e])
        if crossing[e]:
            # Orient the single working arc out of the cut side with bounds
            # [c/alpha, c]; the reverse direction is dropped so the lower
            # bound constrains the net flow.
            if not mask[u]:
                u, v = v, u
            lower = c / alpha
            arc = solver.add_arc(u, v, c - lower)
            excess[v] += lower
            excess[u] -= lower
            edge_arcs.append((e, arc, 0 if u == int(g.us[e]) else 1, lower))
        else:
            a0 = solver.add_arc(u, v, c)
            a1 = solver.add_arc(v, u, c)
            edge_arcs.append((e, a0, 0, 0.0))
            edge_arcs.append((e, a1, 1, 0.0))
    return_arc = solver.add_arc(t, s, total_cap + 1.0)

    need = 0.0
    for v in range(g.n):
        if excess[v] > 0:
            solver.add_arc(aux_src, v, float(excess[v]))
            need += float(excess[v])
        elif excess[v] < 0:
            solver.add_arc(v, aux_snk, float(-excess[v]))

    value = solver.solve(aux_src, aux_snk, zero=0.0)
    feas_tol = 1e-11 * max(1.0, need)
    if value < need - feas_tol:
        reach = solver.reachable(aux_src, zero=1e-12 * max(1.0, total_cap))
        blocking = frozenset(v for v in reach if v < g.n)
        return FairnessRefusal(alpha=alpha, blocking_set=blocking, deficit=need - value)

    caps_at_entry: dict[int, float] = {}
    flow_vals = np.zeros(g.num_arcs, dtype=np.float64)
    for e, arc, direction, lower in edge_arcs:
        u, v, c = int(g.us[e]), int(g.vs[e]), float(g.caps[e])
        upper = (c - lower) if lower else c
        pushed = upper - solver.cap[arc]
        flow_vals[e + direction * g.m] += max(0.0, pushed) + lower
    # Normalize non-cut edges so the witness is cancellation-free everywhere.
    m = g.m
    fwd, bwd = flow_vals[:m], flow_vals[m:]
    low = np.minimum(fwd, bwd)
    flow = FlowAssignment(g, np.concatenate([fwd - low, bwd - low]))
    tau = (total_cap + 1.0) - solver.cap[return_arc]
    return FairnessCertificate(alpha=alpha, witness_flow=flow, value=float(tau))


def min_fair_alpha(g: CapacitatedGraph, cut: VertexCut) -> float:
    """Smallest alpha for which ``verify_fairness`` accepts, to 1e-6 relative.

    Feasibility is monotone in alpha, so binary search over
    ``[1, c(dS) * |dS|]`` is exact up to the interval width; the bracket is
    widened defensively if its upper end somehow refuses.
    """
    if isinstance(verify_fairness(g, cut, 1.0), FairnessCertificate):
        return 1.0
    boundary = undirected_cut_value(g, cut)
    mask = cut.member_mask(g.n)
    arcs = int(np.count_nonzero(mask[g.us] != mask[g.vs]))
    hi = max(2.0, boundary * max(arcs, 1))
    while not isinstance(verify_fairness(g, cut, hi), FairnessCertificate):
        hi *= 4.0
        if hi > 1e15:
            raise RuntimeError("no finite fairness factor found; cut appears unreachable")
    lo = 1.0
    while hi - lo > ALPHA_INTERVAL_REL * lo:
        mid = 0.5 * (lo + hi)
        if isinstance(verify_fairness(g, cut, mid), FairnessCertificate):
            hi = mid
        else:
            lo = mid
    return float(hi)


def maxflow_value(g: CapacitatedGraph, s: int, t: int) -> float:
    """Convenience wrapper returning only the exact max-flow value."""
    value, _, _ = max_flow_exact(g, s, t)
    return float(value)
