"""Iterative fair-cut driver.

Maintains a cut and a cumulative flow.  Each iteration removes the cut
edges already near-saturated in the outgoing direction, asks the flow-or-
cut primitive about the residual of the remaining graph at half the
current boundary potential, and then either grows the flow or replaces the
cut by the better of union/intersection with the returned one.  The
boundary potential contracts by at least one quarter per certified
iteration, so the loop needs only logarithmically many rounds before every
outgoing cut arc is near-saturated; the achieved fairness of the final cut
is then measured exactly by the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .approximator import CutMatrix, resolve_builder
from .flowcut import FlowResult, SolverExhausted, flow_or_cut
from .graph import (
    CapacitatedGraph,
    FlowAssignment,
    ResidualView,
    SubgraphMask,
    VertexCut,
    add_flows,
    directed_cut_value,
)
from .oracles import min_fair_alpha

__all__ = [
    "DriverAborted",
    "FairCutResult",
    "IterationRecord",
    "IterationState",
    "fair_cut",
    "iterate_once",
    "unsaturated_arcs",
]

# Cut arcs with flow above (1 - SATURATION_MARGIN*eps) * cap are treated as
# saturated and temporarily removed; the loop stops once the residual
# boundary potential drops below POTENTIAL_EXIT*eps (at that point every
# outgoing cut arc is saturated, since capacities are at least 1).
SATURATION_MARGIN = 4.0
POTENTIAL_EXIT = 4.0
THRESHOLD_FACTOR = 0.5
CONTRACTION = 0.75
DEFAULT_BUDGET = 400

Builder = Callable[[CapacitatedGraph, Optional[int]], CutMatrix]


class DriverAborted(RuntimeError):
    """The primitive exhausted its budget twice; carries the trace so far."""

    def __init__(self, message: str, trace: list["IterationRecord"]) -> None:
        super().__init__(message)
        self.trace = trace


@dataclass
class IterationRecord:
    index: int
    potential: float
    branch: str
    primal_gap: float


@dataclass
class IterationState:
    """Snapshot at the top of one iteration (before the primitive call)."""

    index: int
    cut: VertexCut
    flow: FlowAssignment
    unsaturated: np.ndarray
    mask: SubgraphMask
    residual: ResidualView
    potential_value: float

    @property
    def graph(self) -> CapacitatedGraph:
        return self.flow.graph


@dataclass
class FairCutResult:
    cut: VertexCut
    achieved_alpha: Optional[float]
    iterations: list[IterationRecord]
    final_flow: FlowAssignment
    eps: float
    seed: int
    approximator: str
    max_rounds: int
    final_potential: float


def unsaturated_arcs(
    graph: CapacitatedGraph, flow: FlowAssignment, cut: VertexCut, eps: float
) -> np.ndarray:
    """Outgoing cut arcs whose flow is at most ``(1 - 4*eps) * capacity``.

    The comparison is inclusive at exact equality (tolerance eta).
    """
    mask = cut.member_mask(graph.n)
    crossing = np.nonzero(mask[graph.tails] & ~mask[graph.heads])[0]
    limit = (1.0 - SATURATION_MARGIN * eps) * graph.arc_caps[crossing] + graph.tolerance
    return crossing[flow.values[crossing] <= limit]


def _make_state(
    graph: CapacitatedGraph, cut: VertexCut, flow: FlowAssignment, eps: float, index: int
) -> IterationState:
    unsat = unsaturated_arcs(graph, flow, cut, eps)
    mask_arr = cut.member_mask(graph.n)
    crossing = np.nonzero(mask_arr[graph.tails] & ~mask_arr[graph.heads])[0]
    saturated = np.setdiff1d(crossing, unsat, assume_unique=True)
    removed = frozenset(int(graph.edge_of_arc(a)) for a in saturated)
    mask = SubgraphMask(removed)
    residual = ResidualView(graph, flow, mask)
    potential = directed_cut_value(residual, cut)
    return IterationState(
        index=index,
        cut=cut,
        flow=flow,
        unsaturated=unsat,
        mask=mask,
        residual=residual,
        potential_value=potential,
    )


def _uncross(state: IterationState, x_cut: VertexCut) -> VertexCut:
    """Better of union/intersection with the current cut, by residual value."""
    s, t = state.cut.source, state.cut.sink
    union = VertexCut(state.cut.side | x_cut.side, source=s, sink=t)
    inter = VertexCut(state.cut.side & x_cut.side, source=s, sink=t)
    v_union = directed_cut_value(state.residual, union)
    v_inter = directed_cut_value(state.residual, inter)
    return union if v_union < v_inter else inter


def iterate_once(
    state: IterationState,
    eps: float,
    builder: Builder,
    budget: int = DEFAULT_BUDGET,
    seed: Optional[int] = None,
    debug: bool = False,
) -> tuple[IterationState, IterationRecord]:
    """One driver round: call the primitive, grow the flow or move the cut.

    The cut matrix is rebuilt by ``builder`` on the masked graph restricted
    to the component containing both endpoints; removed or stranded parts
    cannot carry flow and never appear in the subproblem.  On budget
    exhaustion the primitive is retried once with four times the budget.
    """
    graph = state.graph
    s, t = state.cut.source, state.cut.sink
    tau = THRESHOLD_FACTOR * state.potential_value
    labels = graph.connected_components(active_edges=state.residual.active_edges)

    primal_gap = float("nan")
    if labels[s] != labels[t]:
        # Every remaining path is gone; the endpoint's component is a cut of
        # residual value zero, well under tau.
        side = frozenset(int(v) for v in np.nonzero(labels == labels[s])[0])
        x_cut = VertexCut(side, source=s, sink=t)
        branch = "cut"
        new_cut, new_flow = _uncross(state, x_cut), state.flow
    else:
        comp = np.nonzero(labels == labels[s])[0]
        sub, vkeep, ekeep = graph.induced(comp, active_edges=state.residual.active_edges)
        remap = -np.ones(graph.n, dtype=np.int64)
        remap[vkeep] = np.arange(len(vkeep))
        sub_vals = np.concatenate([state.flow.values[ekeep], state.flow.values[ekeep + graph.m]])
        sub_flow = FlowAssignment(sub, sub_vals)
        sub_res = ResidualView(sub, sub_flow)
        cuts = builder(sub, seed)
        try:
            result = flow_or_cut(sub, sub_res, int(remap[s]), int(remap[t]), tau, eps, cuts, budget)
        except SolverExhausted:
            result = flow_or_cut(sub, sub_res, int(remap[s]), int(remap[t]), tau, eps, cuts, budget * 4)

        if isinstance(result, FlowResult):
            lifted = np.zeros(graph.num_arcs, dtype=np.float64)
            lifted[ekeep] = result.flow.values[: sub.m]
            lifted[ekeep + graph.m] = result.flow.values[sub.m :]
            branch = "flow"
            primal_gap = result.primal_gap
            new_cut, new_flow = state.cut, add_flows(state.flow, FlowAssignment(graph, lifted))
        else:
            side = frozenset(int(vkeep[v]) for v in result.cut.side)
            x_cut = VertexCut(side, source=s, sink=t)
            branch = "cut"
            new_cut, new_flow = _uncross(state, x_cut), state.flow

    new_state = _make_state(graph, new_cut, new_flow, eps, state.index + 1)
    if debug:
        bound = CONTRACTION * state.potential_value + 1e-9 * graph.max_capacity
        assert new_state.potential_value <= bound, (
            f"contraction violated: {new_state.potential_value} > {bound}"
        )
    record = IterationRecord(
        index=state.index,
        potential=state.potential_value,
        branch=branch,
        primal_gap=primal_gap,
    )
    return new_state, record


def default_round_limit(n: int, max_capacity: int, eps: float) -> int:
    """Round budget guaranteeing the exit potential is reached.

    The starting potential is at most ``n^2 * W`` and contracts by 3/4 per
    round, so this many rounds suffice to fall below ``4 * eps``.
    """
    return int(math.ceil(math.log(n * n * max_capacity * 16.0 / eps) / math.log(4.0 / 3.0)))


def _iteration_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def fair_cut(
    graph: CapacitatedGraph,
    s: int,
    t: int,
    eps: float,
    approximator: Union[str, Builder] = "multitree:8",
    seed: int = 0,
    max_iters: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
    certify: bool = True,
    debug: bool = False,
) -> FairCutResult:
    """Compute a fair (s,t)-cut with its oracle-measured fairness factor.

    Starts from the singleton cut at ``s`` with the empty flow and runs
    driver rounds until the residual boundary potential falls below
    ``4 * eps`` (or the round limit is hit).  With ``certify=True`` the
    output fairness is measured exactly by the oracle and stored in
    ``achieved_alpha``.

    Args:
        graph: connected undirected instance.
        s, t: distinct terminals.
        eps: saturation margin, in ``(0, 1/16)``.
        approximator: builder descriptor (``exhaustive``, ``tree``,
            ``multitree:K``) or a callable ``(graph, seed) -> CutMatrix``.
        seed: base seed; each round derives its own stream from it.
        max_iters: override for the round limit.
        budget: saddle budget per primitive call.
        certify: measure ``achieved_alpha`` with the exact oracle.
        debug: assert the per-round contraction instead of just recording it.

    Raises:
        ValueError: bad eps/terminals or a disconnected instance.
        DriverAborted: the primitive ran out of budget twice in one round.
    """
    if s == t:
        raise ValueError("source and sink must differ")
    if not (0.0 < eps < 1.0 / 8.0):
        raise ValueError(f"eps must lie in (0, 1/8), got {eps}")
    if not (0 <= s < graph.n and 0 <= t < graph.n):
        raise ValueError("terminal out of range")
    labels = graph.connected_components()
    if labels[s] != labels[t] or not np.all(labels == labels[0]):
        stranded = sorted(int(v) for v in np.nonzero(labels != labels[s])[0])
        raise ValueError(f"graph must be connected; stranded vertices include {stranded[:6]}")

    builder = resolve_builder(approximator) if isinstance(approximator, str) else approximator
    descriptor = approximator if isinstance(approximator, str) else "custom"
    limit = max_iters if max_iters is not None else default_round_limit(graph.n, graph.max_capacity, eps)

    cut = VertexCut(frozenset({s}), source=s, sink=t)
    flow = FlowAssignment(graph)
    state = _make_state(graph, cut, flow, eps, 1)
    records: list[IterationRecord] = []
    for i in range(1, limit + 1):
        if state.potential_value < POTENTIAL_EXIT * eps:
            break
        try:
            state, record = iterate_once(
                state, eps, builder, budget=budget, seed=_iteration_seed(seed, i), debug=debug
            )
        except SolverExhausted as exc:
            raise DriverAborted(
                f"round {i}: primitive exhausted twice ({exc})", trace=records
            ) from exc
        records.append(record)

    achieved = min_fair_alpha(graph, state.cut) if certify else None
    return FairCutResult(
        cut=state.cut,
        achieved_alpha=achieved,
        iterations=records,
        final_flow=state.flow,
        eps=eps,
        seed=seed,
        approximator=descriptor,
        max_rounds=limit,
        final_potential=state.potential_value,
    )
