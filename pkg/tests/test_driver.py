import math

import numpy as np
import pytest

from faircut.approximator import build_exhaustive
from faircut.driver import (
    CONTRACTION,
    default_round_limit,
    fair_cut,
    iterate_once,
    unsaturated_arcs,
)
from faircut.driver import _make_state
from faircut.graph import (
    CapacitatedGraph,
    FlowAssignment,
    VertexCut,
    undirected_cut_value,
)
from faircut.generators import random_connected_graph
from faircut.oracles import min_fair_alpha

from conftest import brute_min_cut_value, small_graph


def path_2_1():
    return CapacitatedGraph(3, [(0, 1, 2), (1, 2, 1)])


class TestUnsaturatedArcs:
    def test_empty_flow_keeps_everything(self):
        g = path_2_1()
        cut = VertexCut(frozenset({0, 1}), 0, 2)
        arcs = unsaturated_arcs(g, FlowAssignment(g), cut, eps=0.05)
        assert list(arcs) == [g.arc_index(1, 2)]

    def test_full_saturation_empties_the_set(self):
        g = path_2_1()
        cut = VertexCut(frozenset({0, 1}), 0, 2)
        f = FlowAssignment.from_arc_dict(g, {(1, 2): 1.0})
        assert unsaturated_arcs(g, f, cut, eps=0.05).size == 0

    def test_boundary_is_inclusive(self):
        g = CapacitatedGraph(2, [(0, 1, 10)])
        cut = VertexCut(frozenset({0}), 0, 1)
        eps = 0.05
        f = FlowAssignment.from_arc_dict(g, {(0, 1): (1 - 4 * eps) * 10})
        assert unsaturated_arcs(g, f, cut, eps).size == 1
        f2 = FlowAssignment.from_arc_dict(g, {(0, 1): (1 - 4 * eps) * 10 + 1e-3})
        assert unsaturated_arcs(g, f2, cut, eps).size == 0


class TestIterateOnce:
    def test_single_edge_flow_round(self):
        g = CapacitatedGraph(2, [(0, 1, 1)])
        state = _make_state(g, VertexCut(frozenset({0}), 0, 1), FlowAssignment(g), 0.05, 1)
        assert state.potential_value == 1.0
        builder = lambda sub, seed: build_exhaustive(sub)
        new_state, record = iterate_once(state, 0.05, builder, seed=0)
        assert record.branch == "flow"
        # tau = 0.5, the round routes it fully: potential halves
        assert new_state.potential_value == pytest.approx(0.5)
        assert new_state.flow.flow(0, 1) == pytest.approx(0.5)

    def test_uncross_with_self_is_identity(self):
        g = path_2_1()
        state = _make_state(g, VertexCut(frozenset({0}), 0, 2), FlowAssignment(g), 0.05, 1)
        from faircut.driver import _uncross

        same = _uncross(state, VertexCut(frozenset({0}), 0, 2))
        assert same.side == state.cut.side

    def test_saturated_separator_takes_component_cut(self):
        # s-t saturated, s-a not: the masked graph strands t, and the round
        # must move the cut to the endpoint's component without a solve.
        g = CapacitatedGraph(3, [(0, 1, 1), (0, 2, 1)])  # 0=s, 1=a, 2=t
        flow = FlowAssignment.from_arc_dict(g, {(0, 2): 1.0})
        state = _make_state(g, VertexCut(frozenset({0}), 0, 2), flow, 0.05, 1)
        assert state.mask.removed == frozenset({g.edge_of_arc(g.arc_index(0, 2))})
        assert state.potential_value == pytest.approx(1.0)  # only (0,1) remains
        new_state, record = iterate_once(state, 0.05, lambda sub, seed: build_exhaustive(sub))
        assert record.branch == "cut"
        assert new_state.cut.side == frozenset({0, 1})
        assert new_state.potential_value == pytest.approx(0.0)

    def test_stranded_component_is_excluded_from_the_solve(self):
        # the pendant x hangs off a saturated edge; the subproblem must not
        # touch it and the flow branch must leave its arcs at zero
        g = CapacitatedGraph(3, [(0, 1, 4), (0, 2, 1)])  # 0=s, 1=t, 2=x
        flow = FlowAssignment.from_arc_dict(g, {(0, 2): 1.0})
        state = _make_state(g, VertexCut(frozenset({0}), 0, 1), flow, 0.05, 1)
        seen = {}

        def builder(sub, seed):
            seen["n"] = sub.n
            return build_exhaustive(sub)

        new_state, record = iterate_once(state, 0.05, builder)
        assert seen["n"] == 2  # x never entered the subproblem
        assert record.branch == "flow"
        pendant_arc = g.arc_index(0, 2)
        assert new_state.flow.values[pendant_arc] == flow.values[pendant_arc]
        assert new_state.flow.values[g.reverse_arc(pendant_arc)] == 0.0
        assert new_state.potential_value == pytest.approx(2.0)  # half of c'(0,1)=4

    def test_contraction_over_random_instances(self, rng):
        builder = lambda sub, seed: build_exhaustive(sub)
        for i in range(15):
            g = small_graph(rng, n_lo=4, n_hi=10, max_cap=20)
            state = _make_state(g, VertexCut(frozenset({0}), 0, g.n - 1), FlowAssignment(g), 0.05, 1)
            rounds = 0
            while state.potential_value >= 4 * 0.05 and rounds < 60:
                prev = state.potential_value
                state, _ = iterate_once(state, 0.05, builder, seed=i * 100 + rounds)
                assert state.potential_value <= CONTRACTION * prev + 1e-9 * g.max_capacity
                rounds += 1
            assert state.potential_value < 4 * 0.05


class TestFairCut:
    def test_single_edge(self):
        g = CapacitatedGraph(2, [(0, 1, 10)])
        result = fair_cut(g, 0, 1, eps=0.05, approximator="exhaustive")
        assert result.cut.side == frozenset({0})
        assert result.achieved_alpha == pytest.approx(1.0, abs=1e-6)

    def test_path_finds_the_fair_prefix(self):
        # {s,a} is the only 1-fair cut of the 2-1 path.
        result = fair_cut(path_2_1(), 0, 2, eps=0.05, approximator="exhaustive")
        assert result.cut.side == frozenset({0, 1})
        assert result.achieved_alpha <= 1.3

    def test_output_is_approximate_min_cut(self, rng):
        for i in range(8):
            g = small_graph(rng, n_lo=4, n_hi=10, max_cap=15)
            result = fair_cut(g, 0, g.n - 1, eps=0.05, approximator="exhaustive", seed=i)
            exact = brute_min_cut_value(g, 0, g.n - 1)
            value = undirected_cut_value(g, result.cut)
            assert value <= result.achieved_alpha * exact * (1 + 1e-6)

    def test_trace_potentials_contract(self, rng):
        g = random_connected_graph(30, 90, rng, max_cap=50)
        result = fair_cut(g, 0, 29, eps=0.05, approximator="multitree:4", seed=2)
        pots = [rec.potential for rec in result.iterations] + [result.final_potential]
        for prev, nxt in zip(pots, pots[1:]):
            assert nxt <= CONTRACTION * prev + 1e-9 * g.max_capacity
        assert result.final_potential < 4 * 0.05

    def test_flow_branch_keeps_saturation_monotone(self, rng):
        # removed boundary edges stay removed while the cut is unchanged
        g = random_connected_graph(20, 60, rng, max_cap=10)
        builder = lambda sub, seed: build_exhaustive(sub) if sub.n <= 16 else None
        from faircut.approximator import build_multi_tree

        builder = lambda sub, seed: build_multi_tree(sub, 4, seed or 0)
        state = _make_state(g, VertexCut(frozenset({0}), 0, 19), FlowAssignment(g), 0.05, 1)
        prev_removed, prev_cut = state.mask.removed, state.cut.side
        for r in range(25):
            if state.potential_value < 4 * 0.05:
                break
            state, rec = iterate_once(state, 0.05, builder, seed=r)
            if rec.branch == "flow" and state.cut.side == prev_cut:
                assert prev_removed <= state.mask.removed
            prev_removed, prev_cut = state.mask.removed, state.cut.side

    def test_eps_validation(self):
        g = path_2_1()
        with pytest.raises(ValueError, match="eps"):
            fair_cut(g, 0, 2, eps=0.0)
        with pytest.raises(ValueError, match="eps"):
            fair_cut(g, 0, 2, eps=0.2)

    def test_terminal_validation(self):
        g = path_2_1()
        with pytest.raises(ValueError):
            fair_cut(g, 1, 1, eps=0.05)

    def test_disconnected_rejected(self):
        g = CapacitatedGraph(4, [(0, 1, 3), (2, 3, 3)])
        with pytest.raises(ValueError, match="connected"):
            fair_cut(g, 0, 3, eps=0.05)

    def test_round_limit_formula(self):
        limit = default_round_limit(10, 100, 0.05)
        assert limit == math.ceil(math.log(100 * 100 * 16 / 0.05) / math.log(4 / 3))
        # enough rounds to take n^2 W below 4 eps
        assert 0.75**limit * 100 * 100 < 4 * 0.05

    def test_certify_flag(self, rng):
        g = small_graph(rng, n_lo=4, n_hi=8)
        result = fair_cut(g, 0, g.n - 1, eps=0.05, approximator="exhaustive", certify=False)
        assert result.achieved_alpha is None

    def test_seeded_determinism(self, rng):
        g = random_connected_graph(25, 70, rng, max_cap=30)
        a = fair_cut(g, 0, 24, eps=0.05, approximator="multitree:8", seed=4)
        b = fair_cut(g, 0, 24, eps=0.05, approximator="multitree:8", seed=4)
        assert a.cut.side == b.cut.side
        assert a.achieved_alpha == b.achieved_alpha
        assert np.array_equal(a.final_flow.values, b.final_flow.values)
        assert [(r.index, r.potential, r.branch) for r in a.iterations] == [
            (r.index, r.potential, r.branch) for r in b.iterations
        ]

    def test_custom_builder_callable(self, rng):
        g = small_graph(rng, n_lo=4, n_hi=8)
        result = fair_cut(g, 0, g.n - 1, eps=0.05, approximator=lambda sub, seed: build_exhaustive(sub))
        assert result.approximator == "custom"
        assert result.achieved_alpha >= 1.0

    def test_fairness_of_output_matches_oracle_floor(self, rng):
        # achieved_alpha is exactly the oracle's measurement of the cut
        g = small_graph(rng, n_lo=4, n_hi=9)
        result = fair_cut(g, 0, g.n - 1, eps=0.05, approximator="exhaustive", seed=1)
        assert result.achieved_alpha == pytest.approx(min_fair_alpha(g, result.cut))
