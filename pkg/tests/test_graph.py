import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iopkit.errors import ConfigError, EmptyGraphError, ParseError
from iopkit.graph import (
    TemporalGraph,
    first_interaction_times,
    parse_edge_list,
    serialize_edge_list,
    static_projection,
    synth_generate,
)


def test_parse_basic():
    g = parse_edge_list("1 2 5\n1 3 9\n")
    assert g.num_nodes == 3
    assert g.num_edges == 2
    assert g.num_events == 2


def test_parse_comments_and_duplicate_pair():
    g = parse_edge_list("# header\n1 2 5\n1 2 20\n")
    assert g.num_edges == 1
    assert g.per_pair_times[(1, 2)] == (5, 20)


def test_parse_canonicalises_direction():
    g = parse_edge_list("2 1 5\n")
    assert g.static_edges == {(1, 2)}
    assert g.events[0].u == 1 and g.events[0].v == 2


def test_parse_keeps_duplicate_events_at_same_timestamp():
    g = parse_edge_list("1 2 5\n2 1 5\n")
    assert g.num_events == 2
    assert g.per_pair_times[(1, 2)] == (5, 5)


def test_parse_drops_self_loops_with_count():
    g = parse_edge_list("1 1 3\n1 2 5\n")
    assert g.self_loops_dropped == 1
    assert g.num_events == 1


def test_parse_sorts_by_time_stable():
    g = parse_edge_list("4 5 9\n1 2 3\n2 3 9\n")
    assert [e.t for e in g.events] == [3, 9, 9]
    # ties keep input order: (4,5) came before (2,3)
    assert (g.events[1].u, g.events[1].v) == (4, 5)


def test_parse_extra_fields_ignored():
    g = parse_edge_list("1 2 5 0.25 whatever\n")
    assert g.num_events == 1


def test_parse_integral_float_timestamp():
    g = parse_edge_list("1 2 5.0\n")
    assert g.events[0].t == 5


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError) as err:
        parse_edge_list("1 2 5\n1 x 9\n")
    assert err.value.line_no == 2
    with pytest.raises(ParseError):
        parse_edge_list("1 2\n")
    with pytest.raises(ParseError):
        parse_edge_list("1 2 5.5\n")
    with pytest.raises(ParseError):
        parse_edge_list("-1 2 5\n")


def test_parse_empty_input_is_an_error():
    with pytest.raises(EmptyGraphError):
        parse_edge_list("")
    with pytest.raises(EmptyGraphError):
        parse_edge_list("# only comments\n\n")
    with pytest.raises(EmptyGraphError):
        parse_edge_list("3 3 7\n")  # nothing but a self-loop


def test_first_interaction_times():
    g = parse_edge_list("1 2 5\n1 2 20\n3 4 7\n")
    first = first_interaction_times(g)
    assert first[(1, 2)] == 5
    assert first[(3, 4)] == 7


def test_first_interaction_times_empty_graph():
    g = TemporalGraph.from_events([])
    assert first_interaction_times(g) == {}


def test_static_projection():
    g = parse_edge_list("1 2 5\n1 2 20\n2 3 7\n")
    adj = static_projection(g)
    assert adj == {1: {2}, 2: {1, 3}, 3: {2}}


def test_static_projection_preserves_isolated_nodes():
    g = TemporalGraph.from_events([(1, 2, 5)], extra_nodes=[9])
    adj = static_projection(g)
    assert adj[9] == set()


events_strategy = st.lists(
    st.tuples(
        st.integers(min_value=0, max_value=8),
        st.integers(min_value=0, max_value=8),
        st.integers(min_value=0, max_value=50),
    ).filter(lambda e: e[0] != e[1]),
    min_size=1,
    max_size=40,
)


@given(events=events_strategy)
def test_roundtrip_serialize_parse(events):
    g = TemporalGraph.from_events(events)
    g2 = parse_edge_list(serialize_edge_list(g))
    assert g2.events == g.events
    assert g2.nodes == g.nodes
    assert g2.per_pair_times == g.per_pair_times


@given(events=events_strategy, seed=st.integers(min_value=0, max_value=2**16))
@settings(max_examples=50)
def test_line_order_insensitivity(events, seed):
    import random

    lines = [f"{u} {v} {t}" for u, v, t in events]
    shuffled = lines[:]
    random.Random(seed).shuffle(shuffled)
    g1 = parse_edge_list("\n".join(lines))
    g2 = parse_edge_list("\n".join(shuffled))
    assert g1.per_pair_times == g2.per_pair_times
    assert g1.static_edges == g2.static_edges


@given(events=events_strategy)
def test_edge_and_event_count_invariants(events):
    g = TemporalGraph.from_events(events)
    assert g.num_edges <= g.num_events
    assert g.num_events == sum(len(ts) for ts in g.per_pair_times.values())
    first = first_interaction_times(g)
    for pair, t in first.items():
        assert t in g.per_pair_times[pair]
        assert t == min(g.per_pair_times[pair])


def test_synth_single_triangle():
    g = synth_generate(3, 1, 3, 0, seed=0)
    assert g.static_edges == {(0, 1), (0, 2), (1, 2)}
    first = first_interaction_times(g)
    # lexicographic edge order with strictly increasing times
    assert first[(0, 1)] < first[(0, 2)] < first[(1, 2)]


def test_synth_two_disjoint_triangles():
    g = synth_generate(8, 2, 3, 0, seed=0)
    assert g.num_nodes == 8
    assert g.num_edges == 6
    assert {(3, 4), (3, 5), (4, 5)} <= g.static_edges


def test_synth_deterministic_per_seed():
    a = synth_generate(20, 3, 3, 10, seed=42)
    b = synth_generate(20, 3, 3, 10, seed=42)
    assert a.events == b.events
    c = synth_generate(20, 3, 3, 10, seed=43)
    assert c.events != a.events


def test_synth_infeasible_parameters():
    with pytest.raises(ConfigError):
        synth_generate(5, 2, 3, 0, seed=0)
    with pytest.raises(ConfigError):
        synth_generate(3, 1, 3, 5, seed=0)  # no room for noise outside the clique
