"""State-space exploration: certificates, isomorphism, BFS and dedup."""

from __future__ import annotations

import random

from hypothesis import given, settings, strategies as st

from gtx.dsl import parse_graph, parse_rule
from gtx.explorer import certificate, explore, export_lts, isomorphic
from gtx.graph import HostGraph, Value, edge_label, flag, node_type
from gtx.suite import load_fixture_grammar

E = edge_label


def cycle(n: int, label: str = "e") -> HostGraph:
    g = HostGraph(f"c{n}")
    ids = [g.add_node() for _ in range(n)]
    for i, nid in enumerate(ids):
        g.add_edge(nid, E(label), ids[(i + 1) % n])
    return g


def relabelled(g: HostGraph, rng: random.Random) -> HostGraph:
    """The same graph rebuilt with node ids assigned in a shuffled order."""
    out = HostGraph(g.name)
    order = g.node_ids()
    rng.shuffle(order)
    mapping = {}
    for old in order:
        node = g.nodes[old]
        mapping[old] = out.add_node(node.types, node.flags, name=node.name)
        for attr, value in node.attrs.items():
            out.set_attr(mapping[old], attr, value)
    for e in g.edges:
        out.add_edge(mapping[e.src], e.label, mapping[e.tgt])
    return out


# -- certificates ------------------------------------------------------


ident = st.sampled_from(["a", "b", "c"])


@st.composite
def scrambled_pair(draw):
    g = HostGraph("g")
    n = draw(st.integers(1, 6))
    for _ in range(n):
        nid = g.add_node(
            types=[node_type(t.upper()) for t in draw(
                st.lists(ident, max_size=2, unique=True))],
            flags=[flag(f) for f in draw(
                st.lists(ident, max_size=1, unique=True))])
        if draw(st.booleans()):
            g.set_attr(nid, "v", Value.int_(draw(st.integers(0, 2))))
    ids = g.node_ids()
    for _ in range(draw(st.integers(0, 8))):
        g.add_edge(draw(st.sampled_from(ids)), E(draw(ident)),
                   draw(st.sampled_from(ids)))
    seed = draw(st.integers(0, 2**16))
    return g, relabelled(g, random.Random(seed))


@settings(max_examples=80, deadline=None)
@given(scrambled_pair())
def test_certificate_ignores_node_identity(pair):
    g, h = pair
    assert certificate(g) == certificate(h)
    assert isomorphic(g, h)


def test_certificate_separates_easy_cases():
    assert certificate(cycle(3)) != certificate(cycle(4))
    flagged = parse_graph("graph g\nnode a flag on\n")
    plain = parse_graph("graph g\nnode a\n")
    assert certificate(flagged) != certificate(plain)
    attred = parse_graph("graph g\nnode a\nattr a.v = 1\n")
    attred2 = parse_graph("graph g\nnode a\nattr a.v = 2\n")
    assert certificate(attred) != certificate(attred2)


# -- exact isomorphism -------------------------------------------------


def test_regular_graphs_defeat_refinement_but_not_the_checker():
    # one 6-cycle vs two 3-cycles: every node looks identical locally,
    # so colour refinement alone cannot tell them apart
    c6 = cycle(6)
    c33 = HostGraph("c33")
    ids = [c33.add_node() for _ in range(6)]
    for base in (0, 3):
        for i in range(3):
            c33.add_edge(ids[base + i], E("e"), ids[base + (i + 1) % 3])
    assert len(c6.nodes) == len(c33.nodes)
    assert len(c6.edges) == len(c33.edges)
    assert not isomorphic(c6, c33)


def test_isomorphism_is_exact_on_structure_and_data():
    base = "graph g\nnode a : T flag f\nnode b\nedge a -e-> b\n"
    g = parse_graph(base)
    assert isomorphic(g, parse_graph(base))
    assert not isomorphic(g, parse_graph(
        "graph g\nnode a : T flag f\nnode b\nedge b -e-> a\n"))
    assert not isomorphic(g, parse_graph(
        "graph g\nnode a : T\nnode b\nedge a -e-> b\n"))
    assert not isomorphic(g, parse_graph(
        "graph g\nnode a : T flag f\nnode b\nedge a -x-> b\n"))


def test_isomorphism_counts_parallel_structure():
    two_loops = parse_graph("graph g\nnode a\nedge a -e-> a\nedge a -f-> a\n")
    one_loop = parse_graph("graph g\nnode a\nedge a -e-> a\n")
    assert not isomorphic(two_loops, one_loop)


def test_names_do_not_matter_for_isomorphism():
    g = parse_graph("graph g\nnode alice\n")
    h = parse_graph("graph g\nnode bob\n")
    assert isomorphic(g, h)
    assert certificate(g) == certificate(h)


# -- exploration -------------------------------------------------------


def test_reverse_system_has_two_mutually_reachable_states():
    grammar = load_fixture_grammar("reverse")
    lts = explore(list(grammar.rules.values()), grammar.start,
                  tgs=grammar.type_graphs)
    assert len(lts.states) == 2
    assert not lts.truncated
    assert set(lts.transitions) == {
        (0, "reverseEdges", 1), (1, "reverseEdges", 0)}
    assert lts.final_states() == []


def test_greeting_system_reaches_a_terminal_state():
    grammar = load_fixture_grammar("greeting")
    lts = explore(list(grammar.rules.values()), grammar.start,
                  tgs=grammar.type_graphs)
    # empty start, state with the greeting; the guard stops a second one
    assert len(lts.states) == 2
    assert lts.final_states() == [1]
    assert lts.states[1].depth == 1


def test_print_rules_appear_as_self_loops():
    grammar = load_fixture_grammar("hello")
    lts = explore(list(grammar.rules.values()), grammar.start,
                  tgs=grammar.type_graphs)
    assert len(lts.states) == 1
    assert lts.transitions == [(0, "helloMessage", 0)]


GROW = """
rule grow
node n role=reader
node c role=creator
edge n -e-> c role=creator
"""


def test_max_states_truncates_and_flags():
    start = parse_graph("graph g\nnode seed\n")
    lts = explore([parse_rule(GROW)], start, max_states=4)
    assert len(lts.states) == 4
    assert lts.truncated
    # every kept transition stays within the kept states
    assert all(0 <= s < 4 and 0 <= t < 4 for s, _, t in lts.transitions)


def test_max_depth_probes_the_frontier():
    start = parse_graph("graph g\nnode seed\n")
    lts = explore([parse_rule(GROW)], start, max_depth=2)
    assert max(s.depth for s in lts.states) == 2
    assert lts.truncated  # depth-2 states still had successors
    full = explore([parse_rule(GROW)], start, max_states=3, max_depth=50)
    assert full.truncated


def test_isomorphic_states_are_merged():
    # growing from either of two twin seeds gives the same successor state
    start = parse_graph("graph g\nnode a\nnode b\n")
    rule = parse_rule("rule mark\nnode n role=reader\nflag n creator done\n"
                      "flag n embargo done\n")
    lts = explore([rule], start)
    # a+b unmarked, one marked, both marked: three states, no duplicates
    assert len(lts.states) == 3
    assert not lts.truncated
    assert [s.depth for s in lts.states] == [0, 1, 2]


def test_exploration_is_deterministic():
    grammar = load_fixture_grammar("counting")
    rules = list(grammar.rules.values())
    a = explore(rules, grammar.start, tgs=grammar.type_graphs)
    b = explore(rules, grammar.start, tgs=grammar.type_graphs)
    assert [s.cert for s in a.states] == [s.cert for s in b.states]
    assert a.transitions == b.transitions


def test_export_lists_states_then_sorted_transitions():
    grammar = load_fixture_grammar("reverse")
    lts = explore(list(grammar.rules.values()), grammar.start,
                  tgs=grammar.type_graphs)
    text = export_lts(lts)
    lines = text.splitlines()
    assert lines[0].startswith("state S0 ")
    assert lines[1].startswith("state S1 ")
    assert lines[2:] == ["trans S0 -reverseEdges-> S1",
                         "trans S1 -reverseEdges-> S0"]
    assert "truncated" not in text
    truncated = explore([parse_rule(GROW)],
                        parse_graph("graph g\nnode seed\n"), max_states=2)
    assert export_lts(truncated).splitlines()[-1] == "truncated"
