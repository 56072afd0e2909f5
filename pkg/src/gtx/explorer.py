"""State-space exploration.

States are host graphs up to isomorphism.  Deduplication is two-tier: a
cheap refinement-based certificate buckets candidate states, and an exact
backtracking isomorphism check confirms hits inside a bucket, so hash
collisions can never merge genuinely different states.

Exploration is breadth-first and deterministic: rules fire in name order,
matches in canonical match order, and states are numbered in discovery
order.  ``max_states``/``max_depth`` bound the search; the result is
flagged as truncated whenever either limit actually cut something off.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field

from .graph import HostGraph, HostNode
from .matcher import find_root_matches
from .rewriter import apply_effect, is_effective, plan_application
from .rules import Rule
from .typegraph import TypeGraph


def _h(*parts: str) -> str:
    digest = hashlib.sha256("\x1f".join(parts).encode()).hexdigest()
    return digest[:16]


def _node_seed(node: HostNode) -> str:
    types = ",".join(sorted(t.name for t in node.types))
    flags = ",".join(sorted(f.name for f in node.flags))
    attrs = ";".join(f"{a}={node.attrs[a].kind.value}:{node.attrs[a].to_text()}"
                     for a in sorted(node.attrs))
    return _h("node", types, flags, attrs)


def _refine_colors(g: HostGraph) -> dict[int, str]:
    colors = {nid: _node_seed(node) for nid, node in g.nodes.items()}
    out_adj: dict[int, list[tuple[str, int]]] = {nid: [] for nid in g.nodes}
    in_adj: dict[int, list[tuple[str, int]]] = {nid: [] for nid in g.nodes}
    for e in g.edges:
        out_adj[e.src].append((e.label.name, e.tgt))
        in_adj[e.tgt].append((e.label.name, e.src))

    distinct = len(set(colors.values()))
    for _ in range(max(1, len(g.nodes))):
        new = {}
        for nid in g.nodes:
            outs = ",".join(sorted(f"{lbl}>{colors[t]}"
                                   for lbl, t in out_adj[nid]))
            ins = ",".join(sorted(f"{lbl}<{colors[s]}"
                                  for lbl, s in in_adj[nid]))
            new[nid] = _h(colors[nid], outs, ins)
        colors = new
        now_distinct = len(set(colors.values()))
        if now_distinct == distinct:
            break
        distinct = now_distinct
    return colors


def certificate(g: HostGraph) -> str:
    """Isomorphism-invariant fingerprint (equal for isomorphic graphs;
    unequal graphs collide only with hash probability)."""
    colors = _refine_colors(g)
    return _h("graph", ",".join(sorted(colors.values())), str(len(g.edges)))


def _same_node_data(a: HostNode, b: HostNode) -> bool:
    return a.types == b.types and a.flags == b.flags and a.attrs == b.attrs


def _labels_between(g: HostGraph, src: int, tgt: int) -> set[str]:
    return {e.label.name for e in g.edges if e.src == src and e.tgt == tgt}


def isomorphic(g: HostGraph, h: HostGraph) -> bool:
    """Exact isomorphism on node structure, labels, flags and attributes."""
    if len(g.nodes) != len(h.nodes) or len(g.edges) != len(h.edges):
        return False
    gc = _refine_colors(g)
    hc = _refine_colors(h)
    if sorted(gc.values()) != sorted(hc.values()):
        return False

    by_color: dict[str, list[int]] = {}
    for nid, c in hc.items():
        by_color.setdefault(c, []).append(nid)
    # Most-constrained first: smallest candidate classes early.
    g_order = sorted(g.nodes, key=lambda nid: (len(by_color[gc[nid]]), nid))
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def compatible(a: int, b: int) -> bool:
        if not _same_node_data(g.nodes[a], h.nodes[b]):
            return False
        if _labels_between(g, a, a) != _labels_between(h, b, b):
            return False
        for x, y in mapping.items():
            if _labels_between(g, a, x) != _labels_between(h, b, y):
                return False
            if _labels_between(g, x, a) != _labels_between(h, y, b):
                return False
        return True

    def backtrack(k: int) -> bool:
        if k == len(g_order):
            return True
        a = g_order[k]
        for b in by_color[gc[a]]:
            if b in used or not compatible(a, b):
                continue
            mapping[a] = b
            used.add(b)
            if backtrack(k + 1):
                return True
            del mapping[a]
            used.discard(b)
        return False

    return backtrack(0)


@dataclass
class LtsState:
    index: int
    graph: HostGraph
    cert: str
    depth: int


@dataclass
class Lts:
    """A labelled transition system over graph states.

    ``states[0]`` is the start state; transitions are (source index, rule
    name, target index) with at most one entry per triple.
    """

    states: list[LtsState] = field(default_factory=list)
    transitions: list[tuple[int, str, int]] = field(default_factory=list)
    truncated: bool = False

    def final_states(self) -> list[int]:
        with_out = {src for src, _, _ in self.transitions}
        return [s.index for s in self.states if s.index not in with_out]


def _effective_results(rule: Rule, g: HostGraph,
                       tgs: list[TypeGraph] | None):
    for match in find_root_matches(rule, g, tgs):
        effect = plan_application(rule, g, match, tgs)
        if is_effective(rule, effect):
            yield effect


def explore(rules: list[Rule], start: HostGraph,
            max_states: int | None = None, max_depth: int | None = None,
            tgs: list[TypeGraph] | None = None) -> Lts:
    """Breadth-first state space of ``rules`` from ``start``."""
    ordered_rules = sorted(rules, key=lambda r: r.name)
    lts = Lts()
    by_cert: dict[str, list[int]] = {}
    queue: deque[int] = deque()
    seen_transitions: set[tuple[int, str, int]] = set()

    def intern(g: HostGraph, depth: int) -> int | None:
        cert = certificate(g)
        for idx in by_cert.get(cert, []):
            if isomorphic(lts.states[idx].graph, g):
                return idx
        if max_states is not None and len(lts.states) >= max_states:
            return None
        idx = len(lts.states)
        lts.states.append(LtsState(idx, g, cert, depth))
        by_cert.setdefault(cert, []).append(idx)
        queue.append(idx)
        return idx

    intern(start.copy(), 0)
    while queue:
        idx = queue.popleft()
        state = lts.states[idx]
        if max_depth is not None and state.depth >= max_depth:
            if any(True for rule in ordered_rules
                   for _ in _effective_results(rule, state.graph, tgs)):
                lts.truncated = True
            continue
        for rule in ordered_rules:
            for effect in _effective_results(rule, state.graph, tgs):
                successor = apply_effect(state.graph, effect)
                tgt = intern(successor, state.depth + 1)
                if tgt is None:
                    lts.truncated = True
                    continue
                key = (idx, rule.name, tgt)
                if key not in seen_transitions:
                    seen_transitions.add(key)
                    lts.transitions.append(key)
    return lts


def export_lts(lts: Lts) -> str:
    """Plain-text listing: one line per state, then one per transition."""
    lines = [f"state S{s.index} {s.cert}" for s in lts.states]
    for src, rule, tgt in sorted(lts.transitions):
        lines.append(f"trans S{src} -{rule}-> S{tgt}")
    if lts.truncated:
        lines.append("truncated")
    return "\n".join(lines) + "\n"
