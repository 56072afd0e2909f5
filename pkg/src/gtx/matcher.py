"""Matching rule patterns into host graphs.

A match maps the positive (reader and eraser) rule nodes of one
quantification level to host nodes.  Matching is structure-preserving but
not injective by default; explicit ``neq`` pairs rule out sharing where the
rule asks for it.  Negative application conditions are checked per level:
a candidate match survives only if every lone NAC group is unmatchable and
every disjunction set has at least one unmatchable member group.

The search itself is plain backtracking.  Rule patterns are small (a
handful of nodes), so candidate ordering matters more than asymptotics:
nodes with a type constraint go first, then more-constrained and
better-connected ones.  Host candidates are tried in ascending id order and
the final match list is sorted, so results are deterministic for a given
host graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import HostGraph, HostNode, Label, Value
from .rules import (
    ConstraintKind,
    NacGroup,
    POSITIVE_ROLES,
    RegexPath,
    Role,
    ROOT_QUANT,
    Rule,
    RuleEdge,
    RuleNode,
)
from .typegraph import TypeGraph, is_subtype


@dataclass
class Match:
    """An assignment of rule node ids to host node ids."""

    assignment: dict[str, int]
    bound_params: dict[int, Value] = field(default_factory=dict)
    parent: Match | None = field(default=None, compare=False, repr=False)

    def sort_key(self) -> tuple[tuple[str, int], ...]:
        return tuple(sorted(self.assignment.items()))


@dataclass
class LevelMatchSet:
    """All matches of one quantification level, across all parent matches."""

    extensions: list[Match]

    @property
    def count(self) -> int:
        return len(self.extensions)


def evaluate_regex_path(g: HostGraph, path: RegexPath,
                        starts: set[int]) -> set[int]:
    """Nodes reachable from ``starts`` by the concatenation of atoms."""
    frontier = set(starts)
    for atom in path.atoms:
        nxt: set[int] = set()
        for nid in frontier:
            step = (g.predecessors(nid, atom.label) if atom.inverse
                    else g.successors(nid, atom.label))
            nxt |= step
        frontier = nxt
        if not frontier:
            break
    return frontier


def _type_matches(constraint: Label, host: HostNode,
                  tgs: list[TypeGraph] | None) -> bool:
    if constraint in host.types:
        return True
    if not tgs:
        return False
    for t in host.types:
        for tg in tgs:
            if (t.name in tg.types and constraint.name in tg.types
                    and is_subtype(tg, t, constraint)):
                return True
    return False


def _node_compatible(node: RuleNode, host: HostNode,
                     tgs: list[TypeGraph] | None) -> bool:
    if node.type_constraint is not None:
        if not _type_matches(node.type_constraint, host, tgs):
            return False
    for fl, role in node.flag_ops:
        if role in (Role.READER, Role.ERASER):
            if fl not in host.flags:
                return False
        elif role is Role.EMBARGO:
            if fl in host.flags:
                return False
    for attr, constraint in node.attr_constraints.items():
        if constraint.kind is ConstraintKind.MATCH:
            if host.attrs.get(attr) != constraint.value:
                return False
        elif constraint.kind is ConstraintKind.RENAME:
            if attr not in host.attrs:
                return False
    return True


def _search_order(rule: Rule, node_ids: list[str]) -> list[str]:
    def degree(nid: str) -> int:
        return sum(1 for e in rule.edges
                   if not e.is_path() and e.role in POSITIVE_ROLES
                   and nid in (e.src, e.tgt))

    def key(nid: str) -> tuple:
        node = rule.nodes[nid]
        return (0 if node.type_constraint is not None else 1,
                -len(node.attr_constraints),
                -degree(nid),
                nid)

    return sorted(node_ids, key=key)


def _constraints_hold(rule: Rule, g: HostGraph, assignment: dict[str, int],
                      edges: list[RuleEdge]) -> bool:
    for a, b in rule.injectivity_pairs:
        ha = assignment.get(a)
        hb = assignment.get(b)
        if ha is not None and hb is not None and ha == hb:
            return False
    for e in edges:
        src = assignment.get(e.src)
        tgt = assignment.get(e.tgt)
        if src is None or tgt is None:
            continue
        if e.is_path():
            if tgt not in evaluate_regex_path(g, e.label, {src}):
                return False
        else:
            if not g.has_edge(src, e.label, tgt):
                return False
    return True


def _extend(rule: Rule, g: HostGraph, base: dict[str, int],
            new_nodes: list[str], edges: list[RuleEdge],
            tgs: list[TypeGraph] | None,
            limit: int | None = None) -> list[dict[str, int]]:
    """All ways of assigning ``new_nodes`` consistently on top of ``base``."""
    if not _constraints_hold(rule, g, base, edges):
        return []
    order = _search_order(rule, new_nodes)
    results: list[dict[str, int]] = []
    assignment = dict(base)
    host_ids = g.node_ids()

    def backtrack(k: int) -> bool:
        if limit is not None and len(results) >= limit:
            return True
        if k == len(order):
            results.append(dict(assignment))
            return limit is not None and len(results) >= limit
        nid = order[k]
        node = rule.nodes[nid]
        for hid in host_ids:
            if not _node_compatible(node, g.nodes[hid], tgs):
                continue
            assignment[nid] = hid
            if _constraints_hold(rule, g, assignment, edges):
                if backtrack(k + 1):
                    del assignment[nid]
                    return True
            del assignment[nid]
        return False

    backtrack(0)
    return results


def _nac_matchable(rule: Rule, g: HostGraph, assignment: dict[str, int],
                   grp: NacGroup, tgs: list[TypeGraph] | None) -> bool:
    edges = [rule.edges[i] for i in grp.edge_indexes]
    new_nodes = [nid for nid in grp.node_ids if nid not in assignment]
    return bool(_extend(rule, g, assignment, new_nodes, edges, tgs, limit=1))


def nacs_satisfied(rule: Rule, g: HostGraph, assignment: dict[str, int],
                   level: str, tgs: list[TypeGraph] | None = None) -> bool:
    """True if no forbidden pattern at ``level`` blocks this assignment."""
    grouped = {gid for ds in rule.disjunction_sets for gid in ds.group_ids}
    for gid in sorted(rule.nac_groups):
        grp = rule.nac_groups[gid]
        if grp.level != level or gid in grouped:
            continue
        if _nac_matchable(rule, g, assignment, grp, tgs):
            return False
    for ds in rule.disjunction_sets:
        members = [rule.nac_groups[gid] for gid in ds.group_ids]
        if members[0].level != level:
            continue
        if all(_nac_matchable(rule, g, assignment, grp, tgs)
               for grp in members):
            return False
    return True


def _bind_params(rule: Rule, g: HostGraph,
                 assignment: dict[str, int]) -> dict[int, Value] | None:
    """Values for declared parameters, or None if one cannot be produced."""
    out: dict[int, Value] = {}
    for idx in sorted(rule.params):
        nid, attr = rule.params[idx]
        node = rule.nodes[nid]
        if node.role is Role.CREATOR:
            constraint = node.attr_constraints.get(attr)
            if constraint is None or constraint.value is None:
                return None
            out[idx] = constraint.value
        else:
            hid = assignment.get(nid)
            if hid is None:
                return None
            value = g.nodes[hid].attrs.get(attr)
            if value is None:
                return None
            out[idx] = value
    return out


def find_root_matches(rule: Rule, g: HostGraph,
                      tgs: list[TypeGraph] | None = None) -> list[Match]:
    """All NAC-respecting matches of the root level, in canonical order."""
    node_ids = [n.id for n in rule.positive_nodes_at(ROOT_QUANT)]
    edges = [e for _, e in rule.edges_at(ROOT_QUANT)
             if e.role in POSITIVE_ROLES]
    matches: list[Match] = []
    for assignment in _extend(rule, g, {}, node_ids, edges, tgs):
        if not nacs_satisfied(rule, g, assignment, ROOT_QUANT, tgs):
            continue
        params = _bind_params(rule, g, assignment)
        if params is None:
            continue
        matches.append(Match(assignment, params))
    matches.sort(key=Match.sort_key)
    return matches


def _tree_order(rule: Rule) -> list[str]:
    order = [ROOT_QUANT]
    frontier = [ROOT_QUANT]
    while frontier:
        qid = frontier.pop(0)
        for child in rule.children_of(qid):
            order.append(child.id)
            frontier.append(child.id)
    return order


def collect_level_matches(
    rule: Rule, g: HostGraph, root_match: Match,
    tgs: list[TypeGraph] | None = None,
) -> dict[str, LevelMatchSet]:
    """Matches for every quantification level under one root match.

    Universal levels are matched against the unmodified host graph, parents
    before children; each extension records its parent match so rewrite
    planning can walk back up the tree.
    """
    result = {ROOT_QUANT: LevelMatchSet([root_match])}
    for qid in _tree_order(rule):
        if qid == ROOT_QUANT:
            continue
        parent = rule.quantifiers[qid].parent or ROOT_QUANT
        node_ids = [n.id for n in rule.positive_nodes_at(qid)]
        edges = [e for _, e in rule.edges_at(qid)
                 if e.role in POSITIVE_ROLES]
        extensions: list[Match] = []
        for pm in result[parent].extensions:
            for assignment in _extend(rule, g, pm.assignment, node_ids,
                                      edges, tgs):
                if nacs_satisfied(rule, g, assignment, qid, tgs):
                    extensions.append(Match(assignment, parent=pm))
        extensions.sort(key=Match.sort_key)
        result[qid] = LevelMatchSet(extensions)
    return result
