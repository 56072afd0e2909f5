"""Type graphs: node-type declarations with inheritance, attribute
declarations and edge declarations, plus conformance checking of host
graphs against any number of simultaneously enabled type graphs.

Conformance is disjunctive: an element is fine as soon as *one* enabled
type graph licenses it.  Flags are deliberately never checked.  With no
type graph enabled nothing is enforced at all, which is what makes
untyped scratch graphs legal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .graph import HostGraph, HostEdge, Label, LabelKind, ValueKind
from .source import SourceSpan, Violation


class UnknownTypeError(Exception):
    """A subtype query referenced a type the type graph does not declare."""


@dataclass
class TypeDecl:
    name: Label
    abstract: bool = False
    supertypes: set[Label] = field(default_factory=set)
    attr_decls: dict[str, ValueKind] = field(default_factory=dict)
    span: SourceSpan | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.name.kind is not LabelKind.NODE_TYPE:
            raise ValueError("type declaration requires a node-type label")


@dataclass
class EdgeDecl:
    src_type: Label
    label: Label
    tgt_type: Label
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass
class TypeGraph:
    """Immutable after construction by convention: validators and the
    conformance check never modify it."""

    name: str = "typegraph"
    types: dict[str, TypeDecl] = field(default_factory=dict)
    edge_decls: list[EdgeDecl] = field(default_factory=list)

    def declared(self, type_name: str) -> bool:
        return type_name in self.types

    def supertype_closure(self, type_name: str) -> set[str]:
        """All declared ancestors of a type, the type itself included.
        Tolerates cyclic hierarchies (they are reported by validation but
        must not hang the query)."""
        if type_name not in self.types:
            raise UnknownTypeError(f"type {type_name!r} is not declared in {self.name!r}")
        seen: set[str] = set()
        work = [type_name]
        while work:
            current = work.pop()
            if current in seen:
                continue
            seen.add(current)
            decl = self.types.get(current)
            if decl is None:
                continue  # unresolved reference; validation reports it
            for sup in decl.supertypes:
                work.append(sup.name)
        return seen


def is_subtype(tg: TypeGraph, a: Label, b: Label) -> bool:
    """Reflexive-transitive subtype test within one type graph."""
    if not tg.declared(a.name):
        raise UnknownTypeError(f"type {a.name!r} is not declared in {tg.name!r}")
    if not tg.declared(b.name):
        raise UnknownTypeError(f"type {b.name!r} is not declared in {tg.name!r}")
    return b.name in tg.supertype_closure(a.name)


def _inheritance_sccs(tg: TypeGraph) -> list[list[str]]:
    """Strongly connected components of the supertype graph, via Tarjan."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = [0]

    def edges_of(name: str) -> list[str]:
        decl = tg.types.get(name)
        if decl is None:
            return []
        return [s.name for s in decl.supertypes if s.name in tg.types]

    def strongconnect(v: str) -> None:
        # Iterative Tarjan to stay clear of recursion limits.
        work = [(v, iter(edges_of(v)))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(edges_of(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    scc.append(w)
                    if w == node:
                        break
                sccs.append(scc)

    for name in sorted(tg.types):
        if name not in index:
            strongconnect(name)
    return sccs


def validate_type_graph(tg: TypeGraph) -> list[Violation]:
    """Structural validation of a single type graph.  The violation set is
    independent of declaration order."""
    violations: list[Violation] = []

    for name in sorted(tg.types):
        decl = tg.types[name]
        for sup in sorted(decl.supertypes, key=lambda lb: lb.name):
            if not tg.declared(sup.name):
                violations.append(Violation(
                    f"type {name!r} extends undeclared type {sup.name!r}",
                    decl.span,
                ))

    # One violation per inheritance cycle, not per participating type.
    for scc in _inheritance_sccs(tg):
        cyclic = len(scc) > 1 or any(
            s.name == scc[0] for s in tg.types[scc[0]].supertypes
        )
        if cyclic:
            members = ", ".join(sorted(scc))
            span = tg.types[sorted(scc)[0]].span
            violations.append(Violation(f"inheritance cycle: {members}", span))

    # Attribute redeclaration with a different value type, own or inherited.
    for name in sorted(tg.types):
        decl = tg.types[name]
        kinds_by_attr: dict[str, dict[ValueKind, list[str]]] = {}
        for anc in sorted(tg.supertype_closure(name)):
            anc_decl = tg.types.get(anc)
            if anc_decl is None:
                continue
            for attr, kind in anc_decl.attr_decls.items():
                kinds_by_attr.setdefault(attr, {}).setdefault(kind, []).append(anc)
        for attr in sorted(kinds_by_attr):
            if len(kinds_by_attr[attr]) > 1:
                where = ", ".join(
                    f"{k.value} in {sorted(v)[0]!r}"
                    for k, v in sorted(kinds_by_attr[attr].items(),
                                       key=lambda kv: kv[0].value)
                )
                violations.append(Violation(
                    f"type {name!r} sees attribute {attr!r} with conflicting "
                    f"value types ({where})",
                    decl.span,
                ))

    for ed in tg.edge_decls:
        for ref in (ed.src_type, ed.tgt_type):
            if not tg.declared(ref.name):
                violations.append(Violation(
                    f"edge declaration -{ed.label.name}-> references "
                    f"undeclared type {ref.name!r}",
                    ed.span,
                ))

    return violations


def _subtype_safe(tg: TypeGraph, sub: str, sup: str) -> bool:
    if not tg.declared(sub) or not tg.declared(sup):
        return False
    return sup in tg.supertype_closure(sub)


def attr_licensed(
    tgs: Sequence[TypeGraph],
    types: Iterable[Label],
    attr: str,
    kind: ValueKind | None,
) -> bool:
    """True when some enabled type graph declares `attr` (of `kind`, if
    given) on one of the types or an ancestor of it."""
    for tg in tgs:
        for t in types:
            if not tg.declared(t.name):
                continue
            for anc in tg.supertype_closure(t.name):
                anc_decl = tg.types.get(anc)
                if anc_decl is None or attr not in anc_decl.attr_decls:
                    continue
                if kind is None or anc_decl.attr_decls[attr] is kind:
                    return True
    return False


def edge_licensed(
    tgs: Sequence[TypeGraph],
    src_types: Iterable[Label],
    label: Label,
    tgt_types: Iterable[Label],
) -> bool:
    """True when some enabled type graph has an edge declaration covering
    the given endpoint types under its own subtype relation."""
    src_types = list(src_types)
    tgt_types = list(tgt_types)
    for tg in tgs:
        for ed in tg.edge_decls:
            if ed.label.name != label.name:
                continue
            if not any(_subtype_safe(tg, s.name, ed.src_type.name) for s in src_types):
                continue
            if any(_subtype_safe(tg, t.name, ed.tgt_type.name) for t in tgt_types):
                return True
    return False


def conforms(tgs: Sequence[TypeGraph], g: HostGraph) -> list[Violation]:
    """Check a host graph against the enabled type graphs.

    An empty ``tgs`` enables nothing and therefore reports nothing.
    Adding a type graph can only remove violations, never add one.
    """
    if not tgs:
        return []
    violations: list[Violation] = []

    for nid in g.node_ids():
        node = g.nodes[nid]
        label = g.display(nid)
        for t in sorted(node.types, key=lambda lb: lb.name):
            declaring = [tg for tg in tgs if tg.declared(t.name)]
            if not declaring:
                violations.append(Violation(
                    f"node {label}: type {t.name!r} is not declared in any "
                    f"enabled type graph"))
            elif all(tg.types[t.name].abstract for tg in declaring):
                violations.append(Violation(
                    f"node {label}: type {t.name!r} is abstract in every "
                    f"enabled type graph that declares it"))
        for attr in sorted(node.attrs):
            value = node.attrs[attr]
            if not attr_licensed(tgs, node.types, attr, value.kind):
                violations.append(Violation(
                    f"node {label}: attribute {attr!r} of type "
                    f"{value.kind.value} is not declared for its types in "
                    f"any enabled type graph"))

    for e in sorted(g.edges, key=HostEdge.key):
        src = g.nodes[e.src]
        tgt = g.nodes[e.tgt]
        if not edge_licensed(tgs, src.types, e.label, tgt.types):
            violations.append(Violation(
                f"edge {g.display(e.src)} -{e.label.name}-> "
                f"{g.display(e.tgt)} is not licensed by any enabled type graph"))

    return violations
