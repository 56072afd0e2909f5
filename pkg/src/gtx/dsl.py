"""Line-oriented textual formats for graphs, type graphs and rules.

One declaration per line, ``#`` starts a comment, files are UTF-8.
Within a file forward references are fine; parsing is two-pass.

Graph (``.gst``)::

    graph NAME
    node ID [: TYPE[,TYPE]*] [flag F]*
    attr ID.NAME = VALUE
    edge SRC -LABEL-> TGT

Type graph (``.gty``)::

    typegraph NAME
    type NAME [abstract] [extends NAME[,NAME]*]
    attr TYPE.NAME : (string|int|bool|real)
    edge TYPE -LABEL-> TYPE

Rule (``.gpr``)::

    rule NAME
    format "FMT"
    quant QID forall [in QID] [count PIDX]
    node ID role=ROLE [: TYPE] [in QID]
    edge SRC -LABEL-> TGT role=ROLE [in QID] [group GID]
    path SRC ~REGEX~> TGT role=ROLE [in QID] [group GID]   # reader|embargo
    flag ID ROLE FLAGNAME
    match ID.NAME == VALUE
    assign ID.NAME = VALUE
    rewrite ID.OLD -> NEW
    bind PIDX = ID.NAME
    neq ID ID [ID]*
    disjoin GID GID [GID]*

Values: double-quoted strings (``\\"``, ``\\\\`` and ``\\n`` escapes),
decimal integers, ``true``/``false``, and reals with a mandatory decimal
point.  Elements without ``in QID`` belong to the root quantifier.

Serialization is deterministic (nodes sorted by name, then each node's
attributes, then edges lexicographically) and stable: serializing a
just-parsed graph twice yields identical bytes.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from string import hexdigits

from .graph import (
    HostGraph,
    Label,
    RESERVED_LABEL_CHARS,
    Value,
    ValueKind,
    edge_label,
    flag as flag_label,
    format_real,
    node_type,
)
from .rules import (
    AttrConstraint,
    ConstraintKind,
    DisjunctionSet,
    Quantifier,
    QuantKind,
    RegexAtom,
    RegexPath,
    ROOT_QUANT,
    Role,
    Rule,
    RuleEdge,
    RuleNode,
    expand_neq,
    group_embargo_elements,
)
from .source import ParseError, SourceSpan
from .typegraph import EdgeDecl, TypeDecl, TypeGraph

_INT_RE = re.compile(r"[+-]?[0-9]+\Z")
_REAL_RE = re.compile(r"[+-]?[0-9]+\.[0-9]+([eE][+-]?[0-9]+)?\Z")
_EDGE_ARROW_RE = re.compile(r"-(.+)->\Z")
_PATH_ARROW_RE = re.compile(r"~(.+)~>\Z")
_VALUE_KINDS = {k.value: k for k in ValueKind}
_ROLES = {r.value: r for r in Role}
_STRING_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


def _needs_u_escape(ch: str) -> bool:
    # Control characters and the exotic line boundaries str.splitlines
    # honours; leaving those raw would split a quoted string across lines.
    o = ord(ch)
    return o < 0x20 or o == 0x7F or 0x80 <= o <= 0x9F or ch in "  "


@dataclass(frozen=True)
class Token:
    text: str
    span: SourceSpan
    quoted: bool = False


def _scan_line(text: str, file: str, lineno: int) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r":
            i += 1
            continue
        if ch == "#":
            break
        start = i
        if ch == '"':
            i += 1
            buf = []
            while True:
                if i >= n:
                    raise ParseError(
                        "unterminated string literal",
                        SourceSpan(file, lineno, start + 1, n + 1))
                c = text[i]
                if c == '"':
                    i += 1
                    break
                if c == "\\":
                    esc = text[i + 1] if i + 1 < n else ""
                    if esc in _STRING_ESCAPES:
                        buf.append(_STRING_ESCAPES[esc])
                        i += 2
                        continue
                    if esc == "u":
                        digits = text[i + 2:i + 6]
                        if len(digits) == 4 and all(d in hexdigits for d in digits):
                            buf.append(chr(int(digits, 16)))
                            i += 6
                            continue
                    raise ParseError(
                        "invalid string escape",
                        SourceSpan(file, lineno, i + 1, i + 3))
                buf.append(c)
                i += 1
            tokens.append(Token("".join(buf),
                                SourceSpan(file, lineno, start + 1, i + 1),
                                quoted=True))
            continue
        while i < n and text[i] not in " \t\r" and text[i] != "#":
            i += 1
        tokens.append(Token(text[start:i],
                            SourceSpan(file, lineno, start + 1, i + 1)))
    return tokens


def _ident(tok: Token, what: str) -> str:
    if tok.quoted or not tok.text:
        raise ParseError(f"expected {what}", tok.span)
    for ch in tok.text:
        if ch.isspace() or ch in RESERVED_LABEL_CHARS:
            raise ParseError(
                f"{what} {tok.text!r} contains reserved character {ch!r}",
                tok.span)
    return tok.text


def _int_index(tok: Token, what: str) -> int:
    if tok.quoted or not tok.text.isdigit():
        raise ParseError(f"expected {what} (a non-negative integer)", tok.span)
    return int(tok.text)


def _dotted(tok: Token, what: str) -> tuple[str, str]:
    if tok.quoted or "." not in tok.text:
        raise ParseError(f"expected {what} of the form A.B", tok.span)
    left, _, right = tok.text.partition(".")
    if not left or not right:
        raise ParseError(f"expected {what} of the form A.B", tok.span)
    for part in (left, right):
        for ch in part:
            if ch.isspace() or ch in RESERVED_LABEL_CHARS:
                raise ParseError(
                    f"{what} {tok.text!r} contains reserved character {ch!r}",
                    tok.span)
    return left, right


def parse_value(tok: Token) -> Value:
    if tok.quoted:
        return Value.string(tok.text)
    if tok.text == "true":
        return Value.bool_(True)
    if tok.text == "false":
        return Value.bool_(False)
    if _INT_RE.match(tok.text):
        try:
            return Value.int_(int(tok.text))
        except ValueError:
            raise ParseError("integer literal out of 64-bit range", tok.span)
    if _REAL_RE.match(tok.text):
        return Value.real(float(tok.text))
    raise ParseError(f"invalid value literal {tok.text!r}", tok.span)


_NAMED_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r",
                  "\t": "\\t"}


def serialize_value(v: Value) -> str:
    if v.kind is ValueKind.STRING:
        escaped = "".join(
            _NAMED_ESCAPES.get(ch) or
            (f"\\u{ord(ch):04x}" if _needs_u_escape(ch) else ch)
            for ch in str(v.raw))
        return f'"{escaped}"'
    if v.kind is ValueKind.BOOL:
        return "true" if v.raw else "false"
    if v.kind is ValueKind.REAL:
        return format_real(v.raw)  # type: ignore[arg-type]
    return str(v.raw)


def _expect(tokens: list[Token], i: int, literal: str, line_span: SourceSpan) -> None:
    if i >= len(tokens):
        raise ParseError(f"expected {literal!r}", line_span)
    if tokens[i].quoted or tokens[i].text != literal:
        raise ParseError(f"expected {literal!r}", tokens[i].span)


def _end_span(tokens: list[Token]) -> SourceSpan:
    last = tokens[-1].span
    return SourceSpan(last.file, last.line, last.end_col, last.end_col + 1)


def _no_more(tokens: list[Token], i: int) -> None:
    if i < len(tokens):
        raise ParseError(f"unexpected token {tokens[i].text!r}", tokens[i].span)


def _name_list(tokens: list[Token], i: int, what: str) -> tuple[list[str], int]:
    """Parse a comma-separated name list that may span several tokens.

    ``A,B``, ``A, B`` and ``A , B`` all work: a comma at a token edge
    continues the list into the next token.  A name with no comma before
    it ends the list instead.
    """
    names: list[str] = []
    owing = True  # the list still expects a name
    while i < len(tokens) and not tokens[i].quoted:
        text = tokens[i].text
        if not owing and not text.startswith(","):
            break
        pieces = text.split(",")
        if not pieces[0] and not names:
            raise ParseError(f"expected a {what} before ','", tokens[i].span)
        if not pieces[0] and owing:
            raise ParseError(f"empty {what} in list", tokens[i].span)
        for j, piece in enumerate(pieces):
            if j > 0:
                if owing:
                    raise ParseError(f"empty {what} in list", tokens[i].span)
                owing = True
            if piece:
                names.append(piece)
                owing = False
        i += 1
    if owing:
        raise ParseError(
            f"expected a {what}",
            tokens[i].span if i < len(tokens) else _end_span(tokens))
    return names, i


def _meaningful_lines(text: str, file: str) -> list[list[Token]]:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _scan_line(raw, file, lineno)
        if tokens:
            lines.append(tokens)
    return lines


def _header(lines: list[list[Token]], keyword: str, file: str) -> str:
    if not lines:
        raise ParseError(f"empty file, expected a {keyword!r} header",
                         SourceSpan(file, 1, 1, 2))
    first = lines[0]
    _expect(first, 0, keyword, first[0].span)
    if len(first) < 2:
        raise ParseError(f"{keyword!r} header needs a name", _end_span(first))
    name = _ident(first[1], f"{keyword} name")
    _no_more(first, 2)
    return name


def _edge_label_token(tok: Token) -> Label:
    m = None if tok.quoted else _EDGE_ARROW_RE.match(tok.text)
    if not m:
        raise ParseError("expected an edge arrow of the form -label->", tok.span)
    name = m.group(1)
    try:
        return edge_label(name)
    except ValueError as exc:
        raise ParseError(str(exc), tok.span)


# ---------------------------------------------------------------------------
# graphs


def parse_graph(text: str, filename: str = "<graph>") -> HostGraph:
    lines = _meaningful_lines(text, filename)
    name = _header(lines, "graph", filename)

    node_specs: dict[str, tuple[list[Label], list[Label]]] = {}
    attr_specs: list[tuple[Token, str, Value]] = []
    edge_specs: list[tuple[Token, Label, Token]] = []
    seen_triples: set[tuple[str, str, str]] = set()

    for tokens in lines[1:]:
        head = tokens[0]
        if head.quoted:
            raise ParseError("expected a declaration keyword", head.span)
        if head.text == "node":
            if len(tokens) < 2:
                raise ParseError("node line needs a name", _end_span(tokens))
            nid = _ident(tokens[1], "node name")
            if nid in node_specs:
                raise ParseError(f"duplicate node {nid!r}", tokens[1].span)
            types: list[Label] = []
            flags: list[Label] = []
            i = 2
            if i < len(tokens) and not tokens[i].quoted and tokens[i].text == ":":
                type_tok = tokens[i]
                names, i = _name_list(tokens, i + 1, "type name")
                for tname in names:
                    try:
                        types.append(node_type(tname))
                    except ValueError as exc:
                        raise ParseError(str(exc), type_tok.span)
            while i < len(tokens):
                _expect(tokens, i, "flag", tokens[i].span)
                if i + 1 >= len(tokens):
                    raise ParseError("expected a flag name", _end_span(tokens))
                try:
                    flags.append(flag_label(_ident(tokens[i + 1], "flag name")))
                except ValueError as exc:
                    raise ParseError(str(exc), tokens[i + 1].span)
                i += 2
            node_specs[nid] = (types, flags)
        elif head.text == "attr":
            if len(tokens) != 4:
                raise ParseError("expected: attr ID.NAME = VALUE",
                                 _end_span(tokens) if len(tokens) < 4
                                 else tokens[4].span)
            nid, attr = _dotted(tokens[1], "attribute reference")
            _expect(tokens, 2, "=", tokens[2].span)
            attr_specs.append((tokens[1], attr, parse_value(tokens[3])))
        elif head.text == "edge":
            if len(tokens) != 4:
                raise ParseError("expected: edge SRC -LABEL-> TGT",
                                 _end_span(tokens) if len(tokens) < 4
                                 else tokens[4].span)
            src = _ident(tokens[1], "edge source")
            lbl = _edge_label_token(tokens[2])
            tgt = _ident(tokens[3], "edge target")
            triple = (src, lbl.name, tgt)
            if triple in seen_triples:
                raise ParseError(
                    f"duplicate edge {src} -{lbl.name}-> {tgt}", tokens[2].span)
            seen_triples.add(triple)
            edge_specs.append((tokens[1], lbl, tokens[3]))
        else:
            raise ParseError(f"unknown declaration {head.text!r}", head.span)

    g = HostGraph(name=name)
    ids: dict[str, int] = {}
    # Canonical ids: assigned in sorted-name order so that parsing the
    # serialized form reproduces the same internal ids.
    for nid in sorted(node_specs):
        types, flags = node_specs[nid]
        ids[nid] = g.add_node(types, flags, name=nid)

    seen_attrs: set[tuple[str, str]] = set()
    for tok, attr, value in attr_specs:
        owner = tok.text.partition(".")[0]
        if owner not in ids:
            raise ParseError(f"attribute on unknown node {owner!r}", tok.span)
        if (owner, attr) in seen_attrs:
            raise ParseError(f"duplicate attribute {owner}.{attr}", tok.span)
        seen_attrs.add((owner, attr))
        g.set_attr(ids[owner], attr, value)

    for src_tok, lbl, tgt_tok in edge_specs:
        for tok in (src_tok, tgt_tok):
            if tok.text not in ids:
                raise ParseError(f"edge references unknown node {tok.text!r}",
                                 tok.span)
        g.add_edge(ids[src_tok.text], lbl, ids[tgt_tok.text])
    return g


def _serialized_names(g: HostGraph) -> dict[int, str]:
    used = {n.name for n in g.nodes.values() if n.name}
    names: dict[int, str] = {}
    for nid in g.node_ids():
        node = g.nodes[nid]
        if node.name:
            names[nid] = node.name
            continue
        candidate = f"x{nid}"
        while candidate in used:
            candidate = "_" + candidate
        used.add(candidate)
        names[nid] = candidate
    return names


def serialize_graph(g: HostGraph) -> str:
    names = _serialized_names(g)
    out = [f"graph {g.name}"]
    for nid in sorted(g.nodes, key=lambda n: names[n]):
        node = g.nodes[nid]
        line = f"node {names[nid]}"
        if node.types:
            line += " : " + ",".join(sorted(t.name for t in node.types))
        for f in sorted(node.flags, key=lambda lb: lb.name):
            line += f" flag {f.name}"
        out.append(line)
        for attr in sorted(node.attrs):
            out.append(f"attr {names[nid]}.{attr} = "
                       f"{serialize_value(node.attrs[attr])}")
    for e in sorted(g.edges,
                    key=lambda e: (names[e.src], e.label.name, names[e.tgt])):
        out.append(f"edge {names[e.src]} -{e.label.name}-> {names[e.tgt]}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# type graphs


def parse_type_graph(text: str, filename: str = "<typegraph>") -> TypeGraph:
    lines = _meaningful_lines(text, filename)
    name = _header(lines, "typegraph", filename)
    tg = TypeGraph(name=name)
    attr_lines: list[tuple[Token, str, ValueKind]] = []

    for tokens in lines[1:]:
        head = tokens[0]
        if head.quoted:
            raise ParseError("expected a declaration keyword", head.span)
        if head.text == "type":
            if len(tokens) < 2:
                raise ParseError("type line needs a name", _end_span(tokens))
            tname = _ident(tokens[1], "type name")
            if tname in tg.types:
                raise ParseError(f"duplicate type {tname!r}", tokens[1].span)
            abstract = False
            supertypes: set[Label] = set()
            i = 2
            if i < len(tokens) and tokens[i].text == "abstract" and not tokens[i].quoted:
                abstract = True
                i += 1
            if i < len(tokens):
                _expect(tokens, i, "extends", tokens[i].span)
                extends_tok = tokens[i]
                names, i = _name_list(tokens, i + 1, "supertype name")
                for sname in names:
                    try:
                        supertypes.add(node_type(sname))
                    except ValueError as exc:
                        raise ParseError(str(exc), extends_tok.span)
            _no_more(tokens, i)
            tg.types[tname] = TypeDecl(node_type(tname), abstract, supertypes,
                                       span=tokens[1].span)
        elif head.text == "attr":
            if len(tokens) != 4:
                raise ParseError("expected: attr TYPE.NAME : KIND",
                                 _end_span(tokens) if len(tokens) < 4
                                 else tokens[4].span)
            _expect(tokens, 2, ":", tokens[2].span)
            kind = _VALUE_KINDS.get(tokens[3].text if not tokens[3].quoted else "")
            if kind is None:
                raise ParseError(
                    "expected a value kind (string, int, bool or real)",
                    tokens[3].span)
            attr_lines.append(
                (tokens[1], _dotted(tokens[1], "attribute")[1], kind))
        elif head.text == "edge":
            if len(tokens) != 4:
                raise ParseError("expected: edge TYPE -LABEL-> TYPE",
                                 _end_span(tokens) if len(tokens) < 4
                                 else tokens[4].span)
            src = node_type(_ident(tokens[1], "source type"))
            lbl = _edge_label_token(tokens[2])
            tgt = node_type(_ident(tokens[3], "target type"))
            if any((d.src_type, d.label, d.tgt_type) == (src, lbl, tgt)
                   for d in tg.edge_decls):
                raise ParseError(
                    f"duplicate edge {src.name} -{lbl.name}-> {tgt.name}",
                    tokens[2].span)
            tg.edge_decls.append(EdgeDecl(src, lbl, tgt, span=tokens[2].span))
        else:
            raise ParseError(f"unknown declaration {head.text!r}", head.span)

    for tok, attr, kind in attr_lines:
        owner = tok.text.partition(".")[0]
        decl = tg.types.get(owner)
        if decl is None:
            raise ParseError(f"attribute on undeclared type {owner!r}", tok.span)
        if attr in decl.attr_decls:
            raise ParseError(f"duplicate attribute {owner}.{attr}", tok.span)
        decl.attr_decls[attr] = kind
    return tg


# ---------------------------------------------------------------------------
# rules


def _parse_regex_text(text: str, span: SourceSpan) -> RegexPath:
    atoms = []
    for part in text.split("."):
        if not part:
            raise ParseError("empty regex atom", span)
        inverse = part.startswith("-")
        name = part[1:] if inverse else part
        if not name:
            raise ParseError("empty regex atom", span)
        try:
            atoms.append(RegexAtom(edge_label(name), inverse))
        except ValueError as exc:
            raise ParseError(str(exc), span)
    return RegexPath(tuple(atoms))


def parse_regex(text: str) -> RegexPath:
    """Parse a bare path expression such as ``-src.trg``."""
    span = SourceSpan("<regex>", 1, 1, len(text) + 1)
    return _parse_regex_text(text, span)


def _kv_option(tok: Token, key: str) -> str | None:
    prefix = key + "="
    if not tok.quoted and tok.text.startswith(prefix):
        return tok.text[len(prefix):]
    return None


def _parse_role(tok: Token) -> Role:
    value = _kv_option(tok, "role")
    if value is None:
        raise ParseError("expected role=READER|eraser|creator|embargo", tok.span)
    role = _ROLES.get(value)
    if role is None:
        raise ParseError(f"unknown role {value!r}", tok.span)
    return role


def _parse_tail(
    tokens: list[Token], i: int, *, allow_group: bool
) -> tuple[str | None, str | None, int]:
    """Parse the optional ``in QID`` / ``group GID`` suffix of a line."""
    level: str | None = None
    group: str | None = None
    while i < len(tokens):
        t = tokens[i]
        if not t.quoted and t.text == "in" and level is None:
            if i + 1 >= len(tokens):
                raise ParseError("expected a quantifier id", _end_span(tokens))
            level = _ident(tokens[i + 1], "quantifier id")
            i += 2
        elif allow_group and not t.quoted and t.text == "group" and group is None:
            if i + 1 >= len(tokens):
                raise ParseError("expected a NAC group id", _end_span(tokens))
            group = _ident(tokens[i + 1], "NAC group id")
            i += 2
        else:
            raise ParseError(f"unexpected token {t.text!r}", t.span)
    return level, group, i


def parse_rule(text: str, filename: str = "<rule>") -> Rule:
    lines = _meaningful_lines(text, filename)
    name = _header(lines, "rule", filename)

    quantifiers: dict[str, Quantifier] = {
        ROOT_QUANT: Quantifier(ROOT_QUANT, QuantKind.ROOT)
    }
    nodes: dict[str, RuleNode] = {}
    edges: list[RuleEdge] = []
    injectivity: set[tuple[str, str]] = set()
    params: dict[int, tuple[str, str]] = {}
    print_format: str | None = None
    disjoins: list[tuple[list[str], SourceSpan]] = []
    pending_levels: list[tuple[str, Token]] = []  # resolved after the pass

    def attach_constraint(tok: Token, nid: str, attr: str,
                          constraint: AttrConstraint) -> None:
        node = nodes.get(nid)
        if node is None:
            raise ParseError(f"unknown rule node {nid!r}", tok.span)
        if attr in node.attr_constraints:
            raise ParseError(
                f"conflicting constraint for attribute {nid}.{attr}", tok.span)
        node.attr_constraints[attr] = constraint

    # Pass 1: nodes and quantifiers, so that later lines can refer to them
    # regardless of ordering.
    body = lines[1:]
    for tokens in body:
        head = tokens[0]
        if head.quoted:
            raise ParseError("expected a declaration keyword", head.span)
        if head.text == "quant":
            if len(tokens) < 3:
                raise ParseError("expected: quant QID forall ...",
                                 _end_span(tokens))
            qid = _ident(tokens[1], "quantifier id")
            if qid == ROOT_QUANT:
                raise ParseError("quantifier id 'root' is reserved",
                                 tokens[1].span)
            if qid in quantifiers:
                raise ParseError(f"duplicate quantifier {qid!r}", tokens[1].span)
            _expect(tokens, 2, "forall", tokens[2].span)
            parent = ROOT_QUANT
            count_param: int | None = None
            i = 3
            while i < len(tokens):
                t = tokens[i]
                if not t.quoted and t.text == "in":
                    if i + 1 >= len(tokens):
                        raise ParseError("expected a quantifier id",
                                         _end_span(tokens))
                    parent = _ident(tokens[i + 1], "quantifier id")
                    pending_levels.append((parent, tokens[i + 1]))
                    i += 2
                elif not t.quoted and t.text == "count":
                    if i + 1 >= len(tokens):
                        raise ParseError("expected a parameter index",
                                         _end_span(tokens))
                    count_param = _int_index(tokens[i + 1], "parameter index")
                    i += 2
                else:
                    raise ParseError(f"unexpected token {t.text!r}", t.span)
            quantifiers[qid] = Quantifier(qid, QuantKind.FORALL, parent,
                                          count_param, span=tokens[1].span)
        elif head.text == "node":
            if len(tokens) < 3:
                raise ParseError("expected: node ID role=ROLE ...",
                                 _end_span(tokens))
            nid = _ident(tokens[1], "rule node id")
            if nid in nodes:
                raise ParseError(f"duplicate rule node {nid!r}", tokens[1].span)
            role = _parse_role(tokens[2])
            type_constraint: Label | None = None
            i = 3
            if i < len(tokens) and not tokens[i].quoted and tokens[i].text == ":":
                if i + 1 >= len(tokens):
                    raise ParseError("expected a type name", _end_span(tokens))
                try:
                    type_constraint = node_type(_ident(tokens[i + 1], "type name"))
                except ValueError as exc:
                    raise ParseError(str(exc), tokens[i + 1].span)
                i += 2
            level, _, i = _parse_tail(tokens, i, allow_group=False)
            if level is not None:
                pending_levels.append((level, tokens[-1]))
            nodes[nid] = RuleNode(nid, role, type_constraint,
                                  level=level or ROOT_QUANT,
                                  span=tokens[1].span)

    # Pass 2: everything that references nodes or quantifiers.
    for tokens in body:
        head = tokens[0]
        if head.text in ("quant", "node"):
            continue
        if head.text == "edge" or head.text == "path":
            is_path = head.text == "path"
            if len(tokens) < 5:
                raise ParseError(
                    f"expected: {head.text} SRC arrow TGT role=ROLE ...",
                    _end_span(tokens))
            src = _ident(tokens[1], "edge source")
            if is_path:
                m = None if tokens[2].quoted else _PATH_ARROW_RE.match(tokens[2].text)
                if not m:
                    raise ParseError(
                        "expected a path arrow of the form ~regex~>",
                        tokens[2].span)
                lbl: Label | RegexPath = _parse_regex_text(m.group(1),
                                                           tokens[2].span)
            else:
                lbl = _edge_label_token(tokens[2])
            tgt = _ident(tokens[3], "edge target")
            role = _parse_role(tokens[4])
            if is_path and role not in (Role.READER, Role.EMBARGO):
                raise ParseError(
                    "path edges must be role=reader or role=embargo",
                    tokens[4].span)
            level, group, _ = _parse_tail(tokens, 5, allow_group=True)
            if group is not None and role is not Role.EMBARGO:
                raise ParseError("only embargo edges take a NAC group",
                                 tokens[4].span)
            for endpoint, tok in ((src, tokens[1]), (tgt, tokens[3])):
                if endpoint not in nodes:
                    raise ParseError(f"unknown rule node {endpoint!r}", tok.span)
            if level is not None and level not in quantifiers:
                raise ParseError(f"unknown quantifier {level!r}", tokens[-1].span)
            lbl_key = lbl.text() if isinstance(lbl, RegexPath) else lbl.name
            for e in edges:
                existing = (e.label.text() if e.is_path() else e.label.name)
                if (e.src, existing, e.tgt, e.role) == (src, lbl_key, tgt, role):
                    raise ParseError(
                        f"duplicate edge {src} -{lbl_key}-> {tgt}",
                        tokens[2].span)
            edges.append(RuleEdge(src, lbl, tgt, role,
                                  level=level or ROOT_QUANT, group=group,
                                  span=tokens[2].span))
        elif head.text == "flag":
            if len(tokens) != 4:
                raise ParseError("expected: flag ID ROLE FLAGNAME",
                                 _end_span(tokens))
            nid = _ident(tokens[1], "rule node id")
            node = nodes.get(nid)
            if node is None:
                raise ParseError(f"unknown rule node {nid!r}", tokens[1].span)
            role = _ROLES.get(tokens[2].text if not tokens[2].quoted else "")
            if role is None:
                raise ParseError(f"unknown role {tokens[2].text!r}",
                                 tokens[2].span)
            try:
                node.flag_ops.append(
                    (flag_label(_ident(tokens[3], "flag name")), role))
            except ValueError as exc:
                raise ParseError(str(exc), tokens[3].span)
        elif head.text == "match":
            if len(tokens) != 4:
                raise ParseError("expected: match ID.NAME == VALUE",
                                 _end_span(tokens))
            nid, attr = _dotted(tokens[1], "attribute reference")
            _expect(tokens, 2, "==", tokens[2].span)
            attach_constraint(tokens[1], nid, attr,
                              AttrConstraint(ConstraintKind.MATCH,
                                             value=parse_value(tokens[3])))
        elif head.text == "assign":
            if len(tokens) != 4:
                raise ParseError("expected: assign ID.NAME = VALUE",
                                 _end_span(tokens))
            nid, attr = _dotted(tokens[1], "attribute reference")
            _expect(tokens, 2, "=", tokens[2].span)
            attach_constraint(tokens[1], nid, attr,
                              AttrConstraint(ConstraintKind.ASSIGN,
                                             value=parse_value(tokens[3])))
        elif head.text == "rewrite":
            if len(tokens) != 4:
                raise ParseError("expected: rewrite ID.OLD -> NEW",
                                 _end_span(tokens))
            nid, attr = _dotted(tokens[1], "attribute reference")
            _expect(tokens, 2, "->", tokens[2].span)
            new_name = _ident(tokens[3], "attribute name")
            attach_constraint(tokens[1], nid, attr,
                              AttrConstraint(ConstraintKind.RENAME,
                                             new_name=new_name))
        elif head.text == "bind":
            if len(tokens) != 4:
                raise ParseError("expected: bind PIDX = ID.NAME",
                                 _end_span(tokens))
            idx = _int_index(tokens[1], "parameter index")
            _expect(tokens, 2, "=", tokens[2].span)
            nid, attr = _dotted(tokens[3], "attribute reference")
            if nid not in nodes:
                raise ParseError(f"unknown rule node {nid!r}", tokens[3].span)
            if idx in params:
                raise ParseError(f"duplicate parameter index {idx}",
                                 tokens[1].span)
            params[idx] = (nid, attr)
        elif head.text == "neq":
            if len(tokens) < 3:
                raise ParseError("expected: neq ID ID ...", _end_span(tokens))
            ids = []
            for tok in tokens[1:]:
                nid = _ident(tok, "rule node id")
                if nid not in nodes:
                    raise ParseError(f"unknown rule node {nid!r}", tok.span)
                if nid in ids:
                    raise ParseError(
                        f"node {nid!r} repeated in injectivity declaration",
                        tok.span)
                ids.append(nid)
            injectivity |= expand_neq(ids)
        elif head.text == "disjoin":
            if len(tokens) < 3:
                raise ParseError("expected: disjoin GID GID ...",
                                 _end_span(tokens))
            gids = [_ident(tok, "NAC group id") for tok in tokens[1:]]
            disjoins.append((gids, tokens[1].span))
        elif head.text == "format":
            if len(tokens) != 2 or not tokens[1].quoted:
                raise ParseError('expected: format "FMT"',
                                 tokens[1].span if len(tokens) > 1
                                 else _end_span(tokens))
            if print_format is not None:
                raise ParseError("duplicate format line", tokens[0].span)
            print_format = tokens[1].text
        else:
            raise ParseError(f"unknown declaration {head.text!r}", head.span)

    for level, tok in pending_levels:
        if level not in quantifiers:
            raise ParseError(f"unknown quantifier {level!r}", tok.span)
    for node in nodes.values():
        if node.level not in quantifiers:
            raise ParseError(f"unknown quantifier {node.level!r}",
                             node.span or SourceSpan(filename, 1, 1, 2))

    nac_groups = group_embargo_elements(nodes, edges, quantifiers)
    disjunction_sets = []
    for gids, span in disjoins:
        for gid in gids:
            if gid not in nac_groups:
                raise ParseError(f"unknown NAC group {gid!r}", span)
        disjunction_sets.append(DisjunctionSet(tuple(gids)))

    return Rule(
        name=name,
        nodes=nodes,
        edges=edges,
        quantifiers=quantifiers,
        nac_groups=nac_groups,
        disjunction_sets=disjunction_sets,
        injectivity_pairs=injectivity,
        params=params,
        print_format=print_format,
    )


# ---------------------------------------------------------------------------
# grammar directories


def parse_config(text: str, filename: str = "<config>") -> list[tuple[str, str, SourceSpan]]:
    """``KEY = VALUE`` lines; returns entries in order, duplicates kept."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0]
        if not stripped.strip():
            continue
        if "=" not in stripped:
            raise ParseError("expected KEY = VALUE",
                             SourceSpan(filename, lineno, 1, len(raw) + 1))
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        span = SourceSpan(filename, lineno, 1, len(raw) + 1)
        if not key or any(ch.isspace() for ch in key):
            raise ParseError("malformed config key", span)
        if not value:
            raise ParseError(f"config key {key!r} has no value", span)
        entries.append((key, value, span))
    return entries


CONFIG_FILE = "grammar.cfg"


@dataclass
class Grammar:
    """A rule system: named rules, enabled type graphs and a start graph."""

    name: str
    rules: dict[str, Rule] = field(default_factory=dict)
    type_graphs: list[TypeGraph] = field(default_factory=list)
    start: HostGraph | None = None
    start_file: str | None = None


def build_grammar(files: Mapping[str, str], name: str = "grammar") -> Grammar:
    """Assemble a grammar from a mapping of file names to file contents.

    Files are recognized by suffix: ``.gpr`` rules, ``.gty`` type graphs,
    ``.gst`` graphs, plus an optional ``grammar.cfg``.  The config selects
    the ``start`` graph (mandatory when several ``.gst`` files exist) and,
    via repeatable ``typegraph`` keys, which type graphs are enabled (all
    of them when the key is absent).  Other file types are ignored.
    """
    rules: dict[str, Rule] = {}
    type_graphs: dict[str, TypeGraph] = {}
    graphs: dict[str, HostGraph] = {}
    for fname in sorted(files):
        text = files[fname]
        if fname.endswith(".gpr"):
            rule = parse_rule(text, fname)
            if rule.name in rules:
                raise ParseError(
                    f"rule {rule.name!r} is defined more than once",
                    SourceSpan(fname, 1, 1, 2))
            rules[rule.name] = rule
        elif fname.endswith(".gty"):
            type_graphs[fname] = parse_type_graph(text, fname)
        elif fname.endswith(".gst"):
            graphs[fname] = parse_graph(text, fname)

    start_file: str | None = None
    enabled_tg_files: list[str] = []
    if CONFIG_FILE in files:
        for key, value, span in parse_config(files[CONFIG_FILE], CONFIG_FILE):
            if key == "start":
                if start_file is not None:
                    raise ParseError("duplicate config key 'start'", span)
                if value not in graphs:
                    raise ParseError(f"start graph {value!r} not found", span)
                start_file = value
            elif key == "typegraph":
                if value not in type_graphs:
                    raise ParseError(f"type graph {value!r} not found", span)
                if value in enabled_tg_files:
                    raise ParseError(
                        f"type graph {value!r} enabled twice", span)
                enabled_tg_files.append(value)
            else:
                raise ParseError(f"unknown config key {key!r}", span)

    if start_file is None and len(graphs) == 1:
        start_file = next(iter(graphs))
    elif start_file is None and len(graphs) > 1:
        raise ParseError(
            "several .gst files; pick one with 'start = FILE' in grammar.cfg",
            SourceSpan(CONFIG_FILE, 1, 1, 2))
    if not enabled_tg_files:
        enabled_tg_files = sorted(type_graphs)

    return Grammar(
        name=name,
        rules=rules,
        type_graphs=[type_graphs[f] for f in enabled_tg_files],
        start=graphs[start_file] if start_file is not None else None,
        start_file=start_file,
    )
