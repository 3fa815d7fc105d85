"""Text format for corruption causal models.

Grammar (whitespace-insensitive, # comments to end of line):

    spec        := ["version" NUMBER] node_decl*
    node_decl   := "node" IDENT ["after" IDENT ("," IDENT)*]
                   ["render_from" ("clean" | "parent")] "{" item* "}"
    item        := "op" "=" IDENT ";"
                 | "eps" IDENT "~" dist ";"
                 | IDENT "=" mech ";"
    mech        := "if" cond "then" mech "else" mech | sum
    cond        := cmp ("or" cmp)*
    cmp         := operand ("<" | "<=" | ">" | ">=" | "==") number
    operand     := "eps" "(" IDENT ")" | IDENT "." IDENT
    sum         := term [("+" | "-") number]
    term        := number "*" atom | atom | number
    atom        := "eps" "(" IDENT ")" | "~" dist
    dist        := "uniform" "(" number "," number ")"
                 | "halfnormal" "(" number ")"
                 | "normal" "(" number "," number ")"
                 | "duniform" "(" (number ".." number | number ("," number)*) ")"
                 | "point" "(" number ")"
                 | "mixture" "(" number ":" dist ("," number ":" dist)* ")"

Named exogenous variables default to uniform(0, 1) unless declared with an
eps item. Serialization is canonical (topological node order, minimal
render_from, exact numeric round-trip), so serialize(parse(s)) is a fixed
point.
"""

from __future__ import annotations

from dataclasses import dataclass

from .distributions import (
    DiscreteUniform,
    Distribution,
    HalfNormal,
    Mixture,
    Normal,
    PointMass,
    Uniform,
)
from .errors import InvalidDistributionError, SpecSyntaxError
from .scm import (
    DEFAULT_EPS_DIST,
    Affine,
    Branch,
    CausalGraph,
    Comparison,
    Const,
    CorruptionNode,
    Draw,
    EpsRef,
    Expr,
    ParentRef,
    topological_order,
)

SPEC_SUFFIX = ".scm.txt"
SHIPPED_SPECS = (
    "iid_uniform",
    "iid_halfnormal",
    "chain_uniform",
    "chain_halfnormal",
    "longtail",
)


@dataclass(frozen=True)
class SpecDocument:
    graph: CausalGraph
    version: int = 1


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "warning" or "error"
    node: str
    param: str
    message: str

    def __str__(self) -> str:
        where = f"{self.node}.{self.param}" if self.param else self.node
        return f"{self.level}: {where}: {self.message}"


# ---------------------------------------------------------------------------
# lexer


_SYMBOLS = (
    ("..", "DOTDOT"),
    ("<=", "LE"),
    (">=", "GE"),
    ("==", "EQEQ"),
    ("{", "LBRACE"),
    ("}", "RBRACE"),
    ("(", "LPAREN"),
    (")", "RPAREN"),
    (";", "SEMI"),
    (",", "COMMA"),
    (":", "COLON"),
    (".", "DOT"),
    ("~", "TILDE"),
    ("=", "EQ"),
    ("*", "STAR"),
    ("+", "PLUS"),
    ("-", "MINUS"),
    ("<", "LT"),
    (">", "GT"),
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            start = i
            start_col = col
            while i < n and text[i].isdigit():
                i += 1
            if i + 1 < n and text[i] == "." and text[i + 1].isdigit():
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            tokens.append(Token("NUMBER", text[start:i], line, start_col))
            col += i - start
            continue
        if ch.isalpha() or ch == "_":
            start = i
            start_col = col
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            tokens.append(Token("IDENT", text[start:i], line, start_col))
            col += i - start
            continue
        for sym, kind in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(kind, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise SpecSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# parser


@dataclass
class _RawNode:
    name: str
    parents: list[str]
    render_from: str | None
    op_id: str | None
    eps_dists: dict[str, Distribution]
    params: dict[str, Expr]
    token: Token


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def _fail(self, expected: str) -> None:
        tok = self.cur
        got = tok.text or "end of input"
        raise SpecSyntaxError(f"expected {expected}, got {got!r}", tok.line, tok.col)

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str, expected: str | None = None) -> Token:
        if self.cur.kind != kind:
            self._fail(expected or kind.lower())
        return self.advance()

    def keyword(self, word: str) -> Token:
        if self.cur.kind != "IDENT" or self.cur.text != word:
            self._fail(f"keyword {word!r}")
        return self.advance()

    def at_keyword(self, word: str) -> bool:
        return self.cur.kind == "IDENT" and self.cur.text == word

    def ident(self, what: str = "identifier") -> str:
        return self.expect("IDENT", what).text

    def number(self) -> float:
        sign = 1.0
        if self.cur.kind == "MINUS":
            self.advance()
            sign = -1.0
        tok = self.expect("NUMBER", "number")
        return sign * float(tok.text)

    # grammar rules ---------------------------------------------------

    def spec(self) -> tuple[int, list[_RawNode]]:
        version = 1
        if self.at_keyword("version"):
            self.advance()
            version = int(self.number())
        nodes: list[_RawNode] = []
        while self.cur.kind != "EOF":
            nodes.append(self.node_decl())
        return version, nodes

    def node_decl(self) -> _RawNode:
        self.keyword("node")
        tok = self.cur
        name = self.ident("node name")
        parents: list[str] = []
        render_from: str | None = None
        if self.at_keyword("after"):
            self.advance()
            parents.append(self.ident("parent name"))
            while self.cur.kind == "COMMA":
                self.advance()
                parents.append(self.ident("parent name"))
        if self.at_keyword("render_from"):
            self.advance()
            src = self.ident("clean or parent")
            if src not in ("clean", "parent"):
                raise SpecSyntaxError(
                    f"render_from must be clean or parent, got {src!r}", tok.line, tok.col
                )
            render_from = src
        self.expect("LBRACE", "'{'")
        raw = _RawNode(name, parents, render_from, None, {}, {}, tok)
        while self.cur.kind != "RBRACE":
            self.item(raw)
        self.expect("RBRACE", "'}'")
        return raw

    def item(self, raw: _RawNode) -> None:
        tok = self.cur
        name = self.ident("op, eps, or parameter name")
        if name == "op":
            self.expect("EQ", "'='")
            raw.op_id = self.ident("operator id")
        elif name == "eps" and self.cur.kind == "IDENT":
            eps_name = self.ident("exogenous name")
            self.expect("TILDE", "'~'")
            raw.eps_dists[eps_name] = self.dist()
        else:
            if name in raw.params:
                raise SpecSyntaxError(f"duplicate parameter {name!r}", tok.line, tok.col)
            self.expect("EQ", "'='")
            counter = [0]
            raw.params[name] = self.mech(name, counter)
        self.expect("SEMI", "';'")

    def mech(self, param: str, counter: list[int]) -> Expr:
        if self.at_keyword("if"):
            self.advance()
            conditions = [self.comparison()]
            while self.at_keyword("or"):
                self.advance()
                conditions.append(self.comparison())
            self.keyword("then")
            then = self.mech(param, counter)
            self.keyword("else")
            otherwise = self.mech(param, counter)
            return Branch(tuple(conditions), then, otherwise)
        return self.sum(param, counter)

    def comparison(self) -> Comparison:
        operand: ParentRef | EpsRef
        if self.at_keyword("eps"):
            self.advance()
            self.expect("LPAREN", "'('")
            operand = EpsRef(self.ident("exogenous name"))
            self.expect("RPAREN", "')'")
        else:
            node = self.ident("parent reference")
            self.expect("DOT", "'.'")
            operand = ParentRef(node, self.ident("parameter name"))
        kind = self.cur.kind
        ops = {"LT": "<", "LE": "<=", "GT": ">", "GE": ">=", "EQEQ": "=="}
        if kind not in ops:
            self._fail("comparison operator")
        self.advance()
        return Comparison(operand, ops[kind], self.number())

    def sum(self, param: str, counter: list[int]) -> Expr:
        if self.cur.kind in ("NUMBER", "MINUS"):
            value = self.number()
            if self.cur.kind == "STAR":
                self.advance()
                atom = self.atom(param, counter)
                coeff, term = value, atom
            else:
                coeff, term = None, Const(value)
        else:
            coeff, term = None, self.atom(param, counter)
        offset = 0.0
        if self.cur.kind == "PLUS":
            self.advance()
            offset = self.number()
        elif self.cur.kind == "MINUS":
            self.advance()
            offset = -self.number()
        if isinstance(term, Const):
            return Const(term.value + offset)
        if coeff is None and offset == 0.0:
            return term
        return Affine(1.0 if coeff is None else coeff, term, offset)

    def atom(self, param: str, counter: list[int]) -> EpsRef | Draw:
        if self.at_keyword("eps"):
            self.advance()
            self.expect("LPAREN", "'('")
            name = self.ident("exogenous name")
            self.expect("RPAREN", "')'")
            return EpsRef(name)
        if self.cur.kind == "TILDE":
            self.advance()
            label = f"{param}.draw{counter[0]}"
            counter[0] += 1
            return Draw(self.dist(), label)
        self._fail("eps(...) or '~ distribution'")
        raise AssertionError("unreachable")

    def dist(self) -> Distribution:
        tok = self.cur
        name = self.ident("distribution name")
        self.expect("LPAREN", "'('")
        try:
            d = self._dist_body(name, tok)
        except (ValueError, InvalidDistributionError) as exc:
            raise SpecSyntaxError(str(exc), tok.line, tok.col) from None
        self.expect("RPAREN", "')'")
        return d

    def _dist_body(self, name: str, tok: Token) -> Distribution:
        if name == "uniform":
            lo = self.number()
            self.expect("COMMA", "','")
            return Uniform(lo, self.number())
        if name == "halfnormal":
            return HalfNormal(self.number())
        if name == "normal":
            m = self.number()
            self.expect("COMMA", "','")
            return Normal(m, self.number())
        if name == "point":
            return PointMass(self.number())
        if name == "duniform":
            first = self.number()
            if self.cur.kind == "DOTDOT":
                self.advance()
                last = self.number()
                if first != int(first) or last != int(last) or last < first:
                    raise SpecSyntaxError(
                        "duniform range needs integers lo .. hi with lo <= hi", tok.line, tok.col
                    )
                return DiscreteUniform(tuple(float(v) for v in range(int(first), int(last) + 1)))
            values = [first]
            while self.cur.kind == "COMMA":
                self.advance()
                values.append(self.number())
            return DiscreteUniform(tuple(values))
        if name == "mixture":
            comps = [self._mixture_component()]
            while self.cur.kind == "COMMA":
                self.advance()
                comps.append(self._mixture_component())
            return Mixture(tuple(comps))
        raise SpecSyntaxError(f"unknown distribution {name!r}", tok.line, tok.col)

    def _mixture_component(self) -> tuple[float, Distribution]:
        weight = self.number()
        self.expect("COLON", "':'")
        return (weight, self.dist())


def parse_spec(text: str) -> SpecDocument:
    """Parse spec text into a validated document.

    Syntax problems raise SpecSyntaxError with 1-based line:column; semantic
    problems (unknown operator or parent, duplicate node, bad arity, cycle)
    raise the corresponding graph errors.
    """
    parser = _Parser(text)
    version, raw_nodes = parser.spec()
    nodes = []
    for raw in raw_nodes:
        if raw.op_id is None:
            raise SpecSyntaxError(
                f"node {raw.name!r} is missing an op item", raw.token.line, raw.token.col
            )
        nodes.append(
            CorruptionNode(
                name=raw.name,
                operator_id=raw.op_id,
                params=raw.params,
                eps_dists=raw.eps_dists,
                render_from=raw.render_from,
            )
        )
    edges = []
    for raw in raw_nodes:
        for parent in raw.parents:
            edges.append((parent, raw.name))
    graph = CausalGraph(nodes=tuple(nodes), edges=tuple(edges))
    return SpecDocument(graph=graph, version=version)


# ---------------------------------------------------------------------------
# serializer


def _fmt_num(v: float) -> str:
    fv = float(v)
    if fv.is_integer() and abs(fv) < 1e15:
        return str(int(fv))
    return repr(fv)


def _fmt_dist(d: Distribution) -> str:
    if isinstance(d, Uniform):
        return f"uniform({_fmt_num(d.lo)}, {_fmt_num(d.hi)})"
    if isinstance(d, HalfNormal):
        return f"halfnormal({_fmt_num(d.scale)})"
    if isinstance(d, Normal):
        return f"normal({_fmt_num(d.mean_)}, {_fmt_num(d.sd)})"
    if isinstance(d, PointMass):
        return f"point({_fmt_num(d.value)})"
    if isinstance(d, DiscreteUniform):
        vals = d.values
        integral = all(v.is_integer() for v in vals)
        consecutive = all(vals[i + 1] - vals[i] == 1.0 for i in range(len(vals) - 1))
        if len(vals) > 1 and integral and consecutive:
            return f"duniform({_fmt_num(vals[0])} .. {_fmt_num(vals[-1])})"
        return "duniform(" + ", ".join(_fmt_num(v) for v in vals) + ")"
    if isinstance(d, Mixture):
        parts = ", ".join(f"{repr(float(w))}: {_fmt_dist(c)}" for w, c in d.components)
        return f"mixture({parts})"
    raise TypeError(f"unknown distribution type {type(d).__name__}")


def _fmt_operand(operand: ParentRef | EpsRef) -> str:
    if isinstance(operand, ParentRef):
        return f"{operand.node}.{operand.param}"
    return f"eps({operand.name})"


def _fmt_expr(expr: Expr) -> str:
    if isinstance(expr, Const):
        return _fmt_num(expr.value)
    if isinstance(expr, EpsRef):
        return f"eps({expr.name})"
    if isinstance(expr, Draw):
        return f"~ {_fmt_dist(expr.dist)}"
    if isinstance(expr, Affine):
        term = _fmt_expr(expr.term)
        s = term if expr.coeff == 1.0 else f"{_fmt_num(expr.coeff)} * {term}"
        if expr.offset > 0:
            s += f" + {_fmt_num(expr.offset)}"
        elif expr.offset < 0:
            s += f" - {_fmt_num(-expr.offset)}"
        return s
    if isinstance(expr, Branch):
        conds = " or ".join(
            f"{_fmt_operand(c.operand)} {c.op} {_fmt_num(c.threshold)}" for c in expr.conditions
        )
        return f"if {conds} then {_fmt_expr(expr.then)} else {_fmt_expr(expr.otherwise)}"
    raise TypeError(f"unknown expression type {type(expr).__name__}")


def serialize_spec(doc: SpecDocument | CausalGraph) -> str:
    """Canonical text form: topological node order, minimal clauses."""
    if isinstance(doc, CausalGraph):
        doc = SpecDocument(graph=doc)
    graph = doc.graph
    lines = [f"version {doc.version}"]
    for name in topological_order(graph):
        node = graph.node(name)
        parents = graph.parents(name)
        head = f"node {name}"
        if parents:
            head += " after " + ", ".join(parents)
        if node.render_from == "clean" and len(parents) == 1:
            head += " render_from clean"
        lines.append("")
        lines.append(head + " {")
        lines.append(f"  op = {node.operator_id};")
        for key, dist in node.exogenous_plan():
            if key in node.eps_dists:
                lines.append(f"  eps {key} ~ {_fmt_dist(dist)};")
        for param, expr in node.params.items():
            lines.append(f"  {param} = {_fmt_expr(expr)};")
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# validation


def _expr_support(expr: Expr, node: CorruptionNode, graph: CausalGraph) -> tuple[float, float]:
    if isinstance(expr, Const):
        return (expr.value, expr.value)
    if isinstance(expr, EpsRef):
        return node.eps_dists.get(expr.name, DEFAULT_EPS_DIST).support()
    if isinstance(expr, Draw):
        return expr.dist.support()
    if isinstance(expr, Affine):
        lo, hi = _expr_support(expr.term, node, graph)
        a, b = expr.coeff, expr.offset
        x, y = a * lo + b, a * hi + b
        return (min(x, y), max(x, y))
    if isinstance(expr, Branch):
        lo1, hi1 = _expr_support(expr.then, node, graph)
        lo2, hi2 = _expr_support(expr.otherwise, node, graph)
        return (min(lo1, lo2), max(hi1, hi2))
    raise TypeError(f"unknown expression type {type(expr).__name__}")


def validate_spec(doc: SpecDocument) -> list[Diagnostic]:
    """Check mechanism supports against operator parameter domains.

    Structural errors are already rejected at parse/construction time, so
    the result is empty iff no declared support can leave its operator's
    domain; out-of-domain supports produce clamping warnings.
    """
    from .ops import operator_info

    diags: list[Diagnostic] = []
    for node in doc.graph.nodes:
        info = operator_info(node.operator_id)
        bounds = {p.name: (p.lo, p.hi) for p in info.params}
        for param, expr in node.params.items():
            lo, hi = _expr_support(expr, node, doc.graph)
            dom_lo, dom_hi = bounds[param]
            if lo < dom_lo or hi > dom_hi:
                diags.append(
                    Diagnostic(
                        "warning",
                        node.name,
                        param,
                        f"support [{lo:g}, {hi:g}] exceeds domain [{dom_lo:g}, {dom_hi:g}]; "
                        "sampled values are clamped",
                    )
                )
    return diags


# ---------------------------------------------------------------------------
# file helpers


def load_spec(path: str) -> SpecDocument:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec(fh.read())


def shipped_spec_text(name: str) -> str:
    """Source text of one of the reference specs bundled with the package."""
    from importlib.resources import files

    if name not in SHIPPED_SPECS:
        raise KeyError(f"unknown shipped spec {name!r}; available: {SHIPPED_SPECS}")
    return (files("causalcorrupt") / "specs" / f"{name}{SPEC_SUFFIX}").read_text(encoding="utf-8")


def shipped_spec(name: str) -> SpecDocument:
    return parse_spec(shipped_spec_text(name))
