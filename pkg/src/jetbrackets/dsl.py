"""Plain-text format for expressions, operators, systems and golden tables.

Expressions::

    u[t] - kappa1*u[x,x] - alpha*u^p*v      # jets: dependent[index, ...]
    r^(-2)*v[t] + 1/2*u^(p - 1)             # exponents: affine in parameters

Operators use ``D[...]`` atoms with coefficients written to their left, so
``t*D[t] + 2`` means ``V -> t*D_t V + 2*V``.  Products of ``D`` atoms merge,
so ``(1 - D[x,x])*D[t]`` is the composite operator.

A ``.sys`` file is a sequence of column-0 section keywords.  Header keywords
take their value on the same line; block keywords take indented entries.
Lines whose brackets are unbalanced continue onto the next line.  See
``fixtures/*.sys`` for complete examples.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    DslSyntaxError,
    DuplicateName,
    LengthMismatch,
    UndeclaredSymbol,
)
from .linop import TotalDiffOp
from .paramscalar import ONE, ParamScalar, render_scalar
from .symexpr import (
    ONE_EXP,
    Expr,
    Symbols,
    normalize,
    render_expr,
)

OP_ATOM = "D"

# ---------------------------------------------------------------- tokens
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*'*)
  | (?P<arrow>->)
  | (?P<assign>:=)
  | (?P<punct>[-+*/^()\[\],=:;|])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | punct | end
    text: str
    line: int
    col: int


def tokenize(text: str, line: int = 1, source: str = "<string>") -> List[Token]:
    out: List[Token] = []
    pos = 0
    col_base = 1
    while pos < len(text):
        if text[pos] == "\n":
            line += 1
            pos += 1
            col_base = 1 - pos
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, pos + col_base, source)
        kind = m.lastgroup
        if kind != "ws":
            tk = "punct" if kind in ("arrow", "assign", "punct") else kind
            out.append(Token(tk, m.group(), line, pos + col_base))
        pos = m.end()
    out.append(Token("end", "", line, pos + col_base))
    return out


# ---------------------------------------------------------------- parser
class _Parser:
    """Recursive-descent parser producing raw trees for :func:`normalize`."""

    def __init__(self, tokens: List[Token], source: str):
        self.toks = tokens
        self.i = 0
        self.source = source

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.cur
        raise DslSyntaxError(msg, tok.line, tok.col, self.source)

    def accept(self, text: str) -> bool:
        if self.cur.kind == "punct" and self.cur.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.cur
        if not self.accept(text):
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return tok

    def at_end(self) -> bool:
        return self.cur.kind == "end"

    # value := list | tuple | expr
    def value(self):
        if self.cur.kind == "punct" and self.cur.text == "[":
            return self.listing()
        return self.sum(allow_tuple=True)

    def listing(self):
        self.expect("[")
        items = []
        if not self.accept("]"):
            while True:
                items.append(self.value())
                if self.accept("]"):
                    break
                self.expect(",")
        return ("list", items)

    def sum(self, allow_tuple: bool = False):
        node = self.product(allow_tuple)
        if node[0] == "tuple":
            return node
        while True:
            if self.accept("+"):
                node = ("add", node, self.product())
            elif self.accept("-"):
                node = ("sub", node, self.product())
            else:
                return node

    def product(self, allow_tuple: bool = False):
        node = self.unary(allow_tuple)
        if node[0] == "tuple":
            return node
        while True:
            if self.accept("*"):
                node = ("mul", node, self.unary())
            elif self.accept("/"):
                node = ("div", node, self.unary())
            else:
                return node

    def unary(self, allow_tuple: bool = False):
        if self.accept("-"):
            return ("neg", self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power(allow_tuple)

    def power(self, allow_tuple: bool = False):
        base = self.atom(allow_tuple)
        if base[0] == "tuple":
            return base
        if self.accept("^"):
            return ("pow", base, self.exponent())
        return base

    def exponent(self):
        if self.accept("-"):
            return ("neg", self.exponent())
        if self.accept("+"):
            return self.exponent()
        if self.cur.kind == "punct" and self.cur.text == "(":
            self.i += 1
            node = self.sum()
            self.expect(")")
            return node
        tok = self.cur
        if tok.kind == "num":
            self.i += 1
            return ("num", Fraction(tok.text))
        if tok.kind == "ident":
            self.i += 1
            return ("name", tok.text)
        self.error("malformed exponent")

    def atom(self, allow_tuple: bool = False):
        tok = self.cur
        if tok.kind == "num":
            self.i += 1
            return ("num", Fraction(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if self.accept("["):
                idx = []
                if self.cur.kind == "punct" and self.cur.text == "]":
                    self.error("empty derivative index list")
                while True:
                    t = self.cur
                    if t.kind != "ident":
                        self.error("derivative indices must be identifiers")
                    idx.append(t.text)
                    self.i += 1
                    if self.accept("]"):
                        break
                    self.expect(",")
                return ("jet", tok.text, tuple(idx))
            return ("name", tok.text)
        if self.accept("("):
            node = self.sum()
            if allow_tuple and self.cur.kind == "punct" and self.cur.text == ",":
                items = [node]
                while self.accept(","):
                    items.append(self.sum())
                self.expect(")")
                if not self.at_end():
                    self.error("a tuple must stand alone")
                return ("tuple", items)
            self.expect(")")
            return node
        self.error(f"unexpected {tok.text or 'end of input'!r}")


def _parse_raw(text: str, line: int = 1, source: str = "<string>"):
    p = _Parser(tokenize(text, line, source), source)
    node = p.value()
    if not p.at_end():
        p.error(f"unexpected {p.cur.text!r}")
    return node


# ---------------------------------------------------------------- contexts
@dataclass(frozen=True)
class ParseContext:
    """Declared symbols plus parse-time aliases (``u := U[x]``)."""

    symbols: Symbols
    aliases: Tuple[Tuple[str, Tuple[str, Tuple[str, ...]]], ...] = ()
    source: str = "<string>"

    def alias_map(self) -> Dict[str, Tuple[str, Tuple[str, ...]]]:
        return dict(self.aliases)


def _expand_aliases(raw, aliases: Dict[str, Tuple[str, Tuple[str, ...]]]):
    if not aliases:
        return raw
    tag = raw[0]
    if tag == "name" and raw[1] in aliases:
        dep, idx = aliases[raw[1]]
        return ("jet", dep, idx)
    if tag == "jet" and raw[1] in aliases:
        dep, idx = aliases[raw[1]]
        return ("jet", dep, idx + raw[2])
    if tag in ("num", "name", "jet"):
        return raw
    if tag == "list":
        return ("list", [_expand_aliases(x, aliases) for x in raw[1]])
    if tag == "tuple":
        return ("tuple", [_expand_aliases(x, aliases) for x in raw[1]])
    return (tag,) + tuple(_expand_aliases(x, aliases) for x in raw[1:])


def _normalize(raw, ctx: ParseContext, line: int = 0) -> Expr:
    if raw[0] in ("list", "tuple"):
        raise DslSyntaxError("expected a scalar expression", line, 0, ctx.source)
    try:
        return normalize(_expand_aliases(raw, ctx.alias_map()), ctx.symbols)
    except UndeclaredSymbol as exc:
        raise UndeclaredSymbol(f"{ctx.source}:{line}: {exc}") from None


def parse_expr(text: str, context, line: int = 1) -> Expr:
    """Parse a scalar expression.  ``context`` is a :class:`ParseContext` or :class:`Symbols`."""
    ctx = context if isinstance(context, ParseContext) else ParseContext(context)
    return _normalize(_parse_raw(text, line, ctx.source), ctx, line)


def _vector_from_raw(raw, ctx: ParseContext, line: int) -> Tuple[Expr, ...]:
    if raw[0] == "tuple":
        return tuple(_normalize(x, ctx, line) for x in raw[1])
    if raw[0] == "list":
        return tuple(_normalize(x, ctx, line) for x in raw[1])
    return (_normalize(raw, ctx, line),)


def parse_vector(text: str, context, line: int = 1) -> Tuple[Expr, ...]:
    """Parse ``(e1, e2, ...)``; a bare expression is a 1-tuple."""
    ctx = context if isinstance(context, ParseContext) else ParseContext(context)
    return _vector_from_raw(_parse_raw(text, line, ctx.source), ctx, line)


def _op_context(ctx: ParseContext) -> ParseContext:
    s = ctx.symbols
    return ParseContext(Symbols(s.independents, s.dependents + (OP_ATOM,), s.parameters), ctx.aliases, ctx.source)


def _operator_entry(raw, ctx: ParseContext, line: int) -> Dict[Tuple[str, ...], Expr]:
    e = _normalize(raw, _op_context(ctx), line)
    out: Dict[Tuple[str, ...], Expr] = {}
    for key, c in e.items():
        idx: List[str] = []
        rest = []
        for b, ex in key:
            if len(b) == 2 and b[0] == OP_ATOM:
                if not ex.is_nonneg_integer():
                    raise DslSyntaxError("D atoms need nonnegative integer powers", line, 0, ctx.source)
                idx.extend(list(b[1]) * int(ex.const))
            else:
                rest.append((b, ex))
        mi = tuple(sorted(idx))
        out[mi] = out.get(mi, Expr()) + Expr({tuple(rest): c})
    return {k: v for k, v in out.items() if not v.is_zero()}


def _operator_from_raw(raw, ctx: ParseContext, line: int) -> TotalDiffOp:
    if raw[0] != "list":
        return TotalDiffOp.from_entries(1, 1, {(0, 0): _operator_entry(raw, ctx, line)})
    rows = raw[1]
    if not rows or any(r[0] != "list" for r in rows):
        raise DslSyntaxError("operator matrices are written [[a, b], [c, d]]", line, 0, ctx.source)
    ncols = len(rows[0][1])
    entries = {}
    for i, r in enumerate(rows):
        if len(r[1]) != ncols:
            raise LengthMismatch(f"{ctx.source}:{line}: ragged operator matrix")
        for j, item in enumerate(r[1]):
            entries[(i, j)] = _operator_entry(item, ctx, line)
    return TotalDiffOp.from_entries(len(rows), ncols, entries)


def parse_operator(text: str, context, line: int = 1) -> TotalDiffOp:
    ctx = context if isinstance(context, ParseContext) else ParseContext(context)
    return _operator_from_raw(_parse_raw(text, line, ctx.source), ctx, line)


Combo = Dict[str, ParamScalar]


def _combo_from_raw(raw, ctx: ParseContext, labels: Sequence[str], line: int) -> Combo:
    s = ctx.symbols
    sym = Symbols(s.independents, s.dependents + tuple(labels), s.parameters)
    try:
        e = normalize(raw, sym)
    except UndeclaredSymbol as exc:
        raise UndeclaredSymbol(f"{ctx.source}:{line}: {exc}") from None
    out: Combo = {}
    for key, c in e.items():
        if len(key) != 1 or key[0][1] != ONE_EXP or key[0][0][0] not in labels or key[0][0][1]:
            raise DslSyntaxError(
                f"expected a linear combination of {', '.join(labels)}", line, 0, ctx.source
            )
        out[key[0][0][0]] = c
    return out


def parse_combo(text: str, context, labels: Sequence[str], line: int = 1) -> Combo:
    """Parse a linear combination of labels with ParamScalar coefficients."""
    ctx = context if isinstance(context, ParseContext) else ParseContext(context)
    return _combo_from_raw(_parse_raw(text, line, ctx.source), ctx, labels, line)


# ---------------------------------------------------------------- rendering
def render_combo(combo: Combo, order: Sequence[str] = ()) -> str:
    if not combo:
        return "0"
    rank = {k: i for i, k in enumerate(order)}
    keys = sorted(combo, key=lambda k: (rank.get(k, len(rank)), k))
    parts = []
    for i, k in enumerate(keys):
        c = combo[k]
        neg = False
        if c.is_const():
            v = c.const_value()
            neg = v < 0
            a = -v if neg else v
            txt = "" if a == 1 else (f"{a.numerator}" if a.denominator == 1 else f"{a.numerator}/{a.denominator}") + "*"
        else:
            txt = f"({render_scalar(c)})*"
        body = f"{txt}{k}"
        if i == 0:
            parts.append(f"-{body}" if neg else body)
        else:
            parts.append(f" - {body}" if neg else f" + {body}")
    return "".join(parts)


def render_vector(v: Sequence[Expr]) -> str:
    if len(v) == 1:
        return render_expr(v[0])
    return "(" + ", ".join(render_expr(e) for e in v) + ")"


def render_operator(op: TotalDiffOp) -> str:
    def entry(i, j):
        terms = op.entry(i, j)
        if not terms:
            return "0"
        parts = []
        for mi in sorted(terms, key=lambda m: (len(m), m)):
            c = terms[mi]
            d = f"D[{','.join(mi)}]" if mi else ""
            if not d:
                parts.append(render_expr(c))
            elif c == Expr.const(1):
                parts.append(d)
            elif c == Expr.const(-1):
                parts.append(f"-{d}")
            elif len(c) == 1:
                parts.append(f"{render_expr(c)}*{d}")
            else:
                parts.append(f"({render_expr(c)})*{d}")
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    rows = ["[" + ", ".join(entry(i, j) for j in range(op.cols)) + "]" for i in range(op.rows)]
    return "[" + ", ".join(rows) + "]"


def render(obj) -> str:
    """Deterministic text for an Expr, a vector of Exprs, an operator, a combo or a scalar."""
    if isinstance(obj, Expr):
        return render_expr(obj)
    if isinstance(obj, TotalDiffOp):
        return render_operator(obj)
    if isinstance(obj, ParamScalar):
        return render_scalar(obj)
    if isinstance(obj, dict):
        return render_combo(obj)
    if isinstance(obj, (tuple, list)):
        return render_vector(obj)
    raise TypeError(f"cannot render {type(obj).__name__}")


# ---------------------------------------------------------------- system files
@dataclass
class SolvedForm:
    dependent: str
    leading: Tuple[str, ...]
    rhs: Expr


@dataclass
class ObjectDef:
    label: str
    components: Tuple[Expr, ...]
    guard: Dict[str, Fraction] = field(default_factory=dict)
    line: int = 0


@dataclass
class CommutatorTable:
    entries: Dict[Tuple[str, str], Combo]
    line: int = 0


@dataclass
class ActionTable:
    name: str
    kind: int
    cols: List[str]
    rows: Dict[str, List[Combo]]
    line: int = 0


@dataclass
class BracketTable:
    name: str
    kind: int
    q: Combo
    policy: str = "ideal"
    scaling: Optional[str] = None
    basis: List[Tuple[str, Combo]] = field(default_factory=list)
    entries: Dict[Tuple[str, str], Combo] = field(default_factory=dict)
    instantiate: Dict[str, Fraction] = field(default_factory=dict)
    kernel: Optional[List[Combo]] = None
    ideal: Optional[bool] = None
    golden: bool = True
    line: int = 0


@dataclass
class NoetherBlock:
    name: str
    q: Combo
    scale: ParamScalar
    J: Optional[TotalDiffOp]
    images: Dict[str, Combo] = field(default_factory=dict)
    line: int = 0


@dataclass
class VariationalBlock:
    name: str
    kind: str  # lagrangian | hamiltonian
    op: TotalDiffOp
    density: Expr
    lhs: Optional[Tuple[Expr, ...]] = None
    residual_op: Optional[TotalDiffOp] = None
    expect: str = "pass"
    line: int = 0


@dataclass
class MultiplierBlock:
    multipliers: List[str]
    nonmultipliers: List[str]
    line: int = 0


@dataclass
class IsomorphismBlock:
    name: str
    bracket: str
    mapping: Dict[str, Combo]
    line: int = 0
    scale: ParamScalar = ONE


@dataclass
class PotentialLink:
    system: str
    symmetries: Dict[str, Optional[str]]
    adjoint_symmetries: Dict[str, Optional[str]]
    line: int = 0


@dataclass
class SystemFile:
    name: str
    independents: Tuple[str, ...]
    dependents: Tuple[str, ...]
    parameters: Tuple[str, ...]
    nonzero: List[ParamScalar]
    specialize: Dict[str, Fraction]
    equations: List[Tuple[str, Expr]]
    solved_forms: List[SolvedForm]
    evolution_variable: Optional[str]
    aliases: Dict[str, Tuple[str, Tuple[str, ...]]]
    symmetries: List[ObjectDef]
    adjoint_symmetries: List[ObjectDef]
    r_ops: Dict[str, TotalDiffOp]
    commutators: Optional[CommutatorTable]
    action_tables: List[ActionTable]
    bracket_tables: List[BracketTable]
    noether: List[NoetherBlock]
    variational: List[VariationalBlock]
    multipliers: Optional[MultiplierBlock]
    isomorphisms: List[IsomorphismBlock]
    potential: Optional[PotentialLink]
    notes: List[str]
    source: str = "<string>"

    @property
    def symbols(self) -> Symbols:
        return Symbols(self.independents, self.dependents, self.parameters)

    def symmetry_labels(self) -> List[str]:
        return [o.label for o in self.symmetries]

    def adjoint_labels(self) -> List[str]:
        return [o.label for o in self.adjoint_symmetries]


_HEADER_KEYS = {"system", "independents", "dependents", "parameters", "nonzero", "specialize", "evolution_variable"}
_BLOCK_KEYS = {
    "equations", "evolution", "rewrites", "symmetries", "adjoint_symmetries",
    "r_ops", "tables", "potential", "notes",
}
_TABLE_KEYS = {
    "commutators", "action", "bracket", "noether", "lagrangian",
    "hamiltonian", "multipliers", "isomorphism",
}


@dataclass
class _Line:
    text: str
    lineno: int
    indented: bool


def _logical_lines(text: str, source: str) -> List[_Line]:
    out: List[_Line] = []
    buf: Optional[_Line] = None
    depth = 0
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if buf is None:
            buf = _Line(line.strip(), n, line[0] in " \t")
        else:
            buf.text += " " + line.strip()
        for ch in line:
            if ch in "([":
                depth += 1
            elif ch in ")]":
                depth -= 1
        if depth < 0:
            raise DslSyntaxError("unbalanced closing bracket", n, 1, source)
        if depth == 0:
            out.append(buf)
            buf = None
    if buf is not None:
        raise DslSyntaxError("unbalanced brackets at end of file", buf.lineno, 1, source)
    return out


def _split_assign(line: _Line, source: str, sep: str = "=") -> Tuple[str, str]:
    # split on the first top-level separator
    depth = 0
    text = line.text
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif depth == 0 and text.startswith(sep, i):
            if sep == "=" and (text[i - 1:i] in (":", "-", "<", ">") or text[i + 1:i + 2] == ">"):
                i += 1
                continue
            return text[:i].strip(), text[i + len(sep):].strip()
        i += 1
    raise DslSyntaxError(f"expected '{sep}'", line.lineno, 1, source)


_GUARD_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9']*)\s*(?:\[([^\]]*)\])?$")


def _parse_guard(text: Optional[str], ctx: ParseContext, lineno: int) -> Dict[str, Fraction]:
    out: Dict[str, Fraction] = {}
    if not text:
        return out
    for part in text.split(","):
        if "=" not in part:
            raise DslSyntaxError("guards are written [param=value]", lineno, 1, ctx.source)
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in ctx.symbols.parameters:
            raise UndeclaredSymbol(f"{ctx.source}:{lineno}: guard on undeclared parameter {k!r}")
        out[k] = Fraction(v)
    return out


def _parse_options(words: List[str], lineno: int, source: str) -> Dict[str, str]:
    opts = {}
    for w in words:
        if "=" not in w:
            raise DslSyntaxError(f"expected key=value, found {w!r}", lineno, 1, source)
        k, v = w.split("=", 1)
        opts[k] = v
    return opts


def _param_values(text: str, ctx: ParseContext, lineno: int) -> Dict[str, Fraction]:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise DslSyntaxError("expected name = value", lineno, 1, ctx.source)
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in ctx.symbols.parameters:
            raise UndeclaredSymbol(f"{ctx.source}:{lineno}: {k!r} is not a declared parameter")
        val = parse_expr(v, ctx.symbols, lineno)
        if not val.is_constant() or not val.constant_value().is_const():
            raise DslSyntaxError(f"value for {k} must be a rational number", lineno, 1, ctx.source)
        out[k] = val.constant_value().const_value()
    return out


def _scalar(text: str, ctx: ParseContext, lineno: int) -> ParamScalar:
    e = parse_expr(text, ctx.symbols, lineno)
    if not e.is_constant():
        raise DslSyntaxError(f"{text!r} must depend on parameters only", lineno, 1, ctx.source)
    return e.constant_value()


def _label_list(text: str, lineno: int, source: str) -> List[str]:
    raw = _parse_raw(text, lineno, source)
    items = raw[1] if raw[0] == "list" else [raw]
    out = []
    for it in items:
        if it[0] != "name":
            raise DslSyntaxError("expected a list of labels", lineno, 1, source)
        out.append(it[1])
    return out


def _pair(text: str, lineno: int, source: str) -> Tuple[str, str]:
    labels = _label_list(text, lineno, source)
    if len(labels) != 2:
        raise DslSyntaxError("expected [A, B]", lineno, 1, source)
    return labels[0], labels[1]


def parse_system(text: str, source: str = "<string>") -> SystemFile:
    """Parse and validate a ``.sys`` file."""
    lines = _logical_lines(text, source)
    header: Dict[str, str] = {}
    blocks: Dict[str, List[_Line]] = {}
    block_lines: Dict[str, int] = {}
    current: Optional[str] = None
    for ln in lines:
        if not ln.indented:
            word, _, rest = ln.text.partition(" ")
            if word in _HEADER_KEYS:
                if word in header:
                    raise DuplicateName(f"{source}:{ln.lineno}: repeated header {word!r}")
                header[word] = rest.strip()
                current = None
            elif word in _BLOCK_KEYS:
                if word in blocks:
                    raise DuplicateName(f"{source}:{ln.lineno}: repeated section {word!r}")
                blocks[word] = []
                block_lines[word] = ln.lineno
                current = word
                if word == "potential":
                    header["potential"] = rest.strip()
            else:
                raise DslSyntaxError(f"unknown section {word!r}", ln.lineno, 1, source)
        else:
            if current is None:
                raise DslSyntaxError("indented line outside a section", ln.lineno, 1, source)
            blocks[current].append(ln)

    for key in ("system", "independents", "dependents"):
        if key not in header:
            raise DslSyntaxError(f"missing header {key!r}", 1, 1, source)
    name = header["system"]
    independents = tuple(header["independents"].split())
    dependents = tuple(header["dependents"].split())
    parameters = tuple(header.get("parameters", "").split())
    all_names = independents + dependents + parameters
    seen = set()
    for n in all_names:
        if n in seen:
            raise DuplicateName(f"{source}: symbol {n!r} declared twice")
        if n == OP_ATOM:
            raise DuplicateName(f"{source}: {OP_ATOM!r} is reserved for operator atoms")
        seen.add(n)
    symbols = Symbols(independents, dependents, parameters)

    # rewrites become parse-time aliases
    aliases: Dict[str, Tuple[str, Tuple[str, ...]]] = {}
    for ln in blocks.get("rewrites", []):
        lhs, rhs = _split_assign(ln, source)
        raw = _parse_raw(rhs, ln.lineno, source)
        if raw[0] != "jet" or raw[1] not in dependents:
            raise DslSyntaxError("rewrites map a name to a single jet, e.g. u = U[x]", ln.lineno, 1, source)
        if lhs in seen:
            raise DuplicateName(f"{source}:{ln.lineno}: alias {lhs!r} shadows a declared symbol")
        aliases[lhs] = (raw[1], tuple(sorted(raw[2])))
    ctx = ParseContext(symbols, tuple(sorted(aliases.items())), source)

    nonzero = []
    if header.get("nonzero"):
        for part in header["nonzero"].split(","):
            nonzero.append(_scalar(part, ctx, 0))
    specialize = _param_values(header.get("specialize", ""), ctx, 0)

    equations: List[Tuple[str, Expr]] = []
    for ln in blocks.get("equations", []):
        lhs, rhs = _split_assign(ln, source, ":")
        if any(lhs == e for e, _ in equations):
            raise DuplicateName(f"{source}:{ln.lineno}: equation {lhs!r} defined twice")
        equations.append((lhs, parse_expr(rhs, ctx, ln.lineno)))
    if not equations:
        raise DslSyntaxError("a system needs an equations section", 1, 1, source)

    solved: List[SolvedForm] = []
    for ln in blocks.get("evolution", []):
        lhs, rhs = _split_assign(ln, source)
        raw = _expand_aliases(_parse_raw(lhs, ln.lineno, source), ctx.alias_map())
        if raw[0] != "jet" or raw[1] not in dependents:
            raise DslSyntaxError("solved forms are written dep[index] = expression", ln.lineno, 1, source)
        solved.append(SolvedForm(raw[1], tuple(sorted(raw[2])), parse_expr(rhs, ctx, ln.lineno)))
    evo_var = header.get("evolution_variable") or None
    if evo_var is None and solved and all(len(s.leading) == 1 for s in solved):
        leads = {s.leading[0] for s in solved}
        if len(leads) == 1 and len(solved) == len(dependents):
            evo_var = leads.pop()

    def objects(section: str, width: int) -> List[ObjectDef]:
        out: List[ObjectDef] = []
        for ln in blocks.get(section, []):
            lhs, rhs = _split_assign(ln, source)
            m = _GUARD_RE.match(lhs)
            if not m:
                raise DslSyntaxError(f"bad object label {lhs!r}", ln.lineno, 1, source)
            label = m.group(1)
            if any(o.label == label for o in out):
                raise DuplicateName(f"{source}:{ln.lineno}: {label!r} defined twice")
            comps = parse_vector(rhs, ctx, ln.lineno)
            if len(comps) != width:
                raise LengthMismatch(
                    f"{source}:{ln.lineno}: {label} has {len(comps)} components, expected {width}"
                )
            out.append(ObjectDef(label, comps, _parse_guard(m.group(2), ctx, ln.lineno), ln.lineno))
        return out

    syms = objects("symmetries", len(dependents))
    adjs = objects("adjoint_symmetries", len(equations))
    sym_labels = [o.label for o in syms]
    adj_labels = [o.label for o in adjs]
    clash = set(sym_labels) & set(adj_labels)
    if clash:
        raise DuplicateName(f"{source}: labels used for both kinds: {sorted(clash)}")

    # potential link (labels it introduces are usable in tables)
    potential = None
    if "potential" in blocks:
        sym_map: Dict[str, Optional[str]] = {}
        adj_map: Dict[str, Optional[str]] = {}
        for ln in blocks["potential"]:
            lhs, rhs = _split_assign(ln, source, "->")
            target = None if rhs == "0" else rhs
            if lhs in sym_labels:
                sym_map[lhs] = target
            else:
                adj_map[lhs] = target
        potential = PotentialLink(header["potential"], sym_map, adj_map, block_lines["potential"])
        adj_labels = adj_labels + [k for k in adj_map if k not in adj_labels]

    r_ops: Dict[str, TotalDiffOp] = {}
    for ln in blocks.get("r_ops", []):
        lhs, rhs = _split_assign(ln, source)
        raw = _parse_raw(lhs, ln.lineno, source)
        if raw[0] != "jet" or raw[1] != "R" or len(raw[2]) != 1:
            raise DslSyntaxError("R-operators are written R[label] = matrix", ln.lineno, 1, source)
        lab = raw[2][0]
        if lab in sym_labels:
            shape = (len(equations), len(equations))
        elif lab in adj_labels:
            shape = (len(dependents), len(equations))
        else:
            raise UndeclaredSymbol(f"{source}:{ln.lineno}: R for unknown object {lab!r}")
        if lab in r_ops:
            raise DuplicateName(f"{source}:{ln.lineno}: R[{lab}] defined twice")
        op = parse_operator(rhs, ctx, ln.lineno)
        if op.shape != shape:
            raise LengthMismatch(f"{source}:{ln.lineno}: R[{lab}] has shape {op.shape}, expected {shape}")
        r_ops[lab] = op

    tables = _parse_tables(blocks.get("tables", []), ctx, sym_labels, adj_labels, len(dependents), len(equations))
    notes = [ln.text for ln in blocks.get("notes", [])]
    return SystemFile(
        name=name,
        independents=independents,
        dependents=dependents,
        parameters=parameters,
        nonzero=nonzero,
        specialize=specialize,
        equations=equations,
        solved_forms=solved,
        evolution_variable=evo_var,
        aliases=aliases,
        symmetries=syms,
        adjoint_symmetries=adjs,
        r_ops=r_ops,
        potential=potential,
        notes=notes,
        source=source,
        **tables,
    )


def _parse_tables(lines: List[_Line], ctx: ParseContext, sym_labels, adj_labels, m: int, M: int) -> dict:
    src = ctx.source
    groups: List[Tuple[_Line, List[_Line]]] = []
    for ln in lines:
        word = ln.text.split(" ", 1)[0]
        if word in _TABLE_KEYS:
            groups.append((ln, []))
        elif not groups:
            raise DslSyntaxError(f"unknown table kind {word!r}", ln.lineno, 1, src)
        else:
            groups[-1][1].append(ln)

    out = dict(
        commutators=None, action_tables=[], bracket_tables=[], noether=[],
        variational=[], multipliers=None, isomorphisms=[],
    )
    names = set()

    def claim(name: str, ln: _Line):
        if name in names:
            raise DuplicateName(f"{src}:{ln.lineno}: table {name!r} defined twice")
        names.add(name)

    for head, body in groups:
        words = head.text.split()
        kind = words[0]
        if kind in ("commutators", "multipliers"):
            tname, opts = kind, _parse_options(words[1:], head.lineno, src)
        else:
            if len(words) < 2:
                raise DslSyntaxError(f"{kind} table needs a name", head.lineno, 1, src)
            tname, opts = words[1], _parse_options(words[2:], head.lineno, src)
        claim(tname, head)

        if kind == "commutators":
            entries = {}
            for ln in body:
                lhs, rhs = _split_assign(ln, src)
                pair = _pair(lhs, ln.lineno, src)
                for lab in pair:
                    if lab not in sym_labels:
                        raise UndeclaredSymbol(f"{src}:{ln.lineno}: unknown symmetry {lab!r}")
                entries[pair] = parse_combo(rhs, ctx, sym_labels, ln.lineno)
            out["commutators"] = CommutatorTable(entries, head.lineno)

        elif kind == "action":
            cols: List[str] = []
            rows: Dict[str, List[Combo]] = {}
            for ln in body:
                lhs, rhs = _split_assign(ln, src)
                if lhs == "cols":
                    cols = _label_list(rhs, ln.lineno, src)
                    for c in cols:
                        if c not in sym_labels:
                            raise UndeclaredSymbol(f"{src}:{ln.lineno}: unknown symmetry {c!r}")
                    continue
                if lhs not in adj_labels:
                    raise UndeclaredSymbol(f"{src}:{ln.lineno}: unknown adjoint-symmetry {lhs!r}")
                raw = _parse_raw(rhs, ln.lineno, src)
                if raw[0] != "list":
                    raise DslSyntaxError("action rows are written Q = [cell, cell, ...]", ln.lineno, 1, src)
                cells = [_combo_from_raw(c, ctx, adj_labels, ln.lineno) for c in raw[1]]
                if len(cells) != len(cols):
                    raise LengthMismatch(f"{src}:{ln.lineno}: row {lhs} has {len(cells)} cells for {len(cols)} columns")
                rows[lhs] = cells
            out["action_tables"].append(ActionTable(tname, int(opts.get("kind", 1)), cols, rows, head.lineno))

        elif kind == "bracket":
            bt = BracketTable(
                tname, int(opts.get("kind", 1)), {}, opts.get("policy", "ideal"),
                opts.get("scaling"), golden=opts.get("golden", "true") == "true", line=head.lineno,
            )
            if bt.policy not in ("ideal", "scaling"):
                raise DslSyntaxError(f"unknown policy {bt.policy!r}", head.lineno, 1, src)
            basis_labels: List[str] = []
            for ln in body:
                if ln.text.startswith("["):
                    lhs, rhs = _split_assign(ln, src)
                    pair = _pair(lhs, ln.lineno, src)
                    labels = basis_labels or adj_labels
                    for lab in pair:
                        if lab not in labels:
                            raise UndeclaredSymbol(f"{src}:{ln.lineno}: {lab!r} is not in the bracket basis")
                    bt.entries[pair] = parse_combo(rhs, ctx, labels, ln.lineno)
                    continue
                lhs, rhs = _split_assign(ln, src)
                key = lhs.split()
                if key[0] == "q":
                    bt.q = parse_combo(rhs, ctx, adj_labels, ln.lineno)
                elif key[0] == "basis" and len(key) == 2:
                    basis_labels.append(key[1])
                    bt.basis.append((key[1], parse_combo(rhs, ctx, adj_labels, ln.lineno)))
                elif key[0] == "instantiate":
                    bt.instantiate = _param_values(rhs, ctx, ln.lineno)
                elif key[0] == "kernel":
                    raw = _parse_raw(rhs, ln.lineno, src)
                    items = raw[1] if raw[0] == "list" else [raw]
                    bt.kernel = [_combo_from_raw(x, ctx, sym_labels, ln.lineno) for x in items]
                elif key[0] == "ideal":
                    bt.ideal = rhs == "true"
                else:
                    raise DslSyntaxError(f"unknown bracket entry {lhs!r}", ln.lineno, 1, src)
            if not bt.q:
                raise DslSyntaxError("bracket table needs q = ...", head.lineno, 1, src)
            out["bracket_tables"].append(bt)

        elif kind == "noether":
            q = parse_combo(opts["q"], ctx, adj_labels, head.lineno) if "q" in opts else None
            scale = _scalar(opts.get("scale", "1"), ctx, head.lineno)
            nb = NoetherBlock(tname, q or {}, scale, None, line=head.lineno)
            for ln in body:
                lhs, rhs = _split_assign(ln, src, "->" if "->" in ln.text else "=")
                if lhs == "J":
                    nb.J = parse_operator(rhs, ctx, ln.lineno)
                elif lhs == "q":
                    nb.q = parse_combo(rhs, ctx, adj_labels, ln.lineno)
                elif lhs in sym_labels:
                    nb.images[lhs] = parse_combo(rhs, ctx, adj_labels, ln.lineno)
                else:
                    raise DslSyntaxError(f"unknown noether entry {lhs!r}", ln.lineno, 1, src)
            if not nb.q:
                raise DslSyntaxError("noether block needs q", head.lineno, 1, src)
            out["noether"].append(nb)

        elif kind in ("lagrangian", "hamiltonian"):
            vals = {}
            for ln in body:
                lhs, rhs = _split_assign(ln, src)
                vals[lhs] = (rhs, ln.lineno)
            for req in ("op", "L" if kind == "lagrangian" else "E"):
                if req not in vals:
                    raise DslSyntaxError(f"{kind} block needs {req} = ...", head.lineno, 1, src)
            dens_key = "L" if kind == "lagrangian" else "E"
            vb = VariationalBlock(
                tname, kind,
                parse_operator(vals["op"][0], ctx, vals["op"][1]),
                parse_expr(vals[dens_key][0], ctx, vals[dens_key][1]),
                expect=opts.get("expect", "pass"), line=head.lineno,
            )
            if "lhs" in vals:
                vb.lhs = parse_vector(vals["lhs"][0], ctx, vals["lhs"][1])
                if len(vb.lhs) != vb.op.rows:
                    raise LengthMismatch(f"{src}:{vals['lhs'][1]}: lhs length does not match op rows")
            if "residual_op" in vals:
                vb.residual_op = parse_operator(vals["residual_op"][0], ctx, vals["residual_op"][1])
            if kind == "lagrangian" and vb.op.shape != (m, M):
                raise LengthMismatch(f"{src}:{head.lineno}: lagrangian op must be {m}x{M}")
            if kind == "hamiltonian" and vb.op.cols != m:
                raise LengthMismatch(f"{src}:{head.lineno}: hamiltonian op needs {m} columns")
            out["variational"].append(vb)

        elif kind == "multipliers":
            mb = MultiplierBlock([], [], head.lineno)
            for ln in body:
                lhs, rhs = _split_assign(ln, src)
                labels = _label_list(rhs, ln.lineno, src) if rhs != "[]" else []
                for lab in labels:
                    if lab not in adj_labels:
                        raise UndeclaredSymbol(f"{src}:{ln.lineno}: unknown adjoint-symmetry {lab!r}")
                if lhs == "multiplier":
                    mb.multipliers = labels
                elif lhs == "nonmultiplier":
                    mb.nonmultipliers = labels
                else:
                    raise DslSyntaxError(f"unknown multipliers entry {lhs!r}", ln.lineno, 1, src)
            out["multipliers"] = mb

        elif kind == "isomorphism":
            if "bracket" not in opts:
                raise DslSyntaxError("isomorphism needs bracket=<table>", head.lineno, 1, src)
            ib = IsomorphismBlock(tname, opts["bracket"], {}, head.lineno, _scalar(opts.get("scale", "1"), ctx, head.lineno))
            for ln in body:
                lhs, rhs = _split_assign(ln, src, "->")
                ib.mapping[lhs] = parse_combo(rhs, ctx, sym_labels, ln.lineno)
            out["isomorphisms"].append(ib)

    bracket_names = {b.name for b in out["bracket_tables"]}
    for ib in out["isomorphisms"]:
        if ib.bracket not in bracket_names:
            raise UndeclaredSymbol(f"{src}:{ib.line}: isomorphism refers to unknown bracket {ib.bracket!r}")
    return out
