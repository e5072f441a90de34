"""Small expression DSL for chart components and scalar fields.

Grammar (precedence loosest to tightest, so unary minus binds tighter
than ``^``):

    expr    := term  (('+' | '-') term)*          left-assoc
    term    := power (('*' | '/') power)*         left-assoc
    power   := unary ('^' power)?                 right-assoc
    unary   := '-' unary | atom
    atom    := NUMBER | 'pi' | 'u<k>' | NAME '(' expr ')' | '(' expr ')'

Consequences worth knowing: ``-u1^2`` parses as ``(-u1)^2`` (so it is 9 at
u1=3), and ``2^-3`` parses as ``2^(-3)``.  There is no implicit
multiplication.  Variables are ``u1`` .. ``un`` (1-based in the source
text, 0-based in the AST).  Functions: sin, cos, exp, log, sqrt.

Integer exponents evaluate by repeated multiplication (any base);
non-integer or non-constant exponents require a positive base.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import jet as jetmod
from .jet import JetDomainError, JetScalar, jet_space

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(ValueError):
    def __init__(self, message: str, span: tuple[int, int]):
        super().__init__(f"{message} (at offset {span[0]})")
        self.message = message
        self.span = span


class ExprSyntaxError(ExprError):
    pass


class ExprEvalError(ExprError):
    pass


# ------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def __post_init__(self):
        # unary minus owns the sign; keeping literals non-negative makes the
        # print/parse fixpoint structural
        if not (self.value >= 0 and np.isfinite(self.value)):
            raise ValueError(f"Num literal must be finite and >= 0, got {self.value}")


@dataclass(frozen=True)
class Var:
    index: int  # 0-based
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Pi:
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    child: "ExprAst"
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "ExprAst"
    right: "ExprAst"
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    arg: "ExprAst"
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


ExprAst = Num | Var | Pi | Neg | BinOp | Call


# ------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", (pos, pos + 1))
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


# ------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text: str, n_vars: int):
        self.text = text
        self.n_vars = n_vars
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}", (pos, pos + 1))
        return self.advance()

    def parse(self) -> ExprAst:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", (pos, pos + len(text)))
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                rhs = self.term()
                node = BinOp(text, node, rhs, (node.span[0], rhs.span[1]))
            else:
                return node

    def term(self) -> ExprAst:
        node = self.power()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                rhs = self.power()
                node = BinOp(text, node, rhs, (node.span[0], rhs.span[1]))
            else:
                return node

    def power(self) -> ExprAst:
        base = self.unary()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            exponent = self.power()  # right-assoc
            return BinOp("^", base, exponent, (base.span[0], exponent.span[1]))
        return base

    def unary(self) -> ExprAst:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            child = self.unary()
            return Neg(child, (pos, child.span[1]))
        return self.atom()

    def atom(self) -> ExprAst:
        kind, text, pos = self.advance()
        if kind == "number":
            return Num(float(text), (pos, pos + len(text)))
        if kind == "name":
            span = (pos, pos + len(text))
            if text == "pi":
                return Pi(span)
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                rp = self.expect_op(")")
                return Call(text, arg, (pos, rp[2] + 1))
            m = re.fullmatch(r"u(\d+)", text)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.n_vars:
                    raise ExprSyntaxError(
                        f"variable {text} out of range (n_vars={self.n_vars})", span
                    )
                return Var(idx - 1, span)
            raise ExprSyntaxError(f"unknown identifier {text!r}", span)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected {text!r}" if text else "unexpected end of input",
                              (pos, pos + max(1, len(text))))


def parse(text: str, n_vars: int) -> ExprAst:
    """Parse a DSL expression with variables u1..u<n_vars>."""
    return _Parser(text, n_vars).parse()


# ------------------------------------------------------------------- printer

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_POW, _LEVEL_UNARY, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _fmt_number(v: float) -> str:
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def _print(node: ExprAst, min_level: int) -> str:
    if isinstance(node, Num):
        s, lvl = _fmt_number(node.value), _LEVEL_ATOM
    elif isinstance(node, Var):
        s, lvl = f"u{node.index + 1}", _LEVEL_ATOM
    elif isinstance(node, Pi):
        s, lvl = "pi", _LEVEL_ATOM
    elif isinstance(node, Call):
        s, lvl = f"{node.name}({_print(node.arg, 0)})", _LEVEL_ATOM
    elif isinstance(node, Neg):
        s, lvl = f"-{_print(node.child, _LEVEL_UNARY)}", _LEVEL_UNARY
    elif isinstance(node, BinOp):
        if node.op in "+-":
            lvl = _LEVEL_ADD
            s = f"{_print(node.left, lvl)} {node.op} {_print(node.right, lvl + 1)}"
        elif node.op in "*/":
            lvl = _LEVEL_MUL
            s = f"{_print(node.left, lvl)}{node.op}{_print(node.right, lvl + 1)}"
        else:  # ^  right-assoc; base must be at unary level or tighter
            lvl = _LEVEL_POW
            s = f"{_print(node.left, _LEVEL_UNARY)}^{_print(node.right, lvl)}"
    else:
        raise TypeError(f"not an AST node: {node!r}")
    return f"({s})" if lvl < min_level else s


def to_string(node: ExprAst) -> str:
    """Render with minimal parentheses; reparsing gives a structurally
    identical AST (spans excluded from equality)."""
    return _print(node, 0)


# ------------------------------------------------------------------- eval

_JET_FUNCS = {
    "sin": jetmod.sin,
    "cos": jetmod.cos,
    "exp": jetmod.exp,
    "log": jetmod.log,
    "sqrt": jetmod.sqrt,
}


def eval_jet(node: ExprAst, point, order: int) -> JetScalar:
    """Evaluate to a jet of the given order at `point` (shape (*batch, n))."""
    point = np.asarray(point, dtype=float)
    n_vars = point.shape[-1]
    sp = jet_space(n_vars, order)
    batch_ndim = point.ndim - 1
    seeds = [sp.variable(i, np.moveaxis(point, -1, 0)[i]) for i in range(n_vars)]

    def ev(nd) -> JetScalar:
        if isinstance(nd, Num):
            return sp.constant(nd.value, batch_ndim)
        if isinstance(nd, Pi):
            return sp.constant(np.pi, batch_ndim)
        if isinstance(nd, Var):
            if nd.index >= n_vars:
                raise ExprEvalError(
                    f"variable u{nd.index + 1} exceeds point dimension {n_vars}", nd.span
                )
            return seeds[nd.index]
        if isinstance(nd, Neg):
            return -ev(nd.child)
        if isinstance(nd, Call):
            try:
                return _JET_FUNCS[nd.name](ev(nd.arg))
            except JetDomainError as e:
                raise ExprEvalError(str(e), nd.span) from e
        if isinstance(nd, BinOp):
            a = ev(nd.left)
            if nd.op == "^":
                return _eval_pow(a, nd)
            b = ev(nd.right)
            try:
                if nd.op == "+":
                    return a + b
                if nd.op == "-":
                    return a - b
                if nd.op == "*":
                    return a * b
                return a / b
            except JetDomainError as e:
                raise ExprEvalError(str(e), nd.span) from e
        raise TypeError(f"not an AST node: {nd!r}")

    def _eval_pow(a: JetScalar, nd: BinOp) -> JetScalar:
        b = ev(nd.right)
        nonconst = np.any(b.coef[1:] != 0)
        try:
            if not nonconst:
                r = float(np.asarray(b.value).flat[0])
                if float(r).is_integer():
                    return a ** int(r)
                return jetmod.powf(a, r)
            return jetmod.exp(b * jetmod.log(a))
        except JetDomainError as e:
            raise ExprEvalError(str(e), nd.span) from e

    return ev(node)


def eval_value(node: ExprAst, point):
    """Value-only evaluation on floats or numpy arrays.

    Deliberately does not touch the jet machinery: this is the independent
    route used by the finite-difference oracle.
    """
    point = np.asarray(point, dtype=float)

    def ev(nd):
        if isinstance(nd, Num):
            return nd.value
        if isinstance(nd, Pi):
            return np.pi
        if isinstance(nd, Var):
            return point[..., nd.index]
        if isinstance(nd, Neg):
            return -ev(nd.child)
        if isinstance(nd, Call):
            v = ev(nd.arg)
            if nd.name in ("log", "sqrt") and np.any(np.asarray(v) <= 0):
                raise ExprEvalError(f"{nd.name} of non-positive value", nd.span)
            return getattr(np, nd.name)(v)
        if isinstance(nd, BinOp):
            a = ev(nd.left)
            b = ev(nd.right)
            if nd.op == "+":
                return a + b
            if nd.op == "-":
                return a - b
            if nd.op == "*":
                return a * b
            if nd.op == "/":
                if np.any(np.abs(np.asarray(b, dtype=float)) <= jetmod.MIN_DIVISOR):
                    raise ExprEvalError("division by zero", nd.span)
                return a / b
            # ^
            bb = np.asarray(b, dtype=float)
            if bb.ndim == 0 and float(bb).is_integer():
                return np.asarray(a, dtype=float) ** int(bb)
            if np.any(np.asarray(a, dtype=float) <= 0):
                raise ExprEvalError("non-integer power of non-positive base", nd.span)
            return np.asarray(a, dtype=float) ** bb
        raise TypeError(f"not an AST node: {nd!r}")

    out = ev(node)
    return np.asarray(out, dtype=float) if np.ndim(out) else float(out)


def max_var_index(node: ExprAst) -> int:
    """Largest 0-based variable index used, or -1 for a constant expression."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_var_index(node.child)
    if isinstance(node, Call):
        return max_var_index(node.arg)
    if isinstance(node, BinOp):
        return max(max_var_index(node.left), max_var_index(node.right))
    return -1


# helpers for building ASTs programmatically (used by the deformation module
# and by the catalog when composing scalar fields from chart components)


def num(v: float) -> ExprAst:
    return Neg(Num(-v)) if v < 0 else Num(float(v))


def add(a: ExprAst, b: ExprAst) -> ExprAst:
    return BinOp("+", a, b)


def mul(a: ExprAst, b: ExprAst) -> ExprAst:
    return BinOp("*", a, b)
