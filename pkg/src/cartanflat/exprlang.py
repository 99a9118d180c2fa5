"""Symbolic scalar expressions over chart coordinates.

A tiny closed-form language: constants, named variables, ``+ - * / ^`` (the
exponent of ``^`` must be constant), unary minus, and the functions
sin, cos, tan, sinh, cosh, tanh, exp, log, sqrt, atan.

The AST is a set of frozen dataclasses with structural equality, and the
printer/parser pair is a round trip: ``parse(to_text(e), vars) == e`` for any
AST built by the parser or the smart constructors.  Simplification is
deliberately conservative (constant folding plus 0/1 identities); nothing here
reorders sums or rewrites powers, so printed formulas stay recognizable.

Evaluation is pure and deterministic.  Out-of-domain input (log of a
non-positive value, division by zero, overflow) raises
:class:`~cartanflat.errors.ExpressionDomainError` instead of returning NaN.

Two evaluation routes exist and are kept bit-identical: :func:`evaluate`
(memoized tree walk, the reference) and :func:`compile_expressions` (generates
one straight-line Python function for a batch of expressions, one assignment
per unique node).  Grid scans and integrators use the compiled route.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ExpressionDomainError, ParseError, UnknownIdentifierError

__all__ = [
    "Expression",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "FUNCTION_NAMES",
    "parse",
    "to_text",
    "evaluate",
    "differentiate",
    "simplify",
    "substitute",
    "variables_of",
    "compile_expressions",
    "compile_expression",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "call",
    "const",
    "var",
]


# ---------------------------------------------------------------------------
# guarded primitives (shared by the interpreter and compiled code, so both
# routes produce bit-identical values and bit-identical failures)
# ---------------------------------------------------------------------------


def _guard_log(x: float) -> float:
    if x <= 0.0:
        raise ExpressionDomainError(f"log of non-positive value {x!r}")
    return math.log(x)


def _guard_sqrt(x: float) -> float:
    if x < 0.0:
        raise ExpressionDomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _guard_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        raise ExpressionDomainError(f"overflow in exp({x!r})") from None


def _guard_sinh(x: float) -> float:
    try:
        return math.sinh(x)
    except OverflowError:
        raise ExpressionDomainError(f"overflow in sinh({x!r})") from None


def _guard_cosh(x: float) -> float:
    try:
        return math.cosh(x)
    except OverflowError:
        raise ExpressionDomainError(f"overflow in cosh({x!r})") from None


def _guard_div(a: float, b: float) -> float:
    if b == 0.0:
        raise ExpressionDomainError("division by zero")
    return a / b


def _guard_pow(a: float, b: float) -> float:
    try:
        value = a ** b
    except OverflowError:
        raise ExpressionDomainError(f"overflow in {a!r} ^ {b!r}") from None
    except ZeroDivisionError:
        raise ExpressionDomainError("zero raised to a negative exponent") from None
    if isinstance(value, complex):
        raise ExpressionDomainError(
            f"{a!r} ^ {b!r} leaves the real domain (negative base, fractional exponent)"
        )
    return value


_FUNCTION_IMPL: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sinh": _guard_sinh,
    "cosh": _guard_cosh,
    "tanh": math.tanh,
    "exp": _guard_exp,
    "log": _guard_log,
    "sqrt": _guard_sqrt,
    "atan": math.atan,
}

FUNCTION_NAMES = tuple(sorted(_FUNCTION_IMPL))

_BINARY_OPS = ("+", "-", "*", "/", "^")


def _apply_function(name: str, x: float) -> float:
    return _FUNCTION_IMPL[name](x)


def _apply_binary(op: str, a: float, b: float) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _guard_div(a, b)
    return _guard_pow(a, b)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expression:
    """Base node.  Arithmetic operators build (lightly simplified) trees, so
    geometry code can write ``(a * b - c) / d`` with floats auto-wrapped."""

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return power(self, _coerce(other))

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True)
class Const(Expression):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if not math.isfinite(self.value):
            raise ValueError("constants must be finite")


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class Unary(Expression):
    op: str  # "neg" or a function name
    operand: Expression

    def __post_init__(self):
        if self.op != "neg" and self.op not in _FUNCTION_IMPL:
            raise ValueError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Binary(Expression):
    op: str
    left: Expression
    right: Expression

    def __post_init__(self):
        if self.op not in _BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


def _coerce(x) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, (int, float)):
        return Const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} as an expression")


# ---------------------------------------------------------------------------
# smart constructors: constant folding and 0/1 identities only
# ---------------------------------------------------------------------------


def const(value: float) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def _fold_binary(op: str, a: Const, b: Const) -> Const | None:
    try:
        value = _apply_binary(op, a.value, b.value)
    except ExpressionDomainError:
        return None
    if not math.isfinite(value):
        return None
    return Const(value)


def _is_const(e: Expression, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def add(a, b) -> Expression:
    a, b = _coerce(a), _coerce(b)
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold_binary("+", a, b)
        if folded is not None:
            return folded
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a, b) -> Expression:
    a, b = _coerce(a), _coerce(b)
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold_binary("-", a, b)
        if folded is not None:
            return folded
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def mul(a, b) -> Expression:
    a, b = _coerce(a), _coerce(b)
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold_binary("*", a, b)
        if folded is not None:
            return folded
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Binary("*", a, b)


def div(a, b) -> Expression:
    a, b = _coerce(a), _coerce(b)
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold_binary("/", a, b)
        if folded is not None:
            return folded
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(b, -1.0):
        return neg(a)
    return Binary("/", a, b)


def neg(a) -> Expression:
    a = _coerce(a)
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.operand
    return Unary("neg", a)


def power(a, exponent) -> Expression:
    a = _coerce(a)
    exponent = _coerce(exponent)
    if isinstance(a, Const) and isinstance(exponent, Const):
        folded = _fold_binary("^", a, exponent)
        if folded is not None:
            return folded
    if _is_const(exponent, 1.0):
        return a
    if _is_const(exponent, 0.0):
        return Const(1.0)
    return Binary("^", a, exponent)


def call(name: str, arg) -> Expression:
    arg = _coerce(arg)
    if name not in _FUNCTION_IMPL:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(arg, Const):
        try:
            value = _apply_function(name, arg.value)
        except ExpressionDomainError:
            value = None
        if value is not None and math.isfinite(value):
            return Const(value)
    return Unary(name, arg)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    tokens: list[tuple[str, object, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lexeme = text[i:j]
            try:
                value = float(lexeme)
            except ValueError:
                raise ParseError(f"malformed number {lexeme!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, variables: frozenset[str]):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            raise ParseError(f"expected {op!r}", offset)
        self.advance()

    # expr := term (('+' | '-') term)*
    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = Binary(value, node, self.parse_term())
            else:
                return node

    # term := unary (('*' | '/') unary)*
    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = Binary(value, node, self.parse_unary())
            else:
                return node

    # unary := '-' unary | power     (so ^ binds tighter than unary minus)
    def parse_unary(self) -> Expression:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            operand = self.parse_unary()
            if isinstance(operand, Const):
                # fold a negated literal so "-2" round-trips as Const(-2.0)
                return Const(-operand.value)
            return Unary("neg", operand)
        return self.parse_power()

    # power := primary ('^' unary)?  with a constant exponent, right-assoc
    def parse_power(self) -> Expression:
        base = self.parse_primary()
        kind, value, offset = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            exponent = self.parse_unary()
            if variables_of(exponent):
                raise ParseError("exponent must be constant", offset)
            return Binary("^", base, exponent)
        return base

    def parse_primary(self) -> Expression:
        kind, value, offset = self.advance()
        if kind == "num":
            return Const(value)
        if kind == "name":
            nxt_kind, nxt_value, _ = self.peek()
            if nxt_kind == "op" and nxt_value == "(":
                if value not in _FUNCTION_IMPL:
                    raise UnknownIdentifierError(value, offset)
                self.advance()
                argument = self.parse_expr()
                self.expect_op(")")
                return Unary(value, argument)
            if value in _FUNCTION_IMPL:
                raise ParseError(f"function {value!r} needs parentheses", offset)
            if value not in self.variables:
                raise UnknownIdentifierError(value, offset)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", offset)
        raise ParseError(f"unexpected token {value!r}", offset)


def parse(text: str, variables: Iterable[str]) -> Expression:
    """Parse ``text`` against the declared variable names.

    Raises :class:`ParseError` with the character offset on syntax errors and
    :class:`UnknownIdentifierError` for undeclared names.
    """
    parser = _Parser(_tokenize(text), frozenset(variables))
    node = parser.parse_expr()
    kind, value, offset = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {value!r} after expression", offset)
    return node


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC_ADD = 10
_PREC_MUL = 20
_PREC_NEG = 25
_PREC_POW = 30
_PREC_ATOM = 100


def _const_text(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _fmt(node: Expression) -> tuple[str, int]:
    if isinstance(node, Const):
        prec = _PREC_NEG if node.value < 0 else _PREC_ATOM
        return _const_text(node.value), prec
    if isinstance(node, Var):
        return node.name, _PREC_ATOM
    if isinstance(node, Unary):
        if node.op == "neg":
            text, prec = _fmt(node.operand)
            if prec < _PREC_NEG:
                text = f"({text})"
            return f"-{text}", _PREC_NEG
        inner, _ = _fmt(node.operand)
        return f"{node.op}({inner})", _PREC_ATOM
    assert isinstance(node, Binary)
    left, lp = _fmt(node.left)
    right, rp = _fmt(node.right)
    if node.op in "+-":
        mine = _PREC_ADD
    elif node.op in "*/":
        mine = _PREC_MUL
    else:
        mine = _PREC_POW
    if node.op == "^":
        if lp <= mine:
            left = f"({left})"
        if rp < mine:
            right = f"({right})"
        return f"{left}^{right}", mine
    if lp < mine:
        left = f"({left})"
    if rp <= mine:
        right = f"({right})"
    return f"{left} {node.op} {right}", mine


def to_text(expression: Expression) -> str:
    """Print an AST so that re-parsing yields a structurally identical AST."""
    text, _ = _fmt(expression)
    return text


# ---------------------------------------------------------------------------
# evaluation / differentiation / rewriting
# ---------------------------------------------------------------------------


def evaluate(expression: Expression, point: Mapping[str, float]) -> float:
    """Evaluate at a point given as a name -> value mapping.

    Missing variables raise KeyError; out-of-domain arithmetic raises
    ExpressionDomainError.  The result is always a finite float.
    """
    memo: dict[int, float] = {}

    def walk(node: Expression) -> float:
        key = id(node)
        found = memo.get(key)
        if found is not None:
            return found
        if isinstance(node, Const):
            value = node.value
        elif isinstance(node, Var):
            value = float(point[node.name])
        elif isinstance(node, Unary):
            inner = walk(node.operand)
            value = -inner if node.op == "neg" else _apply_function(node.op, inner)
        else:
            value = _apply_binary(node.op, walk(node.left), walk(node.right))
        memo[key] = value
        return value

    value = walk(expression)
    if not math.isfinite(value):
        raise ExpressionDomainError("expression value is not finite")
    return value


def variables_of(expression: Expression) -> frozenset[str]:
    names: set[str] = set()
    seen: set[int] = set()

    def walk(node: Expression):
        key = id(node)
        if key in seen:
            return
        seen.add(key)
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Unary):
            walk(node.operand)
        elif isinstance(node, Binary):
            walk(node.left)
            walk(node.right)

    walk(expression)
    return frozenset(names)


def _exponent_value(exponent: Expression) -> float:
    if isinstance(exponent, Const):
        return exponent.value
    try:
        return evaluate(exponent, {})
    except KeyError:
        raise ExpressionDomainError("power exponent is not constant") from None


def differentiate(expression: Expression, variable: str) -> Expression:
    """Exact partial derivative, lightly simplified (constant folding and
    0/1 identities happen as the result is built)."""
    memo: dict[int, Expression] = {}

    def walk(node: Expression) -> Expression:
        key = id(node)
        found = memo.get(key)
        if found is not None:
            return found
        if isinstance(node, Const):
            result = Const(0.0)
        elif isinstance(node, Var):
            result = Const(1.0) if node.name == variable else Const(0.0)
        elif isinstance(node, Unary):
            du = walk(node.operand)
            u = node.operand
            op = node.op
            if op == "neg":
                result = neg(du)
            elif op == "sin":
                result = mul(call("cos", u), du)
            elif op == "cos":
                result = neg(mul(call("sin", u), du))
            elif op == "tan":
                result = div(du, power(call("cos", u), 2.0))
            elif op == "sinh":
                result = mul(call("cosh", u), du)
            elif op == "cosh":
                result = mul(call("sinh", u), du)
            elif op == "tanh":
                result = div(du, power(call("cosh", u), 2.0))
            elif op == "exp":
                result = mul(call("exp", u), du)
            elif op == "log":
                result = div(du, u)
            elif op == "sqrt":
                result = div(du, mul(2.0, call("sqrt", u)))
            else:  # atan
                result = div(du, add(1.0, power(u, 2.0)))
        else:
            a, b = node.left, node.right
            if node.op == "+":
                result = add(walk(a), walk(b))
            elif node.op == "-":
                result = sub(walk(a), walk(b))
            elif node.op == "*":
                result = add(mul(walk(a), b), mul(a, walk(b)))
            elif node.op == "/":
                result = div(sub(mul(walk(a), b), mul(a, walk(b))), power(b, 2.0))
            else:
                c = _exponent_value(b)
                result = mul(mul(Const(c), power(a, c - 1.0)), walk(a))
        memo[key] = result
        return result

    return walk(expression)


def simplify(expression: Expression) -> Expression:
    """Rebuild bottom-up through the smart constructors."""
    memo: dict[int, Expression] = {}

    def walk(node: Expression) -> Expression:
        key = id(node)
        found = memo.get(key)
        if found is not None:
            return found
        if isinstance(node, (Const, Var)):
            result = node
        elif isinstance(node, Unary):
            inner = walk(node.operand)
            result = neg(inner) if node.op == "neg" else call(node.op, inner)
        else:
            left, right = walk(node.left), walk(node.right)
            if node.op == "+":
                result = add(left, right)
            elif node.op == "-":
                result = sub(left, right)
            elif node.op == "*":
                result = mul(left, right)
            elif node.op == "/":
                result = div(left, right)
            else:
                result = power(left, right)
        memo[key] = result
        return result

    return walk(expression)


def substitute(expression: Expression, bindings: Mapping[str, Expression]) -> Expression:
    """Replace variables by expressions (used e.g. to reverse a curve's
    parameter).  Unbound variables pass through."""
    memo: dict[int, Expression] = {}

    def walk(node: Expression) -> Expression:
        key = id(node)
        found = memo.get(key)
        if found is not None:
            return found
        if isinstance(node, Const):
            result = node
        elif isinstance(node, Var):
            result = bindings.get(node.name, node)
        elif isinstance(node, Unary):
            inner = walk(node.operand)
            result = neg(inner) if node.op == "neg" else call(node.op, inner)
        else:
            left, right = walk(node.left), walk(node.right)
            if node.op == "^":
                result = power(left, right)
            elif node.op == "+":
                result = add(left, right)
            elif node.op == "-":
                result = sub(left, right)
            elif node.op == "*":
                result = mul(left, right)
            else:
                result = div(left, right)
        memo[key] = result
        return result

    return walk(expression)


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

_COMPILE_NAMESPACE = {
    "_dv": _guard_div,
    "_pw": _guard_pow,
    **{f"_fn_{name}": impl for name, impl in _FUNCTION_IMPL.items()},
}


def compile_expressions(
    expressions: Sequence[Expression], variables: Sequence[str]
) -> Callable[[Sequence[float]], tuple[float, ...]]:
    """Compile a batch of expressions into one function ``p -> tuple``.

    ``p`` is indexed positionally in the order of ``variables``.  Shared
    subtrees are emitted once (dedup by node identity), so DAG-shaped inputs
    such as a symbolic inverse metric evaluate each common factor a single
    time.  Raises KeyError at compile time for variables not in the list.
    """
    index = {name: i for i, name in enumerate(variables)}
    lines: list[str] = []
    names: dict[int, str] = {}
    counter = itertools.count()

    def emit(node: Expression) -> str:
        key = id(node)
        found = names.get(key)
        if found is not None:
            return found
        if isinstance(node, Const):
            text = repr(node.value)
            if node.value < 0:
                text = f"({text})"
        elif isinstance(node, Var):
            if node.name not in index:
                raise KeyError(f"variable {node.name!r} not among {tuple(index)}")
            text = f"p[{index[node.name]}]"
        elif isinstance(node, Unary):
            operand = emit(node.operand)
            text = f"t{next(counter)}"
            if node.op == "neg":
                lines.append(f"    {text} = -{operand}")
            else:
                lines.append(f"    {text} = _fn_{node.op}({operand})")
        else:
            left = emit(node.left)
            right = emit(node.right)
            text = f"t{next(counter)}"
            if node.op == "/":
                lines.append(f"    {text} = _dv({left}, {right})")
            elif node.op == "^":
                lines.append(f"    {text} = _pw({left}, {right})")
            else:
                lines.append(f"    {text} = {left} {node.op} {right}")
        names[key] = text
        return text

    roots = [emit(e) for e in expressions]
    tail = ", ".join(roots) + ("," if len(roots) == 1 else "")
    source = "def _compiled(p):\n" + "\n".join(lines) + f"\n    return ({tail})\n"
    namespace = dict(_COMPILE_NAMESPACE)
    exec(source, namespace)  # noqa: S102 - generated from our own AST only
    inner = namespace["_compiled"]
    isfinite = math.isfinite

    def compiled(p: Sequence[float]) -> tuple[float, ...]:
        out = inner(p)
        for value in out:
            if not isfinite(value):
                raise ExpressionDomainError("expression value is not finite")
        return out

    return compiled


def compile_expression(
    expression: Expression, variables: Sequence[str]
) -> Callable[[Sequence[float]], float]:
    """Single-expression convenience wrapper around compile_expressions."""
    batch = compile_expressions([expression], variables)

    def compiled(p: Sequence[float]) -> float:
        return batch(p)[0]

    return compiled
