"""Evaluable, differentiable, serializable expression trees.

Nodes: Const, Var (dataset feature), Param (free scalar inferred later),
Unary (sqrt/log/invlog/exp), Binary (+ - * / ^). Evaluation is vectorized
over numpy columns; the scalar path uses the same numpy ufuncs, so batch
and row-by-row evaluation agree to the last bit.

Text grammar (parse/to_text): infix arithmetic with ``+ - * / ^``,
parentheses, and function-call syntax for the unary ops. Precedence is
``^`` over unary minus over ``* /`` over ``+ -``; ``^`` is
right-associative. Identifiers resolve against the feature schema; unknown
identifiers become Params.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from hypal import data as data_mod
from hypal.errors import DomainError, ExprSyntaxError, UnitError
from hypal.units import DIMENSIONLESS, Unit

UNARY_FUNCTIONS = ("sqrt", "log", "invlog", "exp")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")

_OP_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


class Expr:
    """Base node; subclasses are frozen dataclasses and hash/compare structurally."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    fn: str
    child: Expr

    def __post_init__(self):
        if self.fn not in UNARY_FUNCTIONS:
            raise ValueError(f"unknown unary function {self.fn!r}")


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


# -- construction helpers ------------------------------------------------

def const(v: float) -> Const:
    return Const(float(v))


def add(a: Expr, b: Expr) -> Binary:
    return Binary("add", a, b)


def sub(a: Expr, b: Expr) -> Binary:
    return Binary("sub", a, b)


def mul(a: Expr, b: Expr) -> Binary:
    return Binary("mul", a, b)


def div(a: Expr, b: Expr) -> Binary:
    return Binary("div", a, b)


def pow_(a: Expr, b: Expr) -> Binary:
    return Binary("pow", a, b)


def collect_names(expr: Expr) -> tuple[set[str], set[str]]:
    """Return (var names, param names) appearing in the tree."""
    variables: set[str] = set()
    params: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            variables.add(node.name)
        elif isinstance(node, Param):
            params.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.child)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
    return variables, params


# -- evaluation ----------------------------------------------------------

def _check_finite(value, path: str):
    if not np.all(np.isfinite(value)):
        raise DomainError("evaluation produced a non-finite value", path)
    return value


def _eval(node: Expr, inputs: Mapping[str, np.ndarray], params: Mapping[str, float], path: str):
    # overflow and 0/0 surface as DomainError via the finiteness checks
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _eval_inner(node, inputs, params, path)


def _eval_inner(node: Expr, inputs: Mapping[str, np.ndarray], params: Mapping[str, float], path: str):
    if isinstance(node, Const):
        return np.float64(node.value)
    if isinstance(node, Var):
        try:
            return inputs[node.name]
        except KeyError:
            raise DomainError(f"unbound variable {node.name!r}", path) from None
    if isinstance(node, Param):
        try:
            return np.float64(params[node.name])
        except KeyError:
            raise DomainError(f"unbound parameter {node.name!r}", path) from None
    if isinstance(node, Unary):
        here = f"{path}.{node.fn}" if path else node.fn
        child = _eval_inner(node.child, inputs, params, here + ".arg")
        if node.fn == "sqrt":
            if np.any(child < 0):
                raise DomainError("sqrt of a negative value", here)
            return np.sqrt(child)
        if node.fn == "log":
            if np.any(child <= 0):
                raise DomainError("log of a non-positive value", here)
            return np.log(child)
        if node.fn == "invlog":
            if np.any(child <= 0) or np.any(child == 1.0):
                raise DomainError("invlog requires input > 0 and != 1", here)
            return _check_finite(1.0 / np.log(child), here)
        # exp: domain is all reals, but overflow must not pass silently
        return _check_finite(np.exp(child), here)
    assert isinstance(node, Binary)
    here = f"{path}.{node.op}" if path else node.op
    left = _eval_inner(node.left, inputs, params, here + ".left")
    right = _eval_inner(node.right, inputs, params, here + ".right")
    if node.op == "add":
        return _check_finite(left + right, here)
    if node.op == "sub":
        return _check_finite(left - right, here)
    if node.op == "mul":
        return _check_finite(left * right, here)
    if node.op == "div":
        if np.any(right == 0):
            raise DomainError("division by zero", here)
        return _check_finite(left / right, here)
    # pow
    if isinstance(node.right, Const):
        exponent = node.right.value
        if exponent != round(exponent) and np.any(left < 0):
            raise DomainError("fractional power of a negative base", here)
        if exponent < 0 and np.any(left == 0):
            raise DomainError("negative power of zero", here)
        return _check_finite(np.power(left, exponent), here)
    if np.any(left <= 0):
        raise DomainError("variable exponent requires a positive base", here)
    return _check_finite(np.power(left, right), here)


def evaluate(expr: Expr, inputs: Mapping[str, float], params: Mapping[str, float]) -> float:
    """Evaluate at a single point. Pure; raises DomainError with the node path."""
    scalar_inputs = {k: np.float64(v) for k, v in inputs.items()}
    return float(_eval(expr, scalar_inputs, params, ""))


def evaluate_batch(
    expr: Expr,
    columns: Mapping[str, np.ndarray],
    params: Mapping[str, float],
    n_rows: int | None = None,
) -> np.ndarray:
    """Evaluate over aligned input columns; output order matches row order.

    n_rows is only needed when the expression references no columns at all
    (a pure-parameter model broadcast over the batch).
    """
    lengths = {len(v) for v in columns.values()}
    if len(lengths) > 1:
        raise DomainError(f"input columns have mismatched lengths {sorted(lengths)}")
    if lengths:
        n = lengths.pop()
        if n_rows is not None and n_rows != n:
            raise DomainError(f"n_rows={n_rows} but columns have {n} rows")
    elif n_rows is not None:
        n = n_rows
    else:
        n = 0
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in columns.items()}
    out = _eval(expr, arrays, params, "")
    return np.broadcast_to(np.asarray(out, dtype=np.float64), (n,)).copy()


# -- exact differentiation ----------------------------------------------

def _simplify(node: Expr) -> Expr:
    """Cheap structural cleanup of derivative trees (no algebra beyond identities)."""
    if isinstance(node, Unary):
        child = _simplify(node.child)
        return Unary(node.fn, child)
    if not isinstance(node, Binary):
        return node
    left = _simplify(node.left)
    right = _simplify(node.right)
    lz = isinstance(left, Const) and left.value == 0.0
    rz = isinstance(right, Const) and right.value == 0.0
    lone = isinstance(left, Const) and left.value == 1.0
    rone = isinstance(right, Const) and right.value == 1.0
    if node.op == "add":
        if lz:
            return right
        if rz:
            return left
    elif node.op == "sub":
        if rz:
            return left
    elif node.op == "mul":
        if lz or rz:
            return Const(0.0)
        if lone:
            return right
        if rone:
            return left
    elif node.op == "div":
        if lz:
            return Const(0.0)
        if rone:
            return left
    elif node.op == "pow":
        if rone:
            return left
        if rz:
            return Const(1.0)
    if isinstance(left, Const) and isinstance(right, Const) and node.op != "div":
        if node.op == "add":
            return Const(left.value + right.value)
        if node.op == "sub":
            return Const(left.value - right.value)
        if node.op == "mul":
            return Const(left.value * right.value)
    return Binary(node.op, left, right)


def differentiate(expr: Expr, param: str) -> Expr:
    """Exact partial derivative with respect to a Param, as a new tree."""

    def d(node: Expr) -> Expr:
        if isinstance(node, (Const, Var)):
            return Const(0.0)
        if isinstance(node, Param):
            return Const(1.0 if node.name == param else 0.0)
        if isinstance(node, Unary):
            inner = d(node.child)
            if node.fn == "sqrt":
                outer = div(Const(1.0), mul(Const(2.0), Unary("sqrt", node.child)))
            elif node.fn == "log":
                outer = div(Const(1.0), node.child)
            elif node.fn == "invlog":
                outer = div(
                    Const(-1.0),
                    mul(node.child, pow_(Unary("log", node.child), Const(2.0))),
                )
            else:  # exp
                outer = Unary("exp", node.child)
            return mul(outer, inner)
        assert isinstance(node, Binary)
        f, g = node.left, node.right
        df, dg = d(f), d(g)
        if node.op == "add":
            return add(df, dg)
        if node.op == "sub":
            return sub(df, dg)
        if node.op == "mul":
            return add(mul(df, g), mul(f, dg))
        if node.op == "div":
            return div(sub(mul(df, g), mul(f, dg)), pow_(g, Const(2.0)))
        # pow: power rule for constant exponents, else f^g * (g'*ln f + g*f'/f)
        if isinstance(g, Const):
            return mul(mul(g, pow_(f, Const(g.value - 1.0))), df)
        return mul(
            pow_(f, g),
            add(mul(dg, Unary("log", f)), mul(g, div(df, f))),
        )

    return _simplify(d(expr))


# -- parsing and printing ------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            if text[pos:].strip() == "":
                break
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, var_names: frozenset[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.var_names = var_names

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, value: str):
        kind, tok, at = self.advance()
        if tok != value:
            raise ExprSyntaxError(f"expected {value!r}, found {tok!r}", at)

    def parse(self) -> Expr:
        node = self.sum()
        kind, tok, at = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected trailing token {tok!r}", at)
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            rhs = self.product()
            node = Binary("add" if op == "+" else "sub", node, rhs)
        return node

    def product(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            rhs = self.unary()
            node = Binary("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.advance()
            operand = self.unary()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return mul(Const(-1.0), operand)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            # exponent re-enters at unary level: right-associative, allows 2^-3
            exponent = self.unary()
            return Binary("pow", base, exponent)
        return base

    def atom(self) -> Expr:
        kind, tok, at = self.advance()
        if kind == "number":
            return Const(float(tok))
        if kind == "ident":
            if self.peek()[1] == "(":
                if tok not in UNARY_FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {tok!r}", at)
                self.advance()
                inner = self.sum()
                self.expect(")")
                return Unary(tok, inner)
            if tok in self.var_names:
                return Var(tok)
            return Param(tok)
        if tok == "(":
            inner = self.sum()
            self.expect(")")
            return inner
        raise ExprSyntaxError(f"unexpected token {tok!r}", at)


def parse(text: str, var_names=None) -> Expr:
    """Parse expression text; identifiers outside var_names become Params."""
    if var_names is None:
        var_names = data_mod.SCHEMA.keys()
    return _Parser(text, frozenset(var_names)).parse()


_LEVEL = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 2, "pow": 3, "atom": 5}


def _format_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _print(node: Expr) -> tuple[str, int]:
    """Return (text, precedence level) for minimal-paren printing."""
    if isinstance(node, Const):
        text = _format_const(node.value)
        return text, (_LEVEL["neg"] if node.value < 0 else _LEVEL["atom"])
    if isinstance(node, (Var, Param)):
        return node.name, _LEVEL["atom"]
    if isinstance(node, Unary):
        inner, _ = _print(node.child)
        return f"{node.fn}({inner})", _LEVEL["atom"]
    assert isinstance(node, Binary)
    if (
        node.op == "mul"
        and isinstance(node.left, Const)
        and node.left.value == -1.0
    ):
        text, level = _print(node.right)
        if level < _LEVEL["pow"]:
            text = f"({text})"
        return f"-{text}", _LEVEL["neg"]
    level = _LEVEL[node.op]
    left_text, left_level = _print(node.left)
    right_text, right_level = _print(node.right)
    if left_level < level or (node.op == "pow" and left_level <= level):
        left_text = f"({left_text})"
    # left-associative ops need parens around same-level right children;
    # pow is right-associative, so only strictly looser children get parens
    if node.op == "pow":
        if right_level < level:
            right_text = f"({right_text})"
    elif right_level <= level:
        right_text = f"({right_text})"
    return f"{left_text}{_OP_SYMBOL[node.op]}{right_text}", level


def to_text(expr: Expr) -> str:
    """Render to the text grammar; parse(to_text(e)) is structurally e."""
    return _print(expr)[0]


# -- canonical form ------------------------------------------------------

def _const_fraction(v: float) -> Fraction:
    return Fraction(v).limit_denominator(1_000_000)


def _factors(node: Expr, exponent: Fraction, out: list):
    """Decompose multiplicative structure into (canonical key, exponent) factors."""
    if isinstance(node, Binary) and node.op == "mul":
        _factors(node.left, exponent, out)
        _factors(node.right, exponent, out)
        return
    if isinstance(node, Binary) and node.op == "div":
        _factors(node.left, exponent, out)
        _factors(node.right, -exponent, out)
        return
    if isinstance(node, Binary) and node.op == "pow" and isinstance(node.right, Const):
        _factors(node.left, exponent * _const_fraction(node.right.value), out)
        return
    if isinstance(node, Unary) and node.fn == "sqrt":
        _factors(node.child, exponent / 2, out)
        return
    out.append((canonical_key(node), exponent))


def canonical_key(expr: Expr) -> str:
    """Order-insensitive canonical string; (a/b)^2 and a^2/b^2 coincide.

    Var and Param render identically (by name): promotion of a feature to a
    free parameter does not change the algebraic form.
    """
    if isinstance(expr, Const):
        return _format_const(expr.value)
    if isinstance(expr, (Var, Param)):
        return expr.name
    if isinstance(expr, Unary) and expr.fn != "sqrt":
        return f"{expr.fn}({canonical_key(expr.child)})"
    if isinstance(expr, Binary) and expr.op in ("add", "sub"):
        terms: list[tuple[int, Expr]] = []

        def walk(node: Expr, sign: int):
            if isinstance(node, Binary) and node.op == "add":
                walk(node.left, sign)
                walk(node.right, sign)
            elif isinstance(node, Binary) and node.op == "sub":
                walk(node.left, sign)
                walk(node.right, -sign)
            else:
                terms.append((sign, node))

        walk(expr, 1)
        rendered = sorted(
            ("" if sign > 0 else "-") + canonical_key(node) for sign, node in terms
        )
        return "sum(" + ",".join(rendered) + ")"
    # multiplicative: mul, div, pow-with-const-exponent, sqrt
    factors: list[tuple[str, Fraction]] = []
    _factors(expr, Fraction(1), factors)
    merged: dict[str, Fraction] = {}
    for key, e in factors:
        merged[key] = merged.get(key, Fraction(0)) + e
    parts = []
    for key in sorted(merged):
        e = merged[key]
        if e == 0:
            continue
        parts.append(key if e == 1 else f"{key}^{e}")
    if not parts:
        return "1"
    if len(parts) == 1:
        return parts[0]
    return "prod(" + ",".join(parts) + ")"


# -- unit inference ------------------------------------------------------

def infer_unit(
    expr: Expr,
    var_units: Mapping[str, Unit],
    param_units: Mapping[str, Unit] | None = None,
) -> Unit | None:
    """Fold unit rules over the tree; None means unconstrained (pure constant).

    Bare constants are polymorphic in sums (a literal added to a quantity
    adopts its unit, the usual reading of unit-balancing coefficients) and
    dimensionless as multiplicative factors.
    """
    param_units = param_units or {}

    def fold(node: Expr) -> Unit | None:
        if isinstance(node, Const):
            return None
        if isinstance(node, Var):
            try:
                return var_units[node.name]
            except KeyError:
                raise UnitError(f"no unit declared for variable {node.name!r}") from None
        if isinstance(node, Param):
            return param_units.get(node.name, DIMENSIONLESS)
        if isinstance(node, Unary):
            child = fold(node.child)
            if node.fn == "sqrt":
                return None if child is None else child.sqrt()
            if child is not None and not child.is_dimensionless():
                raise UnitError(f"{node.fn} requires a dimensionless input, got {child.tag()}")
            return DIMENSIONLESS
        assert isinstance(node, Binary)
        left = fold(node.left)
        right = fold(node.right)
        if node.op in ("add", "sub"):
            if left is None:
                return right
            if right is None:
                return left
            if left != right:
                raise UnitError(f"cannot add {left.tag()} to {right.tag()}")
            return left
        if node.op == "mul":
            if left is None and right is None:
                return None
            return (left or DIMENSIONLESS) * (right or DIMENSIONLESS)
        if node.op == "div":
            if left is None and right is None:
                return None
            return (left or DIMENSIONLESS) / (right or DIMENSIONLESS)
        # pow
        if isinstance(node.right, Const):
            if left is None:
                return None
            return left ** _const_fraction(node.right.value)
        if left is not None and not left.is_dimensionless():
            raise UnitError("variable exponent requires a dimensionless base")
        if right is not None and not right.is_dimensionless():
            raise UnitError("exponent must be dimensionless")
        return DIMENSIONLESS

    return fold(expr)
