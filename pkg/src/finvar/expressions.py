"""Scalar expression language: parsing, printing, differentiation.

Grammar (whitespace insignificant)::

    expr     := ('-')? term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := base ('^' exponent)?
    base     := number | ident | '(' expr ')' | func '(' expr ')'
    func     := sqrt | exp | log | sin | cos | tan | atan
    exponent := ('-')? number

Non-smooth primitives (abs, min, max, sign) are rejected at parse time;
everything the engine differentiates must be smooth on its domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from .errors import ExpressionError

SMOOTH_FUNCS = ("sqrt", "exp", "log", "sin", "cos", "tan", "atan")
_REJECTED_FUNCS = ("abs", "min", "max", "sign")


# --- AST nodes ---------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float  # constant literal; integer-valued exponents use repeated
    #                  multiplication, real ones exp(p*log(base))


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Node"


Node = Const | Var | BinOp | Pow | Func


# --- tokenizer / parser ------------------------------------------------------

class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    while k < n and source[k].isdigit():
                        k += 1
                    j = k
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ExpressionError(f"malformed number {text!r}", i)
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], i))
            i = j
            continue
        raise ExpressionError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, variables):
        self.tokens = tokens
        self.pos = 0
        self.variables = frozenset(variables)

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok.kind != kind:
            raise ExpressionError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.pos)
        return tok

    def parse_expr(self) -> Node:
        if self.peek().kind == "-":
            tok = self.next()
            node = BinOp("-", Const(0.0), self.parse_term())
        else:
            node = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Node:
        node = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            node = BinOp(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Node:
        if self.peek().kind == "-":
            self.next()
            return BinOp("-", Const(0.0), self.parse_factor())
        node = self.parse_base()
        if self.peek().kind == "^":
            self.next()
            sign = 1.0
            if self.peek().kind == "-":
                self.next()
                sign = -1.0
            tok = self.expect("num")
            node = Pow(node, sign * float(tok.text))
        return node

    def parse_base(self) -> Node:
        tok = self.next()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            if self.peek().kind == "(":
                name = tok.text
                if name in _REJECTED_FUNCS:
                    raise ExpressionError(f"non-smooth primitive {name!r} is not allowed", tok.pos)
                if name not in SMOOTH_FUNCS:
                    raise ExpressionError(f"unknown function {name!r}", tok.pos)
                self.next()
                arg = self.parse_expr()
                self.expect(")")
                return Func(name, arg)
            if tok.text not in self.variables:
                raise ExpressionError(f"undeclared variable {tok.text!r}", tok.pos)
            return Var(tok.text)
        raise ExpressionError(f"unexpected {tok.text or 'end of input'!r}", tok.pos)


def parse(source: str, variables) -> Node:
    """Parse `source` into an AST whose free variables are drawn from `variables`."""
    parser = _Parser(_tokenize(source), variables)
    node = parser.parse_expr()
    end = parser.next()
    if end.kind != "end":
        raise ExpressionError(f"trailing input {end.text!r}", end.pos)
    return node


# --- printing / structure ----------------------------------------------------

def to_source(node: Node) -> str:
    """Print an AST back to grammar-conformant text (round-trips through parse)."""
    if isinstance(node, Const):
        if node.value < 0:
            return f"(0 - {-node.value!r})"
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Pow):
        exp = node.exponent
        text = repr(exp) if exp >= 0 else f"-{-exp!r}"
        return f"({to_source(node.base)})^{text}"
    if isinstance(node, Func):
        return f"{node.name}({to_source(node.arg)})"
    raise TypeError(f"not an AST node: {node!r}")


def free_vars(node: Node) -> frozenset[str]:
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, BinOp):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, Pow):
        return free_vars(node.base)
    if isinstance(node, Func):
        return free_vars(node.arg)
    raise TypeError(f"not an AST node: {node!r}")


# --- exact differentiation and substitution ----------------------------------

def differentiate(node: Node, var: str) -> Node:
    """Exact derivative of the AST with respect to `var` (no simplification
    beyond dropping obvious zero branches)."""
    if isinstance(node, Const):
        return Const(0.0)
    if isinstance(node, Var):
        return Const(1.0) if node.name == var else Const(0.0)
    if isinstance(node, BinOp):
        dl = differentiate(node.left, var)
        dr = differentiate(node.right, var)
        if node.op in ("+", "-"):
            if _is_zero(dl) and _is_zero(dr):
                return Const(0.0)
            return BinOp(node.op, dl, dr)
        if node.op == "*":
            terms = []
            if not _is_zero(dl):
                terms.append(BinOp("*", dl, node.right))
            if not _is_zero(dr):
                terms.append(BinOp("*", node.left, dr))
            if not terms:
                return Const(0.0)
            return terms[0] if len(terms) == 1 else BinOp("+", terms[0], terms[1])
        if node.op == "/":
            # (l/r)' = l'/r - l*r'/r^2
            first = Const(0.0) if _is_zero(dl) else BinOp("/", dl, node.right)
            if _is_zero(dr):
                return first
            second = BinOp("/", BinOp("*", node.left, dr), Pow(node.right, 2.0))
            return BinOp("-", first, second)
        raise TypeError(f"unknown operator {node.op!r}")
    if isinstance(node, Pow):
        db = differentiate(node.base, var)
        if _is_zero(db) or node.exponent == 0:
            return Const(0.0)
        inner = Pow(node.base, node.exponent - 1.0)
        return BinOp("*", BinOp("*", Const(node.exponent), inner), db)
    if isinstance(node, Func):
        da = differentiate(node.arg, var)
        if _is_zero(da):
            return Const(0.0)
        f = node.arg
        if node.name == "sqrt":
            outer = BinOp("/", Const(0.5), Func("sqrt", f))
        elif node.name == "exp":
            outer = Func("exp", f)
        elif node.name == "log":
            outer = BinOp("/", Const(1.0), f)
        elif node.name == "sin":
            outer = Func("cos", f)
        elif node.name == "cos":
            outer = BinOp("-", Const(0.0), Func("sin", f))
        elif node.name == "tan":
            outer = BinOp("/", Const(1.0), Pow(Func("cos", f), 2.0))
        elif node.name == "atan":
            outer = BinOp("/", Const(1.0), BinOp("+", Const(1.0), Pow(f, 2.0)))
        else:
            raise TypeError(f"unknown function {node.name!r}")
        return BinOp("*", outer, da)
    raise TypeError(f"not an AST node: {node!r}")


def _is_zero(node: Node) -> bool:
    return isinstance(node, Const) and node.value == 0.0


def substitute(node: Node, bindings: dict) -> Node:
    """Replace variables by constants or sub-expressions.

    `bindings` maps variable names to numbers or AST nodes.
    """
    if isinstance(node, Const):
        return node
    if isinstance(node, Var):
        if node.name in bindings:
            repl = bindings[node.name]
            return Const(float(repl)) if isinstance(repl, (int, float)) else repl
        return node
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, bindings), substitute(node.right, bindings))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, bindings), node.exponent)
    if isinstance(node, Func):
        return Func(node.name, substitute(node.arg, bindings))
    raise TypeError(f"not an AST node: {node!r}")


def evaluate(node: Node, env: dict):
    """Plain numeric evaluation (floats or numpy arrays in `env`).

    Jet-valued evaluation lives in finvar.jets; this is the cheap path for
    validation sampling and quadrature integrands that need only values.
    """
    import numpy as np

    from .errors import DomainEvalError

    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if not np.all(np.asarray(b) != 0):
            raise DomainEvalError("division by zero")
        return a / b
    if isinstance(node, Pow):
        base = evaluate(node.base, env)
        p = node.exponent
        if float(p).is_integer():
            return np.power(base, int(p)) if p >= 0 else 1.0 / np.power(base, -int(p))
        if not np.all(np.asarray(base) > 0):
            raise DomainEvalError("real power of a non-positive base")
        return np.power(base, p)
    if isinstance(node, Func):
        arg = evaluate(node.arg, env)
        if node.name in ("sqrt", "log") and not np.all(np.asarray(arg) > 0):
            raise DomainEvalError(f"{node.name} of a non-positive value")
        return getattr(np, {"atan": "arctan"}.get(node.name, node.name))(arg)
    raise TypeError(f"not an AST node: {node!r}")


def constant_fold(node: Node) -> Node:
    """Fold constant sub-trees (used to keep derivative ASTs small)."""
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, BinOp):
        left = constant_fold(node.left)
        right = constant_fold(node.right)
        if isinstance(left, Const) and isinstance(right, Const):
            if node.op == "/" and right.value == 0:
                return BinOp(node.op, left, right)
            return Const({"+": left.value + right.value,
                          "-": left.value - right.value,
                          "*": left.value * right.value,
                          "/": left.value / right.value if right.value else math.nan}[node.op])
        if node.op == "*" and (_is_zero(left) or _is_zero(right)):
            return Const(0.0)
        if node.op == "*" and isinstance(left, Const) and left.value == 1.0:
            return right
        if node.op == "*" and isinstance(right, Const) and right.value == 1.0:
            return left
        if node.op in ("+", "-") and _is_zero(right):
            return left
        if node.op == "+" and _is_zero(left):
            return right
        if node.op == "/" and _is_zero(left):
            return Const(0.0)
        return BinOp(node.op, left, right)
    if isinstance(node, Pow):
        base = constant_fold(node.base)
        if node.exponent == 1.0:
            return base
        if isinstance(base, Const) and float(node.exponent).is_integer():
            return Const(base.value ** node.exponent)
        return Pow(base, node.exponent)
    if isinstance(node, Func):
        arg = constant_fold(node.arg)
        return Func(node.name, arg)
    raise TypeError(f"not an AST node: {node!r}")
