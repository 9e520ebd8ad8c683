"""Scalar expression language: parser, printer and jet evaluator.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("+" | "-") unary | power ;
    power   = atom [ "^" exponent ] ;
    exponent= ["-"] INT | "(" ["-"] INT ")" ;
    atom    = NUMBER | IDENT | IDENT "(" expr { "," expr } ")" | "(" expr ")" ;

Identifiers resolve to chart coordinates, named sub-expressions (macros) or the
constants ``i`` and ``pi``.  Functions: sqrt, exp, log, sin, cos, sinh, cosh,
conj, re, im, abs, atan2.  ``sqrt``, ``log`` and ``atan2`` are real-only; a
holomorphic logarithm is written as ``log(abs(z)) + i*atan2(im(z), re(z))``.
"""

from __future__ import annotations

import math
import re as _re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .jets import Jet, JetError, atan2 as jet_atan2


class ExprError(ValueError):
    """Parse or lookup error; ``offset`` is a byte offset into the source."""

    def __init__(self, message, offset=None, text=None):
        self.offset = offset
        self.text = text
        loc = "" if offset is None else " at offset %d" % offset
        super().__init__(message + loc)


class EvalError(ArithmeticError):
    """Evaluation hit a guard, a singularity or a non-finite value."""


# AST

@dataclass(frozen=True, eq=True)
class Const:
    value: float
    imag: bool = False  # True for the imaginary unit times ``value``


@dataclass(frozen=True, eq=True)
class Sym:
    name: str


@dataclass(frozen=True, eq=True)
class Neg:
    arg: object


@dataclass(frozen=True, eq=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True, eq=True)
class Pow:
    base: object
    exp: int


@dataclass(frozen=True, eq=True)
class Call:
    fn: str
    args: tuple


FUNCTIONS = {
    "sqrt": 1, "exp": 1, "log": 1, "sin": 1, "cos": 1, "sinh": 1, "cosh": 1,
    "conj": 1, "re": 1, "im": 1, "abs": 1, "atan2": 2,
}
CONSTANTS = {"i", "pi"}


# tokenizer

_TOKEN = _re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))")


def _tokenize(text):
    data = text.encode("utf-8")
    src = data.decode("ascii", errors="replace")
    pos, out = 0, []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprError("unexpected character %r" % src[bad], bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(data)))
    return out


class _Parser:
    def __init__(self, text, symbols, macros):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.symbols = symbols
        self.macros = macros
        self.open_parens = []

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.peek()
        if val != value:
            if value == ")":
                start = self.open_parens[-1] if self.open_parens else off
                raise ExprError("unbalanced parentheses (opened at %d)" % start, off, self.text)
            raise ExprError("expected %r" % value, off, self.text)
        return self.take()

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            if val == ")":
                raise ExprError("unbalanced parentheses", off, self.text)
            raise ExprError("unexpected token %r" % val, off, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        kind, val, off = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            arg = self.unary()
            return arg if val == "+" else Neg(arg)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            paren = self.peek()[1] == "("
            if paren:
                self.open_parens.append(self.take()[2])
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, val, off = self.take()
            if kind != "num" or not _re.fullmatch(r"\d+", val):
                raise ExprError("exponent must be an integer literal", off, self.text)
            if paren:
                self.expect(")")
                self.open_parens.pop()
            return Pow(base, sign * int(val))
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "ident":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ExprError("unknown function %r" % val, off, self.text)
                self.open_parens.append(self.take()[2])
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                self.open_parens.pop()
                if len(args) != FUNCTIONS[val]:
                    raise ExprError("%s expects %d argument(s), got %d"
                                    % (val, FUNCTIONS[val], len(args)), off, self.text)
                return Call(val, tuple(args))
            if val == "i":
                return Const(1.0, imag=True)
            if val == "pi":
                return Const(math.pi)
            if val in self.macros:
                return self.macros[val]
            if self.symbols is None or val in self.symbols:
                return Sym(val)
            raise ExprError("unknown symbol %r" % val, off, self.text)
        if val == "(":
            self.open_parens.append(off)
            node = self.expr()
            self.expect(")")
            self.open_parens.pop()
            return node
        if kind == "end":
            if self.open_parens:
                raise ExprError("unbalanced parentheses", off, self.text)
            raise ExprError("unexpected end of input", off, self.text)
        raise ExprError("unexpected token %r" % val, off, self.text)


def parse(text: str, symbols=None, macros: Mapping[str, object] | None = None):
    """Parse ``text``.  ``symbols`` restricts free identifiers (None allows any)."""
    return _Parser(text, None if symbols is None else set(symbols), dict(macros or {})).parse()


# printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(node) -> str:
    """Print an AST so that ``parse(to_text(e)) == e``."""
    return _print(node, 0)


def _print(node, ctx):
    if isinstance(node, Const):
        if node.imag:
            if node.value == 1.0:
                return "i"
            s = "%s*i" % repr(float(node.value))
            return "(%s)" % s if ctx > 2 else s
        return repr(float(node.value)) if node.value != math.pi else "pi"
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Neg):
        s = "-" + _print(node.arg, 3)
        return "(%s)" % s if ctx > 1 else s
    if isinstance(node, Bin):
        p = _PREC[node.op]
        s = "%s %s %s" % (_print(node.left, p), node.op, _print(node.right, p + 1))
        return "(%s)" % s if ctx > p else s
    if isinstance(node, Pow):
        e = str(node.exp) if node.exp >= 0 else "(%d)" % node.exp
        s = "%s^%s" % (_print(node.base, 4), e)
        return "(%s)" % s if ctx > 3 else s
    if isinstance(node, Call):
        return "%s(%s)" % (node.fn, ", ".join(_print(a, 0) for a in node.args))
    raise TypeError("not an expression node: %r" % (node,))


def symbols_of(node) -> set:
    out, stack = set(), [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Sym):
            out.add(n.name)
        elif isinstance(n, Neg):
            stack.append(n.arg)
        elif isinstance(n, Bin):
            stack.extend((n.left, n.right))
        elif isinstance(n, Pow):
            stack.append(n.base)
        elif isinstance(n, Call):
            stack.extend(n.args)
    return out


def implicit_guards(node):
    """Collect ``(kind, subexpr)`` pairs: kind 'nonzero' for divisors, 'positive' for log/sqrt args."""
    seen, out, stack = set(), [], [node]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if isinstance(n, Bin):
            if n.op == "/":
                out.append(("nonzero", n.right))
            stack.extend((n.left, n.right))
        elif isinstance(n, Pow):
            if n.exp < 0:
                out.append(("nonzero", n.base))
            stack.append(n.base)
        elif isinstance(n, Neg):
            stack.append(n.arg)
        elif isinstance(n, Call):
            if n.fn in ("log",):
                out.append(("positive", n.args[0]))
            stack.extend(n.args)
    return out


# evaluation


class Evaluator:
    """Evaluates ASTs to (real, imaginary) jet pairs at a batch of points.

    Sub-expressions are memoized by node identity, so macros shared between
    several components are evaluated once per call.
    """

    def __init__(self, points, coords, order, extra=None):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.coords = list(coords)
        self.order = order
        npts, nvar = self.points.shape
        if nvar != len(self.coords):
            raise ValueError("points have %d columns, chart has %d coordinates"
                             % (nvar, len(self.coords)))
        self.env = {c: Jet.variable(self.points, k, order) for k, c in enumerate(self.coords)}
        for name, jet in (extra or {}).items():
            self.env[name] = jet
        self.memo = {}

    def const(self, v):
        npts, nvar = self.points.shape
        return Jet.constant(v, npts, nvar, self.order)

    def real(self, node):
        re, im = self.complex(node)
        if im is not None and np.max(np.abs(im.value)) > 1e-9 * max(1.0, np.max(np.abs(re.value))):
            raise EvalError("expression has a non-negligible imaginary part")
        return re

    def complex(self, node):
        key = id(node)
        hit = self.memo.get(key)
        if hit is not None:
            return hit[1]
        try:
            val = self._eval(node)
        except JetError as exc:
            raise EvalError(str(exc)) from exc
        self.memo[key] = (node, val)
        return val

    def _eval(self, n):
        if isinstance(n, Const):
            c = self.const(n.value)
            return (self.const(0.0), c) if n.imag else (c, None)
        if isinstance(n, Sym):
            if n.name not in self.env:
                raise EvalError("unbound symbol %r" % n.name)
            return self.env[n.name], None
        if isinstance(n, Neg):
            a, b = self.complex(n.arg)
            return -a, (None if b is None else -b)
        if isinstance(n, Bin):
            return self._bin(n.op, self.complex(n.left), self.complex(n.right))
        if isinstance(n, Pow):
            return self._pow(self.complex(n.base), n.exp)
        if isinstance(n, Call):
            return self._call(n.fn, [self.complex(a) for a in n.args])
        raise EvalError("bad node %r" % (n,))

    @staticmethod
    def _bin(op, x, y):
        a, b = x
        c, d = y
        if op == "+":
            return a + c, _add_opt(b, d)
        if op == "-":
            return a - c, _add_opt(b, None if d is None else -d)
        if op == "*":
            return _cmul(x, y)
        if op == "/":
            return _cdiv(x, y)
        raise EvalError("bad operator %r" % op)

    def _pow(self, x, k):
        if k < 0:
            return _cdiv((self.const(1.0), None), self._pow(x, -k))
        if k == 0:
            return self.const(1.0), None
        if x[1] is None:
            return x[0] ** k, None
        result, base = None, x
        while k:
            if k & 1:
                result = base if result is None else _cmul(result, base)
            k >>= 1
            if k:
                base = _cmul(base, base)
        return result

    def _call(self, fn, args):
        a, b = args[0]
        if fn == "conj":
            return a, (None if b is None else -b)
        if fn == "re":
            return a, None
        if fn == "im":
            return (b if b is not None else a * 0.0), None
        if fn == "abs":
            return (a * a if b is None else a * a + b * b).sqrt(), None
        if fn == "atan2":
            return jet_atan2(_real_only(fn, args[0]), _real_only(fn, args[1])), None
        if fn in ("sqrt", "log"):
            a = _real_only(fn, args[0])
            if fn == "log" and np.any(a.value <= 0):
                raise EvalError("log of non-positive argument")
            if fn == "sqrt" and np.any(a.value < 0):
                raise EvalError("sqrt of negative argument")
            return getattr(a, fn)(), None
        if b is None:
            return getattr(a, fn)(), None
        if fn == "exp":
            e = a.exp()
            return e * b.cos(), e * b.sin()
        if fn == "sin":
            return a.sin() * b.cosh(), a.cos() * b.sinh()
        if fn == "cos":
            return a.cos() * b.cosh(), -(a.sin() * b.sinh())
        if fn == "sinh":
            return a.sinh() * b.cos(), a.cosh() * b.sin()
        if fn == "cosh":
            return a.cosh() * b.cos(), a.sinh() * b.sin()
        raise EvalError("unknown function %r" % fn)


def _add_opt(b, d):
    if b is None:
        return d
    if d is None:
        return b
    return b + d


def _cmul(x, y):
    a, b = x
    c, d = y
    re = a * c
    if b is not None and d is not None:
        re = re - b * d
    im = _add_opt(None if d is None else a * d, None if b is None else b * c)
    return re, im


def _cdiv(x, y):
    c, d = y
    if d is None:
        if np.any(np.abs(c.value) < 1e-300):
            raise EvalError("division by zero")
        inv = c.reciprocal()
        return x[0] * inv, (None if x[1] is None else x[1] * inv)
    den = c * c + d * d
    if np.any(den.value < 1e-300):
        raise EvalError("division by zero")
    inv = den.reciprocal()
    re, im = _cmul(x, (c, -d))
    return re * inv, im * inv


def _real_only(fn, z):
    a, b = z
    if b is not None and np.max(np.abs(b.value)) > 1e-12 * max(1.0, np.max(np.abs(a.value))):
        raise EvalError("%s needs a real argument" % fn)
    return a


# symbolic differentiation

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is0(n):
    return isinstance(n, Const) and n.value == 0.0


def _add(a, b):
    if _is0(a):
        return b
    if _is0(b):
        return a
    return Bin("+", a, b)


def _sub(a, b):
    if _is0(b):
        return a
    if _is0(a):
        return Neg(b)
    return Bin("-", a, b)


def _mul(a, b):
    if _is0(a) or _is0(b):
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    return Bin("*", a, b)


def _div(a, b):
    return _ZERO if _is0(a) else Bin("/", a, b)


def diff(node, name):
    """Partial derivative of an AST with respect to the symbol ``name`` (no simplification beyond zeros)."""
    memo = {}

    def d(n):
        key = id(n)
        if key in memo:
            return memo[key]
        memo[key] = out = _d(n)
        return out

    def _d(n):
        if isinstance(n, Const):
            return _ZERO
        if isinstance(n, Sym):
            return _ONE if n.name == name else _ZERO
        if isinstance(n, Neg):
            da = d(n.arg)
            return _ZERO if _is0(da) else Neg(da)
        if isinstance(n, Bin):
            a, b = n.left, n.right
            da, db = d(a), d(b)
            if n.op == "+":
                return _add(da, db)
            if n.op == "-":
                return _sub(da, db)
            if n.op == "*":
                return _add(_mul(da, b), _mul(a, db))
            return _sub(_div(da, b), _div(_mul(a, db), Pow(b, 2)))
        if isinstance(n, Pow):
            db = d(n.base)
            if _is0(db) or n.exp == 0:
                return _ZERO
            lower = n.base if n.exp == 2 else Pow(n.base, n.exp - 1)
            return _mul(_mul(Const(float(n.exp)), lower), db)
        if isinstance(n, Call):
            u = n.args[0]
            du = d(u)
            fn = n.fn
            if fn == "atan2":
                y, x = n.args
                dy, dx = d(y), d(x)
                num = _sub(_mul(x, dy), _mul(y, dx))
                return _div(num, Bin("+", Pow(x, 2), Pow(y, 2)))
            if _is0(du):
                return _ZERO
            if fn == "sqrt":
                return _div(du, _mul(Const(2.0), n))
            if fn == "exp":
                return _mul(n, du)
            if fn == "log":
                return _div(du, u)
            if fn == "sin":
                return _mul(Call("cos", (u,)), du)
            if fn == "cos":
                return Neg(_mul(Call("sin", (u,)), du))
            if fn == "sinh":
                return _mul(Call("cosh", (u,)), du)
            if fn == "cosh":
                return _mul(Call("sinh", (u,)), du)
            if fn in ("conj", "re", "im"):
                return Call(fn, (du,))
            if fn == "abs":
                return _div(Call("re", (_mul(Call("conj", (u,)), du),)), n)
        raise TypeError("cannot differentiate %r" % (n,))

    return d(node)
