"""Small arithmetic expressions over x and y for config-driven runs.

Grammar (recursive descent, ``#``-free single line)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 'x' | 'y' | 'pi' | NAME '(' expr ')' | '(' expr ')'

Functions: sin, cos, exp, sqrt, log.  Exponents of ``^`` must be constant
(no x or y) so expressions stay exactly differentiable; derivatives are
produced symbolically for the verification routines that need load
derivatives.
"""

import math
import re

import numpy as np

__all__ = ["Expression", "ExpressionError", "parse_expression"]

_FUNCTIONS = {
    "sin": (np.sin, lambda a: ("call", "cos", a)),
    "cos": (np.cos, lambda a: ("neg", ("call", "sin", a))),
    "exp": (np.exp, lambda a: ("call", "exp", a)),
    "sqrt": (np.sqrt, None),  # handled specially in _diff
    "log": (np.log, None),
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


class ExpressionError(ValueError):
    """Raised on malformed expressions; the message points at the offender."""


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ExpressionError(f"unexpected character {rest[0]!r} in {text!r}")
        if m.group("num") is not None:
            tokens.append(("num", float(m.group(0))))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.text = text
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r} in {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.pos != len(self.tokens):
            raise ExpressionError(f"trailing input after position {self.pos} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            expo = self.unary()
            if not _is_const(expo):
                raise ExpressionError(f"exponent must be constant in {self.text!r}")
            return ("pow", base, expo)
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val in ("x", "y"):
                return ("var", val)
            if val == "pi":
                return ("num", math.pi)
            if val in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return ("call", val, arg)
            raise ExpressionError(f"unknown name {val!r} in {self.text!r}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected token {val!r} in {self.text!r}")


def _is_const(node):
    tag = node[0]
    if tag == "num":
        return True
    if tag == "var":
        return False
    if tag == "neg":
        return _is_const(node[1])
    if tag == "call":
        return _is_const(node[2])
    return _is_const(node[1]) and _is_const(node[2])


def _eval(node, x, y):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return x if node[1] == "x" else y
    if tag == "neg":
        return -_eval(node[1], x, y)
    if tag == "add":
        return _eval(node[1], x, y) + _eval(node[2], x, y)
    if tag == "sub":
        return _eval(node[1], x, y) - _eval(node[2], x, y)
    if tag == "mul":
        return _eval(node[1], x, y) * _eval(node[2], x, y)
    if tag == "div":
        return _eval(node[1], x, y) / _eval(node[2], x, y)
    if tag == "pow":
        return _eval(node[1], x, y) ** _eval(node[2], x, y)
    if tag == "call":
        return _FUNCTIONS[node[1]][0](_eval(node[2], x, y))
    raise AssertionError(f"bad node {node!r}")


def _diff(node, var):
    tag = node[0]
    if tag == "num":
        return ("num", 0.0)
    if tag == "var":
        return ("num", 1.0 if node[1] == var else 0.0)
    if tag == "neg":
        return ("neg", _diff(node[1], var))
    if tag in ("add", "sub"):
        return (tag, _diff(node[1], var), _diff(node[2], var))
    if tag == "mul":
        a, b = node[1], node[2]
        return ("add", ("mul", _diff(a, var), b), ("mul", a, _diff(b, var)))
    if tag == "div":
        a, b = node[1], node[2]
        num = ("sub", ("mul", _diff(a, var), b), ("mul", a, _diff(b, var)))
        return ("div", num, ("mul", b, b))
    if tag == "pow":
        a, n = node[1], node[2]
        # constant exponent: n a^(n-1) a'
        return ("mul", ("mul", n, ("pow", a, ("sub", n, ("num", 1.0)))), _diff(a, var))
    if tag == "call":
        name, arg = node[1], node[2]
        da = _diff(arg, var)
        if name == "sqrt":
            return ("div", da, ("mul", ("num", 2.0), ("call", "sqrt", arg)))
        if name == "log":
            return ("div", da, arg)
        outer = _FUNCTIONS[name][1](arg)
        return ("mul", outer, da)
    raise AssertionError(f"bad node {node!r}")


class Expression:
    """Parsed expression: callable on scalars/arrays, exactly differentiable."""

    def __init__(self, node, text=""):
        self.node = node
        self.text = text

    def __call__(self, x, y):
        with np.errstate(invalid="raise", divide="raise"):
            return _eval(self.node, np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def diff(self, var):
        if var not in ("x", "y"):
            raise ValueError("var must be 'x' or 'y'")
        return Expression(_diff(self.node, var), text=f"d({self.text})/d{var}")

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(text):
    """Parse ``text`` into an :class:`Expression`."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    return Expression(_Parser(_tokenize(text), text).parse(), text=text)
