"""Expression trees for the equations of a system.

Grammar (``^`` binds tighter than unary minus and is right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | VARIABLE | FUNC "(" expr ")" | "(" expr ")"
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union

from . import dual
from .errors import ParseError

MAX_EXPANDED_POWER = 64


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str, line):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {text[col - 1]!r}", line, col)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str], line=None):
        self.tokens = _tokenize(text, line)
        self.pos = 0
        self.line = line
        self.variables = {name: i for i, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, self.line, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            self.fail(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-", self.peek()[2]):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind, text, _ = tok
        if kind == "num":
            self.advance()
            return Const(float(text))
        if kind == "name":
            self.advance()
            if text in dual.FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in self.variables:
                return Var(self.variables[text], text)
            self.fail(f"unknown identifier {text!r}", tok)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"expected an operand, found {text or 'end of input'!r}", tok)


def parse_expression(text: str, variables: Sequence[str], line=None) -> Node:
    """Parse ``text`` over the named ``variables`` (index order = list order)."""
    return _Parser(text, variables, line).parse()


def _integer_power(base, k: int):
    if k == 0:
        return base * 0.0 + 1.0
    result = base
    for _ in range(abs(k) - 1):
        result = result * base
    return 1.0 / result if k < 0 else result


def evaluate(node: Node, env):
    """Evaluate ``node`` with ``env[i]`` bound to variable i.

    Values may be floats, ndarrays or :class:`~invfree.dual.Dual`; the
    caller decides. Integer constant exponents are multiplied out.
    """
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.index]
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        return dual.FUNCTIONS[node.func](evaluate(node.arg, env))
    left = evaluate(node.left, env)
    if node.op == "^" and isinstance(node.right, Const):
        c = node.right.value
        if c.is_integer() and abs(c) <= MAX_EXPANDED_POWER:
            return _integer_power(left, int(c))
        return left ** c
    right = evaluate(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left / right
    if isinstance(right, dual.Dual) or isinstance(left, dual.Dual):
        return left ** right
    return dual.exp(right * dual.log(left))


def to_text(node: Node) -> str:
    """Fully parenthesised rendering that parses back to the same tree values."""
    if isinstance(node, Const):
        text = repr(node.value)
        return text if node.value >= 0 else f"({text})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    return f"({to_text(node.left)} {node.op} {to_text(node.right)})"


def max_variable_index(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_variable_index(node.operand)
    if isinstance(node, Call):
        return max_variable_index(node.arg)
    if isinstance(node, BinOp):
        return max(max_variable_index(node.left), max_variable_index(node.right))
    return -1
