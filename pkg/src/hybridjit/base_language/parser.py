"""Recursive-descent parser for MinCaml--.

The surface grammar is reconstructed from sample programs:

    expr    ::= nonseq [ ";" expr ]
    nonseq  ::= "let" "rec" IDENT IDENT+ "=" expr "in" expr
              | "let" (IDENT | "_" | "()") "=" expr "in" expr
              | "if" expr "then" nonseq "else" nonseq
              | cmp
    cmp     ::= arith [ ("<=" | "<" | "=") arith ]
    arith   ::= term { ("+" | "-") term }
    term    ::= unary { "*" unary }
    unary   ::= "-" unary | app
    app     ::= "print_int" atom | IDENT atom+ | atom
    atom    ::= INT | "true" | "false" | IDENT | "(" ")" | "(" expr ")"

Functions are first-order and cannot capture enclosing value variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import ast as A

KEYWORDS = {"let", "rec", "in", "if", "then", "else", "true", "false"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\(\*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op><=|<|=|\+|-|\*|\(|\)|;)
    """,
    re.VERBOSE,
)


class MinCamlError(Exception):
    """Base class for front-end diagnostics."""

    def __init__(self, message: str, pos: A.Pos = A.NOPOS):
        self.message = message
        self.pos = pos
        self.line = pos.line
        self.col = pos.col
        super().__init__(f"{pos}: {message}")


class ParseError(MinCamlError):
    pass


class UnboundVariableError(MinCamlError):
    pass


@dataclass
class Token:
    kind: str  # int, ident, kw, op, eof
    text: str
    pos: A.Pos


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    i, line, line_start = 0, 1, 0
    n = len(source)
    while i < n:
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ParseError(f"unexpected character {source[i]!r}", A.Pos(line, i - line_start + 1))
        kind = m.lastgroup
        text = m.group()
        pos = A.Pos(line, i - line_start + 1)
        if kind == "nl":
            line += 1
            line_start = m.end()
            i = m.end()
            continue
        if kind == "comment":
            depth, j = 1, m.end()
            while depth and j < n:
                if source.startswith("(*", j):
                    depth, j = depth + 1, j + 2
                elif source.startswith("*)", j):
                    depth, j = depth - 1, j + 2
                else:
                    if source[j] == "\n":
                        line += 1
                        line_start = j + 1
                    j += 1
            if depth:
                raise ParseError("unterminated comment", pos)
            i = j
            continue
        i = m.end()
        if kind == "ws":
            continue
        if kind == "ident" and text in KEYWORDS:
            kind = "kw"
        tokens.append(Token(kind, text, pos))
    tokens.append(Token("eof", "", A.Pos(line, n - line_start + 1)))
    return tokens


class _Scope:
    """Lexical scope: value variables and function arities, separately."""

    def __init__(self, values=(), funcs=None):
        self.values = set(values)
        self.funcs: Dict[str, int] = dict(funcs or {})

    def with_value(self, name):
        s = _Scope(self.values, self.funcs)
        if name is not None:
            s.values.add(name)
            s.funcs.pop(name, None)
        return s

    def with_func(self, name, arity):
        s = _Scope(self.values, self.funcs)
        s.funcs[name] = arity
        s.values.discard(name)
        return s


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r} but found {found!r}", self.tok.pos)
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            raise ParseError(f"expected identifier but found {found!r}", self.tok.pos)
        return self.advance()

    # grammar
    def parse_program(self) -> A.Node:
        node = self.expr(_Scope())
        if self.tok.kind != "eof":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self, scope: _Scope) -> A.Node:
        first = self.nonseq(scope)
        if self.at(";"):
            pos = self.advance().pos
            if self.tok.kind == "eof" or self.at("in") or self.at(")"):
                return first
            return A.Seq(first, self.expr(scope), pos)
        return first

    def nonseq(self, scope: _Scope) -> A.Node:
        if self.at("let"):
            return self.let(scope)
        if self.at("if"):
            pos = self.advance().pos
            cond = self.expr(scope)
            self.expect("then")
            then = self.nonseq(scope)
            self.expect("else")
            orelse = self.nonseq(scope)
            return A.If(cond, then, orelse, pos)
        return self.cmp(scope)

    def _binding_value(self, scope: _Scope) -> A.Node:
        if self.at("in") or self.tok.kind == "eof":
            raise ParseError("empty binding", self.tok.pos)
        return self.expr(scope)

    def let(self, scope: _Scope) -> A.Node:
        pos = self.expect("let").pos
        if self.at("rec"):
            self.advance()
            name = self.expect_ident().text
            params: List[str] = []
            while self.tok.kind == "ident":
                params.append(self.advance().text)
            if not params:
                raise ParseError(f"function {name!r} needs at least one parameter", self.tok.pos)
            if len(set(params)) != len(params):
                raise ParseError(f"duplicate parameter in {name!r}", pos)
            self.expect("=")
            # first-order: the body sees its parameters and visible functions only
            fscope = _Scope(params, scope.funcs).with_func(name, len(params))
            for p in params:
                fscope.values.add(p)
            fbody = self._binding_value(fscope)
            self.expect("in")
            body = self.expr(scope.with_func(name, len(params)))
            return A.LetRec(name, tuple(params), fbody, body, pos)
        if self.at("("):
            self.advance()
            self.expect(")")
            name: Optional[str] = None
        else:
            name = self.expect_ident().text
            if name == "_":
                name = None
        self.expect("=")
        value = self._binding_value(scope)
        self.expect("in")
        body = self.expr(scope.with_value(name))
        return A.Let(name, value, body, pos)

    def cmp(self, scope: _Scope) -> A.Node:
        left = self.arith(scope)
        for op in ("<=", "<", "="):
            if self.at(op):
                pos = self.advance().pos
                right = self.arith(scope)
                return A.BinOp(op, left, right, pos)
        return left

    def arith(self, scope: _Scope) -> A.Node:
        left = self.term(scope)
        while self.at("+") or self.at("-"):
            t = self.advance()
            left = A.BinOp(t.text, left, self.term(scope), t.pos)
        return left

    def term(self, scope: _Scope) -> A.Node:
        left = self.unary(scope)
        while self.at("*"):
            t = self.advance()
            left = A.BinOp("*", left, self.unary(scope), t.pos)
        return left

    def unary(self, scope: _Scope) -> A.Node:
        if self.at("-"):
            t = self.advance()
            operand = self.unary(scope)
            if isinstance(operand, A.Int):
                return A.Int(-operand.value, t.pos)
            return A.BinOp("-", A.Int(0, t.pos), operand, t.pos)
        return self.app(scope)

    def _starts_atom(self) -> bool:
        t = self.tok
        return t.kind in ("int", "ident") or (t.kind == "kw" and t.text in ("true", "false")) or self.at("(")

    def app(self, scope: _Scope) -> A.Node:
        t = self.tok
        if t.kind == "ident" and t.text == "print_int":
            self.advance()
            if not self._starts_atom():
                raise ParseError("print_int expects an argument", self.tok.pos)
            return A.Print(self.atom(scope), t.pos)
        if t.kind == "ident" and t.text in scope.funcs and t.text not in scope.values:
            self.advance()
            args = []
            while self._starts_atom():
                args.append(self.atom(scope))
            if not args:
                raise ParseError(f"function {t.text!r} used as a value", t.pos)
            return A.App(t.text, tuple(args), t.pos)
        return self.atom(scope)

    def atom(self, scope: _Scope) -> A.Node:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return A.Int(int(t.text), t.pos)
        if t.kind == "kw" and t.text in ("true", "false"):
            self.advance()
            return A.Bool(t.text == "true", t.pos)
        if t.kind == "ident":
            self.advance()
            if t.text in scope.funcs and t.text not in scope.values:
                raise ParseError(f"function {t.text!r} used as a value", t.pos)
            if t.text not in scope.values:
                raise UnboundVariableError(f"unbound variable {t.text!r}", t.pos)
            return A.Var(t.text, t.pos)
        if self.at("("):
            self.advance()
            if self.at(")"):
                self.advance()
                return A.Unit(t.pos)
            inner = self.expr(scope)
            self.expect(")")
            return inner
        found = t.text or "end of input"
        raise ParseError(f"unexpected {found!r}", t.pos)


def parse(source: str) -> A.Node:
    """Parse MinCaml-- source text into an AST."""
    return Parser(source).parse_program()
