"""Concrete syntax: ``.dfi`` program files, hypothesis declarations, printing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .labels import BOT_NAME, Label, LabelOrder
from .syntax import (UNIT, Exec, Fork, Let, Limit, New, ObjectInit, Pack,
                     Process, Read, Relabel, Result, Store, Subst, Var, Write,
                     is_expression)
from .types import UNIT_T, Bin, Eff, Obj, show


@dataclass
class ProgramFile:
    order: LabelOrder
    hypotheses: list[tuple[Var, Eff]]
    main: Process
    # id(node) -> (line, col) for nodes that came from source text
    positions: dict = field(default_factory=dict, compare=False, repr=False)

    def env(self) -> dict[Var, Eff]:
        return dict(self.hypotheses)


@dataclass
class ParseError(Exception):
    code: str
    line: int
    col: int
    message: str
    expected: tuple[str, ...] = field(default=())

    def __str__(self) -> str:
        text = f"{self.line}:{self.col}: {self.code}: {self.message}"
        if self.expected:
            text += f" (expected {', '.join(self.expected)})"
        return text

    def record(self) -> dict:
        return {"code": self.code, "line": self.line, "col": self.col,
                "message": self.message, "expected": list(self.expected)}


KEYWORDS = {"labels", "assume", "do", "fork", "let", "in", "new", "exec",
            "pack", "unit", "Unit", "Obj", "Bin"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<assign>:=)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<punct>[{}()\[\]<>;:=\#^!])
""", re.VERBOSE)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # 'ident', 'kw', 'punct', 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError("lex", line, pos - start + 1,
                             f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        col = pos - start + 1
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind == "ident":
            word = m.group()
            out.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
        elif kind in ("punct", "assign"):
            out.append(Token("punct", m.group(), line, col))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.order: LabelOrder | None = None
        self.scope: list[str] = []
        self.positions: dict = {}

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, *expected: str, code: str = "syntax",
              tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(code, tok.line, tok.col, message, expected)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "kw") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"unexpected {shown!r}", repr(text))
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            shown = self.tok.text or "end of input"
            raise self.error(f"unexpected {shown!r}", what)
        tok = self.tok
        self.i += 1
        return tok

    # -- program
    def program(self) -> ProgramFile:
        self.expect("labels")
        names = [self.ident("label name").text]
        while self.at("<"):
            self.i += 1
            names.append(self.ident("label name").text)
        self.expect(";")
        try:
            self.order = LabelOrder(names)
        except ValueError as exc:
            raise self.error(str(exc), code="bad-order") from None
        hyps: list[tuple[Var, Eff]] = []
        seen: set[str] = set()
        while self.at("assume"):
            self.i += 1
            tok = self.ident("hypothesis name")
            if tok.text in seen:
                raise self.error(f"duplicate hypothesis {tok.text!r}",
                                 code="duplicate-hypothesis", tok=tok)
            seen.add(tok.text)
            self.expect(":")
            ty = self.type_()
            self.expect(";")
            hyps.append((Var(tok.text), ty))
        self.expect("do")
        self.scope = list(seen)
        main = self.proc()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r} after program", "end of input")
        return ProgramFile(self.order, hyps, main, self.positions)

    def label(self) -> Label:
        tok = self.tok
        if tok.kind == "ident" or tok.text == BOT_NAME:
            self.i += 1
            if tok.text == BOT_NAME:
                return 0
            try:
                return self.order.label(tok.text)
            except KeyError:
                raise self.error(f"unknown label {tok.text!r}", code="unknown-label",
                                 tok=tok) from None
        raise self.error(f"unexpected {tok.text or 'end of input'!r}", "label")

    def type_(self) -> Eff:
        base = self.base()
        self.expect("^")
        return Eff(base, self.label())

    def base(self):
        if self.at("Unit"):
            self.i += 1
            return UNIT_T
        if self.at("Obj"):
            self.i += 1
            self.expect("(")
            inner = self.type_()
            self.expect(")")
            return Obj(inner)
        if self.at("Bin"):
            self.i += 1
            self.expect("[")
            run = self.label()
            self.expect("]")
            self.expect("(")
            inner = self.type_()
            self.expect(")")
            return Bin(run, inner)
        raise self.error(f"unexpected {self.tok.text or 'end of input'!r}",
                         "'Unit'", "'Obj'", "'Bin'")

    # -- processes
    def var(self) -> Var:
        tok = self.ident()
        if tok.text not in self.scope:
            raise self.error(f"unbound variable {tok.text!r}", code="unbound-variable",
                             tok=tok)
        return Var(tok.text)

    def res(self):
        if self.at("unit"):
            self.i += 1
            return UNIT
        return self.var()

    def proc(self) -> Process:
        tok = self.tok
        node = self._proc()
        self.positions.setdefault(id(node), (tok.line, tok.col))
        return node

    def _proc(self) -> Process:
        tok = self.tok
        if self.at("fork"):
            self.i += 1
            self.expect("{")
            child = self.proc()
            self.expect("}")
            return Fork(child, self.proc())
        if self.at("let"):
            self.i += 1
            x = self.ident("variable name").text
            self.expect("=")
            head = self.proc()
            self.expect("in")
            self.scope.append(x)
            try:
                body = self.proc()
            finally:
                self.scope.pop()
            return Let(Var(x), head, body)
        if self.at("["):
            self.i += 1
            p = self.label()
            self.expect("]")
            return Limit(p, self.proc())
        if self.at("new"):
            self.i += 1
            self.expect("(")
            init = self.res()
            self.expect("#")
            trust = self.label()
            self.expect(")")
            return New(init, trust)
        if self.at("<"):
            self.i += 1
            o = self.label()
            self.expect(">")
            return Relabel(o, self.var())
        if self.at("!"):
            self.i += 1
            return Read(self.var())
        if self.at("exec"):
            self.i += 1
            return Exec(self.var())
        if self.at("pack"):
            self.i += 1
            self.expect("{")
            body = self.proc()
            self.expect("}")
            if isinstance(body, Pack):
                raise self.error("a pack body cannot itself be a pack",
                                 code="nested-pack", tok=tok)
            if not is_expression(body):
                raise self.error("a pack body must be an expression",
                                 code="pack-not-expression", tok=tok)
            return Pack(body)
        if self.at("("):
            self.i += 1
            p = self.proc()
            self.expect(")")
            return p
        if self.at("unit"):
            self.i += 1
            return Result(UNIT)
        if tok.kind == "ident":
            if self.toks[self.i + 1].text == ":=":
                target = self.var()
                self.i += 1
                return Write(target, self.res())
            return Result(self.var())
        raise self.error(f"unexpected {tok.text or 'end of input'!r}", "process")


def parse(text: str) -> ProgramFile:
    return _Parser(text).program()


def parse_file(path) -> ProgramFile:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# -- printing

def _res(r) -> str:
    return "unit" if r is UNIT else str(r)


def _mu(mu, order: LabelOrder) -> str:
    if isinstance(mu, ObjectInit):
        return f"new({_res(mu.init)} # {order.name(mu.trust)})"
    if isinstance(mu, Pack):
        return print_process(mu, order)
    return _res(mu)


def print_process(p: Process, order: LabelOrder, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(p, Let):
        head = print_process(p.head, order, indent + 1)
        return f"let {p.x} = {head} in\n{pad}{print_process(p.body, order, indent)}"
    if isinstance(p, Fork):
        child = print_process(p.child, order, indent + 1)
        return f"fork {{ {child} }}\n{pad}{print_process(p.cont, order, indent)}"
    if isinstance(p, Limit):
        return f"[{order.name(p.p)}] {print_process(p.body, order, indent)}"
    if isinstance(p, New):
        return f"new({_res(p.init)} # {order.name(p.trust)})"
    if isinstance(p, Relabel):
        return f"<{order.name(p.o)}> {p.target}"
    if isinstance(p, Read):
        return f"!{p.target}"
    if isinstance(p, Write):
        return f"{p.target} := {_res(p.value)}"
    if isinstance(p, Exec):
        return f"exec {p.target}"
    if isinstance(p, Pack):
        return f"pack {{ {print_process(p.body, order, indent + 1)} }}"
    if isinstance(p, Result):
        return _res(p.r)
    if isinstance(p, Store):
        return f"{p.name} |->[{order.name(p.olabel)}] {p.content}"
    if isinstance(p, Subst):
        mu = _mu(p.mu, order)
        return (f"nu {p.x} = {mu} @ {order.name(p.src)} in\n"
                f"{pad}{print_process(p.body, order, indent)}")
    raise TypeError(f"not a process: {p!r}")


def print_program(pf: ProgramFile) -> str:
    lines = ["labels " + " < ".join(pf.order.names) + ";"]
    for x, ty in pf.hypotheses:
        lines.append(f"assume {x} : {show(ty, pf.order)};")
    lines.append("do")
    lines.append("  " + print_process(pf.main, pf.order, 1))
    return "\n".join(lines) + "\n"
