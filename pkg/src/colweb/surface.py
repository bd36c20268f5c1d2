"""Concrete syntax: tokenizer, recursive-descent parser and pretty-printer.

Grammar (whitespace-insensitive, ``#`` starts a comment)::

    program   := decl* ;
    decl      := classdecl | agentdecl ;
    classdecl := "wedge" VAR ("from" NAT)? ":" agentdecl ;
    agentdecl := "agent" path "=" formula "." ;
    path      := "/" IDENT ("[" term "]")? ;
    formula   := quant | annotated ;
    quant     := ("cla" | "ada" | "ade") VAR ("," VAR)* ":" formula ;
    annotated := impl ("@" "[" path ("," path)* "]")? ;
    impl      := conj ("->" atomf)? ;
    conj      := atomf ("&" atomf)* ;
    atomf     := atom | path | "(" formula ")" ;
    atom      := IDENT ("(" term ("," term)* ")")? ;
    term      := factor (("+" factor) | "'")* ;
    factor    := NAT | VAR | "(" term ")" ;
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .errors import ArityError, ParseError
from .syntax import (
    AgentPath,
    Atom,
    AtomF,
    Blind,
    ChooseAll,
    ChooseEx,
    ClassDecl,
    Conj,
    Declaration,
    Impl,
    MacroRef,
    NatConst,
    Plus,
    Program,
    Succ,
    Var,
    WithContext,
    iter_atoms,
    with_context,
)

KEYWORDS = frozenset({"agent", "wedge", "from", "cla", "ada", "ade"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nat>[0-9]+)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>->|[/\[\](),:.=&@+'])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "nat", "ident", "kw", "op", "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind, lexeme = m.lastgroup, m.group()
        column = pos - line_start + 1
        if kind == "ident" and lexeme in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, lexeme, line, column))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def fail(self, *expected: str):
        tok = self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"unexpected {found}", tok.line, tok.column, expected)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        return self.advance()

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            self.fail(what)
        return self.advance().text

    def expect_eof(self):
        if self.tok.kind != "eof":
            self.fail("end of input")

    # declarations

    def program(self) -> Program:
        decls = []
        while self.tok.kind != "eof":
            if self.at("wedge"):
                decls.append(self.classdecl())
            elif self.at("agent"):
                decls.append(self.agentdecl())
            else:
                self.fail("'agent'", "'wedge'")
        return Program(tuple(decls))

    def classdecl(self) -> ClassDecl:
        self.expect("wedge")
        var = self.ident("variable")
        lower = 0
        if self.at("from"):
            self.advance()
            if self.tok.kind != "nat":
                self.fail("natural number")
            lower = int(self.advance().text)
        self.expect(":")
        return ClassDecl(var, lower, self.agentdecl())

    def agentdecl(self) -> Declaration:
        self.expect("agent")
        path = self.path()
        self.expect("=")
        knowledge = self.formula()
        self.expect(".")
        return Declaration(path, knowledge)

    def path(self) -> AgentPath:
        self.expect("/")
        name = self.ident("agent name")
        index = None
        if self.at("["):
            self.advance()
            index = self.term()
            self.expect("]")
        return AgentPath(name, index)

    # formulas

    def formula(self):
        if self.at("cla") or self.at("ada") or self.at("ade"):
            kw = self.advance().text
            names = [self.ident("variable")]
            while self.at(","):
                self.advance()
                names.append(self.ident("variable"))
            self.expect(":")
            body = self.formula()
            if kw == "cla":
                return Blind(tuple(names), body)
            cls = ChooseAll if kw == "ada" else ChooseEx
            for name in reversed(names):
                body = cls(name, body)
            return body
        return self.annotated()

    def annotated(self):
        inner = self.impl()
        if not self.at("@"):
            return inner
        self.advance()
        self.expect("[")
        ctx = [self.path()]
        while self.at(","):
            self.advance()
            ctx.append(self.path())
        self.expect("]")
        return with_context(inner, ctx)

    def impl(self):
        body = self.conj()
        if not self.at("->"):
            return body
        self.advance()
        tok = self.tok
        head = self.atomf()
        if not isinstance(head, AtomF):
            raise ParseError("implication head must be an atom", tok.line, tok.column, ("atom",))
        return Impl(body, head)

    def conj(self):
        parts = [self.atomf()]
        while self.at("&"):
            self.advance()
            parts.append(self.atomf())
        return parts[0] if len(parts) == 1 else Conj(tuple(parts))

    def atomf(self):
        if self.at("("):
            self.advance()
            inner = self.formula()
            self.expect(")")
            return inner
        if self.at("/"):
            return MacroRef(self.path())
        if self.tok.kind == "ident":
            pred = self.advance().text
            args = []
            if self.at("("):
                self.advance()
                args.append(self.term())
                while self.at(","):
                    self.advance()
                    args.append(self.term())
                self.expect(")")
            return AtomF(Atom(pred, tuple(args)))
        self.fail("atom", "'/'", "'('")

    # terms

    def term(self):
        t = self.factor()
        while True:
            if self.at("+"):
                self.advance()
                t = Plus(t, self.factor())
            elif self.at("'"):
                self.advance()
                t = Succ(t)
            else:
                return t

    def factor(self):
        tok = self.tok
        if tok.kind == "nat":
            self.advance()
            return NatConst(int(tok.text))
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text)
        if self.at("("):
            self.advance()
            t = self.term()
            self.expect(")")
            return t
        self.fail("natural number", "variable", "'('")


def check_arity(node, arities: Optional[dict] = None) -> dict:
    """Raise ArityError if a predicate appears with two different arities."""
    arities = {} if arities is None else arities
    for atom in iter_atoms(node):
        known = arities.setdefault(atom.pred, atom.arity)
        if known != atom.arity:
            raise ArityError(atom.pred, known, atom.arity)
    return arities


def parse_program(text: str) -> Program:
    parser = _Parser(text)
    program = parser.program()
    check_arity(program)
    return program


def parse_query(text: str):
    parser = _Parser(text)
    formula = parser.formula()
    parser.expect_eof()
    check_arity(formula)
    return formula


def parse_term(text: str):
    parser = _Parser(text)
    t = parser.term()
    parser.expect_eof()
    return t


def parse_path(text: str) -> AgentPath:
    parser = _Parser(text)
    p = parser.path()
    parser.expect_eof()
    return p


# pretty-printing

# binding strength of each formula shape, loosest first
_QUANT, _ANNOTATED, _IMPL, _CONJ, _ATOMIC = range(5)


def _level(f) -> int:
    match f:
        case Blind() | ChooseAll() | ChooseEx():
            return _QUANT
        case WithContext():
            return _ANNOTATED
        case Impl():
            return _IMPL
        case Conj():
            return _CONJ
    return _ATOMIC


def pretty_term(t) -> str:
    match t:
        case NatConst(value):
            return str(value)
        case Var(name):
            return name
        case Succ(arg):
            return pretty_term(arg) + "'"
        case Plus(left, right):
            rhs = pretty_term(right)
            if not isinstance(right, (NatConst, Var)):
                rhs = f"({rhs})"
            return f"{pretty_term(left)}+{rhs}"
    raise TypeError(f"not a term: {t!r}")


def pretty_atom(a: Atom) -> str:
    if not a.args:
        return a.pred
    return f"{a.pred}({','.join(pretty_term(t) for t in a.args)})"


def pretty_path(p: AgentPath) -> str:
    if p.index is None:
        return f"/{p.name}"
    return f"/{p.name}[{pretty_term(p.index)}]"


def _formula(f, need: int) -> str:
    text = _formula_text(f)
    return f"({text})" if _level(f) < need else text


def _formula_text(f) -> str:
    match f:
        case AtomF(atom):
            return pretty_atom(atom)
        case MacroRef(path):
            return pretty_path(path)
        case Conj(parts):
            return " & ".join(_formula(p, _ATOMIC) for p in parts)
        case Impl(body, head):
            return f"{_formula(body, _CONJ)} -> {pretty_atom(head.atom)}"
        case WithContext(inner, ctx):
            paths = ", ".join(pretty_path(p) for p in ctx)
            return f"{_formula(inner, _IMPL)} @ [{paths}]"
        case Blind(vs, body):
            return f"cla {', '.join(vs)}: {_formula(body, _QUANT)}"
        case ChooseAll(v, body):
            return f"ada {v}: {_formula(body, _QUANT)}"
        case ChooseEx(v, body):
            return f"ade {v}: {_formula(body, _QUANT)}"
    raise TypeError(f"not a formula: {f!r}")


def pretty(node) -> str:
    """Canonical text for a program, declaration, formula, atom, path or term."""
    match node:
        case Program(decls):
            return "".join(pretty(d) + "\n" for d in decls)
        case Declaration(path, knowledge):
            return f"agent {pretty_path(path)} = {_formula(knowledge, _QUANT)}."
        case ClassDecl(var, lower, template):
            bound = f" from {lower}" if lower else ""
            return f"wedge {var}{bound}: {pretty(template)}"
        case Atom():
            return pretty_atom(node)
        case AgentPath():
            return pretty_path(node)
        case NatConst() | Var() | Succ() | Plus():
            return pretty_term(node)
    return _formula(node, _QUANT)
