"""Abstract syntax for programs, formulas and terms.

All nodes are frozen dataclasses so they hash and compare structurally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union


@dataclass(frozen=True)
class NatConst:
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"natural constant must be >= 0, got {self.value}")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Succ:
    arg: "Term"


@dataclass(frozen=True)
class Plus:
    left: "Term"
    right: "Term"


Term = Union[NatConst, Var, Succ, Plus]


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class AgentPath:
    name: str
    index: Optional[Term] = None


@dataclass(frozen=True)
class AtomF:
    atom: Atom


@dataclass(frozen=True)
class Conj:
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("conjunction needs at least one part")


@dataclass(frozen=True)
class Impl:
    body: "Formula"
    head: AtomF


@dataclass(frozen=True)
class Blind:
    vars: tuple
    body: "Formula"


@dataclass(frozen=True)
class ChooseAll:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ChooseEx:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class WithContext:
    inner: "Formula"
    ctx: tuple


@dataclass(frozen=True)
class MacroRef:
    path: AgentPath


Formula = Union[AtomF, Conj, Impl, Blind, ChooseAll, ChooseEx, WithContext, MacroRef]


@dataclass(frozen=True)
class Declaration:
    path: AgentPath
    knowledge: Formula


@dataclass(frozen=True)
class ClassDecl:
    var: str
    lower: int
    template: Declaration


@dataclass(frozen=True)
class Program:
    decls: tuple = ()


def with_context(inner: Formula, ctx) -> Formula:
    """Attach a context, merging into an existing annotation.

    Contexts never nest directly: the lists concatenate with duplicates
    dropped, first occurrence kept.
    """
    paths = list(ctx)
    if isinstance(inner, WithContext):
        paths = list(inner.ctx) + paths
        inner = inner.inner
    merged = []
    for p in paths:
        if p not in merged:
            merged.append(p)
    return WithContext(inner, tuple(merged))


def term_vars(t: Term) -> Iterator[str]:
    """Variable names in t, left to right, repeats included."""
    match t:
        case Var(name):
            yield name
        case Succ(arg):
            yield from term_vars(arg)
        case Plus(left, right):
            yield from term_vars(left)
            yield from term_vars(right)


def is_ground(t: Term) -> bool:
    return next(term_vars(t), None) is None


def atom_vars(a: Atom) -> list:
    seen = []
    for arg in a.args:
        for v in term_vars(arg):
            if v not in seen:
                seen.append(v)
    return seen


def free_vars(f) -> list:
    """Free variables of a formula (or atom/term/path) in first-occurrence order."""
    out: list = []

    def add(names):
        for n in names:
            if n not in out:
                out.append(n)

    def walk(node, bound: frozenset):
        match node:
            case NatConst() | Var() | Succ() | Plus():
                add(v for v in term_vars(node) if v not in bound)
            case Atom(_, args):
                for a in args:
                    walk(a, bound)
            case AgentPath(_, index):
                if index is not None:
                    walk(index, bound)
            case AtomF(atom):
                walk(atom, bound)
            case Conj(parts):
                for p in parts:
                    walk(p, bound)
            case Impl(body, head):
                walk(body, bound)
                walk(head, bound)
            case Blind(vs, body):
                walk(body, bound | set(vs))
            case ChooseAll(v, body) | ChooseEx(v, body):
                walk(body, bound | {v})
            case WithContext(inner, ctx):
                walk(inner, bound)
                for p in ctx:
                    walk(p, bound)
            case MacroRef(path):
                walk(path, bound)
            case _:
                raise TypeError(f"not a syntax node: {node!r}")

    walk(f, frozenset())
    return out


def iter_atoms(f) -> Iterator[Atom]:
    """Every atom occurring in a formula, declaration or program."""
    match f:
        case Program(decls):
            for d in decls:
                yield from iter_atoms(d)
        case ClassDecl(_, _, template):
            yield from iter_atoms(template)
        case Declaration(_, knowledge):
            yield from iter_atoms(knowledge)
        case AtomF(atom):
            yield atom
        case Conj(parts):
            for p in parts:
                yield from iter_atoms(p)
        case Impl(body, head):
            yield from iter_atoms(body)
            yield head.atom
        case Blind(_, body) | ChooseAll(_, body) | ChooseEx(_, body):
            yield from iter_atoms(body)
        case WithContext(inner, _):
            yield from iter_atoms(inner)
        case MacroRef():
            return


def contexts(f) -> Iterator[AgentPath]:
    """Context paths of every annotation inside f, in order."""
    match f:
        case WithContext(inner, ctx):
            yield from contexts(inner)
            yield from ctx
        case Conj(parts):
            for p in parts:
                yield from contexts(p)
        case Impl(body, _):
            yield from contexts(body)
        case Blind(_, body) | ChooseAll(_, body) | ChooseEx(_, body):
            yield from contexts(body)


def has_context(f: Formula) -> bool:
    return next(contexts(f), None) is not None


def has_choose_all(f: Formula) -> bool:
    match f:
        case ChooseAll():
            return True
        case Conj(parts):
            return any(has_choose_all(p) for p in parts)
        case Impl(body, _):
            return has_choose_all(body)
        case Blind(_, body) | ChooseEx(_, body):
            return has_choose_all(body)
        case WithContext(inner, _):
            return has_choose_all(inner)
    return False
