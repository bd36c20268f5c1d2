"""The live multi-agent knowledgebase.

Plain declarations become agent entries.  Class declarations stay
compressed as templates; an instance is produced on demand the first time
some query needs it, after which it is an ordinary agent and its index is
*consumed*.  Explicit declarations that coincide with a class instance
shadow it and count as consumed from the start.
"""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .errors import DuplicateAgent, LoadError
from .surface import pretty, pretty_path
from .syntax import (
    AgentPath,
    AtomF,
    ClassDecl,
    Conj,
    Declaration,
    NatConst,
    Program,
    free_vars,
    is_ground,
)
from .terms import apply_subst, eval_term, linear_form, match_index, normalize

DECLARED = "declared"
MATERIALIZED = "materialized"
CHECKING = "checking"


def path_key(path: AgentPath) -> tuple:
    """Hashable identity of a ground path: (name, index value or None)."""
    if path.index is None:
        return (path.name, None)
    return (path.name, eval_term(path.index))


def ground_path(path: AgentPath) -> AgentPath:
    if path.index is None or isinstance(path.index, NatConst):
        return path
    return AgentPath(path.name, NatConst(eval_term(path.index)))


@dataclass
class AgentEntry:
    path: AgentPath
    knowledge: object
    status: str = DECLARED
    origin: Optional[tuple] = None  # (class id, class-variable value) for instances
    lemmas: list = field(default_factory=list)

    @property
    def explicit(self) -> bool:
        return self.origin is None


@dataclass
class ClassEntry:
    id: str
    decl: ClassDecl
    consumed: set = field(default_factory=set)
    shadowed: set = field(default_factory=set)

    @property
    def var(self) -> str:
        return self.decl.var

    @property
    def template(self) -> Declaration:
        return self.decl.template

    def residual_lower(self) -> int:
        n = self.decl.lower
        while n in self.consumed:
            n += 1
        return n

    def instance(self, value: int) -> Declaration:
        """The template instantiated at class-variable value, arithmetic folded."""
        b = {self.var: NatConst(value)}
        t = self.template
        return Declaration(
            normalize(apply_subst(t.path, b)), normalize(apply_subst(t.knowledge, b))
        )

    def match(self, path: AgentPath) -> Optional[int]:
        if path.name != self.template.path.name or path.index is None:
            return None
        b = match_index(self.template.path.index, eval_term(path.index))
        if b is None:
            return None
        value = b[self.var].value
        return value if value >= self.decl.lower else None


@dataclass(frozen=True)
class ClassMatch:
    cls: ClassEntry
    value: int

    @property
    def binding(self) -> dict:
        return {self.cls.var: NatConst(self.value)}


@dataclass
class Registry:
    agents: dict = field(default_factory=dict)  # path_key -> AgentEntry
    classes: list = field(default_factory=list)
    firings: Counter = field(default_factory=Counter)  # class id -> firings so far
    frozen: bool = False

    def entry(self, path: AgentPath) -> Optional[AgentEntry]:
        return self.agents.get(path_key(path))

    def class_by_id(self, class_id: str) -> ClassEntry:
        for cls in self.classes:
            if cls.id == class_id:
                return cls
        raise KeyError(class_id)

    def freeze(self) -> "Registry":
        """An independent read-only copy; queries against it run on private copies."""
        frozen = copy.deepcopy(self)
        frozen.frozen = True
        return frozen

    def thaw(self) -> "Registry":
        thawed = copy.deepcopy(self)
        thawed.frozen = False
        return thawed

    def _check_writable(self):
        if self.frozen:
            raise LoadError("registry is frozen")


def _class_id(decl: ClassDecl, taken: set) -> str:
    base = pretty_path(decl.template.path)
    cid, n = base, 1
    while cid in taken:
        n += 1
        cid = f"{base}#{n}"
    return cid


def _validate_class(decl: ClassDecl):
    index = decl.template.path.index
    if index is None:
        raise LoadError(f"class template {pretty_path(decl.template.path)} needs an index")
    form = linear_form(index)
    if form is None or form[0] != decl.var:
        raise LoadError(
            f"class index of {pretty_path(decl.template.path)} must be "
            f"{decl.var} or {decl.var}+k"
        )
    stray = [v for v in free_vars(decl.template.knowledge) if v != decl.var]
    if stray:
        raise LoadError(
            f"class template {pretty_path(decl.template.path)} has free variables {stray}"
        )


def load(p: Program) -> Registry:
    r = Registry()
    for decl in p.decls:
        if isinstance(decl, ClassDecl):
            _validate_class(decl)
            cid = _class_id(decl, {c.id for c in r.classes})
            r.classes.append(ClassEntry(cid, decl))
            continue
        if decl.path.index is not None and not is_ground(decl.path.index):
            raise LoadError(f"agent path {pretty_path(decl.path)} is not ground")
        key = path_key(decl.path)
        if key in r.agents:
            raise DuplicateAgent(pretty_path(decl.path))
        r.agents[key] = AgentEntry(ground_path(decl.path), decl.knowledge)
    for entry in r.agents.values():
        for cls in r.classes:
            if entry.path.name != cls.template.path.name or entry.path.index is None:
                continue
            b = match_index(cls.template.path.index, entry.path.index.value)
            if b is not None:
                value = b[cls.var].value
                cls.shadowed.add(value)
                cls.consumed.add(value)
    return r


def lookup(r: Registry, path: AgentPath):
    """Existing entry, else the first matching class instance, else None."""
    entry = r.entry(path)
    if entry is not None:
        return entry
    for cls in r.classes:
        value = cls.match(path)
        if value is not None and value not in cls.shadowed:
            return ClassMatch(cls, value)
    return None


def residual_lower(r: Registry, class_id: str) -> int:
    return r.class_by_id(class_id).residual_lower()


def materialize(r: Registry, path: AgentPath, limits=None, trace=None) -> AgentEntry:
    """Entry at path, instantiating and evaluating a class instance if needed."""
    from .solver import Engine, Limits

    engine = Engine(r, limits or Limits(), trace=trace)
    return engine.materialize(path)


def new_instance(r: Registry, match: ClassMatch) -> AgentEntry:
    """Register a class instance (status checking) and consume its index."""
    r._check_writable()
    decl = match.cls.instance(match.value)
    entry = AgentEntry(
        ground_path(decl.path), decl.knowledge, CHECKING, (match.cls.id, match.value)
    )
    r.agents[path_key(entry.path)] = entry
    match.cls.consumed.add(match.value)
    return entry


def drop_instance(r: Registry, entry: AgentEntry):
    """Undo new_instance after a failed evaluation."""
    del r.agents[path_key(entry.path)]
    cid, value = entry.origin
    r.class_by_id(cid).consumed.discard(value)


def _entry_formula(entry: AgentEntry):
    parts = list(entry.knowledge.parts) if isinstance(entry.knowledge, Conj) else [entry.knowledge]
    extra = [AtomF(a) for a in entry.lemmas if AtomF(a) not in parts]
    if not extra:
        return entry.knowledge
    return Conj(tuple([entry.knowledge] + extra))


def _sort_key(entry: AgentEntry):
    index = entry.path.index
    return (entry.path.name, -1 if index is None else index.value)


def snapshot(r: Registry) -> str:
    """Deterministic program text for the current state of the knowledgebase."""
    lines = []
    for entry in sorted(r.agents.values(), key=_sort_key):
        if entry.status == CHECKING:
            continue
        lines.append(pretty(Declaration(entry.path, _entry_formula(entry))))
    for cls in r.classes:
        lower = cls.residual_lower()
        lines.append(pretty(ClassDecl(cls.var, lower, cls.template)))
        above = sorted(n for n in cls.consumed if n > lower)
        if above:
            listed = ", ".join(str(n) for n in above)
            lines.append(f"# {cls.id}: {cls.var} = {listed} already expanded")
    return "".join(line + "\n" for line in lines)


def atoms_of(entry: AgentEntry) -> list:
    """Ground atoms stated directly by an entry (knowledge conjuncts and lemmas)."""
    parts = entry.knowledge.parts if isinstance(entry.knowledge, Conj) else (entry.knowledge,)
    out = [p.atom for p in parts if isinstance(p, AtomF) and not free_vars(p)]
    out.extend(a for a in entry.lemmas if a not in out)
    return out


__all__ = [
    "AgentEntry",
    "ClassEntry",
    "ClassMatch",
    "Registry",
    "atoms_of",
    "load",
    "lookup",
    "materialize",
    "path_key",
    "residual_lower",
    "snapshot",
]
