"""Validity check run before any query: every context-annotated claim in the
program must be derivable from the agents it names.

Class agents denote infinitely many declarations; only the first few
unconsumed instances of each are checked, and the report says so.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from .errors import AbsentAgent, CycleError, LimitExceeded, SolveFailure
from .registry import AgentEntry, ClassMatch, Registry, ground_path, lookup, path_key
from .solver import Engine, Limits, ProofTrace
from .surface import pretty_path, pretty_term
from .syntax import AgentPath, Declaration, contexts, has_choose_all, has_context, is_ground
from .terms import normalize


@dataclass(frozen=True)
class Valid:
    trace: ProofTrace
    witnesses: tuple = ()

    label = "VALID"

    @property
    def reason(self) -> str:
        return f"{len(self.trace)} proof steps"


@dataclass(frozen=True)
class Invalid:
    reason: str

    label = "INVALID"


@dataclass(frozen=True)
class Skipped:
    reason: str

    label = "SKIPPED"


@dataclass
class CheckReport:
    entries: list = field(default_factory=list)  # (AgentPath, verdict)
    class_sample: int = 0

    @property
    def overall(self) -> bool:
        return not any(isinstance(v, Invalid) for _, v in self.entries)

    def invalid(self) -> list:
        return [(p, v) for p, v in self.entries if isinstance(v, Invalid)]

    def text(self) -> str:
        lines = [f"{pretty_path(p)}: {v.label} — {v.reason}" for p, v in self.entries]
        verdict = "VALID" if self.overall else "INVALID"
        lines.append(
            f"overall: {verdict} (class agents checked on their first "
            f"{self.class_sample} unconsumed instances only)"
        )
        return "".join(line + "\n" for line in lines)

    def records(self) -> str:
        lines = []
        for p, v in self.entries:
            line = f"path={pretty_path(p)} verdict={v.label}"
            if isinstance(v, Valid):
                line += f" steps={len(v.trace)}"
                line += "".join(f" {name}={pretty_term(t)}" for name, t in v.witnesses)
            else:
                line += f" reason={v.reason.replace(' ', '_')}"
            lines.append(line)
        lines.append(f"overall={'true' if self.overall else 'false'} class_sample={self.class_sample}")
        return "".join(line + "\n" for line in lines)


class _Checker:
    def __init__(self, registry: Registry, limits: Limits):
        self.r = registry
        self.limits = limits
        self.verdicts: dict = {}
        self.active: set = set()

    def declaration_at(self, path: AgentPath) -> Optional[Declaration]:
        found = lookup(self.r, path)
        if isinstance(found, AgentEntry):
            return Declaration(found.path, found.knowledge)
        if isinstance(found, ClassMatch):
            return found.cls.instance(found.value)
        return None

    def check(self, d: Declaration):
        key = path_key(d.path)
        if key in self.verdicts:
            return self.verdicts[key]
        if key in self.active:
            return Invalid("cyclic dependency")
        self.active.add(key)
        try:
            verdict = self._check(d)
        finally:
            self.active.discard(key)
        self.verdicts[key] = verdict
        return verdict

    def _check(self, d: Declaration):
        knowledge = d.knowledge
        if not has_context(knowledge):
            return Skipped("axiomatic")
        if has_choose_all(knowledge):
            return Skipped("waits on an ada move; checked when queried")
        for ctx in contexts(knowledge):
            ctx = normalize(ctx)
            if ctx.index is not None and not is_ground(ctx.index):
                return Invalid(f"context {pretty_path(ctx)} is not ground")
            ctx = ground_path(ctx)
            target = self.declaration_at(ctx)
            if target is None:
                return Invalid(f"context {pretty_path(ctx)} does not exist")
            if isinstance(self.check(target), Invalid):
                return Invalid(f"context {pretty_path(ctx)} is invalid")
        engine = Engine(self.r, self.limits)
        try:
            _, witnesses = engine.settle(knowledge)
        except CycleError:
            return Invalid("cyclic dependency")
        except LimitExceeded:
            return Invalid("inconclusive: limit")
        except AbsentAgent as exc:
            return Invalid(f"context {exc.path} does not exist")
        except SolveFailure as exc:
            return Invalid(str(exc))
        return Valid(engine.trace, tuple(witnesses))


def check_declaration(r: Registry, d: Declaration, limits: Optional[Limits] = None):
    """Verdict for one declaration.  Memoizes class instances into r."""
    return _Checker(r, limits or Limits()).check(d)


def check_program(r: Registry, class_sample: int = 5, limits: Optional[Limits] = None) -> CheckReport:
    """Check every explicit declaration and a prefix of every class agent.

    Runs on a private copy, so r is left exactly as it was.
    """
    if class_sample < 1:
        raise ValueError("class_sample must be at least 1")
    work = copy.deepcopy(r)
    work.frozen = False
    checker = _Checker(work, limits or Limits())
    report = CheckReport(class_sample=class_sample)
    explicit = [e for e in work.agents.values() if e.explicit]
    pending = []
    for cls in work.classes:
        values, n = [], cls.decl.lower
        while len(values) < class_sample:
            if n not in cls.consumed:
                values.append(n)
            n += 1
        pending.extend((cls, v) for v in values)
    for entry in explicit:
        d = Declaration(entry.path, entry.knowledge)
        report.entries.append((entry.path, checker.check(d)))
    for cls, value in pending:
        d = cls.instance(value)
        report.entries.append((ground_path(d.path), checker.check(d)))
    return report
