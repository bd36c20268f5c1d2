"""Query evaluation.

Blind-quantified rules (``cla``) are used by SLD backward chaining and never
change the knowledgebase.  Rules that come from class agents are used by
semi-naive forward chaining; every fact they derive is kept as a lemma, and
firing a class-level rule expands the class by one more instance.  Context
annotations ``F @ [/a, /b]`` evaluate F against the pooled knowledge of
exactly the listed agents, materializing class instances on the way.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    AbsentAgent,
    CycleError,
    DepthExceeded,
    MissingArgument,
    RoundsExceeded,
    SolveFailure,
)
from .registry import (
    CHECKING,
    MATERIALIZED,
    AgentEntry,
    ClassMatch,
    Registry,
    drop_instance,
    ground_path,
    lookup,
    new_instance,
    path_key,
)
from .surface import pretty, pretty_atom, pretty_path, pretty_term
from .syntax import (
    AgentPath,
    Atom,
    AtomF,
    Blind,
    ChooseAll,
    ChooseEx,
    Conj,
    Impl,
    MacroRef,
    NatConst,
    Var,
    WithContext,
    atom_vars,
    free_vars,
    has_choose_all,
    has_context,
    is_ground,
    with_context,
)
from .terms import apply_subst, linear_form, normalize, resolve_term, unify

BUQ = "BUQ"
PUQ = "PUQ"


@dataclass(frozen=True)
class Limits:
    depth: int = 512
    rounds: int = 10_000

    def __post_init__(self):
        if self.depth < 1 or self.rounds < 1:
            raise ValueError("depth and rounds limits must be at least 1")


@dataclass(frozen=True)
class Clause:
    kind: str
    vars: tuple
    body: tuple
    head: Atom
    source: Optional[AgentPath] = None
    class_id: Optional[str] = None
    # set only for rules taken straight from a class template
    class_var: Optional[str] = None
    class_lower: int = 0
    excluded: frozenset = frozenset()

    def implication(self, b: Optional[dict] = None):
        b = b or {}
        head = AtomF(normalize(apply_subst(self.head, b)))
        if not self.body:
            return head
        body = [AtomF(normalize(apply_subst(a, b))) for a in self.body]
        return Impl(body[0] if len(body) == 1 else Conj(tuple(body)), head)

    def __str__(self):
        text = pretty(self.implication())
        inner = [v for v in self.vars if v != self.class_var]
        if inner:
            text = f"cla {', '.join(inner)}: {text}"
        if self.class_var:
            text = f"wedge {self.class_var}: {text}"
        return text


def _body_atoms(f) -> Optional[list]:
    match f:
        case AtomF(atom):
            return [atom]
        case Conj(parts):
            out = []
            for p in parts:
                sub = _body_atoms(p)
                if sub is None:
                    return None
                out.extend(sub)
            return out
    return None


def clause_from_formula(f, kind: str, source=None, class_id=None) -> Optional[Clause]:
    """Horn clause for ``cla vs: body -> head``, ``body -> head`` or a
    quantified atom; None for anything else."""
    declared = []
    while isinstance(f, Blind):
        declared.extend(v for v in f.vars if v not in declared)
        f = f.body
    match f:
        case Impl(body, head):
            atoms = _body_atoms(body)
            if atoms is None:
                return None
            body_atoms, head_atom = tuple(atoms), head.atom
        case AtomF(atom) if declared or free_vars(f):
            body_atoms, head_atom = (), atom
        case _:
            return None
    names = list(declared)
    for a in body_atoms + (head_atom,):
        names.extend(v for v in atom_vars(a) if v not in names)
    return Clause(kind, tuple(names), body_atoms, head_atom, source, class_id)


# proof traces


@dataclass(frozen=True)
class Firing:
    clause: Clause
    binding: tuple  # ((var, Term), ...) in clause.vars order
    premises: tuple
    derived: Atom

    def line(self) -> str:
        b = dict(self.binding)
        shown = ", ".join(f"{v}={pretty_term(t)}" for v, t in self.binding)
        return f"FIRE {pretty(self.clause.implication(b))} WITH {{{shown}}} DERIVES {pretty_atom(self.derived)}"


@dataclass(frozen=True)
class Resolution:
    goal: Atom
    clause: Clause
    unifier: tuple

    def line(self) -> str:
        return f"RESOLVE {pretty_atom(self.goal)} VIA {self.clause}"


@dataclass(frozen=True)
class FactUse:
    atom: Atom
    source: Optional[AgentPath] = None

    def line(self) -> str:
        where = pretty_path(self.source) if self.source is not None else "-"
        return f"USE {pretty_atom(self.atom)} FROM {where}"


@dataclass(frozen=True)
class Materialize:
    path: AgentPath

    def line(self) -> str:
        return f"MATERIALIZE {pretty_path(self.path)}"


@dataclass(frozen=True)
class MacroExpand:
    path: AgentPath

    def line(self) -> str:
        return f"MACRO {pretty_path(self.path)}"


@dataclass
class ProofTrace:
    steps: list = field(default_factory=list)

    def add(self, step):
        self.steps.append(step)

    def extend(self, steps):
        self.steps.extend(steps.steps if isinstance(steps, ProofTrace) else steps)

    def __len__(self):
        return len(self.steps)

    def lines(self) -> list:
        return [s.line() for s in self.steps]

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def firings(self, class_id: Optional[str] = None) -> list:
        return [
            s
            for s in self.steps
            if isinstance(s, Firing) and (class_id is None or s.clause.class_id == class_id)
        ]

    def derived(self) -> list:
        return [s.derived for s in self.firings()]

    def unfounded(self) -> list:
        """Firings with a premise that no earlier USE or FIRE step supplies."""
        seen, bad = set(), []
        for s in self.steps:
            if isinstance(s, FactUse):
                seen.add(s.atom)
            elif isinstance(s, Firing):
                if any(p not in seen for p in s.premises):
                    bad.append(s)
                seen.add(s.derived)
        return bad


@dataclass
class Answer:
    success: bool
    witnesses: dict = field(default_factory=dict)
    trace: ProofTrace = field(default_factory=ProofTrace)

    def render(self) -> str:
        if not self.success:
            return "no"
        return ", ".join(["yes"] + [f"{v}={pretty_term(t)}" for v, t in self.witnesses.items()])


class _Fresh:
    def __init__(self, tag: str = ""):
        self.tag = tag
        self.counter = itertools.count(1)

    def __call__(self, base: str) -> str:
        return f"_{base}_{self.tag}{next(self.counter)}"

    def rename_clause(self, clause: Clause):
        b = {v: Var(self(v)) for v in clause.vars}
        return (
            tuple(apply_subst(a, b) for a in clause.body),
            apply_subst(clause.head, b),
        )


def _goal_binding(goal: Atom, sigma: dict) -> dict:
    return {v: resolve_term(Var(v), sigma) for v in atom_vars(goal)}


# backward chaining


@dataclass(frozen=True)
class _Check:
    """Deferred equality for a ground goal argument facing a non-invertible head term."""

    var: str
    value: int


def _generalize(goal: Atom, head: Atom, fresh: _Fresh):
    args, checks = [], []
    for g, h in zip(goal.args, head.args):
        if isinstance(g, NatConst) and not is_ground(h) and linear_form(h) is None:
            v = fresh("eq")
            args.append(Var(v))
            checks.append(_Check(v, g.value))
        else:
            args.append(g)
    return Atom(goal.pred, tuple(args)), checks


def _prune(sigma: dict, keep: set, pending) -> dict:
    """Drop bindings no pending goal can reach.  sigma is idempotent, so the
    bindings of the query's own variables are already fully resolved."""
    live = set(keep)
    for item, _ in pending:
        if isinstance(item, _Check):
            live.add(item.var)
        else:
            live.update(atom_vars(item))
    return {v: t for v, t in sigma.items() if v in live}


def solve_buq(goal: Atom, facts, clauses, depth_limit: int = 512, *, sources=None) -> Answer:
    """SLD resolution: facts in order, then clauses in order, body left to
    right, first success wins.  Nothing is added to the store."""
    if depth_limit < 1:
        raise ValueError("depth_limit must be at least 1")
    sources = sources or {}
    facts = list(facts)
    clauses = list(clauses)
    fresh = _Fresh("b")
    steps: list = []
    goal = normalize(goal)
    goal_vars = set(atom_vars(goal))

    def expand(goals, sigma):
        (item, depth), rest = goals[0], goals[1:]
        if isinstance(item, _Check):
            value = resolve_term(Var(item.var), sigma)
            if value == NatConst(item.value):
                yield rest, sigma, ()
            return
        g = normalize(apply_subst(item, sigma))
        for fact in facts:
            s = unify(g, fact, sigma)
            if s is not None:
                yield rest, s, (FactUse(fact, sources.get(fact)),)
        for clause in clauses:
            body, head = fresh.rename_clause(clause)
            target, checks = _generalize(g, head, fresh)
            s = unify(target, head, sigma)
            if s is None:
                continue
            if depth + 1 > depth_limit:
                raise DepthExceeded(
                    f"resolution depth passed {depth_limit} while proving {pretty_atom(g)}"
                )
            subgoals = tuple((a, depth + 1) for a in body)
            subgoals += tuple((c, depth + 1) for c in checks)
            local = atom_vars(target) + atom_vars(head)
            step = Resolution(g, clause, tuple((v, s[v]) for v in local if v in s))
            pending = subgoals + rest
            yield pending, _prune(s, goal_vars, pending), (step,)

    # explicit choice-point stack; deep proofs must not hit Python's recursion limit
    stack = [(expand(((goal, 0),), {}), 0)]
    while stack:
        alternatives, mark = stack[-1]
        try:
            goals, sigma, new_steps = next(alternatives)
        except StopIteration:
            stack.pop()
            continue
        del steps[mark:]
        steps.extend(new_steps)
        if not goals:
            return Answer(True, _goal_binding(goal, sigma), ProofTrace(list(steps)))
        stack.append((expand(goals, sigma), len(steps)))
    return Answer(False, {}, ProofTrace())


# forward chaining


class _FactIndex:
    """Facts in insertion order, indexed by predicate and by ground first argument."""

    def __init__(self):
        self.atoms: list = []
        self.members: set = set()
        self.by_pred: dict = {}
        self.by_first: dict = {}

    def __contains__(self, atom):
        return atom in self.members

    def __len__(self):
        return len(self.atoms)

    def add(self, atom: Atom):
        pos = len(self.atoms)
        self.atoms.append(atom)
        self.members.add(atom)
        self.by_pred.setdefault((atom.pred, atom.arity), []).append(pos)
        if atom.args and isinstance(atom.args[0], NatConst):
            key = (atom.pred, atom.arity, atom.args[0].value)
            self.by_first.setdefault(key, []).append(pos)

    def candidates(self, pattern: Atom, lo: int, hi: int):
        if pattern.args and isinstance(pattern.args[0], NatConst):
            positions = self.by_first.get(
                (pattern.pred, pattern.arity, pattern.args[0].value), []
            )
        else:
            positions = self.by_pred.get((pattern.pred, pattern.arity), [])
        for i in range(bisect_left(positions, lo), len(positions)):
            pos = positions[i]
            if pos >= hi:
                break
            yield self.atoms[pos]


def _instances(clause: Clause, index: _FactIndex, delta_start: int, visible: int):
    """Body matches with at least one premise from the last round's facts."""
    body = clause.body

    def match(i, pivot, sigma, premises):
        if i == len(body):
            yield sigma, premises
            return
        if i < pivot:
            lo, hi = 0, delta_start
        elif i == pivot:
            lo, hi = delta_start, visible
        else:
            lo, hi = 0, visible
        pattern = normalize(apply_subst(body[i], sigma))
        for fact in index.candidates(pattern, lo, hi):
            s = unify(pattern, fact, sigma)
            if s is not None:
                yield from match(i + 1, pivot, s, premises + (fact,))

    for pivot in range(len(body)):
        yield from match(0, pivot, {}, ())


def _guard_ok(clause: Clause, sigma: dict) -> bool:
    if clause.class_var is None:
        return True
    value = resolve_term(Var(clause.class_var), sigma)
    if not isinstance(value, NatConst):
        return False
    return value.value >= clause.class_lower and value.value not in clause.excluded


def chain_forward(facts, clauses, goal: Optional[Atom] = None, max_rounds: int = 10_000, *, sources=None):
    """Semi-naive forward chaining.  Returns (derived atoms, Answer, ProofTrace)."""
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    sources = sources or {}
    index = _FactIndex()
    for f in facts:
        if f not in index:
            index.add(f)
    trace = ProofTrace()
    announced: set = set()
    derived: list = []
    goal = normalize(goal) if goal is not None else None

    def announce(atoms):
        for a in atoms:
            if a not in announced:
                announced.add(a)
                trace.add(FactUse(a, sources.get(a)))

    def done(sigma):
        return derived, Answer(True, _goal_binding(goal, sigma), trace), trace

    if goal is not None:
        for fact in index.atoms:
            s = unify(goal, fact)
            if s is not None:
                announce([fact])
                return done(s)

    delta_start = 0
    for _ in range(max_rounds):
        visible = len(index)
        for clause in clauses:
            if not clause.body:
                continue
            for sigma, premises in _instances(clause, index, delta_start, visible):
                if not _guard_ok(clause, sigma):
                    continue
                head = normalize(apply_subst(clause.head, sigma))
                if free_vars(head) or head in index:
                    continue
                index.add(head)
                derived.append(head)
                announce(premises)
                binding = tuple((v, resolve_term(Var(v), sigma)) for v in clause.vars)
                trace.add(Firing(clause, binding, premises, head))
                announced.add(head)
                if goal is not None:
                    s = unify(goal, head)
                    if s is not None:
                        return done(s)
        if len(index) == visible:
            # fixpoint: success only matters when there was nothing to look for
            return derived, Answer(goal is None, {}, trace), trace
        delta_start = visible
    if goal is not None:
        raise RoundsExceeded(
            f"{pretty_atom(goal)} not derived within {max_rounds} forward-chaining rounds"
        )
    return derived, Answer(False, {}, trace), trace


# the query engine


@dataclass
class Store:
    facts: list = field(default_factory=list)
    sources: dict = field(default_factory=dict)
    buq: list = field(default_factory=list)
    puq: list = field(default_factory=list)
    strategies: list = field(default_factory=list)  # (agent path, formula)

    def add_fact(self, atom: Atom, source):
        if atom not in self.sources:
            self.facts.append(atom)
            self.sources[atom] = source


def _compose(first: dict, second: dict) -> dict:
    out = {k: resolve_term(v, second) for k, v in first.items()}
    out.update(second)
    return out


def _conclusion(f) -> Optional[Atom]:
    match f:
        case AtomF(atom):
            return atom
        case ChooseAll(_, body) | ChooseEx(_, body):
            return _conclusion(body)
        case WithContext(inner, _):
            return _conclusion(inner)
    return None


def _ground_form(f, witnesses):
    """f with each ade-variable replaced by its witness and annotations dropped."""
    it = iter(witnesses)

    def walk(node, b):
        match node:
            case ChooseEx(v, body):
                _, value = next(it)
                return walk(body, {**b, v: value})
            case WithContext(inner, _):
                return walk(inner, b)
            case Conj(parts):
                return Conj(tuple(walk(p, b) for p in parts))
        return normalize(apply_subst(node, b))

    return walk(f, {})


def _ground_atoms(f) -> list:
    parts = f.parts if isinstance(f, Conj) else (f,)
    return [p.atom for p in parts if isinstance(p, AtomF) and not free_vars(p)]


class Engine:
    """One evaluation session over a registry, accumulating a single trace."""

    def __init__(self, registry: Registry, limits: Limits = Limits(), args=(), trace=None):
        self.r = registry
        self.limits = limits
        self.args = list(args)
        self.trace = trace if trace is not None else ProofTrace()
        self.fresh = _Fresh()

    # agents

    def _ground(self, path: AgentPath) -> AgentPath:
        path = normalize(path)
        if path.index is not None and not is_ground(path.index):
            raise SolveFailure(f"agent index in {pretty_path(path)} is not ground")
        return ground_path(path)

    def materialize(self, path: AgentPath) -> AgentEntry:
        path = self._ground(path)
        found = lookup(self.r, path)
        if found is None:
            raise AbsentAgent(pretty_path(path))
        if isinstance(found, AgentEntry):
            if found.status == CHECKING:
                raise CycleError(pretty_path(path))
            return found
        entry = new_instance(self.r, found)
        self.trace.add(Materialize(entry.path))
        claims = has_context(entry.knowledge)
        try:
            knowledge, _ = self.settle(entry.knowledge)
        except BaseException:
            drop_instance(self.r, entry)
            raise
        entry.knowledge = knowledge
        entry.lemmas = _ground_atoms(knowledge) if claims else []
        entry.status = MATERIALIZED
        return entry

    def expand_once(self, path: AgentPath):
        path = self._ground(path)
        self.trace.add(MacroExpand(path))
        found = lookup(self.r, path)
        if found is None:
            raise AbsentAgent(pretty_path(path))
        if isinstance(found, ClassMatch):
            return found.cls.instance(found.value).knowledge
        return found.knowledge

    def settle(self, f):
        """Evaluate the context claims in f; returns (ground form, witnesses).

        Knowledge with no annotation, or waiting on an ``ada`` move, is
        returned unchanged.
        """
        if has_choose_all(f) or not has_context(f):
            return f, []
        if isinstance(f, Conj):
            parts, witnesses = [], []
            for p in f.parts:
                settled, w = self.settle(p)
                parts.append(settled)
                witnesses.extend(w)
            return Conj(tuple(parts)), witnesses
        _, witnesses = self.solve(f, Store())
        return _ground_form(f, witnesses), witnesses

    # stores

    def context_store(self, ctx) -> Store:
        entries = [self.materialize(p) for p in ctx]
        store = Store()
        for entry in entries:
            self.add_entry(store, entry, BUQ if entry.explicit else PUQ)
        return store

    def global_store(self) -> Store:
        store = Store()
        class_rules = []
        for cls in self.r.classes:
            clause = clause_from_formula(cls.template.knowledge, PUQ, cls.template.path, cls.id)
            if clause is None:
                continue
            others = tuple(v for v in clause.vars if v != cls.var)
            class_rules.append(
                Clause(
                    PUQ,
                    (cls.var,) + others,
                    clause.body,
                    clause.head,
                    cls.template.path,
                    cls.id,
                    cls.var,
                    cls.decl.lower,
                    frozenset(cls.shadowed),
                )
            )
        ruled = {c.class_id for c in class_rules}
        for entry in list(self.r.agents.values()):
            if entry.status == CHECKING:
                continue
            if entry.origin is not None and entry.origin[0] in ruled:
                for lemma in entry.lemmas:
                    store.add_fact(lemma, entry.path)
                continue
            self.add_entry(store, entry, BUQ if entry.explicit else PUQ)
        store.puq.extend(class_rules)
        return store

    def add_entry(self, store: Store, entry: AgentEntry, kind: str):
        class_id = entry.origin[0] if entry.origin else None
        self._add_knowledge(store, entry.knowledge, entry, kind, class_id, {path_key(entry.path)})
        for lemma in entry.lemmas:
            store.add_fact(lemma, entry.path)

    def _add_knowledge(self, store, f, entry, kind, class_id, visited):
        match f:
            case Conj(parts):
                for p in parts:
                    self._add_knowledge(store, p, entry, kind, class_id, visited)
                return
            case AtomF(atom) if not free_vars(f):
                store.add_fact(normalize(atom), entry.path)
                return
            case MacroRef(path):
                key = path_key(self._ground(path))
                if key in visited:
                    raise CycleError(pretty_path(path))
                expansion = self.expand_once(path)
                self._add_knowledge(store, expansion, entry, kind, class_id, visited | {key})
                return
        clause = clause_from_formula(f, kind, entry.path, class_id)
        if clause is None:
            store.strategies.append((entry.path, f))
        elif kind == PUQ and clause.body:
            store.puq.append(clause)
        else:
            store.buq.append(clause)

    # evaluation

    def solve(self, f, store: Optional[Store]):
        """Evaluate formula f; returns (binding, ade witnesses outermost first).

        store None stands for the program-wide knowledgebase.
        """
        match f:
            case AtomF(atom):
                return self.prove(atom, store), []
            case Conj(parts):
                sigma, witnesses = {}, []
                for p in parts:
                    s, w = self.solve(apply_subst(p, sigma), store)
                    sigma = _compose(sigma, s)
                    witnesses.extend(w)
                return sigma, witnesses
            case ChooseEx(v, body):
                name = self.fresh(v)
                s, w = self.solve(apply_subst(body, {v: Var(name)}), store)
                value = resolve_term(Var(name), s)
                if not is_ground(value):
                    raise SolveFailure(f"no witness found for {v}")
                return s, [(v, value)] + w
            case ChooseAll(v, body):
                if not self.args:
                    raise MissingArgument(v)
                n = self.args.pop(0)
                return self.solve(apply_subst(body, {v: NatConst(n)}), store)
            case WithContext(inner, ctx):
                return self.solve(inner, self.context_store(ctx))
            case MacroRef(path):
                return self.solve(self.expand_once(path), store)
        raise SolveFailure(f"cannot evaluate {pretty(f)} as a query")

    def prove(self, atom: Atom, store: Optional[Store]) -> dict:
        goal = normalize(atom)
        if store is None:
            store = self.global_store()
        facts = list(store.facts)
        if store.puq:
            derived, answer, trace = chain_forward(
                facts, store.puq, goal, self.limits.rounds, sources=store.sources
            )
            self._record_forward(trace)
            if answer.success:
                return answer.witnesses
            facts.extend(derived)
        if facts or store.buq:
            answer = solve_buq(goal, facts, store.buq, self.limits.depth, sources=store.sources)
            if answer.success:
                self.trace.extend(answer.trace)
                return answer.witnesses
        for path, formula in store.strategies:
            try:
                return self._use_strategy(goal, path, formula)
            except SolveFailure:
                continue
        raise SolveFailure(f"{pretty_atom(goal)} is not derivable")

    def _record_forward(self, trace: ProofTrace):
        for step in trace.steps:
            if isinstance(step, Firing) and step.clause.class_id is not None:
                self.r.firings[step.clause.class_id] += 1
                if step.clause.class_var is not None:
                    self._expand_class(step)
            self.trace.add(step)

    def _expand_class(self, step: Firing):
        cls = self.r.class_by_id(step.clause.class_id)
        value = dict(step.binding)[cls.var].value
        path = cls.instance(value).path
        entry = self.r.entry(path)
        if entry is None:
            entry = new_instance(self.r, ClassMatch(cls, value))
            entry.status = MATERIALIZED
            self.trace.add(Materialize(entry.path))
        if step.derived not in entry.lemmas:
            entry.lemmas.append(step.derived)

    def _rename_binders(self, f):
        match f:
            case ChooseAll(v, body) | ChooseEx(v, body):
                name = self.fresh(v)
                body = self._rename_binders(apply_subst(body, {v: Var(name)}))
                return type(f)(name, body)
            case WithContext(inner, ctx):
                return with_context(self._rename_binders(inner), ctx)
        return f

    def _use_strategy(self, goal: Atom, path: AgentPath, formula) -> dict:
        """Answer goal through an agent whose knowledge is a quantified claim
        such as ``ada n: (ade y: fib(n,y)) @ [/a[n]]``: unify the goal with the
        claim's atom to fix the ``ada`` moves, then evaluate the claim."""
        formula = self._rename_binders(formula)
        conclusion = _conclusion(formula)
        if conclusion is None:
            raise SolveFailure(f"knowledge of {pretty_path(path)} does not conclude an atom")
        sigma = unify(goal, conclusion)
        if sigma is None:
            raise SolveFailure(f"{pretty_atom(goal)} does not match {pretty_path(path)}")
        claim = self._instantiate(formula, sigma)
        s, _ = self.solve(claim, Store())
        total = _compose(sigma, s)
        answer = _goal_binding(goal, total)
        if not all(is_ground(t) for t in answer.values()):
            raise SolveFailure(f"{pretty_path(path)} left {pretty_atom(goal)} undetermined")
        self.trace.add(FactUse(normalize(apply_subst(goal, answer)), path))
        return answer

    def _instantiate(self, f, sigma):
        match f:
            case ChooseAll(v, body):
                value = resolve_term(Var(v), sigma)
                if not is_ground(value):
                    raise SolveFailure(f"the move for 'ada {v}' is not fixed by the goal")
                return self._instantiate(apply_subst(body, {v: value}), sigma)
            case ChooseEx(_, body):
                # renamed apart already, so the variable can stay free and be solved for
                return self._instantiate(body, sigma)
            case WithContext(inner, ctx):
                return with_context(
                    self._instantiate(inner, sigma), [normalize(apply_subst(p, sigma)) for p in ctx]
                )
        return normalize(apply_subst(f, sigma))


def resolve_query(r: Registry, q, limits: Optional[Limits] = None, args=()) -> Answer:
    """Evaluate a query against r, memoizing class instances into r.

    Free variables of q are treated as ``ade`` variables.  A frozen
    registry is queried through a private copy.  Raises SolveFailure when
    the query is not derivable.
    """
    if r.frozen:
        r = r.thaw()
    for v in reversed(free_vars(q)):
        q = ChooseEx(v, q)
    engine = Engine(r, limits or Limits(), args)
    _, witnesses = engine.solve(q, None)
    return Answer(True, dict(witnesses), engine.trace)


def expand_macro(r: Registry, path: AgentPath, _visited: frozenset = frozenset()):
    """Knowledge of the agent at path with every agent reference inlined.

    Class instances are instantiated from the template without being
    evaluated or registered.
    """
    path = ground_path(normalize(path))
    key = path_key(path)
    if key in _visited:
        raise CycleError(pretty_path(path))
    found = lookup(r, path)
    if found is None:
        raise AbsentAgent(pretty_path(path))
    if isinstance(found, ClassMatch):
        knowledge = found.cls.instance(found.value).knowledge
    else:
        knowledge = found.knowledge
    return _inline(r, knowledge, _visited | {key})


def _inline(r, f, visited):
    match f:
        case MacroRef(path):
            return expand_macro(r, path, visited)
        case Conj(parts):
            return Conj(tuple(_inline(r, p, visited) for p in parts))
        case Impl(body, head):
            return Impl(_inline(r, body, visited), head)
        case Blind(vs, body):
            return Blind(vs, _inline(r, body, visited))
        case ChooseAll(v, body):
            return ChooseAll(v, _inline(r, body, visited))
        case ChooseEx(v, body):
            return ChooseEx(v, _inline(r, body, visited))
        case WithContext(inner, ctx):
            return with_context(_inline(r, inner, visited), ctx)
    return f
