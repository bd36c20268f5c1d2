"""Substitutions, unification and arithmetic over natural-number terms.

Arithmetic is handled by evaluating whatever is ground and inverting
linear patterns (``x``, ``x+k``) against concrete values.  Nothing else is
solved: two non-ground arithmetic terms of different shape do not unify.
"""

from __future__ import annotations

import itertools
from typing import Optional

from .errors import UnboundVariable, UnsupportedPattern
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
    Plus,
    Succ,
    Term,
    Var,
    WithContext,
    free_vars,
    is_ground,
    term_vars,
    with_context,
)

Binding = dict  # variable name -> Term


def eval_term(t: Term, b: Optional[Binding] = None) -> int:
    b = b or {}
    match t:
        case NatConst(value):
            return value
        case Var(name):
            if name not in b:
                raise UnboundVariable(name)
            return eval_term(b[name], b)
        case Succ(arg):
            return eval_term(arg, b) + 1
        case Plus(left, right):
            return eval_term(left, b) + eval_term(right, b)
    raise TypeError(f"not a term: {t!r}")


def normalize_term(t: Term) -> Term:
    """Collapse every ground subterm into a constant."""
    match t:
        case NatConst() | Var():
            return t
        case Succ(arg):
            arg = normalize_term(arg)
            if isinstance(arg, NatConst):
                return NatConst(arg.value + 1)
            return Succ(arg)
        case Plus(left, right):
            left, right = normalize_term(left), normalize_term(right)
            if isinstance(left, NatConst) and isinstance(right, NatConst):
                return NatConst(left.value + right.value)
            return Plus(left, right)
    raise TypeError(f"not a term: {t!r}")


def normalize(node):
    """normalize_term applied throughout an atom, path or formula."""
    match node:
        case NatConst() | Var() | Succ() | Plus():
            return normalize_term(node)
        case Atom(pred, args):
            return Atom(pred, tuple(normalize_term(a) for a in args))
        case AgentPath(name, index):
            return AgentPath(name, None if index is None else normalize_term(index))
        case AtomF(atom):
            return AtomF(normalize(atom))
        case Conj(parts):
            return Conj(tuple(normalize(p) for p in parts))
        case Impl(body, head):
            return Impl(normalize(body), normalize(head))
        case Blind(vs, body):
            return Blind(vs, normalize(body))
        case ChooseAll(v, body):
            return ChooseAll(v, normalize(body))
        case ChooseEx(v, body):
            return ChooseEx(v, normalize(body))
        case WithContext(inner, ctx):
            return with_context(normalize(inner), [normalize(p) for p in ctx])
        case MacroRef(path):
            return MacroRef(normalize(path))
    raise TypeError(f"cannot normalize {node!r}")


def _fresh_name(base: str, avoid: set) -> str:
    for n in itertools.count(1):
        candidate = f"{base}_{n}"
        if candidate not in avoid:
            return candidate
    raise AssertionError("unreachable")


def apply_subst(node, b: Binding):
    """Replace free variables bound by b; quantified variables are renamed
    apart whenever a substituted term would otherwise be captured."""
    if not b:
        return node
    match node:
        case NatConst():
            return node
        case Var(name):
            return b.get(name, node)
        case Succ(arg):
            return Succ(apply_subst(arg, b))
        case Plus(left, right):
            return Plus(apply_subst(left, b), apply_subst(right, b))
        case Atom(pred, args):
            return Atom(pred, tuple(apply_subst(a, b) for a in args))
        case AgentPath(name, index):
            return node if index is None else AgentPath(name, apply_subst(index, b))
        case AtomF(atom):
            return AtomF(apply_subst(atom, b))
        case Conj(parts):
            return Conj(tuple(apply_subst(p, b) for p in parts))
        case Impl(body, head):
            return Impl(apply_subst(body, b), apply_subst(head, b))
        case WithContext(inner, ctx):
            return with_context(apply_subst(inner, b), [apply_subst(p, b) for p in ctx])
        case MacroRef(path):
            return MacroRef(apply_subst(path, b))
        case Blind(vs, body):
            new_vs, body = _under_binder(vs, body, b)
            return Blind(new_vs, body)
        case ChooseAll(v, body):
            (v,), body = _under_binder((v,), body, b)
            return ChooseAll(v, body)
        case ChooseEx(v, body):
            (v,), body = _under_binder((v,), body, b)
            return ChooseEx(v, body)
    raise TypeError(f"cannot substitute into {node!r}")


def _under_binder(vs, body, b: Binding):
    inner = {k: t for k, t in b.items() if k not in vs}
    if not inner:
        return tuple(vs), body
    incoming = set()
    for t in inner.values():
        incoming.update(term_vars(t))
    avoid = incoming | set(free_vars(body)) | set(inner) | set(vs)
    renamed = []
    for v in vs:
        if v in incoming:
            fresh = _fresh_name(v, avoid)
            avoid.add(fresh)
            inner[v] = Var(fresh)
            renamed.append(fresh)
        else:
            renamed.append(v)
    return tuple(renamed), apply_subst(body, inner)


def linear_form(t: Term):
    """(var, k) for terms equal to var+k, (None, k) for ground terms,
    None when more than one variable occurrence is involved."""
    match t:
        case NatConst(value):
            return (None, value)
        case Var(name):
            return (name, 0)
        case Succ(arg):
            inner = linear_form(arg)
            return None if inner is None else (inner[0], inner[1] + 1)
        case Plus(left, right):
            lf, rf = linear_form(left), linear_form(right)
            if lf is None or rf is None:
                return None
            if lf[0] is not None and rf[0] is not None:
                return None
            return (lf[0] or rf[0], lf[1] + rf[1])
    raise TypeError(f"not a term: {t!r}")


def match_index(pattern: Term, n: int) -> Optional[Binding]:
    form = linear_form(pattern)
    if form is None:
        raise UnsupportedPattern(f"index pattern is not var+k: {pattern!r}")
    var, k = form
    if var is None:
        return {} if k == n else None
    if n < k:
        return None
    return {var: NatConst(n - k)}


def _occurs(name: str, t: Term) -> bool:
    return name in term_vars(t)


def _bind(sigma: Binding, name: str, t: Term) -> Binding:
    t = normalize_term(apply_subst(t, sigma))
    step = {name: t}
    out = {k: normalize_term(apply_subst(v, step)) for k, v in sigma.items()}
    out[name] = t
    return out


def _unify_terms(s: Term, t: Term, sigma: Binding) -> Optional[Binding]:
    s = normalize_term(apply_subst(s, sigma))
    t = normalize_term(apply_subst(t, sigma))
    if s == t:
        return sigma
    s_ground, t_ground = is_ground(s), is_ground(t)
    if s_ground and t_ground:
        return None
    if isinstance(s, Var):
        return None if _occurs(s.name, t) else _bind(sigma, s.name, t)
    if isinstance(t, Var):
        return None if _occurs(t.name, s) else _bind(sigma, t.name, s)
    if s_ground or t_ground:
        pattern, value = (t, s.value) if s_ground else (s, t.value)
        form = linear_form(pattern)
        if form is None:
            return None
        var, k = form
        if value < k:
            return None
        return _bind(sigma, var, NatConst(value - k))
    # both non-ground, neither a bare variable: only identical shapes unify
    if type(s) is not type(t):
        return None
    match s, t:
        case Succ(a), Succ(b):
            return _unify_terms(a, b, sigma)
        case Plus(a1, a2), Plus(b1, b2):
            sigma = _unify_terms(a1, b1, sigma)
            return None if sigma is None else _unify_terms(a2, b2, sigma)
    return None


def unify(a: Atom, b: Atom, binding: Optional[Binding] = None) -> Optional[Binding]:
    """Most general unifier of two atoms extending binding, or None."""
    if a.pred != b.pred or len(a.args) != len(b.args):
        return None
    sigma = dict(binding or {})
    for s, t in zip(a.args, b.args):
        sigma = _unify_terms(s, t, sigma)
        if sigma is None:
            return None
    return sigma


def resolve_term(t: Term, sigma: Binding) -> Term:
    return normalize_term(apply_subst(t, sigma))
