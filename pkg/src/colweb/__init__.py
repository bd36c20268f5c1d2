"""Interpreter for a small agent-located logic language with blind and
parallel universally quantified definitions."""

from .errors import ColwebError
from .registry import Registry, load, lookup, materialize, residual_lower, snapshot
from .solver import Answer, Limits, ProofTrace, chain_forward, expand_macro, resolve_query, solve_buq
from .surface import parse_program, parse_query, pretty

__all__ = [
    "Answer",
    "ColwebError",
    "Limits",
    "ProofTrace",
    "Registry",
    "chain_forward",
    "expand_macro",
    "load",
    "lookup",
    "materialize",
    "parse_program",
    "parse_query",
    "pretty",
    "residual_lower",
    "resolve_query",
    "snapshot",
    "solve_buq",
]
