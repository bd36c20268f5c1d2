from importlib.resources import files

import pytest

from colweb import load, parse_program

CORPUS = files("colweb") / "corpus"
CORPUS_FILES = [
    "fib_buq.colw",
    "fib_puq.colw",
    "fib_agents.colw",
    "fib_variation.colw",
    "m_chain.colw",
    "fib_agents_corrupt.colw",
    "empty.colw",
]


def corpus_path(name):
    return str(CORPUS / name)


def corpus_text(name):
    return (CORPUS / name).read_text(encoding="utf-8")


def corpus_registry(name):
    return load(parse_program(corpus_text(name)))


def fib_oracle(n, first=1, second=1):
    """Iterative Fibonacci: f(0)=first, f(1)=second."""
    a, b = first, second
    for _ in range(n):
        a, b = b, a + b
    return a


def fib_standard(n):
    """f(1)=1, f(2)=1 indexing, as used by the agent-located programs."""
    return fib_oracle(n - 1)


@pytest.fixture
def agents():
    return corpus_registry("fib_agents.colw")
