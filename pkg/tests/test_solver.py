import pytest

from colweb import expand_macro, parse_program, pretty, resolve_query, snapshot
from colweb.errors import (
    AbsentAgent,
    CycleError,
    DepthExceeded,
    MissingArgument,
    RoundsExceeded,
    SolveFailure,
)
from colweb.registry import load
from colweb.solver import BUQ, PUQ, Firing, Limits, chain_forward, clause_from_formula, solve_buq
from colweb.surface import parse_path, parse_query
from colweb.syntax import AgentPath, NatConst

from conftest import corpus_registry, fib_oracle, fib_standard

RULE = "cla x, y, z: fib(x,y) & fib(x+1,z) -> fib(x+2,y+z)"
BASE = [parse_query("fib(0,1)").atom, parse_query("fib(1,1)").atom]
BUQ_RULE = clause_from_formula(parse_query(RULE), BUQ)
PUQ_RULE = clause_from_formula(parse_query(RULE), PUQ)


def atom(text):
    return parse_query(text).atom


def goal(n):
    return atom(f"fib({n},X)")


class TestSolveBuq:
    def test_third_number(self):
        ans = solve_buq(goal(3), BASE, [BUQ_RULE], 64)
        assert ans.success and ans.witnesses == {"X": NatConst(3)}

    def test_fact_goal(self):
        ans = solve_buq(atom("fib(0,1)"), BASE, [BUQ_RULE], 64)
        assert ans.success
        assert ans.trace.lines() == ["USE fib(0,1) FROM -"]

    def test_no_rules(self):
        assert not solve_buq(goal(3), BASE, [], 64).success

    def test_store_untouched(self):
        facts = list(BASE)
        solve_buq(goal(8), facts, [BUQ_RULE], 64)
        assert facts == BASE

    def test_depth_exceeded_is_distinct(self):
        with pytest.raises(DepthExceeded):
            solve_buq(goal(12), BASE, [BUQ_RULE], 3)

    def test_genuine_failure_within_depth(self):
        assert not solve_buq(atom("fib(3,4)"), BASE, [BUQ_RULE], 64).success


class TestChainForward:
    def test_lemma_listing(self):
        derived, ans, trace = chain_forward(BASE, [PUQ_RULE], goal(3))
        assert derived == [atom("fib(2,2)"), atom("fib(3,3)")]
        assert ans.witnesses == {"X": NatConst(3)}
        fired = [s.line() for s in trace.steps if isinstance(s, Firing)]
        assert fired[0].startswith("FIRE fib(0,1) & fib(1,1) -> fib(2,2) ")
        assert fired[1].startswith("FIRE fib(1,1) & fib(2,2) -> fib(3,3) ")

    def test_goal_already_known(self):
        derived, ans, _ = chain_forward(BASE, [PUQ_RULE], atom("fib(0,1)"))
        assert derived == [] and ans.success

    def test_fourth(self):
        derived, ans, _ = chain_forward(BASE, [PUQ_RULE], goal(4))
        assert atom("fib(4,5)") in derived
        assert ans.witnesses == {"X": NatConst(fib_oracle(4))}

    def test_rounds_exceeded(self):
        with pytest.raises(RoundsExceeded):
            chain_forward(BASE, [PUQ_RULE], goal(20), max_rounds=3)

    def test_quiescence_without_goal(self):
        rule = clause_from_formula(parse_query("cla x: r(x) -> s(x,x,x)"), PUQ)
        derived, ans, _ = chain_forward([atom("r(1)"), atom("r(2)")], [rule])
        assert derived == [atom("s(1,1,1)"), atom("s(2,2,2)")]
        assert ans.success


@pytest.mark.parametrize("n", range(1, 16))
def test_backward_forward_agree(n):
    back = solve_buq(goal(n), BASE, [BUQ_RULE], 512)
    _, fwd, _ = chain_forward(BASE, [PUQ_RULE], goal(n))
    assert back.witnesses == fwd.witnesses == {"X": NatConst(fib_oracle(n))}


def test_lemmas_sound():
    derived, _, _ = chain_forward(BASE, [PUQ_RULE], goal(12))
    assert len(derived) == 11
    for a in derived:
        assert solve_buq(a, BASE, [BUQ_RULE], 512).success


def test_no_rederivation():
    _, _, trace = chain_forward(BASE + [atom("fib(2,2)")], [PUQ_RULE], goal(14))
    derived = trace.derived()
    assert len(derived) == len(set(derived))
    assert atom("fib(2,2)") not in derived


def test_traces_deterministic():
    runs = [chain_forward(BASE, [PUQ_RULE], goal(9))[2].text() for _ in range(2)]
    assert runs[0] == runs[1]
    runs = [solve_buq(goal(9), BASE, [BUQ_RULE]).trace.text() for _ in range(2)]
    assert runs[0] == runs[1]


class TestResolveQuery:
    def test_default_query(self, agents):
        ans = resolve_query(agents, parse_query("(ade y: fib(4,y)) @ [/fib]"))
        assert ans.render() == "yes, y=3"
        text = snapshot(agents)
        assert "agent /a[3] = fib(3,2).\n" in text and "agent /a[4] = fib(4,3).\n" in text

    def test_context_fact(self, agents):
        ans = resolve_query(agents, parse_query("fib(1,1) @ [/a[1]]"))
        assert ans.success and ans.witnesses == {}

    def test_variation(self):
        r = corpus_registry("fib_variation.colw")
        assert resolve_query(r, parse_query("(ade y: fib(4,y)) @ [/fib]")).render() == "yes, y=3"

    def test_buq_program_does_not_grow(self):
        r = corpus_registry("fib_buq.colw")
        before = snapshot(r)
        assert resolve_query(r, parse_query("ade x: fib(3,x)")).render() == "yes, x=3"
        assert snapshot(r) == before

    def test_puq_program_keeps_lemmas(self):
        r = corpus_registry("fib_puq.colw")
        ans = resolve_query(r, parse_query("fib(3,X)"))
        assert ans.witnesses == {"X": NatConst(3)}
        assert ans.trace.derived() == [atom("fib(2,2)"), atom("fib(3,3)")]
        assert "fib(2,2)" in snapshot(r)

    def test_choose_all_needs_argument(self, agents):
        with pytest.raises(MissingArgument):
            resolve_query(agents, parse_query("ada n: (ade y: fib(n,y)) @ [/a[n]]"))
        ans = resolve_query(agents, parse_query("ada n: (ade y: fib(n,y)) @ [/a[n]]"), args=[7])
        assert ans.witnesses == {"y": NatConst(13)}

    def test_absent_context(self, agents):
        with pytest.raises(AbsentAgent):
            resolve_query(agents, parse_query("p @ [/nowhere]"))

    def test_failure(self, agents):
        with pytest.raises(SolveFailure):
            resolve_query(agents, parse_query("fib(1,2) @ [/a[1]]"))

    def test_conjunction(self, agents):
        ans = resolve_query(agents, parse_query("((ade y: fib(5,y)) @ [/a[5]]) & (fib(1,1) @ [/a[1]])"))
        assert ans.witnesses == {"y": NatConst(5)}

    def test_depth_limit_propagates(self):
        r = corpus_registry("fib_buq.colw")
        with pytest.raises(DepthExceeded):
            resolve_query(r, parse_query("ade x: fib(20,x)"), Limits(depth=4))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 12, 20, 30])
def test_linear_firing_count(n):
    r = corpus_registry("fib_agents.colw")
    ans = resolve_query(r, parse_query(f"(ade y: fib({n},y)) @ [/fib]"))
    assert ans.witnesses == {"y": NatConst(fib_standard(n))}
    assert r.firings["/b[x+2]"] == max(0, n - 2)
    assert len(ans.trace.firings("/b[x+2]")) == max(0, n - 2)
    resolve_query(r, parse_query(f"(ade y: fib({n},y)) @ [/fib]"))
    assert r.firings["/b[x+2]"] == max(0, n - 2)


GOLDEN = [
    ("fib_agents.colw", "(ade y: fib(4,y)) @ [/fib]"),
    ("fib_agents.colw", "(ade y: fib(15,y)) @ [/fib]"),
    ("fib_variation.colw", "(ade y: fib(10,y)) @ [/fib]"),
    ("fib_puq.colw", "fib(3,X)"),
    ("fib_puq.colw", "fib(12,X)"),
    ("fib_buq.colw", "ade x: fib(3,x)"),
]


@pytest.mark.parametrize("name,query", GOLDEN)
def test_trace_well_founded(name, query):
    trace = resolve_query(corpus_registry(name), parse_query(query)).trace
    assert len(trace) > 0
    assert trace.unfounded() == []


@pytest.mark.parametrize("name,query", GOLDEN)
def test_resolve_deterministic(name, query):
    texts = []
    for _ in range(2):
        r = corpus_registry(name)
        texts.append(resolve_query(r, parse_query(query)).trace.text() + snapshot(r))
    assert texts[0] == texts[1]


class TestExpandMacro:
    def test_chain(self):
        r = corpus_registry("m_chain.colw")
        before = snapshot(r)
        assert pretty(expand_macro(r, parse_path("/m[0''']"))) == "p & (p & (p & q))"
        assert snapshot(r) == before

    def test_plain(self, agents):
        assert pretty(expand_macro(agents, parse_path("/a[1]"))) == "fib(1,1)"

    def test_cycle(self):
        r = load(parse_program("agent /w = /w."))
        with pytest.raises(CycleError):
            expand_macro(r, AgentPath("w"))

    def test_absent(self, agents):
        with pytest.raises(AbsentAgent):
            expand_macro(agents, AgentPath("zzz"))

    def test_context_preserved(self):
        r = load(parse_program("agent /s = fib(0,1).\nagent /t = fib(0,1) @ [/s].\nagent /u = p & /t."))
        assert pretty(expand_macro(r, AgentPath("u"))) == "p & (fib(0,1) @ [/s])"
