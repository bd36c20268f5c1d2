import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colweb.errors import ArityError, ParseError
from colweb.surface import parse_program, parse_query, parse_term, pretty, tokenize
from colweb.syntax import (
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
)

from conftest import CORPUS_FILES, corpus_text


def fib(*args):
    return AtomF(Atom("fib", tuple(args)))


N = NatConst


class TestParseProgram:
    def test_single_fact_agent(self):
        prog = parse_program("agent /a[1] = fib(1,1).")
        assert prog == Program((Declaration(AgentPath("a", N(1)), fib(N(1), N(1))),))

    def test_empty(self):
        assert parse_program("") == Program(())
        assert parse_program("  # only a comment\n") == Program(())

    def test_arity_clash(self):
        with pytest.raises(ArityError) as info:
            parse_program("agent /q = fib(1,1) & fib(1).")
        assert info.value.predicate == "fib"

    def test_arity_clash_across_declarations(self):
        with pytest.raises(ArityError):
            parse_program("agent /p = fib(1,1).\nagent /q = fib(2).")

    def test_class_declaration(self):
        prog = parse_program("wedge x from 3: agent /a[x+2] = fib(x+2,1).")
        (decl,) = prog.decls
        assert decl == ClassDecl(
            "x",
            3,
            Declaration(AgentPath("a", Plus(Var("x"), N(2))), fib(Plus(Var("x"), N(2)), N(1))),
        )

    def test_lower_bound_defaults_to_zero(self):
        (decl,) = parse_program("wedge x: agent /m[x'] = p & /m[x].").decls
        assert decl.lower == 0
        assert decl.template.knowledge == Conj(
            (AtomF(Atom("p")), MacroRef(AgentPath("m", Var("x"))))
        )

    def test_error_is_located(self):
        with pytest.raises(ParseError) as info:
            parse_program("agent /a[1] = fib(1,1).\nagent /b = fib(2,1)")
        err = info.value
        assert (err.line, err.column) == (2, 20)
        assert "'.'" in err.expected

    def test_unknown_character(self):
        with pytest.raises(ParseError) as info:
            parse_program("agent /a = p ! q.")
        assert info.value.column == 14

    def test_implication_head_must_be_atom(self):
        with pytest.raises(ParseError):
            parse_query("p -> /m")

    def test_keywords_are_reserved(self):
        with pytest.raises(ParseError):
            parse_query("agent(1)")


class TestParseQuery:
    def test_context_query(self):
        q = parse_query("(ade y: fib(4,y)) @ [/fib]")
        assert q == WithContext(ChooseEx("y", fib(N(4), Var("y"))), (AgentPath("fib"),))

    def test_bare_atom(self):
        assert parse_query("fib(0,1)") == fib(N(0), N(1))

    def test_choose_ex(self):
        assert parse_query("ade x: fib(3,x)") == ChooseEx("x", fib(N(3), Var("x")))

    def test_multiple_choice_variables_nest(self):
        assert parse_query("ada n, m: p(n,m)") == ChooseAll(
            "n", ChooseAll("m", AtomF(Atom("p", (Var("n"), Var("m")))))
        )

    def test_blind_rule(self):
        q = parse_query("cla x, y, z: fib(x,y) & fib(x+1,z) -> fib(x+2,y+z)")
        x, y, z = Var("x"), Var("y"), Var("z")
        assert q == Blind(
            ("x", "y", "z"),
            Impl(Conj((fib(x, y), fib(Plus(x, N(1)), z))), fib(Plus(x, N(2)), Plus(y, z))),
        )

    def test_nested_contexts_flatten(self):
        q = parse_query("(p @ [/a, /b]) @ [/b, /c]")
        assert q == WithContext(AtomF(Atom("p")), (AgentPath("a"), AgentPath("b"), AgentPath("c")))

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse_query("fib(0,1) fib(1,1)")

    def test_unterminated(self):
        with pytest.raises(ParseError) as info:
            parse_query("(ade y")
        assert "':'" in info.value.expected


class TestTerms:
    def test_successor_postfix(self):
        assert parse_term("0'''") == Succ(Succ(Succ(N(0))))

    def test_plus_left_assoc(self):
        assert parse_term("x+1+2") == Plus(Plus(Var("x"), N(1)), N(2))

    def test_mixed(self):
        assert parse_term("x+1'") == Succ(Plus(Var("x"), N(1)))
        assert parse_term("x+(1')") == Plus(Var("x"), Succ(N(1)))


class TestPretty:
    def test_declaration(self):
        d = Declaration(AgentPath("a", N(1)), fib(N(1), N(1)))
        assert pretty(d) == "agent /a[1] = fib(1,1)."

    def test_class_declaration(self):
        x = Var("x")
        d = ClassDecl(
            "x",
            3,
            Declaration(
                AgentPath("a", Plus(x, N(2))),
                WithContext(
                    ChooseEx("y", fib(Plus(x, N(2)), Var("y"))),
                    (AgentPath("a", x), AgentPath("a", Plus(x, N(1))), AgentPath("b", Plus(x, N(2)))),
                ),
            ),
        )
        assert pretty(d) == (
            "wedge x from 3: agent /a[x+2] = (ade y: fib(x+2,y)) @ [/a[x], /a[x+1], /b[x+2]]."
        )

    def test_terms(self):
        assert pretty(N(3)) == "3"
        assert pretty(Succ(Succ(Succ(N(0))))) == "0'''"
        assert pretty(Plus(Var("x"), Plus(Var("y"), N(1)))) == "x+(y+1)"

    def test_nested_conjunction(self):
        p, q = AtomF(Atom("p")), AtomF(Atom("q"))
        assert pretty(Conj((p, Conj((p, Conj((p, q))))))) == "p & (p & (p & q))"

    def test_never_stacks_annotations(self):
        text = pretty(parse_query("((p @ [/a]) @ [/b]) @ [/c]"))
        assert text == "p @ [/a, /b, /c]"


# random programs over a fixed vocabulary, for the round-trip property

NAMES = st.sampled_from(["x", "y", "z", "n", "k1"])
PREDS = {"p": 0, "q": 0, "fib": 2, "r": 1, "s": 3}


def terms(depth=3):
    leaf = st.one_of(st.integers(0, 40).map(NatConst), NAMES.map(Var))
    return st.recursive(
        leaf,
        lambda inner: st.one_of(inner.map(Succ), st.builds(Plus, inner, inner)),
        max_leaves=6,
    )


@st.composite
def atoms(draw):
    pred = draw(st.sampled_from(sorted(PREDS)))
    args = tuple(draw(terms()) for _ in range(PREDS[pred]))
    return Atom(pred, args)


paths = st.builds(AgentPath, st.sampled_from(["a", "b", "fib", "m"]), st.none() | terms())


def _with_ctx(inner, ctx):
    if isinstance(inner, WithContext):
        return inner
    unique = []
    for p in ctx:
        if p not in unique:
            unique.append(p)
    return WithContext(inner, tuple(unique))


def formulas():
    leaf = st.one_of(atoms().map(AtomF), paths.map(MacroRef))
    return st.recursive(
        leaf,
        lambda inner: st.one_of(
            st.lists(inner, min_size=2, max_size=3).map(lambda ps: Conj(tuple(ps))),
            st.builds(Impl, inner, atoms().map(AtomF)),
            st.builds(Blind, st.lists(NAMES, min_size=1, max_size=3, unique=True).map(tuple), inner),
            st.builds(ChooseAll, NAMES, inner),
            st.builds(ChooseEx, NAMES, inner),
            st.builds(_with_ctx, inner, st.lists(paths, min_size=1, max_size=3)),
        ),
        max_leaves=8,
    )


declarations = st.builds(Declaration, paths, formulas())
class_decls = st.builds(ClassDecl, NAMES, st.integers(0, 5), declarations)
programs = st.lists(st.one_of(declarations, class_decls), max_size=5).map(
    lambda ds: Program(tuple(ds))
)


@settings(max_examples=300, deadline=None)
@given(programs)
def test_round_trip_random_programs(prog):
    parsed = parse_program(pretty(prog))
    assert parsed == prog
    assert not any(_stacked(d) for d in parsed.decls)


def _stacked(node):
    """True if some annotation sits directly inside another."""
    match node:
        case ClassDecl(_, _, template):
            return _stacked(template)
        case Declaration(_, knowledge):
            return _stacked(knowledge)
        case WithContext(inner, _):
            return isinstance(inner, WithContext) or _stacked(inner)
        case Conj(parts):
            return any(_stacked(p) for p in parts)
        case Impl(body, _) | Blind(_, body) | ChooseAll(_, body) | ChooseEx(_, body):
            return _stacked(body)
    return False


@settings(max_examples=200, deadline=None)
@given(formulas())
def test_round_trip_random_queries(f):
    assert parse_query(pretty(f)) == f


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_round_trip_corpus(name):
    prog = parse_program(corpus_text(name))
    assert parse_program(pretty(prog)) == prog


def test_tokens_track_lines():
    toks = tokenize("agent\n  /a")
    assert [(t.text, t.line, t.column) for t in toks[:2]] == [("agent", 1, 1), ("/", 2, 3)]
