"""Command-line entry point: ``colweb run|check|repl``.

Exit codes: 0 success, 1 query failure, 2 parse/load error,
3 validity failure, 4 limit exceeded.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .checker import check_program
from .errors import (
    AbsentAgent,
    ArityError,
    ColwebError,
    CycleError,
    LimitExceeded,
    LoadError,
    MissingArgument,
    ParseError,
    SolveFailure,
)
from .registry import Registry, load, snapshot
from .solver import Answer, Limits, resolve_query
from .surface import parse_program, parse_query
from .syntax import AgentPath

EXIT_OK = 0
EXIT_NO = 1
EXIT_PARSE = 2
EXIT_INVALID = 3
EXIT_LIMIT = 4

DEFAULT_QUERY_AGENT = AgentPath("query")


@dataclass
class RunConfig:
    program: Path
    query: Optional[str] = None
    args: list = field(default_factory=list)
    depth_limit: int = 512
    max_rounds: int = 10_000
    class_sample: int = 5
    check: bool = False
    trace: bool = False
    dump: bool = False

    def __post_init__(self):
        if min(self.depth_limit, self.max_rounds, self.class_sample) < 1:
            raise ValueError("--depth, --max-rounds and --class-sample must be at least 1")

    @property
    def limits(self) -> Limits:
        return Limits(self.depth_limit, self.max_rounds)


def _load_file(path) -> Registry:
    return load(parse_program(Path(path).read_text(encoding="utf-8")))


def _default_query(r: Registry):
    entry = r.entry(DEFAULT_QUERY_AGENT)
    if entry is None:
        return None
    return entry.knowledge


def cmd_run(cfg: RunConfig, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        r = _load_file(cfg.program)
    except (OSError, ParseError, ArityError, LoadError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARSE
    if cfg.check:
        report = check_program(r, cfg.class_sample, cfg.limits)
        if not report.overall:
            out.write(report.text())
            print("error: program failed the validity check", file=err)
            return EXIT_INVALID
    if cfg.query is not None:
        try:
            query = parse_query(cfg.query)
        except (ParseError, ArityError) as exc:
            print(f"error: {exc}", file=err)
            return EXIT_PARSE
    else:
        query = _default_query(r)
        if query is None:
            print("error: no --query given and the program has no /query agent", file=err)
            return EXIT_PARSE
    code, answer = EXIT_OK, None
    try:
        answer = resolve_query(r, query, cfg.limits, cfg.args)
        print(answer.render(), file=out)
    except SolveFailure:
        print("no", file=out)
        code = EXIT_NO
    except LimitExceeded as exc:
        print(f"error: {exc}", file=err)
        return EXIT_LIMIT
    except (AbsentAgent, CycleError, MissingArgument) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_NO
    if cfg.trace and answer is not None:
        out.write(answer.trace.text())
    if cfg.dump:
        out.write(snapshot(r))
    return code


def cmd_check(path, class_sample: int = 5, limits: Optional[Limits] = None, records=False,
              out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        r = _load_file(path)
    except (OSError, ParseError, ArityError, LoadError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARSE
    report = check_program(r, class_sample, limits)
    out.write(report.records() if records else report.text())
    return EXIT_OK if report.overall else EXIT_INVALID


class Session:
    """REPL state: one registry whose memoized instances persist across queries."""

    def __init__(self, out=None, limits: Optional[Limits] = None, class_sample: int = 5):
        self.out = out or sys.stdout
        self.limits = limits or Limits()
        self.class_sample = class_sample
        self.registry: Optional[Registry] = None
        self.tracing = False

    def say(self, text: str):
        self.out.write(text if text.endswith("\n") else text + "\n")

    def handle(self, line: str) -> bool:
        """Run one input line; False once the session should end."""
        line = line.strip()
        if not line or line.startswith("#"):
            return True
        try:
            if line.startswith(":"):
                return self.command(line)
            self.query(line)
        except ColwebError as exc:
            self.say(f"error: {exc}")
        except (OSError, ValueError) as exc:
            self.say(f"error: {exc}")
        return True

    def command(self, line: str) -> bool:
        name, _, rest = line.partition(" ")
        rest = rest.strip()
        if name == ":quit":
            return False
        if name == ":load":
            if not rest:
                self.say("usage: :load <file>")
                return True
            self.registry = _load_file(rest)
            self.say(f"loaded {rest}")
        elif name == ":check":
            report = check_program(self.need_registry(), self.class_sample, self.limits)
            self.say(report.text())
        elif name == ":dump":
            self.say(snapshot(self.need_registry()) or "(empty)")
        elif name == ":trace":
            if rest not in ("on", "off"):
                self.say("usage: :trace on|off")
            else:
                self.tracing = rest == "on"
                self.say(f"tracing {rest}")
        else:
            self.say(f"unknown command {name}; try :load :check :dump :trace :quit")
        return True

    def need_registry(self) -> Registry:
        if self.registry is None:
            raise LoadError("no program loaded; use :load <file>")
        return self.registry

    def query(self, text: str):
        r = self.need_registry()
        q = parse_query(text)
        before = sum(r.firings.values())
        try:
            answer = resolve_query(r, q, self.limits)
        except SolveFailure:
            answer = Answer(False)
        self.say(answer.render())
        self.say(f"({sum(r.firings.values()) - before} new firings)")
        if self.tracing and answer.success:
            self.say(answer.trace.text() or "(empty trace)")


def repl(stdin=None, out=None, limits=None, class_sample=5, program=None) -> int:
    stdin, out = stdin or sys.stdin, out or sys.stdout
    session = Session(out, limits, class_sample)
    if program:
        session.handle(f":load {program}")
    prompt = stdin.isatty()
    while True:
        if prompt:
            out.write("?- ")
            out.flush()
        line = stdin.readline()
        if not line:
            return EXIT_OK
        if not session.handle(line):
            return EXIT_OK


def _nat(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a natural number, got {text}")
    return value


def _positive(text: str) -> int:
    value = _nat(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colweb", description=__doc__.splitlines()[0])
    limits = argparse.ArgumentParser(add_help=False)
    limits.add_argument("--depth", type=_positive, default=512, help="backward-chaining depth limit")
    limits.add_argument("--max-rounds", type=_positive, default=10_000, help="forward-chaining round limit")
    limits.add_argument("--class-sample", type=_positive, default=5,
                        help="class instances checked per class agent")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[limits], help="run a query against a program")
    run.add_argument("program")
    run.add_argument("--query", help="query text (default: knowledge of /query)")
    run.add_argument("--arg", type=_nat, action="append", default=[],
                     help="value for the next 'ada' variable, outermost first (repeatable)")
    run.add_argument("--check", action="store_true", help="run the validity check first")
    run.add_argument("--trace", action="store_true", help="print the proof trace")
    run.add_argument("--dump", action="store_true", help="print the knowledgebase afterwards")

    check = sub.add_parser("check", parents=[limits], help="check a program's context claims")
    check.add_argument("program")
    check.add_argument("--records", action="store_true", help="key=value output")

    repl_cmd = sub.add_parser("repl", parents=[limits], help="interactive session")
    repl_cmd.add_argument("program", nargs="?")
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 20_000))
    limits = Limits(ns.depth, ns.max_rounds)
    if ns.command == "run":
        cfg = RunConfig(
            Path(ns.program), ns.query, ns.arg, ns.depth, ns.max_rounds, ns.class_sample,
            ns.check, ns.trace, ns.dump,
        )
        return cmd_run(cfg)
    if ns.command == "check":
        return cmd_check(ns.program, ns.class_sample, limits, ns.records)
    return repl(sys.stdin, sys.stdout, limits, ns.class_sample, ns.program)


if __name__ == "__main__":
    sys.exit(main())
