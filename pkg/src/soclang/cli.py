"""Command-line interface.

Exit code contract (frozen for scripting):
  check:  0 ok, 1 diagnostics/tool error
  run:    0 passed, 2 assertion failed, 4 assume infeasible, 1 tool error
  verify: 0 proven (unsat), 2 counterexample found, 3 unknown/timeout, 1 tool error
  trace:  like run
All results go to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from typing import Optional, Tuple

from . import engine as eng
from . import smtlib
from .diagnostics import CapacityError, EngineError, SocError, TypeErrors
from .elaborate import InstanceTree, StateLayout, dump_tree, elaborate
from .parser import parse_program
from .smtlib import ModelParseError, Sat, SolverError, Unknown, Unsat
from .typecheck import TypedProgram, check_program

_INDUCTION_NOTE = (
    "note: an induction triple (base case, inductive step, invariant usefulness) "
    "proves an unbounded property only together with the manual step of checking "
    "that the invariant implies the property."
)


def load(path: str) -> Tuple[TypedProgram, InstanceTree, StateLayout]:
    with open(path, encoding="utf-8") as f:
        source = f.read()
    program = parse_program(source, path)
    tp = check_program(program)
    tree, layout = elaborate(tp)
    return tp, tree, layout


def _diag(err) -> int:
    print(err.report() if hasattr(err, "report") else str(err), file=sys.stderr)
    return 1


def cmd_check(args) -> int:
    try:
        load(args.file)
    except (SocError, TypeErrors) as err:
        return _diag(err)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


def cmd_dump_tree(args) -> int:
    try:
        tp, tree, _ = load(args.file)
    except (SocError, TypeErrors) as err:
        return _diag(err)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    sys.stdout.write(dump_tree(tp, tree))
    return 0


def _report_run(result: eng.RunResult, trace_json: bool) -> int:
    for line in result.transcript:
        sys.stdout.write(line if line.endswith("\n") else line + "\n")
    if trace_json:
        for event in result.events:
            print(json.dumps(event))
    v = result.verdict
    if isinstance(v, eng.Passed):
        print("passed")
        return 0
    if isinstance(v, eng.AssertionFailed):
        print(f"FAILED ASSERTION at {v.site.file}:{v.site.line}")
        return 2
    print(f"ASSUMPTION INFEASIBLE at {v.site.file}:{v.site.line}")
    return 4


def cmd_run(args) -> int:
    try:
        tp, tree, layout = load(args.file)
        result = eng.run_scenario(tp, tree, layout, args.scenario,
                                  eng.SeededRandom(args.seed), args.capacity)
    except (SocError, TypeErrors) as err:
        return _diag(err)
    except (OSError, EngineError, CapacityError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return _report_run(result, args.trace_json)


def cmd_verify(args) -> int:
    try:
        tp, tree, layout = load(args.file)
        vc = eng.sym_exec(tp, tree, layout, args.scenario)
    except (SocError, TypeErrors) as err:
        return _diag(err)
    except (OSError, EngineError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    text = smtlib.emit_smtlib(vc)
    if args.dump_vc:
        sys.stdout.write(text)
    if args.dump_smt:
        smt_path = args.dump_smt
    else:
        fd, smt_path = tempfile.mkstemp(suffix=".smt2", prefix="soclang-")
        os.close(fd)
    command = smtlib.solver_command(args.solver)
    job = smtlib.SolverJob(command, args.timeout, text, smt_path)
    try:
        verdict = smtlib.run_solver(job, vc.registry)
    finally:
        if not args.dump_smt and os.path.exists(smt_path):
            os.unlink(smt_path)
    if isinstance(verdict, Unsat):
        print(f"unsat: scenario {args.scenario!r} cannot violate its assertions "
              f"for any nondeterministic choices (within this scenario's bounds).")
        print(_INDUCTION_NOTE)
        return 0
    if isinstance(verdict, Unknown):
        print(f"unknown: {verdict.reason}")
        return 3
    if isinstance(verdict, SolverError):
        print(f"solver error (exit {verdict.exit_code}):\n{verdict.stderr}",
              file=sys.stderr)
        return 1
    assert isinstance(verdict, Sat)
    model_path = args.dump_model or f"{args.scenario}.model.smt2"
    with open(model_path, "w") as f:
        f.write(verdict.raw_model + "\n")
    model = {info.cid: verdict.model[info.cid]
             for info in vc.registry.infos if info.cid in verdict.model}
    try:
        result = eng.replay(tp, tree, layout, args.scenario, model, args.capacity)
    except (EngineError, CapacityError) as err:
        print(f"error during replay: {err}", file=sys.stderr)
        return 1
    code = _report_run(result, args.trace_json)
    if code != 2:
        print("error: solver reported sat but the replay did not fail an "
              "assertion", file=sys.stderr)
        return 1
    print(f"model written to {model_path}")
    return 2


def cmd_trace(args) -> int:
    try:
        tp, tree, layout = load(args.file)
        vc = eng.sym_exec(tp, tree, layout, args.scenario)
        model = smtlib.load_model_file(args.model, vc.registry)
        result = eng.replay(tp, tree, layout, args.scenario, model, args.capacity)
    except (SocError, TypeErrors) as err:
        return _diag(err)
    except (OSError, EngineError, CapacityError, ModelParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return _report_run(result, args.trace_json)


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="soclang",
        description="Model SoCs as component graphs and prove or break "
                    "security scenarios with an SMT solver.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse, type-check, and elaborate a model")
    p.add_argument("file")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("run", help="run a scenario with random choices")
    p.add_argument("file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--capacity", type=int, default=64)
    p.add_argument("--trace-json", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("verify", help="prove a scenario or find an exploit")
    p.add_argument("file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--solver", help="command template, e.g. 'z3 -smt2 {file}'")
    p.add_argument("--timeout", type=float, default=600.0)
    p.add_argument("--dump-smt", metavar="PATH")
    p.add_argument("--dump-model", metavar="PATH")
    p.add_argument("--dump-vc", action="store_true",
                   help="print the SMT-LIB verification condition")
    p.add_argument("--capacity", type=int, default=64)
    p.add_argument("--trace-json", action="store_true")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("trace", help="replay a saved solver model")
    p.add_argument("file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--capacity", type=int, default=64)
    p.add_argument("--trace-json", action="store_true")
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("dump-tree", help="print the elaborated instance tree")
    p.add_argument("file")
    p.set_defaults(fn=cmd_dump_tree)
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
