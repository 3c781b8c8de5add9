from __future__ import annotations

import itertools
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from soclang import engine as eng
from soclang import smtlib
from soclang.elaborate import elaborate
from soclang.parser import parse_program
from soclang.typecheck import check_program

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS = REPO_ROOT / "corpus"

Z3_AVAILABLE = shutil.which("z3") is not None

requires_z3 = pytest.mark.skipif(not Z3_AVAILABLE, reason="z3 binary not on PATH")


def has_cvc5() -> bool:
    try:
        import cvc5  # noqa: F401
        return True
    except ImportError:
        return False


requires_cvc5 = pytest.mark.skipif(not has_cvc5(), reason="cvc5 package not installed")


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


def load_source(source: str, name: str = "<test>"):
    tp = check_program(parse_program(source, name))
    tree, layout = elaborate(tp)
    return tp, tree, layout


def load_file(path):
    return load_source(Path(path).read_text(), str(path))


def solve_vc(vc, timeout: float = 120.0, command: str | None = None,
             tmpdir: Path | None = None):
    """Emit, run the external solver, return its verdict."""
    import tempfile

    text = smtlib.emit_smtlib(vc)
    d = tmpdir or Path(tempfile.mkdtemp(prefix="soclang-test-"))
    path = d / "query.smt2"
    job = smtlib.SolverJob(command or smtlib.DEFAULT_SOLVER, timeout, text, str(path))
    return smtlib.run_solver(job, vc.registry)


def enumerate_assignments(registry, enums):
    """All total assignments to a registry's choice variables (scalars only)."""
    from soclang import ast
    from soclang.values import BitVec, EnumVal

    domains = []
    for info in registry.infos:
        t = info.type
        if isinstance(t, ast.BoolType):
            domains.append([False, True])
        elif isinstance(t, ast.BitIntType):
            domains.append([BitVec(t.width, v) for v in range(1 << t.width)])
        elif isinstance(t, ast.EnumRef):
            variants = enums[t.name]
            domains.append([EnumVal(t.name, v, i) for i, v in enumerate(variants)])
        else:
            raise AssertionError(f"cannot enumerate {t}")
    for combo in itertools.product(*domains):
        yield {info.cid: v for info, v in zip(registry.infos, combo)}


def brute_force_violating(tp, tree, layout, scenario: str) -> bool:
    """Does any total choice assignment make the scenario fail an assertion?

    Exhaustive interpreter enumeration: the independent route against the
    solver verdict.
    """
    vc = eng.sym_exec(tp, tree, layout, scenario)
    bits = registry_bits(vc.registry, tp.enums)
    assert bits <= 16, f"scenario too wide for enumeration: {bits} bits"
    for model in enumerate_assignments(vc.registry, tp.enums):
        result = eng.replay(tp, tree, layout, scenario, model)
        if isinstance(result.verdict, eng.AssertionFailed):
            return True
    return False


def registry_bits(registry, enums) -> int:
    from soclang import ast
    from soclang.typecheck import enum_width

    total = 0
    for info in registry.infos:
        t = info.type
        if isinstance(t, ast.BoolType):
            total += 1
        elif isinstance(t, ast.BitIntType):
            total += t.width
        elif isinstance(t, ast.EnumRef):
            total += enum_width(len(enums[t.name]))
        else:
            raise AssertionError(f"array choice in a micro scenario: {t}")
    return total


def run_cli(*args: str, cwd=None):
    """Run the installed CLI in a subprocess; returns (exit, stdout, stderr)."""
    proc = subprocess.run(
        [sys.executable, "-m", "soclang.cli", *args],
        capture_output=True, text=True, cwd=cwd or REPO_ROOT)
    return proc.returncode, proc.stdout, proc.stderr
