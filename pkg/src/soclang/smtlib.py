"""SMT-LIB v2 backend: serialize a VerificationCondition, drive an external
solver process, parse the model it returns."""

from __future__ import annotations

import os
import shlex
import subprocess
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import ast, terms
from .engine import ChoiceId, Registry, VerificationCondition
from .terms import Term
from .values import BitVec, EnumVal, SparseArray

DEFAULT_SOLVER = "z3 -smt2 {file}"
SOLVER_ENV_VAR = "SOC_SOLVER"


class ModelParseError(Exception):
    pass


# ---------------------------------------------------------------------------
# Emission


def _sort_text(sort: tuple) -> str:
    if sort == terms.BOOL_SORT:
        return "Bool"
    if sort == terms.INT_SORT:
        return "Int"
    if sort[0] == "bv":
        return f"(_ BitVec {sort[1]})"
    if sort[0] == "arr":
        return f"(Array (_ BitVec {sort[1]}) {_sort_text(sort[2])})"
    raise AssertionError(f"unknown sort {sort}")


def _atom_text(t: Term) -> Optional[str]:
    if isinstance(t, terms.BoolC):
        return "true" if t.value else "false"
    if isinstance(t, terms.BVC):
        return f"(_ bv{t.value} {t.sort[1]})"
    if isinstance(t, terms.IntC):
        return str(t.value) if t.value >= 0 else f"(- {-t.value})"
    if isinstance(t, terms.Var):
        return t.name
    return None


_BV_OPS = {"add": "bvadd", "sub": "bvsub", "mul": "bvmul",
           "ult": "bvult", "ule": "bvule"}
_INT_OPS = {"add": "+", "sub": "-", "mul": "*", "lt": "<", "le": "<="}


class _Emitter:
    """Serializes a term DAG, let-binding every shared compound subterm."""

    def __init__(self) -> None:
        self.refcount: Dict[int, int] = {}
        self.order: List[Term] = []

    def scan(self, t: Term) -> None:
        key = id(t)
        if key in self.refcount:
            self.refcount[key] += 1
            return
        self.refcount[key] = 1
        for child in _children(t):
            self.scan(child)
        self.order.append(t)  # postorder: children first

    def serialize(self, t: Term) -> str:
        self.scan(t)
        names: Dict[int, str] = {}
        bindings: List[Tuple[str, str]] = []
        for node in self.order:
            atom = _atom_text(node)
            if atom is not None:
                names[id(node)] = atom
                continue
            body = _node_text(node, names)
            if self.refcount[id(node)] > 1:
                name = f"t{len(bindings)}"
                bindings.append((name, body))
                names[id(node)] = name
            else:
                names[id(node)] = body
        text = names[id(t)]
        for name, body in reversed(bindings):
            text = f"(let (({name} {body}))\n  {text})"
        return text


def _children(t: Term):
    if isinstance(t, terms.Not):
        return (t.arg,)
    if isinstance(t, terms.Bin):
        return (t.left, t.right)
    if isinstance(t, terms.Ite):
        return (t.cond, t.then, t.other)
    if isinstance(t, (terms.Extract, terms.ZeroExt, terms.Bv2Int, terms.Int2Bv)):
        return (t.arg,)
    if isinstance(t, terms.ArrRead):
        return (t.arr, t.key)
    if isinstance(t, terms.ArrWrite):
        return (t.arr, t.key, t.value)
    if isinstance(t, terms.SparseConst):
        return (t.default,) + tuple(v for _, v in t.mods)
    return ()


def _node_text(t: Term, names: Dict[int, str]) -> str:
    def n(x: Term) -> str:
        return names[id(x)]

    if isinstance(t, terms.Not):
        return f"(not {n(t.arg)})"
    if isinstance(t, terms.Bin):
        if t.op in ("and", "or"):
            return f"({t.op} {n(t.left)} {n(t.right)})"
        if t.op == "eq":
            return f"(= {n(t.left)} {n(t.right)})"
        ops = _INT_OPS if t.left.sort == terms.INT_SORT else _BV_OPS
        name = ops.get(t.op) or _INT_OPS[t.op]
        return f"({name} {n(t.left)} {n(t.right)})"
    if isinstance(t, terms.Ite):
        return f"(ite {n(t.cond)} {n(t.then)} {n(t.other)})"
    if isinstance(t, terms.Extract):
        return f"((_ extract {t.hi} {t.lo}) {n(t.arg)})"
    if isinstance(t, terms.ZeroExt):
        extra = t.sort[1] - t.arg.sort[1]
        return f"((_ zero_extend {extra}) {n(t.arg)})"
    if isinstance(t, terms.Bv2Int):
        return f"(bv2nat {n(t.arg)})"
    if isinstance(t, terms.Int2Bv):
        return f"((_ int2bv {t.sort[1]}) {n(t.arg)})"
    if isinstance(t, terms.ArrRead):
        return f"(select {n(t.arr)} {n(t.key)})"
    if isinstance(t, terms.ArrWrite):
        return f"(store {n(t.arr)} {n(t.key)} {n(t.value)})"
    if isinstance(t, terms.SparseConst):
        acc = f"((as const {_sort_text(t.sort)}) {n(t.default)})"
        for k, v in t.mods:
            acc = f"(store {acc} (_ bv{k} {t.key_width}) {n(v)})"
        return acc
    raise AssertionError(f"unserializable term {type(t).__name__}")


def _uses_int(t: Term, seen: set) -> bool:
    if id(t) in seen:
        return False
    seen.add(id(t))
    if t.sort == terms.INT_SORT:
        return True
    return any(_uses_int(c, seen) for c in _children(t))


def emit_smtlib(vc: VerificationCondition, extra_pins: Optional[dict] = None) -> str:
    """Self-contained SMT-LIB v2 text for a verification condition.

    extra_pins (choice id -> concrete value) adds equalities pinning choice
    variables to given values; used by the model round-trip check.
    """
    query = vc.query_term()
    seen: set = set()
    has_int = _uses_int(query, seen) or any(
        isinstance(i.type, ast.IntType) for i in vc.registry.infos)
    lines = [f"(set-logic {'ALL' if has_int else 'QF_ABV'})",
             "(set-option :produce-models true)"]
    for info in vc.registry.infos:
        lines.append(f"(declare-const c{info.vid} {_sort_text(_info_sort(info))})")
    body = _Emitter().serialize(query)
    if extra_pins:
        pins = []
        for cid, value in sorted(extra_pins.items()):
            info = vc.registry.by_cid.get(cid)
            if info is None:
                continue
            pin = _pin_text(info, value)
            if pin is not None:
                pins.append(pin)
        for p in pins:
            lines.append(f"(assert {p})")
    lines.append(f"(assert {body})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def _info_sort(info) -> tuple:
    return info.sort


def _pin_text(info, value) -> Optional[str]:
    name = f"c{info.vid}"
    if isinstance(value, bool):
        return f"(= {name} {'true' if value else 'false'})"
    if isinstance(value, BitVec):
        return f"(= {name} (_ bv{value.value} {value.width}))"
    if isinstance(value, EnumVal):
        sort = _info_sort(info)
        return f"(= {name} (_ bv{value.index} {sort[1]}))"
    if isinstance(value, int):
        v = str(value) if value >= 0 else f"(- {-value})"
        return f"(= {name} {v})"
    if isinstance(value, SparseArray):
        sort = _info_sort(info)
        acc = f"((as const {_sort_text(sort)}) {_leaf_text(value.default, sort[2])})"
        for k, v in value.mods:
            acc = f"(store {acc} (_ bv{k} {value.key_width}) {_leaf_text(v, sort[2])})"
        return f"(= {name} {acc})"
    return None


def _leaf_text(v, sort) -> str:
    if sort == terms.BOOL_SORT:
        return "true" if v else "false"
    if sort == terms.INT_SORT:
        return str(v) if v >= 0 else f"(- {-v})"
    raw = v.value if isinstance(v, BitVec) else (v.index if isinstance(v, EnumVal) else v)
    return f"(_ bv{raw} {sort[1]})"


# ---------------------------------------------------------------------------
# Solver driving


@dataclass
class SolverJob:
    command: str               # template containing {file}
    timeout: float
    smtlib: str
    file_path: str
    raw_output: str = ""


@dataclass
class Unsat:
    pass


@dataclass
class Sat:
    model: Dict[ChoiceId, object]
    raw_model: str


@dataclass
class Unknown:
    reason: str


@dataclass
class SolverError:
    exit_code: int
    stderr: str


def solver_command(override: Optional[str] = None) -> str:
    if override:
        return override
    return os.environ.get(SOLVER_ENV_VAR) or DEFAULT_SOLVER


def run_solver(job: SolverJob, registry: Registry):
    """Run the external solver on the job file and classify its answer."""
    with open(job.file_path, "w") as f:
        f.write(job.smtlib)
    argv = [part.replace("{file}", job.file_path)
            for part in shlex.split(job.command)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=job.timeout)
    except subprocess.TimeoutExpired:
        return Unknown("timeout")
    except FileNotFoundError:
        return SolverError(127, f"solver executable not found: {argv[0]}")
    out = proc.stdout
    job.raw_output = out
    # Solvers may emit warnings before the verdict; find the verdict line.
    lines = out.splitlines()
    idx, verdict_line = next(
        ((i, ln.strip()) for i, ln in enumerate(lines)
         if ln.strip() in ("sat", "unsat", "unknown")), (None, ""))
    if verdict_line == "unsat":
        return Unsat()
    if verdict_line == "sat":
        rest = "\n".join(lines[idx + 1:])
        model = parse_model(rest, registry)
        return Sat(model, rest.strip())
    if verdict_line == "unknown":
        return Unknown("unknown")
    return SolverError(proc.returncode, proc.stderr or out)


# ---------------------------------------------------------------------------
# Model parsing


def _sexp_tokens(text: str):
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "()":
            yield ch
            i += 1
        elif ch.isspace():
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise ModelParseError("unterminated quoted symbol")
            yield text[i:j + 1]
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < len(text) and text[j] != '"':
                j += 1
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j]
            i = j


def parse_sexprs(text: str) -> list:
    stack: List[list] = [[]]
    for tok in _sexp_tokens(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) < 2:
                raise ModelParseError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ModelParseError("unbalanced '('")
    return stack[0]


def parse_model(output: str, registry: Registry) -> Dict[ChoiceId, object]:
    """Parse solver `get-model` output into choice-id -> concrete value.

    Handles bitvector literals (#b, #x, (_ bvN w)), booleans, integers, and
    array values given as store chains over ((as const ...) v), as-array
    references to auxiliary definitions, or index/value ite lambdas.
    """
    sexprs = parse_sexprs(output)
    defs: List[list] = []
    for node in sexprs:
        if isinstance(node, list):
            if node and node[0] == "model":
                defs.extend(x for x in node[1:] if isinstance(x, list))
            elif node and node[0] == "define-fun":
                defs.append(node)
            elif node and node[0] == "error":
                continue
            else:
                defs.extend(x for x in node if isinstance(x, list)
                            and x and x[0] == "define-fun")
    aux: Dict[str, list] = {}
    mains: List[list] = []
    for d in defs:
        if len(d) < 5 or d[0] != "define-fun":
            continue
        name = d[1]
        if isinstance(name, str) and name.startswith("c") and name[1:].isdigit():
            mains.append(d)
        else:
            aux[name] = d
    model: Dict[ChoiceId, object] = {}
    by_vid = {i.vid: i for i in registry.infos}
    for d in mains:
        name, args, body = d[1], d[2], d[4]
        vid = int(name[1:])
        info = by_vid.get(vid)
        if info is None:
            raise ModelParseError(f"model defines unregistered variable {name}")
        if args:
            raise ModelParseError(f"unexpected arguments on {name}")
        model[(info.site, info.occ)] = _value_of(body, info.type, aux)
    return model


def _parse_scalar(node, t: ast.TypeExpr):
    if isinstance(t, ast.BoolType):
        if node == "true":
            return True
        if node == "false":
            return False
        raise ModelParseError(f"expected Bool, got {node!r}")
    if isinstance(t, (ast.BitIntType, ast.EnumRef)):
        raw = _parse_bv(node)
        if raw is None:
            raise ModelParseError(f"expected bitvector, got {node!r}")
        value, _width = raw
        if isinstance(t, ast.BitIntType):
            return BitVec(t.width, value)
        return BitVec(_width, value)  # enum index; engine re-types it
    if isinstance(t, ast.IntType):
        return _parse_int(node)
    raise ModelParseError(f"unsupported scalar sort for {t}")


def _parse_bv(node) -> Optional[Tuple[int, int]]:
    if isinstance(node, str):
        if node.startswith("#b"):
            return int(node[2:], 2), len(node) - 2
        if node.startswith("#x"):
            return int(node[2:], 16), (len(node) - 2) * 4
    if isinstance(node, list) and len(node) == 3 and node[0] == "_" \
            and isinstance(node[1], str) and node[1].startswith("bv"):
        return int(node[1][2:]), int(node[2])
    return None


def _parse_int(node) -> int:
    if isinstance(node, str):
        try:
            return int(node)
        except ValueError:
            raise ModelParseError(f"expected integer, got {node!r}")
    if isinstance(node, list) and len(node) == 2 and node[0] == "-":
        return -_parse_int(node[1])
    raise ModelParseError(f"expected integer, got {node!r}")


def _value_of(body, t: ast.TypeExpr, aux: Dict[str, list]):
    if isinstance(t, ast.ArrayType):
        return _parse_array(body, t, aux)
    return _parse_scalar(body, t)


def _parse_array(body, t: ast.ArrayType, aux: Dict[str, list]) -> SparseArray:
    kw = t.key.width
    leaf = t.value
    # (_ as-array k!N): value lives in an auxiliary definition
    if isinstance(body, list) and len(body) == 3 and body[0] == "_" \
            and body[1] == "as-array":
        d = aux.get(body[2])
        if d is None:
            raise ModelParseError(f"as-array references unknown {body[2]!r}")
        args, fn_body = d[2], d[4]
        return _array_from_fn(args, fn_body, kw, leaf)
    if isinstance(body, list) and body and body[0] == "lambda":
        return _array_from_fn(body[1], body[2], kw, leaf)
    mods: List[Tuple[int, object]] = []
    node = body
    while isinstance(node, list) and len(node) == 4 and node[0] == "store":
        key = _parse_bv(node[2])
        if key is None:
            raise ModelParseError(f"bad store key {node[2]!r}")
        mods.append((key[0], _parse_scalar(node[3], leaf)))
        node = node[1]
    if isinstance(node, list) and len(node) == 2 and isinstance(node[0], list) \
            and node[0][:2] == ["as", "const"]:
        default = _parse_scalar(node[1], leaf)
    else:
        raise ModelParseError(f"unrecognized array value {body!r}")
    sa = SparseArray(kw, default)
    for k, v in reversed(mods):
        sa = sa.write(k, v)
    return sa


def _array_from_fn(args, body, kw: int, leaf: ast.TypeExpr) -> SparseArray:
    if not (isinstance(args, list) and len(args) == 1):
        raise ModelParseError("array function must take one argument")
    var = args[0][0]
    mods: List[Tuple[int, object]] = []
    node = body
    while isinstance(node, list) and len(node) == 4 and node[0] == "ite":
        cond, val, rest = node[1], node[2], node[3]
        if not (isinstance(cond, list) and len(cond) == 3 and cond[0] == "="):
            raise ModelParseError(f"unsupported array ite condition {cond!r}")
        key_node = cond[2] if cond[1] == var else cond[1]
        key = _parse_bv(key_node)
        if key is None:
            raise ModelParseError(f"bad array key {key_node!r}")
        mods.append((key[0], _parse_scalar(val, leaf)))
        node = rest
    default = _parse_scalar(node, leaf)
    sa = SparseArray(kw, default)
    for k, v in reversed(mods):
        sa = sa.write(k, v)
    return sa


# ---------------------------------------------------------------------------
# Model files (cache written by verify, consumed by trace)


def load_model_file(path: str, registry: Registry) -> Dict[ChoiceId, object]:
    with open(path) as f:
        return parse_model(f.read(), registry)
