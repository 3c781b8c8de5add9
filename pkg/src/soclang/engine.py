"""Scenario execution engine.

One traversal serves two modes:

* symbolic mode: every `if` whose condition is not a constant executes both
  arms and merges stores with ite terms; `any`/`havoc` register fresh choice
  variables; assume/assert are recorded under the current guard. The result
  is a VerificationCondition.

* concrete mode (interpreter and counterexample replayer): every fresh
  variable is immediately replaced by a value from an AnySource, so terms
  constant-fold, every branch condition is concrete, exactly one path runs,
  printf fires, and the first failing assume/assert stops the run.

Choice ids are (static site id, per-site occurrence counter). Both modes
issue them identically because a skipped branch arm advances the counters by
the arm's static consumption ("ghost counting"), making per-expression
consumption independent of which arms actually execute.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import ast, terms
from .diagnostics import CapacityError, EngineError
from .elaborate import InstanceNode, InstanceTree, StateLayout, resolve_instance
from .terms import Term
from .typecheck import (EnumVariantRef, LocalRef, PrimCall, TypedProgram,
                        UserCall, enum_width)
from .values import (BitVec, EnumVal, RecordVal, SparseArray, VectorVal,
                     format_value)

# ---------------------------------------------------------------------------
# Value trees: records/vectors explode into per-leaf terms


@dataclass(frozen=True, eq=False)
class RecV:
    fields: tuple  # tuple[tuple[str, tree], ...]

    def get(self, name: str):
        for n, v in self.fields:
            if n == name:
                return v
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class VecV:
    items: tuple


def tree_ite(cond: Term, a, b):
    if a is b:
        return a
    if a is None and b is None:
        return None
    if isinstance(a, RecV):
        return RecV(tuple((n, tree_ite(cond, v, b.get(n))) for n, v in a.fields))
    if isinstance(a, VecV):
        return VecV(tuple(tree_ite(cond, x, y) for x, y in zip(a.items, b.items)))
    return terms.mk_ite(cond, a, b)


def tree_eq(a, b) -> Term:
    if isinstance(a, RecV):
        acc = terms.TRUE
        for n, v in a.fields:
            acc = terms.mk_and(acc, tree_eq(v, b.get(n)))
        return acc
    if isinstance(a, VecV):
        acc = terms.TRUE
        for x, y in zip(a.items, b.items):
            acc = terms.mk_and(acc, tree_eq(x, y))
        return acc
    return terms.mk_eq(a, b)


def leaf_types(t: ast.TypeExpr) -> List[ast.TypeExpr]:
    if isinstance(t, ast.RecordType):
        out: List[ast.TypeExpr] = []
        for _, ft in t.fields:
            out.extend(leaf_types(ft))
        return out
    if isinstance(t, ast.VectorType):
        return leaf_types(t.elem) * t.length
    return [t]


def n_leaves(t: ast.TypeExpr) -> int:
    return len(leaf_types(t))


# ---------------------------------------------------------------------------
# Choice registry and nondeterminism sources

ChoiceId = Tuple[int, int]  # (static site id, dynamic occurrence)


@dataclass
class ChoiceInfo:
    vid: int
    site: int
    occ: int
    type: ast.TypeExpr  # scalar leaf type, or ArrayType(key, leaf) for arrays
    sort: tuple

    @property
    def cid(self) -> ChoiceId:
        return (self.site, self.occ)


@dataclass
class Registry:
    infos: List[ChoiceInfo] = field(default_factory=list)
    by_cid: Dict[ChoiceId, ChoiceInfo] = field(default_factory=dict)

    def register(self, site: int, occ: int, t: ast.TypeExpr, sort: tuple) -> ChoiceInfo:
        info = ChoiceInfo(len(self.infos), site, occ, t, sort)
        self.infos.append(info)
        self.by_cid[(site, occ)] = info
        return info


class AnySource:
    """Pluggable source of values for `any` and `havoc` in concrete runs."""

    def scalar(self, cid: ChoiceId, t: ast.TypeExpr, enums):
        raise NotImplementedError

    def array(self, cid: ChoiceId, key_width: int, leaf: ast.TypeExpr, enums):
        raise NotImplementedError


class SeededRandom(AnySource):
    def __init__(self, seed: int) -> None:
        self.rng = random.Random(seed)

    def scalar(self, cid, t, enums):
        if isinstance(t, ast.BoolType):
            return self.rng.random() < 0.5
        if isinstance(t, ast.BitIntType):
            return BitVec(t.width, self.rng.randrange(1 << t.width))
        if isinstance(t, ast.IntType):
            return self.rng.randint(-(1 << 31), 1 << 31)
        if isinstance(t, ast.EnumRef):
            variants = enums[t.name]
            i = self.rng.randrange(len(variants))
            return EnumVal(t.name, variants[i], i)
        raise AssertionError(f"cannot draw {t}")

    def array(self, cid, key_width, leaf, enums):
        # A uniformly random huge array is not representable; draw a random
        # fill value and no modifications.
        return SparseArray(key_width, self.scalar(cid, leaf, enums))


def zero_scalar(t: ast.TypeExpr, enums):
    if isinstance(t, ast.BoolType):
        return False
    if isinstance(t, ast.BitIntType):
        return BitVec(t.width, 0)
    if isinstance(t, ast.IntType):
        return 0
    if isinstance(t, ast.EnumRef):
        return EnumVal(t.name, enums[t.name][0], 0)
    raise AssertionError(f"no zero for {t}")


class ModelOracle(AnySource):
    """Replays a solver model; absent choice ids default to zero."""

    def __init__(self, values: Dict[ChoiceId, object]) -> None:
        self.values = values

    def scalar(self, cid, t, enums):
        if cid not in self.values:
            return zero_scalar(t, enums)
        v = self.values[cid]
        if isinstance(t, ast.BoolType) and isinstance(v, bool):
            return v
        if isinstance(t, ast.BitIntType) and isinstance(v, BitVec) and v.width == t.width:
            return v
        if isinstance(t, ast.IntType) and isinstance(v, int) and not isinstance(v, bool):
            return v
        if isinstance(t, ast.EnumRef):
            if isinstance(v, EnumVal) and v.enum == t.name:
                return v
            if isinstance(v, BitVec) and v.value < len(enums[t.name]):
                return EnumVal(t.name, enums[t.name][v.value], v.value)
        raise EngineError(f"model value for choice {cid} has the wrong type "
                          f"(expected {t}, got {format_value(v)})")

    def array(self, cid, key_width, leaf, enums):
        if cid not in self.values:
            return SparseArray(key_width, zero_scalar(leaf, enums))
        v = self.values[cid]
        if not isinstance(v, SparseArray) or v.key_width != key_width:
            raise EngineError(f"model value for choice {cid} is not an array "
                              f"of the expected sort")
        return v


# ---------------------------------------------------------------------------
# Results


@dataclass
class Passed:
    pass


@dataclass
class AssertionFailed:
    site: ast.SourceSpan
    message: str


@dataclass
class AssumeInfeasible:
    site: ast.SourceSpan


@dataclass
class RunResult:
    verdict: object
    transcript: List[str]
    events: List[dict]
    store: Dict[str, object]  # dotted cell path -> ConcreteValue


@dataclass
class VerificationCondition:
    """All assumptions hold and at least one assertion fails."""

    registry: Registry
    assumptions: List[Tuple[Term, Term]]  # (guard, body)
    obligations: List[Tuple[Term, Term, ast.SourceSpan]]  # (guard, body, site)

    def assumes_term(self) -> Term:
        acc = terms.TRUE
        for guard, body in self.assumptions:
            acc = terms.mk_and(acc, terms.mk_or(terms.mk_not(guard), body))
        return acc

    def violations_term(self) -> Term:
        acc = terms.FALSE
        for guard, body, _ in self.obligations:
            acc = terms.mk_or(acc, terms.mk_and(guard, terms.mk_not(body)))
        return acc

    def query_term(self) -> Term:
        return terms.mk_and(self.assumes_term(), self.violations_term())


class _Stop(Exception):
    def __init__(self, verdict) -> None:
        self.verdict = verdict


# ---------------------------------------------------------------------------


def scalar_sort(t: ast.TypeExpr, enums) -> tuple:
    if isinstance(t, ast.BoolType):
        return terms.BOOL_SORT
    if isinstance(t, ast.BitIntType):
        return terms.bv_sort(t.width)
    if isinstance(t, ast.IntType):
        return terms.INT_SORT
    if isinstance(t, ast.EnumRef):
        return terms.bv_sort(enum_width(len(enums[t.name])))
    raise AssertionError(f"no scalar sort for {t}")


def const_term(v, t: ast.TypeExpr, enums) -> Term:
    if isinstance(t, ast.BoolType):
        return terms.mk_bool(v)
    if isinstance(t, ast.BitIntType):
        return terms.mk_bv(t.width, v.value if isinstance(v, BitVec) else v)
    if isinstance(t, ast.IntType):
        return terms.mk_int(v)
    if isinstance(t, ast.EnumRef):
        w = enum_width(len(enums[t.name]))
        if isinstance(v, EnumVal):
            return terms.mk_bv(w, v.index)
        raw = v.value if isinstance(v, BitVec) else int(v)
        if raw >= len(enums[t.name]):
            raise EngineError(f"enum value {raw} out of range for {t.name}")
        return terms.mk_bv(w, raw)
    raise AssertionError(f"not a scalar type: {t}")


def concrete_leaf(term: Term, t: ast.TypeExpr, enums):
    if not terms.is_const(term):
        raise EngineError("internal: symbolic value in a concrete run")
    if isinstance(t, ast.BoolType):
        return term.value
    if isinstance(t, ast.BitIntType):
        return BitVec(t.width, term.value)
    if isinstance(t, ast.IntType):
        return term.value
    if isinstance(t, ast.EnumRef):
        variants = enums[t.name]
        if term.value >= len(variants):
            raise EngineError(f"enum value {term.value} out of range for {t.name}")
        return EnumVal(t.name, variants[term.value], term.value)
    raise AssertionError(f"not a scalar type: {t}")


def tree_to_concrete(tree, t: ast.TypeExpr, enums):
    if isinstance(t, ast.UnitType):
        return None
    if isinstance(t, ast.RecordType):
        return RecordVal(tuple(
            (n, tree_to_concrete(tree.get(n), ft, enums)) for n, ft in t.fields))
    if isinstance(t, ast.VectorType):
        return VectorVal(tuple(
            tree_to_concrete(x, t.elem, enums) for x in tree.items))
    if isinstance(t, ast.ArrayType):
        return _array_tree_to_concrete(tree, t, enums)
    return concrete_leaf(tree, t, enums)


def _array_tree_to_concrete(tree, t: ast.ArrayType, enums):
    kw = t.key.width

    def conv(leaf_tree, leaf_t):
        if isinstance(leaf_t, ast.RecordType):
            return RecordVal(tuple((n, conv(leaf_tree.get(n), ft))
                                   for n, ft in leaf_t.fields))
        if isinstance(leaf_t, ast.VectorType):
            return VectorVal(tuple(conv(x, leaf_t.elem) for x in leaf_tree.items))
        if not isinstance(leaf_tree, terms.SparseConst):
            raise EngineError("internal: symbolic array in a concrete run")
        default = concrete_leaf(leaf_tree.default, leaf_t, enums)
        mods = tuple((k, concrete_leaf(v, leaf_t, enums)) for k, v in leaf_tree.mods)
        return SparseArray(kw, default, mods)

    return conv(tree, t.value)


def concrete_to_tree(v, t: ast.TypeExpr, enums):
    if isinstance(t, ast.RecordType):
        return RecV(tuple((n, concrete_to_tree(v.get(n), ft, enums))
                          for n, ft in t.fields))
    if isinstance(t, ast.VectorType):
        return VecV(tuple(concrete_to_tree(x, t.elem, enums) for x in v.items))
    if isinstance(t, ast.ArrayType):
        kw = t.key.width

        def conv(cv, leaf_t):
            if isinstance(leaf_t, ast.RecordType):
                return RecV(tuple((n, conv(cv.get(n), ft)) for n, ft in leaf_t.fields))
            if isinstance(leaf_t, ast.VectorType):
                return VecV(tuple(conv(x, leaf_t.elem) for x in cv.items))
            sc = terms.mk_const_array(kw, const_term(cv.default, leaf_t, enums))
            for k, mv in cv.mods:
                sc = sc.write_const(k, const_term(mv, leaf_t, enums))
            return sc

        return conv(v, t.value)
    return const_term(v, t, enums)


# ---------------------------------------------------------------------------
# Static choice consumption (ghost counting)


class _Consumption:
    def __init__(self, tp: TypedProgram) -> None:
        self.tp = tp
        self.fn_memo: Dict[Tuple[str, str], Counter] = {}
        self.expr_memo: Dict[int, Counter] = {}
        self.module_memo: Dict[str, int] = {}
        self._type_memo: Dict[int, ast.TypeExpr] = {}

    def module_leaves(self, name: str) -> int:
        if name in self.module_memo:
            return self.module_memo[name]
        total = 0
        for inst in self.tp.modules[name].instances:
            ref = inst.ref
            if isinstance(ref, ast.ModuleRef):
                total += self.module_leaves(ref.name)
            else:
                vt = self._resolve(ref.value_type)
                total += n_leaves(vt)
        self.module_memo[name] = total
        return total

    def _resolve(self, t: ast.TypeExpr) -> ast.TypeExpr:
        if id(t) in self._type_memo:
            return self._type_memo[id(t)]
        from .typecheck import Checker

        chk = Checker(self.tp.program)
        chk.aliases = self.tp.aliases
        chk.enums = self.tp.enums
        resolved = chk.resolve_type(t, ast.SYNTHETIC)
        self._type_memo[id(t)] = resolved
        return resolved

    def of_fn(self, module: str, fn: str) -> Counter:
        key = (module, fn)
        if key in self.fn_memo:
            return self.fn_memo[key]
        self.fn_memo[key] = Counter()  # recursion is impossible post-typecheck
        decl = self.tp.fns[key]
        c = self.of_expr(decl.body)
        self.fn_memo[key] = c
        return c

    def of_expr(self, e: ast.Expr) -> Counter:
        if e.node_id in self.expr_memo:
            return self.expr_memo[e.node_id]
        c: Counter = Counter()
        if isinstance(e, ast.AnyExpr):
            c[e.node_id] = n_leaves(self.tp.types[e.node_id])
        elif isinstance(e, ast.Call):
            for a in e.args:
                c += self.of_expr(a)
            res = self.tp.resolutions[e.node_id]
            if isinstance(res, UserCall):
                c += self.of_fn(res.module, res.fn)
            elif isinstance(res, PrimCall) and res.op == "havoc":
                if res.target_module is not None:
                    c[e.node_id] = self.module_leaves(res.target_module)
                else:
                    c[e.node_id] = n_leaves(res.value_type)
        else:
            for child in ast.child_exprs(e):
                c += self.of_expr(child)
        self.expr_memo[e.node_id] = c
        return c


# ---------------------------------------------------------------------------
# The engine


@dataclass
class _Frame:
    inst: InstanceNode
    module: ast.ModuleDecl
    is_root: bool


class Engine:
    def __init__(self, tp: TypedProgram, tree: InstanceTree, layout: StateLayout,
                 mode: str, anys: Optional[AnySource] = None,
                 capacity: int = 64) -> None:
        assert mode in ("sym", "conc")
        self.tp = tp
        self.tree = tree
        self.layout = layout
        self.mode = mode
        self.anys = anys
        self.capacity = capacity
        self.enums = tp.enums
        self.store: Dict[Tuple[str, ...], object] = {}
        self.guard: Term = terms.TRUE
        self.registry = Registry()
        self.counters: Counter = Counter()
        self.assumptions: List[Tuple[Term, Term]] = []
        self.obligations: List[Tuple[Term, Term, ast.SourceSpan]] = []
        self.transcript: List[str] = []
        self.events: List[dict] = []
        self.consumption = _Consumption(tp)
        self._init_store()

    # -- store -------------------------------------------------------------

    def _init_store(self) -> None:
        root_mod = self.tp.modules[self.tp.root_name]
        frame = _Frame(self.tree.root, root_mod, True)
        for cell in self.layout.cells:
            if cell.kind == "state":
                self.store[cell.path] = self._eval_init(cell.init, cell.value_type, frame)
            else:
                self.store[cell.path] = self._zero_array_tree(cell)

    def _eval_init(self, e: ast.Expr, t: ast.TypeExpr, frame: _Frame):
        # Init expressions are closed and pure; they fold to constants.
        return self.eval(e, {}, frame)

    def _zero_array_tree(self, cell):
        kw = cell.key_type.width

        def build(t: ast.TypeExpr):
            if isinstance(t, ast.RecordType):
                return RecV(tuple((n, build(ft)) for n, ft in t.fields))
            if isinstance(t, ast.VectorType):
                return VecV(tuple(build(t.elem) for _ in range(t.length)))
            return terms.mk_const_array(kw, self._zero_leaf_term(t))

        return build(cell.value_type)

    def _zero_leaf_term(self, t: ast.TypeExpr) -> Term:
        return const_term(zero_scalar(t, self.enums), t, self.enums)

    def concrete_store(self) -> Dict[str, object]:
        out = {}
        for cell in self.layout.cells:
            t = cell.value_type if cell.kind == "state" else \
                ast.ArrayType(cell.key_type, cell.value_type)
            out[cell.dotted()] = tree_to_concrete(self.store[cell.path], t, self.enums)
        return out

    # -- choices ------------------------------------------------------------

    def _issue(self, site: int) -> ChoiceId:
        occ = self.counters[site]
        self.counters[site] = occ + 1
        return (site, occ)

    def fresh_scalar(self, site: int, t: ast.TypeExpr) -> Term:
        cid = self._issue(site)
        if self.mode == "conc":
            v = self.anys.scalar(cid, t, self.enums)
            return const_term(v, t, self.enums)
        info = self.registry.register(site, cid[1], t, scalar_sort(t, self.enums))
        var = terms.Var(scalar_sort(t, self.enums), info.vid)
        if isinstance(t, ast.EnumRef):
            n = len(self.enums[t.name])
            w = enum_width(n)
            if n < (1 << w):
                self.assumptions.append((terms.TRUE, terms.mk_ult(var, terms.mk_bv(w, n))))
        return var

    def fresh_tree(self, site: int, t: ast.TypeExpr):
        if isinstance(t, ast.RecordType):
            return RecV(tuple((n, self.fresh_tree(site, ft)) for n, ft in t.fields))
        if isinstance(t, ast.VectorType):
            return VecV(tuple(self.fresh_tree(site, t.elem) for _ in range(t.length)))
        return self.fresh_scalar(site, t)

    def fresh_array_tree(self, site: int, cell):
        kw = cell.key_type.width

        def build(t: ast.TypeExpr):
            if isinstance(t, ast.RecordType):
                return RecV(tuple((n, build(ft)) for n, ft in t.fields))
            if isinstance(t, ast.VectorType):
                return VecV(tuple(build(t.elem) for _ in range(t.length)))
            cid = self._issue(site)
            if self.mode == "conc":
                sa = self.anys.array(cid, kw, t, self.enums)
                sc = terms.mk_const_array(kw, const_term(sa.default, t, self.enums))
                for k, v in sa.mods:
                    sc = sc.write_const(k, const_term(v, t, self.enums))
                return sc
            sort = terms.arr_sort(kw, scalar_sort(t, self.enums))
            info = self.registry.register(site, cid[1],
                                          ast.ArrayType(cell.key_type, t), sort)
            return terms.Var(sort, info.vid)

        return build(cell.value_type)

    def ghost_skip(self, e: ast.Expr) -> None:
        """Advance choice counters over an unexecuted branch arm."""
        self.counters.update(self.consumption.of_expr(e))

    # -- evaluation ----------------------------------------------------------

    def eval(self, e: ast.Expr, env: dict, frame: _Frame):
        t = self.tp.types.get(e.node_id)
        if isinstance(e, ast.IntLit):
            if isinstance(t, ast.IntType):
                return terms.mk_int(e.value)
            return terms.mk_bv(t.width, e.value)
        if isinstance(e, ast.BoolLit):
            return terms.mk_bool(e.value)
        if isinstance(e, ast.UnitLit):
            return None
        if isinstance(e, ast.VectorLit):
            return VecV(tuple(self.eval(x, env, frame) for x in e.items))
        if isinstance(e, ast.RecordLit):
            written = {n: self.eval(v, env, frame) for n, v in e.fields}
            return RecV(tuple((n, written[n]) for n, _ in t.fields))
        if isinstance(e, ast.PathExpr):
            res = self.tp.resolutions[e.node_id]
            if isinstance(res, LocalRef):
                v = env[res.name]
                for name in res.fields:
                    v = v.get(name)
                return v
            assert isinstance(res, EnumVariantRef)
            w = enum_width(len(self.enums[res.enum]))
            return terms.mk_bv(w, res.index)
        if isinstance(e, ast.FieldAccess):
            return self.eval(e.base, env, frame).get(e.name)
        if isinstance(e, ast.Index):
            return self._eval_index(e, env, frame)
        if isinstance(e, ast.Slice):
            return terms.mk_extract(e.hi, e.lo, self.eval(e.base, env, frame))
        if isinstance(e, ast.IndexUpdate):
            base = self.eval(e.base, env, frame)
            idx = self.eval(e.index, env, frame)
            val = self.eval(e.value, env, frame)
            return self._vector_update(base, idx, val)
        if isinstance(e, ast.SliceUpdate):
            base = self.eval(e.base, env, frame)
            val = self.eval(e.value, env, frame)
            items = list(base.items)
            items[e.lo:e.hi + 1] = list(val.items)
            return VecV(tuple(items))
        if isinstance(e, ast.Unary):
            v = self.eval(e.operand, env, frame)
            return terms.mk_not(v) if e.op == "!" else terms.mk_neg(v)
        if isinstance(e, ast.Binary):
            return self._eval_binary(e, env, frame)
        if isinstance(e, ast.Call):
            return self._eval_call(e, env, frame)
        if isinstance(e, ast.Builtin):
            return self._eval_builtin(e, env, frame)
        if isinstance(e, ast.AnyExpr):
            return self.fresh_tree(e.node_id, t)
        if isinstance(e, ast.Let):
            v = self.eval(e.value, env, frame)
            if __debug__ and self.mode == "conc":
                # Type preservation: a produced value's runtime shape always
                # matches its static annotation (conversion raises otherwise).
                tree_to_concrete(v, self.tp.types[e.value.node_id], self.enums)
            env[e.name] = v
            return None
        if isinstance(e, ast.If):
            return self._eval_if(e, env, frame)
        if isinstance(e, ast.Block):
            inner = dict(env)
            result = None
            for i, item in enumerate(e.items):
                v = self.eval(item, inner, frame)
                if i == len(e.items) - 1 and e.yields_value:
                    result = v
            return result
        if isinstance(e, ast.Assume):
            body = self.eval(e.cond, env, frame)
            if self.mode == "sym":
                self.assumptions.append((self.guard, body))
                return None
            if not body.value:
                raise _Stop(AssumeInfeasible(e.span))
            return None
        if isinstance(e, ast.Assert):
            body = self.eval(e.cond, env, frame)
            if self.mode == "sym":
                self.obligations.append((self.guard, body, e.span))
                return None
            if not body.value:
                msg = ast.expr_source(e.cond)
                self.events.append({"event": "assert_failed", "at": str(e.span)})
                raise _Stop(AssertionFailed(e.span, msg))
            return None
        if isinstance(e, ast.Printf):
            holes = [self.eval(h, env, frame) for h in e.holes]
            if self.mode == "conc":
                rendered = []
                for h, v in zip(e.holes, holes):
                    cv = tree_to_concrete(v, self.tp.types[h.node_id], self.enums)
                    rendered.append(format_value(cv))
                pieces = [e.parts[0]]
                for part, r in zip(e.parts[1:], rendered):
                    pieces.append(r)
                    pieces.append(part)
                text = "".join(pieces)
                self.transcript.append(text)
                self.events.append({"event": "printf", "text": text})
            return None
        raise AssertionError(f"unhandled node {type(e).__name__}")

    def _eval_index(self, e: ast.Index, env, frame):
        base = self.eval(e.base, env, frame)
        idx = self.eval(e.index, env, frame)
        bt = self.tp.types[e.base.node_id]
        if isinstance(bt, ast.VectorType):
            return self._vector_select(base, idx)
        # array snapshot: read every leaf array at the key
        def read(tree):
            if isinstance(tree, RecV):
                return RecV(tuple((n, read(v)) for n, v in tree.fields))
            if isinstance(tree, VecV):
                return VecV(tuple(read(x) for x in tree.items))
            return terms.mk_arr_read(tree, idx)

        return read(base)

    def _vector_select(self, base: VecV, idx: Term):
        if isinstance(idx, terms.BVC):
            return base.items[idx.value]
        width = idx.sort[1]
        acc = base.items[0]
        for i in range(1, 1 << width):
            acc = tree_ite(terms.mk_eq(idx, terms.mk_bv(width, i)), base.items[i], acc)
        return acc

    def _vector_update(self, base: VecV, idx: Term, val):
        if isinstance(idx, terms.BVC):
            items = list(base.items)
            items[idx.value] = val
            return VecV(tuple(items))
        width = idx.sort[1]
        items = [
            tree_ite(terms.mk_eq(idx, terms.mk_bv(width, i)), val, base.items[i])
            if i < (1 << width) else base.items[i]
            for i in range(len(base.items))
        ]
        return VecV(tuple(items))

    def _eval_binary(self, e: ast.Binary, env, frame):
        l = self.eval(e.left, env, frame)
        r = self.eval(e.right, env, frame)
        op = e.op
        if op == "&&":
            return terms.mk_and(l, r)
        if op == "||":
            return terms.mk_or(l, r)
        if op == "==":
            return tree_eq(l, r)
        if op == "!=":
            return terms.mk_not(tree_eq(l, r))
        lt = self.tp.types[e.left.node_id]
        if op in ("<", "<=", ">", ">="):
            if op == ">":
                l, r, op = r, l, "<"
            elif op == ">=":
                l, r, op = r, l, "<="
            if isinstance(lt, ast.IntType):
                return terms.mk_lt(l, r) if op == "<" else terms.mk_le(l, r)
            return terms.mk_ult(l, r) if op == "<" else terms.mk_ule(l, r)
        if op == "+":
            return terms.mk_add(l, r)
        if op == "-":
            return terms.mk_sub(l, r)
        if op == "*":
            return terms.mk_mul(l, r)
        raise AssertionError(f"unknown operator {op}")

    def _eval_builtin(self, e: ast.Builtin, env, frame):
        v = self.eval(e.arg, env, frame)
        if e.name == "zero_extend":
            return terms.mk_zext(e.width, v)
        if e.name == "truncate":
            return terms.mk_extract(e.width - 1, 0, v)
        if e.name == "to_int":
            return terms.mk_bv2int(v)
        if e.name == "from_int":
            return terms.mk_int2bv(e.width, v)
        raise AssertionError(f"unknown builtin {e.name}")

    def _eval_if(self, e: ast.If, env, frame):
        cond = self.eval(e.cond, env, frame)
        if isinstance(cond, terms.BoolC):
            if cond.value:
                v = self.eval(e.then, env, frame)
                if e.orelse is not None:
                    self.ghost_skip(e.orelse)
                return v
            self.ghost_skip(e.then)
            if e.orelse is not None:
                return self.eval(e.orelse, env, frame)
            return None
        assert self.mode == "sym"
        saved_store = dict(self.store)
        saved_guard = self.guard
        self.guard = terms.mk_and(saved_guard, cond)
        v_then = self.eval(e.then, env, frame)
        store_then = self.store
        self.store = saved_store
        self.guard = terms.mk_and(saved_guard, terms.mk_not(cond))
        v_else = self.eval(e.orelse, env, frame) if e.orelse is not None else None
        self.guard = saved_guard
        self.store = merge_stores(cond, store_then, self.store)
        return tree_ite(cond, v_then, v_else)

    # -- calls ----------------------------------------------------------------

    def _eval_call(self, e: ast.Call, env, frame: _Frame):
        res = self.tp.resolutions[e.node_id]
        if isinstance(res, UserCall):
            return self._user_call(e, res, env, frame)
        return self._prim_call(e, res, env, frame)

    def _user_call(self, e: ast.Call, res: UserCall, env, frame: _Frame):
        target = resolve_instance(self.tree, frame.inst, res.inst_path, frame.is_root)
        args = [self.eval(a, env, frame) for a in e.args]
        decl = self.tp.fns[(res.module, res.fn)]
        fq = ".".join(target.path + (res.fn,)) if target.path else res.fn
        if self.mode == "conc":
            arg_text = {}
            for p, v in zip(decl.params, args):
                pt = self._resolved_type(p.type)
                arg_text[p.name] = format_value(tree_to_concrete(v, pt, self.enums))
            self.events.append({"event": "call", "fn": fq, "args": arg_text})
        new_env = {p.name: v for p, v in zip(decl.params, args)}
        new_frame = _Frame(target, self.tp.modules[res.module],
                           res.module == self.tp.root_name)
        result = self.eval(decl.body, new_env, new_frame)
        if self.mode == "conc":
            rt = self._resolved_type(decl.ret_type) if decl.ret_type is not None else ast.UNIT
            self.events.append({
                "event": "return", "fn": fq,
                "value": format_value(tree_to_concrete(result, rt, self.enums)),
            })
        return result

    def _resolved_type(self, t: Optional[ast.TypeExpr]) -> ast.TypeExpr:
        if t is None:
            return ast.UNIT
        return self.consumption._resolve(t)

    def _prim_call(self, e: ast.Call, res: PrimCall, env, frame: _Frame):
        target = resolve_instance(self.tree, frame.inst, res.inst_path, frame.is_root)
        args = [self.eval(a, env, frame) for a in e.args]
        op = res.op
        if op == "havoc":
            self._havoc(e.node_id, target)
            return None
        path = target.path
        if op == "state_get":
            return self.store[path]
        if op == "state_set":
            self.store[path] = args[0]
            return None
        if op == "array_get":
            return self.store[path]
        if op == "array_set":
            self.store[path] = args[0]
            return None
        if op == "array_read":
            def read(tree):
                if isinstance(tree, RecV):
                    return RecV(tuple((n, read(v)) for n, v in tree.fields))
                if isinstance(tree, VecV):
                    return VecV(tuple(read(x) for x in tree.items))
                return terms.mk_arr_read(tree, args[0])
            return read(self.store[path])
        if op == "array_write":
            def write(tree, vtree):
                if isinstance(tree, RecV):
                    return RecV(tuple((n, write(v, vtree.get(n))) for n, v in tree.fields))
                if isinstance(tree, VecV):
                    return VecV(tuple(write(x, y) for x, y in zip(tree.items, vtree.items)))
                return terms.mk_arr_write(tree, args[0], vtree)
            updated = write(self.store[path], args[1])
            if self.mode == "conc":
                self._check_capacity(updated, target)
            self.store[path] = updated
            return None
        raise AssertionError(f"unknown primitive op {op}")

    def _check_capacity(self, tree, target: InstanceNode) -> None:
        if isinstance(tree, RecV):
            for _, v in tree.fields:
                self._check_capacity(v, target)
        elif isinstance(tree, VecV):
            for v in tree.items:
                self._check_capacity(v, target)
        elif isinstance(tree, terms.SparseConst):
            if len(tree.mods) > self.capacity:
                raise CapacityError(target.dotted(), self.capacity)

    def _havoc(self, site: int, target: InstanceNode) -> None:
        for cell in self.layout.subtree(target.path):
            if cell.kind == "state":
                self.store[cell.path] = self.fresh_tree(site, cell.value_type)
            else:
                self.store[cell.path] = self.fresh_array_tree(site, cell)

    # -- entry ------------------------------------------------------------------

    def run(self, scenario: str):
        root_mod = self.tp.modules[self.tp.root_name]
        decl = next((f for f in root_mod.fns if f.name == scenario), None)
        if decl is None:
            names = ", ".join(self.tp.scenarios()) or "(none)"
            raise EngineError(f"no scenario {scenario!r} in module "
                              f"{self.tp.root_name}; available: {names}")
        if not decl.is_mut or decl.params:
            raise EngineError(f"scenario {scenario!r} must be a zero-parameter mut fn")
        frame = _Frame(self.tree.root, root_mod, True)
        return self.eval(decl.body, {}, frame)


def merge_stores(cond: Term, then_store: dict, else_store: dict) -> dict:
    return {k: tree_ite(cond, then_store[k], else_store[k]) for k in then_store}


# ---------------------------------------------------------------------------
# Public API


def init_store(tp: TypedProgram, tree: InstanceTree, layout: StateLayout
               ) -> Dict[str, object]:
    """Concrete initial store: scalar cells hold their evaluated init
    expressions, arrays are empty with an all-zero default."""
    eng = Engine(tp, tree, layout, "conc", anys=SeededRandom(0))
    return eng.concrete_store()


def run_scenario(tp: TypedProgram, tree: InstanceTree, layout: StateLayout,
                 scenario: str, anys: AnySource, capacity: int = 64) -> RunResult:
    eng = Engine(tp, tree, layout, "conc", anys=anys, capacity=capacity)
    verdict: object = Passed()
    try:
        eng.run(scenario)
    except _Stop as stop:
        verdict = stop.verdict
    return RunResult(verdict, eng.transcript, eng.events, eng.concrete_store())


def sym_exec(tp: TypedProgram, tree: InstanceTree, layout: StateLayout,
             scenario: str) -> VerificationCondition:
    eng = Engine(tp, tree, layout, "sym")
    eng.run(scenario)
    return VerificationCondition(eng.registry, eng.assumptions, eng.obligations)


def replay(tp: TypedProgram, tree: InstanceTree, layout: StateLayout,
           scenario: str, model: Dict[ChoiceId, object],
           capacity: int = 64) -> RunResult:
    """Replay a solver model: the symbolic engine with immediate concretization."""
    return run_scenario(tp, tree, layout, scenario, ModelOracle(model), capacity)
