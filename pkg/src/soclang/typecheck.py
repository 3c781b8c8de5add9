"""Bidirectional type checking with exact bit-width tracking.

Produces a TypedProgram: every expression annotated with a resolved type,
every call resolved to its target, aliases expanded, and the call graph
checked for cycles and purity violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import ast
from .diagnostics import TypeCheckError, TypeErrors

# ---------------------------------------------------------------------------
# Resolutions attached to path/call nodes


@dataclass
class LocalRef:
    name: str
    fields: Tuple[str, ...]  # record field chain applied after the variable


@dataclass
class EnumVariantRef:
    enum: str
    variant: str
    index: int


@dataclass
class UserCall:
    inst_path: Tuple[str, ...]  # empty = function of the current module
    module: str
    fn: str


@dataclass
class PrimCall:
    """Built-in operation on a state/array cell or instance subtree."""

    op: str  # state_get state_set array_get array_set array_read array_write havoc
    inst_path: Tuple[str, ...]
    value_type: Optional[ast.TypeExpr] = None
    key_type: Optional[ast.TypeExpr] = None
    target_module: Optional[str] = None  # havoc on a whole module instance


@dataclass
class TypedProgram:
    program: ast.Program
    aliases: Dict[str, ast.TypeExpr]
    enums: Dict[str, List[str]]
    modules: Dict[str, ast.ModuleDecl]
    fns: Dict[Tuple[str, str], ast.FnDecl]
    types: Dict[int, ast.TypeExpr]
    resolutions: Dict[int, object]
    root_name: str

    def type_of(self, e: ast.Expr) -> ast.TypeExpr:
        return self.types[e.node_id]

    def resolution_of(self, e: ast.Expr):
        return self.resolutions[e.node_id]

    def scenarios(self) -> List[str]:
        root = self.modules[self.root_name]
        return [f.name for f in root.fns if f.is_mut and not f.params]


def enum_width(n_variants: int) -> int:
    """Backend width of an enum with n variants: ceil(log2(max(n, 2)))."""
    return max(1, math.ceil(math.log2(max(n_variants, 2))))


# ---------------------------------------------------------------------------


@dataclass
class TypingCtx:
    """Binds the free variables of an expression and the checking position."""

    checker: "Checker"
    module: ast.ModuleDecl
    vars: Dict[str, ast.TypeExpr] = field(default_factory=dict)
    pure: bool = False        # inside a pure `fn` body
    init_expr: bool = False   # inside a State initializer

    def child(self) -> "TypingCtx":
        return TypingCtx(self.checker, self.module, dict(self.vars),
                         self.pure, self.init_expr)


class Checker:
    def __init__(self, program: ast.Program) -> None:
        self.program = program
        self.errors: List[TypeCheckError] = []
        self.aliases: Dict[str, ast.TypeExpr] = {}
        self.enums: Dict[str, List[str]] = {}
        self.modules: Dict[str, ast.ModuleDecl] = {}
        self.fns: Dict[Tuple[str, str], ast.FnDecl] = {}
        self.types: Dict[int, ast.TypeExpr] = {}
        self.resolutions: Dict[int, object] = {}
        self.call_edges: Dict[Tuple[str, str], set] = {}
        self._current_fn: Optional[Tuple[str, str]] = None

    # -- entry ----------------------------------------------------------

    def run(self) -> TypedProgram:
        self.collect_decls()
        if self.errors:
            raise TypeErrors(self.errors)
        for m in self.program.modules:
            self.check_module(m)
        self.check_recursion()
        if self.errors:
            raise TypeErrors(self.errors)
        return TypedProgram(
            program=self.program,
            aliases=self.aliases,
            enums=self.enums,
            modules=self.modules,
            fns=self.fns,
            types=self.types,
            resolutions=self.resolutions,
            root_name=self.program.root_name,
        )

    def fail(self, span, message: str) -> TypeCheckError:
        err = TypeCheckError(span, message)
        self.errors.append(err)
        return err

    # -- declaration tables ----------------------------------------------

    def collect_decls(self) -> None:
        p = self.program
        for en in p.enums:
            if en.name in self.enums:
                self.fail(en.span, f"duplicate enum {en.name!r}")
            if len(en.variants) != len(set(en.variants)):
                self.fail(en.span, f"duplicate variant in enum {en.name!r}")
            self.enums[en.name] = list(en.variants)
        raw_aliases = {}
        for a in p.aliases:
            if a.name in raw_aliases or a.name in self.enums:
                self.fail(a.span, f"duplicate type name {a.name!r}")
            raw_aliases[a.name] = a
        for a in p.aliases:
            try:
                self.aliases[a.name] = self._expand_alias(a.name, raw_aliases, [])
            except TypeCheckError:
                pass
        for m in p.modules:
            if m.name in self.modules or m.name in ("State", "Array"):
                self.fail(m.span, f"duplicate module {m.name!r}")
                continue
            self.modules[m.name] = m
            names = set()
            for inst in m.instances:
                if inst.name in names:
                    self.fail(inst.span, f"duplicate name {inst.name!r} in module {m.name}")
                names.add(inst.name)
            for c in m.callees:
                if c.name in names:
                    self.fail(c.span, f"duplicate name {c.name!r} in module {m.name}")
                names.add(c.name)
            for f in m.fns:
                if f.name in names:
                    self.fail(f.span, f"duplicate name {f.name!r} in module {m.name}")
                names.add(f.name)
                self.fns[(m.name, f.name)] = f
        if self.program.root_name not in self.modules:
            span = p.modules[0].span if p.modules else ast.SYNTHETIC
            self.fail(span, f"no root module {self.program.root_name!r}")

    def _expand_alias(self, name: str, raw, stack: list) -> ast.TypeExpr:
        if name in stack:
            decl = raw[name]
            raise self.fail(decl.span, f"type alias cycle through {name!r}")
        return self._resolve_type(raw[name].type, raw, stack + [name], raw[name].span)

    def _resolve_type(self, t: ast.TypeExpr, raw, stack, span) -> ast.TypeExpr:
        if isinstance(t, ast.AliasRef):
            if t.name in self.enums:
                return ast.EnumRef(t.name)
            if t.name in self.aliases:
                return self.aliases[t.name]
            if raw is not None and t.name in raw:
                return self._expand_alias(t.name, raw, stack)
            raise self.fail(span, f"unknown type {t.name!r}")
        if isinstance(t, ast.VectorType):
            return ast.VectorType(self._resolve_type(t.elem, raw, stack, span), t.length)
        if isinstance(t, ast.RecordType):
            return ast.RecordType(tuple(
                (n, self._resolve_type(ft, raw, stack, span)) for n, ft in t.fields))
        if isinstance(t, ast.ArrayType):
            return ast.ArrayType(self._resolve_type(t.key, raw, stack, span),
                                 self._resolve_type(t.value, raw, stack, span))
        return t

    def resolve_type(self, t: ast.TypeExpr, span) -> ast.TypeExpr:
        """Expand aliases and enum references in a written type."""
        return self._resolve_type(t, None, [], span)

    # -- modules ----------------------------------------------------------

    def check_module(self, m: ast.ModuleDecl) -> None:
        for inst in m.instances:
            self.check_instance(m, inst)
        for c in m.callees:
            if c.module not in self.modules:
                self.fail(c.span, f"callee {c.name!r} names unknown module {c.module!r}")
        for f in m.fns:
            self._current_fn = (m.name, f.name)
            self.call_edges.setdefault(self._current_fn, set())
            try:
                self.check_fn(m, f)
            except TypeCheckError:
                pass  # recorded; continue with the next function
        self._current_fn = None

    def check_instance(self, m: ast.ModuleDecl, inst: ast.InstanceDecl) -> None:
        ref = inst.ref
        try:
            if isinstance(ref, ast.ModuleRef):
                if ref.name not in self.modules:
                    self.fail(inst.span, f"unknown module {ref.name!r}")
            elif isinstance(ref, ast.StatePrim):
                vt = self.resolve_type(ref.value_type, inst.span)
                self._check_state_value_type(vt, inst.span)
                ctx = TypingCtx(self, m, {}, pure=True, init_expr=True)
                self.check_expr(ctx, ref.init, vt)
            elif isinstance(ref, ast.ArrayPrim):
                kt = self.resolve_type(ref.key_type, inst.span)
                vt = self.resolve_type(ref.value_type, inst.span)
                if not isinstance(kt, ast.BitIntType):
                    self.fail(inst.span, "Array key type must be BitInt")
                self._check_state_value_type(vt, inst.span)
        except TypeCheckError:
            pass

    def _check_state_value_type(self, t: ast.TypeExpr, span) -> None:
        if isinstance(t, ast.ArrayType):
            raise self.fail(span, "state values may not contain arrays")
        if isinstance(t, ast.UnitType):
            raise self.fail(span, "state values may not have unit type")
        if isinstance(t, ast.RecordType):
            for _, ft in t.fields:
                self._check_state_value_type(ft, span)
        if isinstance(t, ast.VectorType):
            self._check_state_value_type(t.elem, span)

    def check_fn(self, m: ast.ModuleDecl, f: ast.FnDecl) -> None:
        ctx = TypingCtx(self, m, {}, pure=not f.is_mut)
        for p in f.params:
            if p.name in ctx.vars:
                raise self.fail(p.span, f"duplicate parameter {p.name!r}")
            ctx.vars[p.name] = self.resolve_type(p.type, p.span)
        ret = self.resolve_type(f.ret_type, f.span) if f.ret_type is not None else ast.UNIT
        self.check_expr(ctx, f.body, ret)

    # -- bidirectional switch ----------------------------------------------

    def check_expr(self, ctx: TypingCtx, e: ast.Expr, expected: ast.TypeExpr) -> ast.TypeExpr:
        """Check e against an expected type; returns the (annotated) type."""
        t = self._check(ctx, e, expected)
        self.types[e.node_id] = t
        return t

    def infer_expr(self, ctx: TypingCtx, e: ast.Expr) -> ast.TypeExpr:
        """Synthesize a type for e; literals without a width suffix fail here."""
        t = self._infer(ctx, e)
        self.types[e.node_id] = t
        return t

    def _check(self, ctx, e, expected) -> ast.TypeExpr:
        if isinstance(e, ast.IntLit) and e.width is None:
            if isinstance(expected, ast.BitIntType):
                if e.value >= (1 << expected.width):
                    raise self.fail(
                        e.span, f"literal {e.value} does not fit in {expected.width} bits")
                return expected
            if isinstance(expected, ast.IntType):
                return expected
            raise self.fail(e.span, f"integer literal where {expected} is expected")
        if isinstance(e, ast.RecordLit):
            if not isinstance(expected, ast.RecordType):
                raise self.fail(e.span, f"record literal where {expected} is expected")
            return self._check_record_lit(ctx, e, expected)
        if isinstance(e, ast.VectorLit):
            if not isinstance(expected, ast.VectorType):
                raise self.fail(e.span, f"vector literal where {expected} is expected")
            if len(e.items) != expected.length:
                raise self.fail(
                    e.span,
                    f"vector literal has {len(e.items)} elements, expected {expected.length}")
            for item in e.items:
                self.check_expr(ctx, item, expected.elem)
            return expected
        if isinstance(e, ast.If):
            self.check_expr(ctx, e.cond, ast.BOOL)
            self.check_expr(ctx, e.then, expected)
            if e.orelse is None:
                if not isinstance(expected, ast.UnitType):
                    raise self.fail(e.span, "if without else has unit type")
            else:
                self.check_expr(ctx, e.orelse, expected)
            return expected
        if isinstance(e, ast.Block):
            return self._check_block(ctx, e, expected)
        if isinstance(e, ast.Unary) and e.op == "-":
            if isinstance(expected, (ast.BitIntType, ast.IntType)):
                self.check_expr(ctx, e.operand, expected)
                return expected
        if isinstance(e, ast.Binary) and e.op in ("+", "-", "*"):
            if isinstance(expected, (ast.BitIntType, ast.IntType)):
                self.check_expr(ctx, e.left, expected)
                self.check_expr(ctx, e.right, expected)
                return expected
        # Subsumption is type equality only: no implicit widening.
        actual = self.infer_expr(ctx, e)
        if not type_equal(actual, expected):
            raise self.fail(e.span, f"type mismatch: expected {expected}, found {actual}")
        return actual

    def _check_record_lit(self, ctx, e: ast.RecordLit, expected: ast.RecordType):
        declared = dict(expected.fields)
        written = [n for n, _ in e.fields]
        missing = [n for n, _ in expected.fields if n not in written]
        extra = [n for n in written if n not in declared]
        if missing:
            raise self.fail(e.span, "record literal is missing fields: " + ", ".join(missing))
        if extra:
            raise self.fail(e.span, "record literal has unknown fields: " + ", ".join(extra))
        for name, value in e.fields:
            self.check_expr(ctx, value, declared[name])
        return expected

    def _check_block(self, ctx, b: ast.Block, expected) -> ast.TypeExpr:
        inner = ctx.child()
        result: ast.TypeExpr = ast.UNIT
        for i, item in enumerate(b.items):
            last = i == len(b.items) - 1
            if isinstance(item, ast.Let):
                self._check_let(inner, item)
            elif last and b.yields_value:
                result = self.check_expr(inner, item, expected)
                return result
            else:
                self.check_expr(inner, item, ast.UNIT)
        if not isinstance(expected, ast.UnitType):
            span = b.items[-1].span if b.items else b.span
            raise self.fail(span, f"block yields unit, but {expected} is expected")
        return ast.UNIT

    def _check_let(self, ctx: TypingCtx, item: ast.Let) -> None:
        if item.annot is not None:
            t = self.resolve_type(item.annot, item.span)
            self.check_expr(ctx, item.value, t)
        else:
            t = self.infer_expr(ctx, item.value)
        self.types[item.node_id] = ast.UNIT
        ctx.vars[item.name] = t

    # -- synthesis ---------------------------------------------------------

    def _infer(self, ctx: TypingCtx, e: ast.Expr) -> ast.TypeExpr:
        if isinstance(e, ast.IntLit):
            if e.width is None:
                raise self.fail(e.span, "cannot infer width of integer literal "
                                        "(add a u<width> suffix or a type annotation)")
            return ast.BitIntType(e.width)
        if isinstance(e, ast.BoolLit):
            return ast.BOOL
        if isinstance(e, ast.UnitLit):
            return ast.UNIT
        if isinstance(e, ast.VectorLit):
            if not e.items:
                raise self.fail(e.span, "cannot infer the type of an empty vector literal")
            first = self.infer_expr(ctx, e.items[0])
            for item in e.items[1:]:
                self.check_expr(ctx, item, first)
            return ast.VectorType(first, len(e.items))
        if isinstance(e, ast.RecordLit):
            fields = tuple((n, self.infer_expr(ctx, v)) for n, v in e.fields)
            return ast.RecordType(fields)
        if isinstance(e, ast.PathExpr):
            return self._infer_path(ctx, e)
        if isinstance(e, ast.FieldAccess):
            base = self.infer_expr(ctx, e.base)
            if not isinstance(base, ast.RecordType):
                raise self.fail(e.span, f"field access on non-record type {base}")
            ft = base.field_type(e.name)
            if ft is None:
                raise self.fail(e.span, f"record {base} has no field {e.name!r}")
            return ft
        if isinstance(e, ast.Index):
            return self._infer_index(ctx, e)
        if isinstance(e, ast.Slice):
            base = self.infer_expr(ctx, e.base)
            if not isinstance(base, ast.BitIntType):
                raise self.fail(e.span, f"bit slice on non-BitInt type {base}")
            if e.hi < e.lo:
                raise self.fail(e.span, "slice bounds must satisfy hi >= lo")
            if e.hi >= base.width:
                raise self.fail(
                    e.span, f"slice [{e.hi} downto {e.lo}] out of range for {base}")
            return ast.BitIntType(e.hi - e.lo + 1)
        if isinstance(e, ast.IndexUpdate):
            base = self.infer_expr(ctx, e.base)
            if not isinstance(base, ast.VectorType):
                raise self.fail(e.span, f"index update on non-vector type {base}")
            self._check_vector_index(ctx, e.index, base, e.span)
            self.check_expr(ctx, e.value, base.elem)
            return base
        if isinstance(e, ast.SliceUpdate):
            base = self.infer_expr(ctx, e.base)
            if not isinstance(base, ast.VectorType):
                raise self.fail(e.span, f"slice update on non-vector type {base}")
            if e.hi >= base.length:
                raise self.fail(
                    e.span, f"slice [{e.hi} downto {e.lo}] out of range for {base}")
            if e.hi < e.lo:
                raise self.fail(e.span, "slice bounds must satisfy hi >= lo")
            self.check_expr(ctx, e.value,
                            ast.VectorType(base.elem, e.hi - e.lo + 1))
            return base
        if isinstance(e, ast.Unary):
            if e.op == "!":
                self.check_expr(ctx, e.operand, ast.BOOL)
                return ast.BOOL
            t = self.infer_expr(ctx, e.operand)
            if not isinstance(t, (ast.BitIntType, ast.IntType)):
                raise self.fail(e.span, f"unary '-' on non-numeric type {t}")
            return t
        if isinstance(e, ast.Binary):
            return self._infer_binary(ctx, e)
        if isinstance(e, ast.Call):
            return self._infer_call(ctx, e)
        if isinstance(e, ast.Builtin):
            return self._infer_builtin(ctx, e)
        if isinstance(e, ast.AnyExpr):
            if ctx.pure:
                raise self.fail(e.span, "'any' is not allowed in a pure fn")
            t = self.resolve_type(e.type, e.span)
            if isinstance(t, (ast.ArrayType, ast.UnitType)):
                raise self.fail(e.span, f"any<{t}> is not supported")
            return t
        if isinstance(e, ast.If):
            self.check_expr(ctx, e.cond, ast.BOOL)
            if e.orelse is None:
                self.check_expr(ctx, e.then, ast.UNIT)
                return ast.UNIT
            then_t = self.infer_expr(ctx, e.then)
            self.check_expr(ctx, e.orelse, then_t)
            return then_t
        if isinstance(e, ast.Block):
            return self._infer_block(ctx, e)
        if isinstance(e, (ast.Assume, ast.Assert)):
            if ctx.init_expr:
                raise self.fail(e.span, "assume/assert are not allowed here")
            self.check_expr(ctx, e.cond, ast.BOOL)
            return ast.UNIT
        if isinstance(e, ast.Printf):
            if ctx.init_expr:
                raise self.fail(e.span, "printf is not allowed here")
            for hole in e.holes:
                self.infer_expr(ctx, hole)
            return ast.UNIT
        if isinstance(e, ast.Let):
            raise self.fail(e.span, "let is only allowed directly inside a block")
        raise self.fail(e.span, f"cannot type {type(e).__name__}")

    def _infer_block(self, ctx, b: ast.Block) -> ast.TypeExpr:
        inner = ctx.child()
        for i, item in enumerate(b.items):
            last = i == len(b.items) - 1
            if isinstance(item, ast.Let):
                self._check_let(inner, item)
            elif last and b.yields_value:
                return self.infer_expr(inner, item)
            else:
                self.check_expr(inner, item, ast.UNIT)
        return ast.UNIT

    def _infer_path(self, ctx: TypingCtx, e: ast.PathExpr) -> ast.TypeExpr:
        head = e.names[0]
        if head in ctx.vars:
            t = ctx.vars[head]
            for name in e.names[1:]:
                if not isinstance(t, ast.RecordType):
                    raise self.fail(e.span, f"field access on non-record type {t}")
                ft = t.field_type(name)
                if ft is None:
                    raise self.fail(e.span, f"record {t} has no field {name!r}")
                t = ft
            self.resolutions[e.node_id] = LocalRef(head, tuple(e.names[1:]))
            return t
        if head in self.enums:
            if len(e.names) != 2:
                raise self.fail(e.span, f"expected {head}.<variant>")
            variant = e.names[1]
            if variant not in self.enums[head]:
                raise self.fail(e.span, f"enum {head} has no variant {variant!r}")
            self.resolutions[e.node_id] = EnumVariantRef(
                head, variant, self.enums[head].index(variant))
            return ast.EnumRef(head)
        raise self.fail(e.span, f"unknown name {head!r}")

    def _infer_index(self, ctx, e: ast.Index) -> ast.TypeExpr:
        base = self.infer_expr(ctx, e.base)
        if isinstance(base, ast.VectorType):
            self._check_vector_index(ctx, e.index, base, e.span)
            return base.elem
        if isinstance(base, ast.ArrayType):
            self.check_expr(ctx, e.index, base.key)
            return base.value
        raise self.fail(e.span, f"indexing on non-indexable type {base}")

    def _check_vector_index(self, ctx, index: ast.Expr, base: ast.VectorType, span) -> None:
        if isinstance(index, ast.IntLit) and index.width is None:
            # A bare literal index just needs to be in range.
            if index.value >= base.length:
                raise self.fail(span, f"index {index.value} out of range for {base}")
            w = max(1, (max(base.length, 2) - 1).bit_length())
            self.check_expr(ctx, index, ast.BitIntType(w))
            return
        it = self.infer_expr(ctx, index)
        if not isinstance(it, ast.BitIntType):
            raise self.fail(span, f"vector index must be BitInt, found {it}")
        if (1 << it.width) > base.length:
            raise self.fail(
                span,
                f"index width {it.width} can exceed vector length {base.length} "
                f"(need 2^width <= length)")

    def _infer_binary(self, ctx, e: ast.Binary) -> ast.TypeExpr:
        op = e.op
        if op in ("&&", "||"):
            self.check_expr(ctx, e.left, ast.BOOL)
            self.check_expr(ctx, e.right, ast.BOOL)
            return ast.BOOL
        left_t = self._infer_operand_pair(ctx, e.left, e.right, e.span)
        if op in ("==", "!="):
            self._require_equality_capable(left_t, e.span)
            return ast.BOOL
        if op in ("<", "<=", ">", ">="):
            if not isinstance(left_t, (ast.BitIntType, ast.IntType)):
                raise self.fail(e.span, f"comparison on non-numeric type {left_t}")
            return ast.BOOL
        if op in ("+", "-", "*"):
            if not isinstance(left_t, (ast.BitIntType, ast.IntType)):
                raise self.fail(e.span, f"arithmetic on non-numeric type {left_t}")
            return left_t
        raise self.fail(e.span, f"unknown operator {op!r}")

    def _infer_operand_pair(self, ctx, left, right, span) -> ast.TypeExpr:
        """Infer one operand, check the other against it: both widths must agree."""
        try:
            lt = self.infer_expr(ctx, left)
        except TypeCheckError as first_err:
            if not self._unwidthed(left):
                raise
            self.errors.remove(first_err)
            rt = self.infer_expr(ctx, right)
            self.check_expr(ctx, left, rt)
            return rt
        rt = self.check_expr(ctx, right, lt)
        if isinstance(lt, ast.BitIntType) and isinstance(rt, ast.BitIntType) \
                and lt.width != rt.width:
            raise self.fail(span, f"width mismatch: {lt} vs {rt}")
        return lt

    def _unwidthed(self, e: ast.Expr) -> bool:
        """Does inference fail on e only because a literal lacks a width?"""
        if isinstance(e, ast.IntLit):
            return e.width is None
        if isinstance(e, ast.Unary) and e.op == "-":
            return self._unwidthed(e.operand)
        if isinstance(e, ast.Binary) and e.op in ("+", "-", "*"):
            return self._unwidthed(e.left) or self._unwidthed(e.right)
        return False

    def _require_equality_capable(self, t: ast.TypeExpr, span) -> None:
        if isinstance(t, (ast.VectorType, ast.ArrayType)):
            raise self.fail(span, "equality on indexed collections is not supported "
                                  "(compare elements at an any-chosen index instead)")
        if isinstance(t, ast.UnitType):
            raise self.fail(span, "equality on unit values is not supported")
        if isinstance(t, ast.RecordType):
            for _, ft in t.fields:
                self._require_equality_capable(ft, span)

    # -- calls --------------------------------------------------------------

    def _infer_builtin(self, ctx, e: ast.Builtin) -> ast.TypeExpr:
        if e.name == "to_int":
            at = self.infer_expr(ctx, e.arg)
            if not isinstance(at, ast.BitIntType):
                raise self.fail(e.span, f"to_int takes a BitInt, found {at}")
            return ast.INT
        assert e.width is not None
        if e.width < 1:
            raise self.fail(e.span, "target width must be at least 1")
        if e.name == "from_int":
            self.check_expr(ctx, e.arg, ast.INT)
            return ast.BitIntType(e.width)
        at = self.infer_expr(ctx, e.arg)
        if not isinstance(at, ast.BitIntType):
            raise self.fail(e.span, f"{e.name} takes a BitInt, found {at}")
        if e.name == "zero_extend" and e.width < at.width:
            raise self.fail(e.span, f"zero_extend<{e.width}> narrows {at}")
        if e.name == "truncate" and e.width > at.width:
            raise self.fail(e.span, f"truncate<{e.width}> widens {at}")
        return ast.BitIntType(e.width)

    def _infer_call(self, ctx: TypingCtx, e: ast.Call) -> ast.TypeExpr:
        if len(e.path) == 1:
            return self._check_user_call(ctx, e, ctx.module.name, e.path[0], ())
        prefix, last = e.path[:-1], e.path[-1]
        target = self._resolve_instance_path(ctx, prefix, e.span)
        if isinstance(target, ast.ModuleDecl):
            if last == "havoc":
                prim = PrimCall("havoc", tuple(prefix), target_module=target.name)
                return self._check_prim_call(ctx, e, prim, [])
            return self._check_user_call(ctx, e, target.name, last, tuple(prefix))
        kind, vt, kt = target
        if kind == "state":
            ops = {"get": ("state_get", [], vt),
                   "set": ("state_set", [vt], ast.UNIT),
                   "havoc": ("havoc", [], ast.UNIT)}
        else:
            snapshot = ast.ArrayType(kt, vt)
            ops = {"get": ("array_get", [], snapshot),
                   "set": ("array_set", [snapshot], ast.UNIT),
                   "read": ("array_read", [kt], vt),
                   "write": ("array_write", [kt, vt], ast.UNIT),
                   "havoc": ("havoc", [], ast.UNIT)}
        if last not in ops:
            raise self.fail(e.span, f"unknown operation {last!r} on a {kind} cell")
        op, param_types, ret = ops[last]
        prim = PrimCall(op, tuple(prefix), value_type=vt, key_type=kt)
        self._check_prim_call(ctx, e, prim, param_types)
        return ret

    def _check_prim_call(self, ctx, e: ast.Call, prim: PrimCall, param_types) -> ast.TypeExpr:
        if ctx.pure:
            raise self.fail(e.span, "state access is not allowed in a pure fn")
        if len(e.args) != len(param_types):
            raise self.fail(e.span,
                            f"{e.path[-1]} expects {len(param_types)} arguments, "
                            f"got {len(e.args)}")
        for arg, pt in zip(e.args, param_types):
            self.check_expr(ctx, arg, pt)
        self.resolutions[e.node_id] = prim
        return ast.UNIT

    def _check_user_call(self, ctx: TypingCtx, e: ast.Call, module: str, fn: str,
                         inst_path: tuple) -> ast.TypeExpr:
        if ctx.init_expr:
            raise self.fail(e.span, "calls are not allowed in state initializers")
        decl = self.fns.get((module, fn))
        if decl is None:
            where = f" in module {module}" if inst_path else ""
            raise self.fail(e.span, f"unknown function {fn!r}{where}")
        if ctx.pure and decl.is_mut:
            raise self.fail(e.span, f"mut fn {fn!r} cannot be called from a pure fn")
        if len(e.args) != len(decl.params):
            raise self.fail(e.span, f"{fn} expects {len(decl.params)} arguments, "
                                    f"got {len(e.args)}")
        for arg, p in zip(e.args, decl.params):
            self.check_expr(ctx, arg, self.resolve_type(p.type, p.span))
        self.resolutions[e.node_id] = UserCall(inst_path, module, fn)
        if self._current_fn is not None:
            self.call_edges.setdefault(self._current_fn, set()).add((module, fn))
        ret = decl.ret_type
        return self.resolve_type(ret, decl.span) if ret is not None else ast.UNIT

    def _resolve_instance_path(self, ctx: TypingCtx, prefix: list, span):
        """Resolve a dotted instance prefix from the current module.

        Returns a ModuleDecl, or ("state"|"array", value_type, key_type) for a
        primitive cell. Only the root module may descend more than one level.
        """
        m = ctx.module
        is_root = m.name == self.program.root_name
        if len(prefix) > 1 and not is_root:
            raise self.fail(span, "only the root module may reach through nested "
                                  "instances; use a callee")
        current: object = m
        for i, seg in enumerate(prefix):
            if not isinstance(current, ast.ModuleDecl):
                raise self.fail(span, f"{'.'.join(prefix[:i])} is a state cell, "
                                      f"cannot descend into {seg!r}")
            inst = next((x for x in current.instances if x.name == seg), None)
            if inst is not None:
                ref = inst.ref
                if isinstance(ref, ast.ModuleRef):
                    # Missing modules were already diagnosed at the
                    # declaration; stop instead of cascading.
                    if ref.name not in self.modules:
                        raise self.fail(span, f"unknown module {ref.name!r}")
                    current = self.modules[ref.name]
                elif isinstance(ref, ast.StatePrim):
                    current = ("state", self.resolve_type(ref.value_type, span), None)
                else:
                    current = ("array",
                               self.resolve_type(ref.value_type, span),
                               self.resolve_type(ref.key_type, span))
                continue
            if i == 0:
                callee = next((c for c in current.callees if c.name == seg), None)
                if callee is not None:
                    if callee.module not in self.modules:
                        raise self.fail(span, f"unknown module {callee.module!r}")
                    current = self.modules[callee.module]
                    continue
            raise self.fail(span, f"{seg!r} is not an instance"
                                  f"{' or callee' if i == 0 else ''} of {current.name}")
        return current

    # -- recursion ------------------------------------------------------------

    def check_recursion(self) -> None:
        color: Dict[Tuple[str, str], int] = {}

        def visit(node, stack):
            color[node] = 1
            for succ in sorted(self.call_edges.get(node, ())):
                if color.get(succ, 0) == 1:
                    cycle = stack[stack.index(succ):] + [succ] if succ in stack else [node, succ]
                    pretty = " -> ".join(f"{m}.{f}" for m, f in cycle)
                    decl = self.fns[succ]
                    self.fail(decl.span, f"recursive call cycle: {pretty}")
                elif color.get(succ, 0) == 0:
                    visit(succ, stack + [succ])
            color[node] = 2

        for node in sorted(self.call_edges):
            if color.get(node, 0) == 0:
                visit(node, [node])


def type_equal(a: ast.TypeExpr, b: ast.TypeExpr) -> bool:
    """Structural equality; record fields compare by name, not order."""
    if isinstance(a, ast.RecordType) and isinstance(b, ast.RecordType):
        if len(a.fields) != len(b.fields):
            return False
        bmap = dict(b.fields)
        return all(n in bmap and type_equal(t, bmap[n]) for n, t in a.fields)
    if isinstance(a, ast.VectorType) and isinstance(b, ast.VectorType):
        return a.length == b.length and type_equal(a.elem, b.elem)
    if isinstance(a, ast.ArrayType) and isinstance(b, ast.ArrayType):
        return type_equal(a.key, b.key) and type_equal(a.value, b.value)
    return a == b


def check_program(program: ast.Program) -> TypedProgram:
    """Type-check a parsed program; raises TypeErrors on failure."""
    return Checker(program).run()
