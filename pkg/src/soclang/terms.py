"""Typed term algebra for symbolic execution.

Constructors constant-fold: operations on constant terms evaluate immediately,
which is exactly what makes replay (concrete) mode a special case of the
symbolic executor. Ite additionally folds equal arms and constant conditions;
everything else is left to the solver.

Terms compare by identity (eq=False): large merged states share subterms as a
DAG, and deep structural equality would be quadratic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

BOOL_SORT = ("bool",)
INT_SORT = ("int",)


def bv_sort(width: int):
    return ("bv", width)


def arr_sort(key_width: int, leaf):
    return ("arr", key_width, leaf)


@dataclass(frozen=True, eq=False)
class Term:
    sort: tuple


@dataclass(frozen=True, eq=False)
class BoolC(Term):
    value: bool


@dataclass(frozen=True, eq=False)
class BVC(Term):
    value: int


@dataclass(frozen=True, eq=False)
class IntC(Term):
    value: int


@dataclass(frozen=True, eq=False)
class Var(Term):
    vid: int

    @property
    def name(self) -> str:
        return f"c{self.vid}"


@dataclass(frozen=True, eq=False)
class Not(Term):
    arg: Term


@dataclass(frozen=True, eq=False)
class Bin(Term):
    op: str  # and or eq ult ule lt le add sub mul
    left: Term
    right: Term


@dataclass(frozen=True, eq=False)
class Ite(Term):
    cond: Term
    then: Term
    other: Term


@dataclass(frozen=True, eq=False)
class Extract(Term):
    hi: int
    lo: int
    arg: Term


@dataclass(frozen=True, eq=False)
class ZeroExt(Term):
    arg: Term


@dataclass(frozen=True, eq=False)
class Bv2Int(Term):
    arg: Term


@dataclass(frozen=True, eq=False)
class Int2Bv(Term):
    arg: Term


@dataclass(frozen=True, eq=False)
class ArrRead(Term):
    arr: Term
    key: Term


@dataclass(frozen=True, eq=False)
class ArrWrite(Term):
    arr: Term
    key: Term
    value: Term


@dataclass(frozen=True, eq=False)
class SparseConst(Term):
    """Constant array: a default leaf plus compacted (key, value) updates."""

    default: Term
    mods: Tuple[Tuple[int, Term], ...] = ()

    @property
    def key_width(self) -> int:
        return self.sort[1]

    def read_const(self, key: int) -> Term:
        for k, v in reversed(self.mods):
            if k == key:
                return v
        return self.default

    def write_const(self, key: int, value: Term) -> "SparseConst":
        for i, (k, _) in enumerate(self.mods):
            if k == key:
                mods = self.mods[:i] + ((key, value),) + self.mods[i + 1:]
                return SparseConst(self.sort, self.default, mods)
        return SparseConst(self.sort, self.default, self.mods + ((key, value),))


TRUE = BoolC(BOOL_SORT, True)
FALSE = BoolC(BOOL_SORT, False)


def is_const(t: Term) -> bool:
    return isinstance(t, (BoolC, BVC, IntC, SparseConst))


def mk_bool(v: bool) -> Term:
    return TRUE if v else FALSE


def mk_bv(width: int, value: int) -> Term:
    return BVC(bv_sort(width), value & ((1 << width) - 1))


def mk_int(value: int) -> Term:
    return IntC(INT_SORT, value)


def mk_not(a: Term) -> Term:
    if isinstance(a, BoolC):
        return mk_bool(not a.value)
    if isinstance(a, Not):
        return a.arg
    return Not(BOOL_SORT, a)


def mk_and(a: Term, b: Term) -> Term:
    if isinstance(a, BoolC):
        return b if a.value else FALSE
    if isinstance(b, BoolC):
        return a if b.value else FALSE
    return Bin(BOOL_SORT, "and", a, b)


def mk_or(a: Term, b: Term) -> Term:
    if isinstance(a, BoolC):
        return TRUE if a.value else b
    if isinstance(b, BoolC):
        return TRUE if b.value else a
    return Bin(BOOL_SORT, "or", a, b)


def mk_eq(a: Term, b: Term) -> Term:
    if a is b:
        return TRUE
    if isinstance(a, (BoolC, BVC, IntC)) and isinstance(b, (BoolC, BVC, IntC)):
        return mk_bool(a.value == b.value)
    return Bin(BOOL_SORT, "eq", a, b)


def mk_ult(a: Term, b: Term) -> Term:
    if isinstance(a, BVC) and isinstance(b, BVC):
        return mk_bool(a.value < b.value)
    return Bin(BOOL_SORT, "ult", a, b)


def mk_ule(a: Term, b: Term) -> Term:
    if isinstance(a, BVC) and isinstance(b, BVC):
        return mk_bool(a.value <= b.value)
    return Bin(BOOL_SORT, "ule", a, b)


def mk_lt(a: Term, b: Term) -> Term:
    if isinstance(a, IntC) and isinstance(b, IntC):
        return mk_bool(a.value < b.value)
    return Bin(BOOL_SORT, "lt", a, b)


def mk_le(a: Term, b: Term) -> Term:
    if isinstance(a, IntC) and isinstance(b, IntC):
        return mk_bool(a.value <= b.value)
    return Bin(BOOL_SORT, "le", a, b)


def _arith(op: str, a: Term, b: Term) -> Term:
    if isinstance(a, BVC) and isinstance(b, BVC):
        width = a.sort[1]
        v = {"add": a.value + b.value,
             "sub": a.value - b.value,
             "mul": a.value * b.value}[op]
        return mk_bv(width, v)
    if isinstance(a, IntC) and isinstance(b, IntC):
        v = {"add": a.value + b.value,
             "sub": a.value - b.value,
             "mul": a.value * b.value}[op]
        return mk_int(v)
    return Bin(a.sort, op, a, b)


def mk_add(a: Term, b: Term) -> Term:
    return _arith("add", a, b)


def mk_sub(a: Term, b: Term) -> Term:
    return _arith("sub", a, b)


def mk_mul(a: Term, b: Term) -> Term:
    return _arith("mul", a, b)


def mk_neg(a: Term) -> Term:
    if a.sort == INT_SORT:
        return mk_sub(mk_int(0), a)
    return mk_sub(mk_bv(a.sort[1], 0), a)


def mk_ite(cond: Term, then: Term, other: Term) -> Term:
    if isinstance(cond, BoolC):
        return then if cond.value else other
    if then is other:
        return then
    if isinstance(then, (BoolC, BVC, IntC)) and isinstance(other, (BoolC, BVC, IntC)) \
            and then.value == other.value and then.sort == other.sort:
        return then
    return Ite(then.sort, cond, then, other)


def mk_extract(hi: int, lo: int, a: Term) -> Term:
    if isinstance(a, BVC):
        return mk_bv(hi - lo + 1, a.value >> lo)
    if lo == 0 and hi + 1 == a.sort[1]:
        return a
    return Extract(bv_sort(hi - lo + 1), hi, lo, a)


def mk_zext(width: int, a: Term) -> Term:
    if a.sort[1] == width:
        return a
    if isinstance(a, BVC):
        return mk_bv(width, a.value)
    return ZeroExt(bv_sort(width), a)


def mk_bv2int(a: Term) -> Term:
    if isinstance(a, BVC):
        return mk_int(a.value)
    return Bv2Int(INT_SORT, a)


def mk_int2bv(width: int, a: Term) -> Term:
    if isinstance(a, IntC):
        return mk_bv(width, a.value)
    return Int2Bv(bv_sort(width), a)


def mk_arr_read(arr: Term, key: Term) -> Term:
    if isinstance(arr, SparseConst) and isinstance(key, BVC):
        return arr.read_const(key.value)
    if isinstance(arr, ArrWrite) and isinstance(key, BVC) and isinstance(arr.key, BVC):
        if arr.key.value == key.value:
            return arr.value
        return mk_arr_read(arr.arr, key)
    return ArrRead(arr.sort[2], arr, key)


def mk_arr_write(arr: Term, key: Term, value: Term) -> Term:
    if isinstance(arr, SparseConst) and isinstance(key, BVC) and is_const(value):
        return arr.write_const(key.value, value)
    return ArrWrite(arr.sort, arr, key, value)


def mk_const_array(key_width: int, default: Term) -> SparseConst:
    return SparseConst(arr_sort(key_width, default.sort), default)
