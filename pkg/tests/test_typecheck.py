import pytest

from soclang import ast
from soclang.diagnostics import TypeErrors
from soclang.parser import parse_expr, parse_program
from soclang.typecheck import Checker, TypingCtx, check_program, type_equal

from conftest import CORPUS

REQUEST_HANDLER = """\
type PhysAddr = BitInt(48);
type Request = { is_write: Bool, is_secure: Bool, address: PhysAddr, value: BitInt(64) };
type Response = { ok: Bool, value: BitInt(64) };

module Dram {
  instance storage: Array<BitInt(31), BitInt(64)>;
  mut fn store(addr: PhysAddr, value: BitInt(64)) -> Response {
    storage.write(addr[33 downto 3], value);
    { ok: true, value: 0 }
  }
}
module Asc {
  callee dram: Dram;
  mut fn request(r: Request) -> Response {
    let region_id = r.address[6 downto 5];
    if r.is_write {
      dram.store(r.address, r.value)
    } else {
      { ok: false, value: any<BitInt(64)> }
    }
  }
}
module Main {
  instance asc: Asc;
  instance dram: Dram;
  asc.dram -> dram;
  mut fn go() {
    let rep = asc.request({ is_write: true, is_secure: true, address: 1u48, value: 0 });
    assert(rep.ok)
  }
}
"""


def errors_of(source: str):
    with pytest.raises(TypeErrors) as exc:
        check_program(parse_program(source, "t.soc"))
    return exc.value.errors


def find_expr(program, pred):
    for mod in program.modules:
        for fn in mod.fns:
            for node in ast.walk(fn.body):
                if pred(node):
                    return node
    raise AssertionError("expression not found")


def test_request_handler_is_well_typed_and_slices_have_exact_widths():
    program = parse_program(REQUEST_HANDLER, "h.soc")
    tp = check_program(program)
    sl = find_expr(program, lambda n: isinstance(n, ast.Slice) and n.hi == 6)
    assert tp.type_of(sl) == ast.BitIntType(2)
    word = find_expr(program, lambda n: isinstance(n, ast.Slice) and n.hi == 33)
    assert tp.type_of(word) == ast.BitIntType(31)


def test_width_mismatch_reports_both_types():
    errs = errors_of("""
module Main {
  mut fn go() {
    let x = 1u32;
    let y = 2u64;
    let z = x + y;
    ()
  }
}
""")
    assert any("BitInt(32)" in e.message and "BitInt(64)" in e.message for e in errs)


def test_indexed_collection_equality_is_rejected():
    errs = errors_of("""
module Mem { instance cells: Array<BitInt(4), BitInt(8)>; }
module Main {
  instance m: Mem;
  mut fn go() {
    let orig_mem = m.cells.get();
    let new_mem = m.cells.get();
    assert(orig_mem == new_mem)
  }
}
""")
    assert any("equality on indexed collections is not supported" in e.message
               for e in errs)


def test_any_expands_aliases():
    program = parse_program("""
type PhysAddr = BitInt(48);
module Main {
  mut fn go() {
    let a = any<PhysAddr>;
    ()
  }
}
""")
    tp = check_program(program)
    anynode = find_expr(program, lambda n: isinstance(n, ast.AnyExpr))
    assert tp.type_of(anynode) == ast.BitIntType(48)


def test_if_checked_against_width_propagates_to_both_arms():
    program = parse_program("""
module Main {
  mut fn go() {
    let c = any<Bool>;
    let x: BitInt(64) = if c { 1 } else { 0 };
    ()
  }
}
""")
    tp = check_program(program)
    one = find_expr(program, lambda n: isinstance(n, ast.IntLit) and n.value == 1)
    zero = find_expr(program, lambda n: isinstance(n, ast.IntLit) and n.value == 0)
    assert tp.type_of(one) == ast.BitIntType(64)
    assert tp.type_of(zero) == ast.BitIntType(64)


def test_bare_literal_without_context_cannot_infer_width():
    errs = errors_of("module Main { mut fn go() { let x = 1; () } }")
    assert any("cannot infer width" in e.message for e in errs)


def test_record_literal_field_order_is_free():
    program = parse_program("""
type Response = { ok: Bool, value: BitInt(64) };
module Main {
  mut fn go() {
    let r: Response = { value: 3, ok: true };
    assert(r.ok)
  }
}
""")
    check_program(program)


def test_record_literal_missing_fields_listed():
    errs = errors_of("""
type Request = { is_write: Bool, address: BitInt(16), value: BitInt(8) };
module Main {
  mut fn go() {
    let r: Request = { is_write: true };
    ()
  }
}
""")
    assert any("missing fields: address, value" in e.message for e in errs)


def test_operands_widths_always_equal_on_corpus():
    # No implicit coercions: both operand widths equal on every arithmetic
    # or comparison node of the bundled models.
    for path in sorted(CORPUS.glob("*.soc")):
        program = parse_program(path.read_text(), path.name)
        tp = check_program(program)
        for mod in program.modules:
            for fn in mod.fns:
                for node in ast.walk(fn.body):
                    if isinstance(node, ast.Binary) and node.op in (
                            "+", "-", "*", "<", "<=", ">", ">=", "==", "!="):
                        lt = tp.type_of(node.left)
                        rt = tp.type_of(node.right)
                        assert type_equal(lt, rt), (path.name, node.op, lt, rt)


def test_infer_and_check_expr_api():
    program = parse_program("module Main { mut fn go() { () } }")
    chk = Checker(program)
    chk.collect_decls()
    ctx = TypingCtx(chk, program.module("Main"),
                    {"x": ast.BitIntType(48)})
    e = parse_expr("x[6 downto 5]")
    assert chk.infer_expr(ctx, e) == ast.BitIntType(2)
    lit = parse_expr("1")
    assert chk.check_expr(ctx, lit, ast.BitIntType(64)) == ast.BitIntType(64)
    with pytest.raises(Exception):
        chk.infer_expr(ctx, parse_expr("1"))


def test_recursion_cycle_named_in_error():
    errs = errors_of("""
module Main {
  fn f(n: BitInt(8)) -> BitInt(8) { g(n) }
  fn g(n: BitInt(8)) -> BitInt(8) { f(n) }
  mut fn go() { let x = f(1u8); () }
}
""")
    assert any("recursive call cycle" in e.message for e in errs)


def test_vector_index_width_must_cover_length():
    errs = errors_of("""
module Main {
  mut fn go() {
    let v = [1u8, 2u8, 3u8];
    let x = v[any<BitInt(2)>];
    ()
  }
}
""")
    assert any("2^width <= length" in e.message for e in errs)


def test_int_supports_arithmetic_and_comparisons_only():
    program = parse_program("""
module Main {
  mut fn go() {
    let a = to_int(5u8);
    let b = a * a + a - to_int(1u8);
    assume(b > a);
    let back = from_int<16>(b);
    assert(back == 29u16)
  }
}
""")
    check_program(program)


def test_truncate_and_zero_extend_direction_checked():
    errs = errors_of("""
module Main {
  mut fn go() {
    let x = zero_extend<8>(any<BitInt(16)>);
    ()
  }
}
""")
    assert any("narrows" in e.message for e in errs)


def test_scenarios_listed():
    tp = check_program(parse_program("""
module Main {
  mut fn setup(x: BitInt(8)) { () }
  fn helper() -> Bool { true }
  mut fn scenario_a() { () }
  mut fn scenario_b() { assert(true) }
}
"""))
    assert tp.scenarios() == ["scenario_a", "scenario_b"]


def test_multiple_errors_collected():
    errs = errors_of("""
module Main {
  mut fn one() { let x = 1; () }
  mut fn two() { assert(5u8) }
}
""")
    assert len(errs) >= 2
