import pytest

from soclang import ast
from soclang import engine as eng
from soclang import terms
from soclang.values import BitVec

from conftest import (CORPUS, brute_force_violating, load_file, load_source,
                      requires_z3, solve_vc)
from microgen import all_micro_scenarios


# -- merge laws ---------------------------------------------------------------


MERGE_MODEL = """
module Main {
  instance touched: State<BitInt(8)>(0);
  instance untouched: State<BitInt(8)>(7);
  mut fn s() {
    if any<Bool> { touched.set(1u8) } else { touched.set(2u8) };
    assert(touched.get() != 0u8)
  }
  mut fn only_then() {
    if any<Bool> { assert(false) } else { () };
    ()
  }
}
"""


def test_untouched_cell_is_not_wrapped_in_ite():
    tp, tree, layout = load_source(MERGE_MODEL)
    e = eng.Engine(tp, tree, layout, "sym")
    before = e.store[("untouched",)]
    e.run("s")
    assert e.store[("untouched",)] is before
    merged = e.store[("touched",)]
    assert isinstance(merged, terms.Ite)
    assert isinstance(merged.then, terms.BVC) and merged.then.value == 1
    assert isinstance(merged.other, terms.BVC) and merged.other.value == 2


def test_obligation_raised_in_then_arm_carries_the_branch_guard():
    tp, tree, layout = load_source(MERGE_MODEL)
    vc = eng.sym_exec(tp, tree, layout, "only_then")
    (guard, body, _site) = vc.obligations[0]
    assert isinstance(guard, terms.Var)  # true ∧ c folds to c
    assert isinstance(body, terms.BoolC) and body.value is False


def test_ite_with_equal_arms_folds():
    folded = terms.mk_ite(terms.Var(terms.BOOL_SORT, 0),
                          terms.mk_bv(4, 9), terms.mk_bv(4, 9))
    assert isinstance(folded, terms.BVC) and folded.value == 9
    x = terms.mk_bv(4, 1)
    assert terms.mk_ite(terms.TRUE, x, terms.mk_bv(4, 2)) is x
    assert terms.mk_ite(terms.FALSE, x, terms.mk_bv(4, 2)).value == 2


def test_assert_of_any_or_true_is_vacuous():
    tp, tree, layout = load_source(
        "module Main { mut fn s() { assert(any<Bool> || true) } }")
    vc = eng.sym_exec(tp, tree, layout, "s")
    assert isinstance(vc.violations_term(), terms.BoolC)
    assert vc.violations_term().value is False


@requires_z3
def test_vacuous_violation_solves_unsat(tmp_path):
    tp, tree, layout = load_source(
        "module Main { mut fn s() { assert(any<Bool> || true) } }")
    vc = eng.sym_exec(tp, tree, layout, "s")
    from soclang import smtlib
    assert isinstance(solve_vc(vc, tmpdir=tmp_path), smtlib.Unsat)


# -- choice-id discipline ------------------------------------------------------


def test_choice_ids_pair_site_with_occurrence():
    tp, tree, layout = load_source("""
module Roll {
  mut fn two() -> BitInt(2) { let unused = any<BitInt(1)>; any<BitInt(2)> }
}
module Main {
  instance r: Roll;
  mut fn s() {
    let a = r.two();
    let b = r.two();
    assert(a == b)
  }
}
""")
    vc = eng.sym_exec(tp, tree, layout, "s")
    sites = [(i.site, i.occ) for i in vc.registry.infos]
    assert len(sites) == 4
    assert sites[0][0] == sites[2][0] and sites[0][1] == 0 and sites[2][1] == 1
    assert sites[1][0] == sites[3][0] and sites[1][1] == 0 and sites[3][1] == 1


def test_ghost_counting_keeps_ids_aligned_across_skipped_arms():
    # The else-arm consumes ids in the VC ordering; replay down the then-arm
    # must still give the post-if `any` the same (site, occurrence) pair.
    tp, tree, layout = load_source("""
module Main {
  mut fn s() {
    let c = any<Bool>;
    let v = if c { 1u4 } else { any<BitInt(4)> + any<BitInt(4)> };
    let w = any<BitInt(4)>;
    assert(v + w != 9u4)
  }
}
""")
    vc = eng.sym_exec(tp, tree, layout, "s")
    infos = vc.registry.infos
    assert [str(i.type) for i in infos] == [
        "Bool", "BitInt(4)", "BitInt(4)", "BitInt(4)"]
    w_info = infos[3]
    # Violate via the then-arm: v = 1, w = 8.
    model = {infos[0].cid: True, w_info.cid: BitVec(4, 8)}
    r = eng.replay(tp, tree, layout, "s", model)
    assert isinstance(r.verdict, eng.AssertionFailed)
    # And via the else-arm: 2 + 3 + 4 = 9.
    model = {infos[0].cid: False, infos[1].cid: BitVec(4, 2),
             infos[2].cid: BitVec(4, 3), w_info.cid: BitVec(4, 4)}
    r = eng.replay(tp, tree, layout, "s", model)
    assert isinstance(r.verdict, eng.AssertionFailed)


# -- corpus-level verdicts -----------------------------------------------------


@requires_z3
def test_vulnerable_scenario_is_satisfiable(tmp_path):
    from soclang import smtlib
    tp, tree, layout = load_file(CORPUS / "mini_tx1_vulnerable.soc")
    vc = eng.sym_exec(tp, tree, layout, "test_secure_area_unchanged")
    verdict = solve_vc(vc, tmpdir=tmp_path)
    assert isinstance(verdict, smtlib.Sat)
    r = eng.replay(tp, tree, layout, "test_secure_area_unchanged", verdict.model)
    assert isinstance(r.verdict, eng.AssertionFailed)


@requires_z3
def test_fixed_scenario_is_unsatisfiable(tmp_path):
    from soclang import smtlib
    tp, tree, layout = load_file(CORPUS / "mini_tx1_fixed.soc")
    vc = eng.sym_exec(tp, tree, layout, "test_secure_area_unchanged")
    assert isinstance(solve_vc(vc, tmpdir=tmp_path), smtlib.Unsat)


# -- solver vs exhaustive interpretation (sample; full set in acceptance) ------


@requires_z3
@pytest.mark.parametrize("name,source", all_micro_scenarios()[:6],
                         ids=[n for n, _ in all_micro_scenarios()[:6]])
def test_micro_agreement_sample(name, source, tmp_path):
    from soclang import smtlib
    tp, tree, layout = load_source(source, name)
    verdict = solve_vc(eng.sym_exec(tp, tree, layout, "s"), tmpdir=tmp_path)
    solver_sat = isinstance(verdict, smtlib.Sat)
    assert solver_sat == brute_force_violating(tp, tree, layout, "s")


# -- guard correctness ----------------------------------------------------------


@requires_z3
def test_failing_site_guard_is_true_under_the_model(tmp_path):
    from soclang import smtlib
    tp, tree, layout = load_source("""
module Main {
  mut fn s() {
    let x = any<BitInt(3)>;
    if x < 4u3 { assert(x != 2u3) } else { assert(x != 6u3) }
  }
}
""")
    vc = eng.sym_exec(tp, tree, layout, "s")
    verdict = solve_vc(vc, tmpdir=tmp_path)
    assert isinstance(verdict, smtlib.Sat)
    r = eng.replay(tp, tree, layout, "s", verdict.model)
    assert isinstance(r.verdict, eng.AssertionFailed)
    failing = [o for o in vc.obligations if o[2] == r.verdict.site]
    assert failing, "failing site must be a recorded obligation"
    guard = failing[0][0]
    assert _eval_term(guard, vc, verdict.model) is True


def _eval_term(t, vc, model):
    """Tiny substitution evaluator for ground terms over a model."""
    if isinstance(t, terms.BoolC):
        return t.value
    if isinstance(t, terms.BVC):
        return t.value
    if isinstance(t, terms.Var):
        info = next(i for i in vc.registry.infos if i.vid == t.vid)
        v = model.get(info.cid)
        if v is None:
            return 0 if t.sort[0] == "bv" else False
        return v.value if isinstance(v, BitVec) else v
    if isinstance(t, terms.Not):
        return not _eval_term(t.arg, vc, model)
    if isinstance(t, terms.Bin):
        l = _eval_term(t.left, vc, model)
        r = _eval_term(t.right, vc, model)
        width = t.left.sort[1] if t.left.sort[0] == "bv" else None
        ops = {
            "and": lambda: l and r,
            "or": lambda: l or r,
            "eq": lambda: l == r,
            "ult": lambda: l < r,
            "ule": lambda: l <= r,
            "lt": lambda: l < r,
            "le": lambda: l <= r,
            "add": lambda: (l + r) & ((1 << width) - 1),
            "sub": lambda: (l - r) & ((1 << width) - 1),
            "mul": lambda: (l * r) & ((1 << width) - 1),
        }
        return ops[t.op]()
    if isinstance(t, terms.Ite):
        return _eval_term(t.then if _eval_term(t.cond, vc, model) else t.other,
                          vc, model)
    if isinstance(t, terms.Extract):
        return (_eval_term(t.arg, vc, model) >> t.lo) & ((1 << (t.hi - t.lo + 1)) - 1)
    if isinstance(t, terms.ZeroExt):
        return _eval_term(t.arg, vc, model)
    raise AssertionError(f"unhandled {type(t).__name__}")


@requires_z3
def test_havocked_array_model_parses_and_replays(tmp_path):
    from soclang import smtlib
    tp, tree, layout = load_source("""
module Mem { instance cells: Array<BitInt(4), BitInt(8)>; }
module Main {
  instance m: Mem;
  mut fn s() {
    m.havoc();
    let k = any<BitInt(4)>;
    assert(m.cells.read(k) != 7u8)
  }
}
""")
    vc = eng.sym_exec(tp, tree, layout, "s")
    verdict = solve_vc(vc, tmpdir=tmp_path)
    assert isinstance(verdict, smtlib.Sat)
    arr_info = next(i for i in vc.registry.infos
                    if isinstance(i.type, ast.ArrayType))
    assert arr_info.cid in verdict.model
    r = eng.replay(tp, tree, layout, "s", verdict.model)
    assert isinstance(r.verdict, eng.AssertionFailed)


@requires_z3
def test_symbolic_key_on_record_valued_array(tmp_path):
    from soclang import smtlib
    tp, tree, layout = load_source("""
type Entry = { tag: BitInt(4), val: BitInt(8) };
module T { instance slots: Array<BitInt(3), Entry>; }
module Main {
  instance t: T;
  mut fn s() {
    let k = any<BitInt(3)>;
    t.slots.write(k, { tag: 1u4, val: 7u8 });
    assert(t.slots.read(k).val == 7u8)
  }
}
""")
    vc = eng.sym_exec(tp, tree, layout, "s")
    assert isinstance(solve_vc(vc, tmpdir=tmp_path), smtlib.Unsat)


# -- havoc ------------------------------------------------------------------------


def test_havoc_registers_fresh_variables_for_the_whole_subtree():
    tp, tree, layout = load_file(CORPUS / "mini_tx1_fixed.soc")
    vc = eng.sym_exec(tp, tree, layout, "inductive_step")
    kinds = [str(i.type) for i in vc.registry.infos]
    # 13 scalar cells (cpu flag + 12 region registers) + the DRAM array.
    assert kinds.count("Bool") >= 1
    assert kinds.count("BitInt(64)") >= 12
    assert any(isinstance(i.type, ast.ArrayType) for i in vc.registry.infos)
    arr = next(i for i in vc.registry.infos if isinstance(i.type, ast.ArrayType))
    assert arr.sort == ("arr", 31, ("bv", 64))
