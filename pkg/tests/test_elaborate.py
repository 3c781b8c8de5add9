import pytest

from soclang.diagnostics import ElabError
from soclang.elaborate import dump_tree, elaborate
from soclang.parser import parse_program
from soclang.typecheck import check_program

from conftest import CORPUS, load_file


@pytest.fixture(scope="module")
def mini_tx1():
    return load_file(CORPUS / "mini_tx1_vulnerable.soc")


def test_instance_tree_paths(mini_tx1):
    _, tree, _ = mini_tx1
    paths = {".".join(p) for p in tree.by_path if p}
    for expected in ["miniTX1.cpu", "miniTX1.asc", "miniTX1.asc.region0",
                     "miniTX1.asc.region1", "miniTX1.asc.region2",
                     "miniTX1.asc.region3", "miniTX1.dram"]:
        assert expected in paths


def test_callee_bindings(mini_tx1):
    _, tree, _ = mini_tx1
    asc = tree.node(("miniTX1", "asc"))
    assert asc.callees["dram"] == ("miniTX1", "dram")
    cpu = tree.node(("miniTX1", "cpu"))
    assert cpu.callees["asc"] == ("miniTX1", "asc")


def test_cell_count_equals_reachable_primitives(mini_tx1):
    _, tree, layout = mini_tx1
    prim_nodes = [n for n in tree.by_path.values() if n.kind in ("state", "array")]
    assert len(layout.cells) == len(prim_nodes)
    # 4 regions x 3 registers + cpu flag + dram array
    assert len(layout.cells) == 14


def test_elaboration_is_deterministic(mini_tx1):
    tp, _, layout = mini_tx1
    tree2, layout2 = elaborate(tp)
    assert [c.path for c in layout.cells] == [c.path for c in layout2.cells]
    assert list(tree2.by_path) == list(tree2.by_path)


def test_dump_tree_golden(mini_tx1):
    tp, tree, _ = mini_tx1
    text = dump_tree(tp, tree)
    lines = text.splitlines()
    assert lines[0] == "Main : Main"
    assert "    miniTX1.cpu : CPU" in lines
    assert "      miniTX1.cpu.is_secure : State<Bool>" in lines
    assert "      miniTX1.dram.storage : Array<BitInt(31), BitInt(64)>" in lines
    assert dump_tree(tp, tree) == text


def _elab(source: str):
    tp = check_program(parse_program(source, "t.soc"))
    return elaborate(tp)


def test_unbound_callee_is_an_error():
    with pytest.raises(ElabError, match="unbound callee 'dram'"):
        _elab("""
module Dram { mut fn store(v: BitInt(8)) { () } }
module Asc {
  callee dram: Dram;
  mut fn fwd(v: BitInt(8)) { dram.store(v) }
}
module Main {
  instance asc: Asc;
  mut fn go() { asc.fwd(1u8) }
}
""")


def test_duplicate_wiring_is_an_error():
    with pytest.raises(ElabError, match="duplicate wiring"):
        _elab("""
module Dram { mut fn store(v: BitInt(8)) { () } }
module Asc {
  callee dram: Dram;
  mut fn fwd(v: BitInt(8)) { dram.store(v) }
}
module Main {
  instance asc: Asc;
  instance d1: Dram;
  instance d2: Dram;
  asc.dram -> d1;
  asc.dram -> d2;
  mut fn go() { asc.fwd(1u8) }
}
""")


def test_wrong_module_wiring_is_an_error():
    with pytest.raises(ElabError, match="expects Dram"):
        _elab("""
module Dram { mut fn store(v: BitInt(8)) { () } }
module Rom { mut fn load() -> BitInt(8) { 0u8 } }
module Asc {
  callee dram: Dram;
  mut fn fwd(v: BitInt(8)) { dram.store(v) }
}
module Main {
  instance asc: Asc;
  instance rom: Rom;
  asc.dram -> rom;
  mut fn go() { asc.fwd(1u8) }
}
""")


def test_two_callees_may_share_a_target():
    tree, _ = _elab("""
module Bus { mut fn poke() { () } }
module Dev {
  callee north: Bus;
  callee south: Bus;
  mut fn go() { north.poke(); south.poke() }
}
module Main {
  instance bus: Bus;
  instance dev: Dev;
  dev.north -> bus;
  dev.south -> bus;
  mut fn go() { dev.go() }
}
""")
    dev = tree.node(("dev",))
    assert dev.callees["north"] == dev.callees["south"] == ("bus",)
