"""Harness over the bundled corpus: the manifest drives verify expectations,
and every ill-typed file must be rejected on its marked line."""

import re
from pathlib import Path

import pytest

from soclang import ast
from soclang.parser import parse_program

from conftest import CORPUS, requires_z3, run_cli


def parse_manifest(path: Path):
    entries = []
    current = None
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[entry]":
            current = {"fragments": []}
            entries.append(current)
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "fragment":
            current["fragments"].append(value)
        else:
            current[key] = value
    return entries


MANIFEST = parse_manifest(CORPUS / "manifest.txt")
EXPECTED_EXIT = {"proven": 0, "exploit": 2}


def test_manifest_covers_the_required_entries():
    by_file = {}
    for e in MANIFEST:
        by_file.setdefault(e["file"], set()).add(e["scenario"])
    assert by_file["mini_tx1_vulnerable.soc"] == {"test_secure_area_unchanged"}
    assert {"base_case", "inductive_step", "invariant_is_useful",
            "test_secure_area_unchanged"} <= by_file["mini_tx1_fixed.soc"]
    assert "monitor_read_detect.soc" in by_file
    assert "assume_assert_invariant.soc" in by_file


@pytest.mark.parametrize(
    "entry", MANIFEST, ids=[f"{e['file']}::{e['scenario']}" for e in MANIFEST])
@requires_z3
def test_manifest_entry(entry, tmp_path):
    path = CORPUS / entry["file"]
    args = ["verify", str(path), "--scenario", entry["scenario"],
            "--dump-model", str(tmp_path / "m.smt2")]
    code, out, err = run_cli(*args)
    assert code == EXPECTED_EXIT[entry["verify"]], (out, err)
    for fragment in entry["fragments"]:
        assert fragment in out, f"missing fragment {fragment!r} in:\n{out}"


def test_all_wellformed_corpus_files_pass_check():
    for path in sorted(CORPUS.glob("*.soc")):
        code, _, err = run_cli("check", str(path))
        assert code == 0, f"{path.name}: {err}"


# -- ill-typed suite -----------------------------------------------------------

ILL_TYPED = sorted((CORPUS / "ill-typed").glob("*.soc"))


def marked_line(path: Path) -> int:
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        if "//!" in line:
            return i
    raise AssertionError(f"{path.name} has no //! marker")


def test_ill_typed_suite_is_large_enough():
    assert len(ILL_TYPED) >= 15


@pytest.mark.parametrize("path", ILL_TYPED, ids=lambda p: p.name)
def test_ill_typed_file_rejected_on_the_marked_line(path: Path):
    code, _, err = run_cli("check", str(path))
    assert code == 1, f"{path.name} unexpectedly accepted"
    expected = marked_line(path)
    reported = [int(m.group(1)) for m in
                re.finditer(rf"{re.escape(path.name)}:(\d+):\d+: error:", err)]
    assert expected in reported, (
        f"{path.name}: expected a diagnostic on line {expected}, got {err!r}")


# -- published constants pinned --------------------------------------------------


def test_region_setup_constants():
    program = parse_program((CORPUS / "mini_tx1_vulnerable.soc").read_text(), "v")
    main = program.module("Main")
    setup = next(f for f in main.fns if f.name == "setup_regions")
    writes = []
    for node in ast.walk(setup.body):
        if isinstance(node, ast.RecordLit):
            fields = dict(node.fields)
            writes.append((fields["address"].value, fields["value"].value))
    assert writes == [
        (0x8000_0000_0000, 0x0),          # region0.START
        (0x8000_0000_0008, 0xFF_FFFF),    # region0.END
        (0x8000_0000_0010, 2),            # region0.ATTR = secure
        (0x8000_0000_0020, 0x100_0000),   # region1.START
        (0x8000_0000_0028, 0x3_FFFF_FFFF),  # region1.END
        (0x8000_0000_0030, 1),            # region1.ATTR = non-secure
    ]


def test_scenario_probe_bound():
    for name in ("mini_tx1_vulnerable.soc", "mini_tx1_fixed.soc"):
        program = parse_program((CORPUS / name).read_text(), name)
        main = program.module("Main")
        scen = next(f for f in main.fns if f.name == "test_secure_area_unchanged")
        bounds = [n for n in ast.walk(scen.body)
                  if isinstance(n, ast.IntLit) and n.width == 31]
        assert [b.value for b in bounds] == [0x1F_FFFF]


def test_fixed_file_differs_only_in_gate_and_induction():
    vuln = (CORPUS / "mini_tx1_vulnerable.soc").read_text()
    fixed = (CORPUS / "mini_tx1_fixed.soc").read_text()
    assert "is_region_config_addr(r.address) && r.is_secure" in fixed
    assert "is_region_config_addr(r.address) && r.is_secure" not in vuln
    for fn in ("base_case", "inductive_step", "invariant_is_useful"):
        assert f"mut fn {fn}()" in fixed
        assert f"mut fn {fn}()" not in vuln
