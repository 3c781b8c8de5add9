"""Seeded mutation fuzz: whatever garbage comes in, the frontend answers with
located diagnostics, never an internal crash."""

import random

from soclang.diagnostics import SocError, TypeErrors
from soclang.elaborate import elaborate
from soclang.parser import parse_program
from soclang.typecheck import check_program

from conftest import CORPUS

MUTATION_CHARS = "{}()[]<>;:.,=&|!+-*_ abcXYZ0123456789\"\n"
MUTATION_SNIPPETS = ["any", "let", "downto", "->", ":=", "u8", "0x", '"', "}"]


def test_mutated_sources_always_produce_diagnostics():
    rng = random.Random(1234)
    base = (CORPUS / "mini_tx1_vulnerable.soc").read_text()
    outcomes = {"ok": 0, "diag": 0}
    for _ in range(400):
        text = list(base)
        for _ in range(rng.randint(1, 6)):
            op = rng.random()
            pos = rng.randrange(len(text))
            if op < 0.4:
                del text[pos]
            elif op < 0.8:
                text[pos] = rng.choice(MUTATION_CHARS)
            else:
                text.insert(pos, rng.choice(MUTATION_SNIPPETS))
        mutated = "".join(text)
        try:
            tp = check_program(parse_program(mutated, "fuzz.soc"))
            elaborate(tp)
            outcomes["ok"] += 1
        except (SocError, TypeErrors) as err:
            assert "error:" in (err.report() if hasattr(err, "report") else str(err))
            outcomes["diag"] += 1
    assert outcomes["diag"] > 0
