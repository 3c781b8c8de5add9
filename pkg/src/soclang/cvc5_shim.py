"""File-level cvc5 driver: `soclang-cvc5 FILE` behaves like `z3 -smt2 FILE`.

The cvc5 wheel ships no standalone executable, so this entry point feeds an
SMT-LIB v2 file through the cvc5 engine and prints the answers. It exists so
`--solver "soclang-cvc5 {file}"` (or SOC_SOLVER) can route queries through a
second, independent solver.
"""

from __future__ import annotations

import sys


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: soclang-cvc5 FILE.smt2", file=sys.stderr)
        return 2
    try:
        import cvc5
    except ImportError:
        print("error: the cvc5 python package is not installed", file=sys.stderr)
        return 2
    tm = cvc5.TermManager()
    solver = cvc5.Solver(tm)
    # Constant arrays ("as const") under QF_ABV need the extended array solver.
    solver.setOption("arrays-exp", "true")
    parser = cvc5.InputParser(solver)
    parser.setFileInput(cvc5.InputLanguage.SMT_LIB_2_6, args[0])
    sm = parser.getSymbolManager()
    last_sat = False
    while True:
        cmd = parser.nextCommand()
        if cmd.isNull():
            break
        text = str(cmd).strip()
        if text == "(get-model)" and not last_sat:
            # Mirror solver behavior without aborting the whole script.
            print('(error "model is not available")')
            continue
        out = cmd.invoke(solver, sm)
        if out:
            sys.stdout.write(out)
            if out.strip() == "sat":
                last_sat = True
            elif out.strip() in ("unsat", "unknown"):
                last_sat = False
    return 0


if __name__ == "__main__":
    sys.exit(main())
