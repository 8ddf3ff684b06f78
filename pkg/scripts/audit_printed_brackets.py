"""Check every golden bracket table against the Lie axioms and the computation.

    python3 scripts/audit_printed_brackets.py

For each golden table this prints whether the printed structure constants
satisfy antisymmetry and Jacobi on their own, and which entries differ from
the computed bracket.  A printed table that is not a Lie algebra cannot be
reproduced by any bracket, so the two columns together locate misprints.
"""
from jetbrackets import bracket as br
from jetbrackets.dsl import render_combo
from jetbrackets.errors import Refusal
from jetbrackets.fixtures import FIXTURE_NAMES, load_fixture


def main() -> None:
    for name in FIXTURE_NAMES:
        fx = load_fixture(name)
        for bt in fx.bracket_tables:
            if not bt.golden or not bt.entries:
                continue
            labels = [k for k, _ in bt.basis]
            printed = br.lie_algebra_checks(br.StructureConstants(labels, dict(bt.entries)))
            print(f"{bt.name}: printed table is {'a Lie algebra' if printed.passed else 'NOT a Lie algebra'}")
            for f in printed.failures:
                print(f"    {f}")
            try:
                res = fx.bracket_table(bt)
            except Refusal as exc:
                print(f"    computation refused: {exc}")
                continue
            for (a, b), want in sorted(bt.entries.items()):
                got = res.entry(a, b)
                if not br.combo_equal(got, want):
                    print(f"    [{a},{b}] printed {render_combo(want, labels)}, computed {render_combo(got, labels)}")


if __name__ == "__main__":
    main()
