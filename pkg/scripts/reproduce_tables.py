"""Regenerate every fixture report and summarise the verdicts.

    python3 scripts/reproduce_tables.py [--out DIR] [--format text|json|csv]

Writes one report per fixture into DIR (default ``reports/``) and prints a
line per fixture with the CLI exit code.  Exit status is the worst code seen.
"""
import argparse
import io
import sys
from pathlib import Path

from jetbrackets.cli import run
from jetbrackets.fixtures import FIXTURE_NAMES

SUFFIX = {"text": "txt", "json": "json", "csv": "csv"}
MEANING = {0: "ok", 2: "input error", 3: "failed verdict", 4: "refused"}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="reports", type=Path)
    ap.add_argument("--format", default="text", choices=sorted(SUFFIX))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name in FIXTURE_NAMES:
        out, err = io.StringIO(), io.StringIO()
        code = run(["report", "--fixture", name, "--format", args.format], stdout=out, stderr=err)
        path = args.out / f"{name}.{SUFFIX[args.format]}"
        path.write_text(out.getvalue())
        print(f"{name:24s} exit {code} ({MEANING.get(code, '?')})  -> {path}")
        if err.getvalue():
            print(err.getvalue().rstrip(), file=sys.stderr)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
