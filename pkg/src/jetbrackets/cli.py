"""Command-line driver: ``jetbrackets <command> --fixture NAME``.

Every command builds a list of :class:`Section` objects and renders them as
aligned text, JSON or CSV.  Golden data stored in a fixture is compared
exactly before any ``--set`` substitution is applied to the display.

Exit codes: 0 all verdicts pass, 2 bad input, 3 a verdict failed or the
fixture did not validate, 4 a computation was refused.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence

from . import bracket as br
from .dsl import BracketTable, parse_combo, render_combo, render_operator
from .errors import InputError, JetBracketsError, Refusal, ValidationError
from .fixtures import FIXTURE_NAMES, Fixture, available_fixtures, load_file, load_fixture
from .paramscalar import ParamScalar, render_scalar

SCHEMA = "jetbrackets.report/1"
COMMANDS = ("check", "classify", "actions", "brackets", "noether", "variational", "report", "fixtures")

PASS, FAIL, REFUSED, INFO = "pass", "fail", "refused", "info"


@dataclass
class Section:
    title: str
    columns: List[str]
    rows: List[List[str]]
    verdict: str = INFO
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "title": self.title,
            "verdict": self.verdict,
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------- rendering helpers
class _Display:
    """Renders coefficients, optionally after substituting ``--set`` values."""

    def __init__(self, values: Mapping[str, Fraction]):
        self.values = dict(values)

    def scalar(self, s: ParamScalar) -> str:
        if self.values:
            s = s.subs({k: v for k, v in self.values.items() if k in s.params()})
        return render_scalar(s)

    def combo(self, c: Mapping[str, ParamScalar], order: Sequence[str] = ()) -> str:
        if self.values:
            c = br.combo_subs(c, self.values)
        return render_combo(br.combo_clean(c), order)


def _worst(verdicts: Sequence[str]) -> str:
    if REFUSED in verdicts:
        return REFUSED
    if FAIL in verdicts:
        return FAIL
    if PASS in verdicts:
        return PASS
    return INFO


def _same_span(a: Sequence[Mapping[str, ParamScalar]], b: Sequence[Mapping[str, ParamScalar]], labels, guard) -> bool:
    A = [br.to_list(c, labels) for c in a]
    B = [br.to_list(c, labels) for c in b]
    ra = br.rank(A, guard) if A else 0
    rb = br.rank(B, guard) if B else 0
    return ra == rb and (br.rank(A + B, guard) if A or B else 0) == ra


# ---------------------------------------------------------------- sections
def check_section(fx: Fixture) -> Section:
    rows, verdicts = [], []
    for lab in fx.sym_labels + fx.local_adj_labels:
        for rep in fx.check_object(lab):
            rows.append([lab, fx.side(lab), rep.method, rep.verdict])
            verdicts.append(rep.verdict)
    return Section("determining equations", ["object", "side", "method", "verdict"], rows, _worst(verdicts))


def classify_section(fx: Fixture) -> Section:
    rows, verdicts = [], []
    golden = fx.multipliers
    for lab in fx.adj_labels:
        v = fx.classify(lab)
        expect = ""
        verdict = PASS if v.consistent else FAIL
        if golden is not None and (lab in golden[0] or lab in golden[1]):
            expect = "Multiplier" if lab in golden[0] else "NonMultiplier"
            if expect != v.label:
                verdict = FAIL
        sa = "" if v.self_adjoint is None else ("yes" if v.self_adjoint else "no")
        rows.append([lab, v.label, sa, expect, verdict])
        verdicts.append(verdict)
    return Section(
        "multiplier classification", ["Q", "euler", "self-adjoint", "expected", "verdict"], rows, _worst(verdicts)
    )


def commutator_section(fx: Fixture, disp: _Display) -> Section:
    sc = fx.structure_constants()
    rows, verdicts = [], []
    golden = fx.commutators
    labels = fx.sym_labels
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            got = sc.bracket(a, b)
            verdict = INFO
            if golden is not None:
                want = golden.get((a, b))
                if want is None and (b, a) in golden:
                    want = br.combo_scale(golden[(b, a)], -1)
                verdict = PASS if br.combo_equal(got, want or {}) else FAIL
            rows.append([f"[{a},{b}]", disp.combo(got, labels), verdict])
            verdicts.append(verdict)
    return Section("symmetry commutators", ["pair", "value", "verdict"], rows, _worst(verdicts))


def action_sections(fx: Fixture, kind: int, disp: _Display) -> List[Section]:
    table = fx.action_table(kind)
    goldens = [t for t in fx.action_tables if t.kind == kind]
    mismatches: List[str] = []
    for t in goldens:
        for q, cells in t.rows.items():
            for p, want in zip(t.cols, cells):
                if not br.combo_equal(want, table[q][p]):
                    mismatches.append(f"{t.name}: cell ({q}, {p}) expected {disp.combo(want, fx.adj_labels)}")
    rows = [[q] + [disp.combo(table[q][p], fx.adj_labels) for p in fx.sym_labels] for q in fx.adj_labels]
    verdict = INFO if not goldens else (FAIL if mismatches else PASS)
    return [Section(f"action{kind}", ["Q"] + fx.sym_labels, rows, verdict, mismatches)]


def _bracket_section(fx: Fixture, title: str, bt: BracketTable, disp: _Display, instantiate: bool = False) -> Section:
    notes: List[str] = []
    try:
        res = fx.bracket_table(bt, instantiate)
    except Refusal as exc:
        expected = bt.ideal is False
        notes.append(f"{type(exc).__name__}: {exc}")
        return Section(title, ["pair", "value"], [], PASS if expected else REFUSED, notes)
    an = res.analysis
    verdicts = []
    notes.append("kernel: " + ", ".join(disp.combo(k, fx.sym_labels) for k in an.kernel) if an.kernel else "kernel: 0")
    notes.append(f"ideal: {'yes' if an.ideal else 'no'}")
    if bt.kernel is not None:
        ok = _same_span(an.kernel, bt.kernel, fx.sym_labels, fx.guard())
        verdicts.append(PASS if ok else FAIL)
        if not ok:
            notes.append("kernel differs from the declared kernel")
    if bt.ideal is not None and bt.ideal != an.ideal:
        verdicts.append(FAIL)
        notes.append("ideal flag differs from the declared value")
    rows = []
    labels = res.basis_labels
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            got = res.entry(a, b)
            verdict = INFO
            if bt.golden and bt.entries:
                want = bt.entries.get((a, b))
                if want is None and (b, a) in bt.entries:
                    want = br.combo_scale(bt.entries[(b, a)], -1)
                if instantiate and want is not None:
                    want = br.combo_subs(want, bt.instantiate)
                if want is None:
                    want = {}
                verdict = PASS if br.combo_equal(got, want) else FAIL
                if verdict == FAIL:
                    notes.append(f"[{a},{b}] expected {disp.combo(want, labels)}")
            rows.append([f"[{a},{b}]", disp.combo(got, labels), verdict])
            verdicts.append(verdict)
    return Section(title, ["pair", "value", "verdict"], rows, _worst(verdicts), notes)


def bracket_sections(fx: Fixture, disp: _Display, name: Optional[str] = None) -> List[Section]:
    out = []
    for bt in fx.bracket_tables:
        if name is not None and bt.name != name:
            continue
        out.append(_bracket_section(fx, f"bracket {bt.name}", bt, disp))
        if bt.instantiate:
            vals = ", ".join(f"{k}={v}" for k, v in sorted(bt.instantiate.items()))
            out.append(_bracket_section(fx, f"bracket {bt.name} at {vals}", bt, disp, instantiate=True))
    if name is not None and not out:
        raise InputError(f"fixture {fx.name!r} has no bracket table named {name!r}")
    return out


def adhoc_bracket_section(
    fx: Fixture, kind: Optional[int], q_text: str, policy: str, scaling: Optional[str], disp
) -> Section:
    """Bracket for a user-chosen ``q``.

    A fixture table with the same ``q`` and policy (and kind, when given)
    supplies the golden entries; otherwise the action kind defaults to 2.
    """
    q = parse_combo(q_text, fx.system.symbols, fx.adj_labels)
    for bt in fx.bracket_tables:
        if (kind is None or bt.kind == kind) and bt.policy == policy and br.combo_equal(bt.q, q):
            return _bracket_section(fx, f"bracket {bt.name}", bt, disp)
    kind = kind or 2
    title = f"bracket action{kind} q = {render_combo(q, fx.adj_labels)}"
    return _bracket_section(fx, title, BracketTable("adhoc", kind, q, policy, scaling, golden=False), disp)


def isomorphism_sections(fx: Fixture) -> List[Section]:
    out = []
    target = fx.structure_constants()
    for ib in fx.isomorphisms:
        try:
            res = fx.bracket_table(fx.find_bracket(ib.bracket))
        except Refusal as exc:
            out.append(Section(f"isomorphism {ib.name}", [], [], REFUSED, [str(exc)]))
            continue
        mapping = {k: br.combo_scale(v, ib.scale) for k, v in ib.mapping.items()}
        rep = br.isomorphism_check(res.structure_constants(), target, mapping)
        rows = [[k, render_combo(v, fx.sym_labels)] for k, v in mapping.items()]
        out.append(Section(f"isomorphism {ib.name}", ["Q", "image"], rows, rep.verdict, list(rep.failures)))
    return out


def noether_sections(fx: Fixture, disp: _Display) -> List[Section]:
    out = []
    for nb in fx.noether:
        J = fx.noether_op(nb)
        notes = [f"J = {render_operator(J)}", f"scale = {render_scalar(nb.scale)}"]
        verdicts = []
        if nb.J is not None:
            ok = J == nb.J
            verdicts.append(PASS if ok else FAIL)
            if not ok:
                notes.append(f"expected J = {render_operator(nb.J)}")
        imgs = fx.noether_images(nb)
        rows = []
        for p in fx.sym_labels:
            verdict = INFO
            if p in nb.images:
                verdict = PASS if br.combo_equal(imgs[p], nb.images[p]) else FAIL
            rows.append([p, disp.combo(imgs[p], fx.local_adj_labels), verdict])
            verdicts.append(verdict)
        out.append(Section(f"noether {nb.name}", ["P", "J(P)", "verdict"], rows, _worst(verdicts), notes))
    return out


def variational_sections(fx: Fixture) -> List[Section]:
    rows, verdicts = [], []
    for vb in fx.variational:
        rep = fx.variational_report(vb)
        verdict = PASS if rep.verdict == vb.expect else FAIL
        rows.append([vb.name, vb.kind, rep.method, rep.verdict, vb.expect, verdict])
        verdicts.append(verdict)
    if not rows:
        return []
    return [
        Section(
            "variational identities",
            ["name", "kind", "method", "outcome", "expected", "verdict"],
            rows,
            _worst(verdicts),
        )
    ]


def fixtures_section() -> Section:
    rows = []
    for name in available_fixtures():
        fx = load_fixture(name, validate=False)
        rows.append([
            name,
            str(len(fx.sym_labels)),
            str(len(fx.local_adj_labels)),
            str(len(fx.r_ops)),
            ", ".join(f"{k}={v}" for k, v in sorted(fx.specialization.items())) or "-",
        ])
    return Section("fixtures", ["name", "symmetries", "adjoint-symmetries", "r-operators", "specialization"], rows)


# ---------------------------------------------------------------- output formats
def _text_table(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
    if not columns:
        return []
    widths = [len(c) for c in columns]
    for r in rows:
        for i, cell in enumerate(r):
            widths[i] = max(widths[i], len(cell))
    fmt = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()  # noqa: E731
    lines = [fmt(columns), fmt(["-" * w for w in widths])]
    lines += [fmt(r) for r in rows]
    return lines


def render_text(sections: Sequence[Section]) -> str:
    out = []
    for s in sections:
        out.append(f"== {s.title} [{s.verdict}]")
        out += _text_table(s.columns, s.rows)
        out += [f"  {n}" for n in s.notes]
        out.append("")
    return "\n".join(out)


def render_json(header: dict, sections: Sequence[Section]) -> str:
    payload = dict(header)
    payload["schema"] = SCHEMA
    payload["verdict"] = _worst([s.verdict for s in sections])
    payload["sections"] = [s.as_dict() for s in sections]
    return json.dumps(payload, indent=2, sort_keys=True)


def render_csv(sections: Sequence[Section]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "row", "column", "value"])
    for s in sections:
        for r in s.rows:
            for col, cell in zip(s.columns[1:], r[1:]):
                w.writerow([s.title, r[0], col, cell])
    return buf.getvalue()


# ---------------------------------------------------------------- argument handling
def _parse_set(items: Sequence[str]) -> Dict[str, Fraction]:
    out = {}
    for item in items:
        if "=" not in item:
            raise InputError(f"--set expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError(f"--set value for {k.strip()!r} is not a rational number: {v!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jetbrackets", description="Symmetry actions and adjoint-symmetry brackets.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--format", choices=("text", "json", "csv"), default="text")
        sp.add_argument("--timing", action="store_true", help="print elapsed time on stderr")
        if name == "fixtures":
            continue
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--fixture", help=f"one of: {', '.join(FIXTURE_NAMES)}")
        src.add_argument("--file", help="path to a .sys file")
        sp.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                        help="substitute a parameter value into displayed coefficients")
        sp.add_argument("--symbolic", action="store_true", help="keep every parameter symbolic when loading")
        if name == "actions":
            sp.add_argument("--kind", type=int, choices=(1, 2, 3), action="append")
        if name == "brackets":
            sp.add_argument("--name", help="bracket table from the fixture")
            sp.add_argument("--q", help="adjoint-symmetry combination, e.g. 'Q3 + c1*Q1'")
            sp.add_argument("--kind", type=int, choices=(1, 2, 3))
            sp.add_argument("--policy", choices=("ideal", "scaling"), default="ideal")
            sp.add_argument("--scaling", help="scaling symmetry label for --policy scaling")
    return p


def _load(args) -> Fixture:
    spec = {} if args.symbolic else None
    if args.fixture:
        return load_fixture(args.fixture, specialize=spec)
    try:
        return load_file(args.file, specialize=spec)
    except OSError as exc:
        raise InputError(f"cannot read {args.file}: {exc.strerror}") from None


def _fixture_sections(args, fx: Fixture, disp: _Display) -> List[Section]:
    cmd = args.command
    if cmd == "check":
        return [check_section(fx)]
    if cmd == "classify":
        return [classify_section(fx)]
    if cmd == "actions":
        kinds = args.kind or [1, 2, 3]
        return [s for k in kinds for s in action_sections(fx, k, disp)]
    if cmd == "brackets":
        if args.q:
            scaling = args.scaling
            if args.policy == "scaling" and scaling is None:
                scaling = next((b.scaling for b in fx.bracket_tables if b.scaling), None)
                if scaling is None:
                    raise InputError("--policy scaling needs --scaling LABEL")
            return [adhoc_bracket_section(fx, args.kind, args.q, args.policy, scaling, disp)]
        return bracket_sections(fx, disp, args.name)
    if cmd == "noether":
        return noether_sections(fx, disp)
    if cmd == "variational":
        return variational_sections(fx)
    # report: everything the fixture carries
    out = [check_section(fx), classify_section(fx), commutator_section(fx, disp)]
    for k in sorted({t.kind for t in fx.action_tables}):
        out += action_sections(fx, k, disp)
    out += bracket_sections(fx, disp)
    out += isomorphism_sections(fx)
    out += noether_sections(fx, disp)
    out += variational_sections(fx)
    return out


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    t0 = time.perf_counter()
    header = {"command": args.command}
    try:
        if args.command == "fixtures":
            sections = [fixtures_section()]
        else:
            disp = _Display(_parse_set(args.set))
            fx = _load(args)
            header.update({"fixture": fx.name, "content_hash": fx.content_hash,
                           "specialization": {k: str(v) for k, v in sorted(fx.specialization.items())}})
            sections = _fixture_sections(args, fx, disp)
    except InputError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    except ValidationError as exc:
        print(f"validation failed: {exc}", file=stderr)
        return 3
    except Refusal as exc:
        print(f"refused: {type(exc).__name__}: {exc}", file=stderr)
        return 4
    except JetBracketsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return 3
    if args.format == "json":
        stdout.write(render_json(header, sections) + "\n")
    elif args.format == "csv":
        stdout.write(render_csv(sections))
    else:
        stdout.write(render_text(sections))
    if args.timing:
        print(f"elapsed {time.perf_counter() - t0:.3f}s", file=stderr)
    verdict = _worst([s.verdict for s in sections])
    return {REFUSED: 4, FAIL: 3}.get(verdict, 0)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
