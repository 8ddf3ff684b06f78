"""Shared registry for acceptance outcomes, printed at the end of a pytest run."""

RESULTS = {}


def record(n: int, ok: bool, detail: str = "") -> None:
    RESULTS[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
