"""Acceptance suite: one PASS/FAIL line per criterion, then the checks behind it.

Run ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import sys

import pytest

from wavefront.acceptance import CRITERIA, _Cache, format_table, run_all, run_criterion

_ctx = {}


def _result(number):
    # criteria 8-10 share one front, so the cache lives for the whole module
    if number not in _ctx:
        shared = _ctx.setdefault("cache", _Cache())
        _ctx[number] = run_criterion(number, shared)
    return _ctx[number]


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA])
def test_criterion(number, capsys):
    r = _result(number)
    with capsys.disabled():
        print()
        print(r.summary())
        for line in r.detail_lines():
            print(line)
    failed = [c.line().strip() for c in r.checks if not c.passed]
    assert r.error is None, r.error
    assert not failed, "; ".join(failed)
    assert r.runtime < r.runtime_target, f"took {r.runtime:.1f} s"


if __name__ == "__main__":
    results = run_all(echo=lambda r: print(r.summary(), flush=True))
    print()
    print(format_table(results), end="")
    sys.exit(0 if all(r.passed for r in results) else 1)
