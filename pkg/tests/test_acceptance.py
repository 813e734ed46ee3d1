"""Acceptance criteria 1-11, each a single test printing one PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) or through pytest; the
lines are also collected into the pytest terminal summary.
"""

import time

import pytest

from smforge import suites

try:
    from conftest import record_criterion
except ImportError:  # run as a script
    def record_criterion(line):
        pass


CRITERIA = [
    (1, "primitive-machine exactness", ["machines.lr_exact"], 30),
    (2, "LR_k exactness", ["machines.lrk"], 60),
    (3, "sector multipliers", ["machines.multiply_one", "machines.multiply_two",
                                     "machines.unreduced_base", "machines.three_part"], 120),
    (4, "tower language", ["computation.language"], 600),
    (5, "forbidden step histories", ["computation.forbidden"], 300),
    (6, "trapezium round-trip", ["diagram.roundtrip"], 60),
    (7, "annulus freedom", ["diagram.annuli"], None),
    (8, "presentation soundness", ["diagram.soundness", "presentation.relators"], None),
    (9, "Burnside oracle", ["presentation.oracle_axioms", "presentation.oracle_order"], 10),
    (10, "quadratic disk diagrams", ["diagram.quadratic"], 600),
    (11, "modified length", ["diagram.path_length", "diagram.length_bounds"], None),
]


def evaluate(num, title, names, limit):
    t = time.perf_counter()
    checks = [suites.run_suite_one(suites.CHECKS[n]) for n in names]
    secs = time.perf_counter() - t
    ok = all(c.ok for c in checks)
    timely = limit is None or secs < limit
    bits = "; ".join(c.line() for c in checks)
    budget = "" if limit is None else f" (limit {limit} s)"
    status = "PASS" if ok and timely else "FAIL"
    line = f"{status} criterion {num} {title}: {secs:.1f} s{budget}; {bits}"
    return ok and timely, line, checks


@pytest.mark.parametrize("num,title,names,limit", CRITERIA, ids=[f"c{c[0]}" for c in CRITERIA])
def test_criterion(num, title, names, limit):
    ok, line, checks = evaluate(num, title, names, limit)
    print(line)
    record_criterion(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(*c) for c in CRITERIA]
    for ok, line, _ in results:
        print(line)
    raise SystemExit(0 if all(r[0] for r in results) else 1)
