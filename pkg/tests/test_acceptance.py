"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import pytest

from acaf import acceptance


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number, capsys):
    name, fn = acceptance.CRITERIA[number]
    rep = fn()
    failed = [c for c in rep.checks if c.required and not c.passed]
    with capsys.disabled():
        print(f"\ncriterion {number} ({name}): {'PASS' if rep.passed else 'FAIL'}")
        for c in failed:
            print(f"    failed: {c.name}  [{c.residual}]")
    assert rep.passed, f"{len(failed)} required check(s) failed: " + "; ".join(c.name for c in failed[:5])
