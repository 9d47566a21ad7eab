"""Acceptance gate: every criterion runs at its shipped scale and tolerance.

Run with -s to see one pass/fail line per criterion.
"""

import pytest

from fkpf.acceptance import CRITERIA, DEFAULT_SEED


@pytest.mark.parametrize("cid", list(CRITERIA))
def test_acceptance_criterion(cid):
    result = CRITERIA[cid](1.0, DEFAULT_SEED, 0)
    print(result.summary_line())
    assert result.passed, f"{cid} failed: {result.details}"
