"""Acceptance items A1-A14; each prints one PASS/FAIL line.

The shared context memoises states, operators and stability reports across
items, so the whole module runs in a few minutes.
"""

import pytest

from nlsgraph import acceptance


@pytest.fixture(scope="module")
def ctx():
    return acceptance.Context(seed=0)


@pytest.mark.slow
@pytest.mark.parametrize("item", list(acceptance.ITEMS))
def test_acceptance_item(item, ctx, capsys):
    res = acceptance.ITEMS[item][0](ctx)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.detail
