import pytest

from nlsgraph import acceptance
from nlsgraph import graph as gc


def test_select_by_tag_and_id():
    assert acceptance.select("spectrum") == ["A2", "A3", "A4", "A5", "A6", "A7", "A8"]
    assert acceptance.select("a13") == ["A13"]
    assert acceptance.select(None) == [f"A{i}" for i in range(1, 15)]
    with pytest.raises(KeyError):
        acceptance.select("nothing")


def test_constraint_sign_mutation_fails_gate(monkeypatch):
    def broken(self):
        s_in, s_out = self.constraint_sums
        return abs(s_in + s_out) / s_in

    monkeypatch.setattr(gc.StarGraph, "constraint_residual", property(broken))
    res = acceptance.ITEMS["A1"][0](acceptance.Context())
    assert not res.passed


def test_gate_passes_unmutated():
    assert acceptance.ITEMS["A1"][0](acceptance.Context()).passed
