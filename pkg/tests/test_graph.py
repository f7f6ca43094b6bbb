import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsgraph import graph as gc
from nlsgraph import stationary
from nlsgraph.errors import (ConstraintViolated, GridMismatch, InadmissiblePattern,
                             InvalidTopology, NonpositiveWeight, TruncationTooShort)

SQRT2 = math.sqrt(2.0)


@pytest.mark.parametrize("n, k, alphas, p", [
    (3, 1, (1 / SQRT2, 1, 1), 1),
    (4, 2, (1, 1, 1, 1), 1),
    (5, 2, (1, 2, 2, 2, 2), 2),
    (3, 2, (1, 1, 1 / SQRT2), 1),
])
def test_valid_graphs(n, k, alphas, p):
    g = gc.validate_graph(n, k, alphas, p)
    assert g.constraint_residual <= 1e-12
    assert g.incoming.sum() == k


@pytest.mark.parametrize("n, k, alphas, p, exc", [
    (3, 0, (1, 1, 1), 1, InvalidTopology),
    (3, 3, (1, 1, 1), 1, InvalidTopology),
    (3, 1, (1, 1), 1, InvalidTopology),
    (3, 1, (0.0, 1, 1), 1, NonpositiveWeight),
    (3, 1, (-1.0, 1, 1), 1, NonpositiveWeight),
    (2, 1, (1, 1), 0, NonpositiveWeight),
    (3, 1, (1, 1, 1), 1, ConstraintViolated),
])
def test_invalid_graphs(n, k, alphas, p, exc):
    with pytest.raises(exc):
        gc.validate_graph(n, k, alphas, p)


def test_constraint_error_reports_both_sums():
    with pytest.raises(ConstraintViolated, match="sum_in=.*sum_out="):
        gc.validate_graph(3, 1, (1, 1, 1), 1)


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(1, 4),
    m=st.integers(1, 4),
    p=st.sampled_from([0.5, 1.0, 1.5, 2.0, 3.0]),
    data=st.data(),
)
def test_balanced_weights_always_validate(k, m, p, data):
    """Draw outgoing weights freely, then fix the incoming ones to balance."""
    out = data.draw(st.lists(st.floats(0.2, 5.0), min_size=m, max_size=m))
    share = data.draw(st.lists(st.floats(0.1, 1.0), min_size=k, max_size=k))
    total = sum(a ** (-2 / p) for a in out)
    q_in = np.asarray(share) / sum(share) * total
    alphas = tuple(q_in ** (-p / 2)) + tuple(out)
    g = gc.validate_graph(k + m, k, alphas, p)
    s_in, s_out = g.constraint_sums
    assert s_in == pytest.approx(s_out, rel=1e-12)


def test_graph_dict_roundtrip(tmp_path):
    g = gc.validate_graph(5, 2, (1, 2, 2, 2, 2), 2)
    path = tmp_path / "g.json"
    gc.save_graph(g, path)
    assert gc.load_graph(path) == g


def test_permuted_keeps_groups():
    g = gc.validate_graph(4, 2, (1, 2, 1, 2), 1)
    assert gc.StarGraph(4, 2, (2, 1, 2, 1), 1.0) == g.permuted([1, 0, 3, 2])
    with pytest.raises(InvalidTopology):
        g.permuted([2, 1, 0, 3])


def test_grid_spacing_and_truncation():
    grid = gc.EdgeGrid.with_spacing(10.0, 0.01)
    assert grid.n_points == 1001
    assert grid.spacing == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(TruncationTooShort):
        gc.EdgeGrid(5.0, 501).check_truncation(1.0, 2.0)


def test_field_shape_checked():
    g = gc.validate_graph(4, 2, (1, 1, 1, 1), 1)
    grid = gc.EdgeGrid(5.0, 11)
    with pytest.raises(GridMismatch):
        gc.GraphField(g, grid, np.zeros((3, 11)))
    with pytest.raises(ValueError):
        gc.GraphField(g, grid, np.full((4, 11), np.nan))


def test_field_csv_roundtrip(tmp_path):
    g = gc.validate_graph(3, 1, (1 / SQRT2, 1, 1), 1)
    grid = gc.EdgeGrid.with_spacing(4.0, 0.1)
    rng = np.random.default_rng(3)
    vals = rng.standard_normal((3, grid.n_points)) + 1j * rng.standard_normal((3, grid.n_points))
    f = gc.GraphField(g, grid, vals)
    gc.field_to_csv(f, tmp_path / "f.csv")
    back = gc.field_from_csv(tmp_path / "f.csv", g)
    assert back.grid == grid
    np.testing.assert_array_equal(back.values, f.values)


def test_field_csv_wrong_edge_count(tmp_path):
    g3 = gc.validate_graph(3, 1, (1 / SQRT2, 1, 1), 1)
    g4 = gc.validate_graph(4, 2, (1, 1, 1, 1), 1)
    f = gc.zero_field(g3, gc.EdgeGrid(2.0, 5))
    gc.field_to_csv(f, tmp_path / "f.csv")
    with pytest.raises(GridMismatch):
        gc.field_from_csv(tmp_path / "f.csv", g4)


def test_mass_of_gaussian_per_edge():
    g = gc.validate_graph(4, 2, (1, 1, 1, 1), 1)
    grid = gc.EdgeGrid.with_spacing(12.0, 0.005)
    vals = np.tile(np.exp(-grid.x ** 2), (4, 1))
    # each edge carries int_0^inf exp(-2x^2) dx = sqrt(pi/8)
    assert gc.mass(gc.GraphField(g, grid, vals)) == pytest.approx(4 * math.sqrt(math.pi / 8), rel=1e-5)


def test_pattern_validation():
    g = gc.validate_graph(4, 2, (1, 1, 1, 1), 1)
    assert gc.canonical_pattern(g).m == (1, 1, 0, 0)
    assert gc.SignPattern((1, 0, 1, 0)).is_admissible(g)
    with pytest.raises(InadmissiblePattern):
        gc.check_pattern(g, gc.SignPattern((1, 1, 1, 0)))
    with pytest.raises(InadmissiblePattern):
        gc.check_pattern(g, gc.SignPattern((1, 0)))
    with pytest.raises(ValueError):
        gc.SignPattern((2, 0))
    assert len(list(gc.all_patterns(4))) == 16


def _sech_field(h, b=0.5, k=0.3, length=30.0):
    g = gc.validate_graph(4, 2, (1, 1, 1, 1), 1)
    grid = gc.EdgeGrid.with_spacing(length, h)
    x = grid.x
    vals = np.tile(np.exp(1j * k * x) / np.cosh(x + b), (4, 1))
    return gc.GraphField(g, grid, vals)


def test_quadrature_second_order():
    b, k = 0.5, 0.3
    t = math.tanh(b)
    exact = {
        "Q": 4 * (1 - t),
        # |psi'|^2 = sech^2 tanh^2 + k^2 sech^2, |psi|^4 = sech^4
        "E": 4 * ((1 - t**3) / 3 + k**2 * (1 - t) - (2 / 3 - t + t**3 / 3)),
    }
    errs = {"Q": [], "E": []}
    hs = (0.04, 0.02, 0.01, 0.005)
    for h in hs:
        f = _sech_field(h, b, k)
        errs["Q"].append(abs(gc.mass(f) - exact["Q"]))
        errs["E"].append(abs(gc.energy(f) - exact["E"]))
    for name, e in errs.items():
        slope = np.polyfit(np.log(hs), np.log(e), 1)[0]
        assert 1.8 <= slope <= 2.2, (name, slope)


def test_momentum_of_modulated_field():
    b, k = 0.5, 0.3
    f = _sech_field(0.005, b, k)
    # Im(psi' conj psi) = k sech^2 on every edge; signs (-,-,+,+) cancel
    assert abs(gc.momentum(f, gc.SignPattern((1, 1, 0, 0)))) < 1e-12
    per_edge = k * (1 - math.tanh(b))
    assert gc.momentum(f, gc.SignPattern((0, 0, 0, 0))) == pytest.approx(4 * per_edge, rel=1e-4)


def test_default_truncation_is_long_enough():
    g = gc.validate_graph(3, 1, (1 / SQRT2, 1, 1), 1)
    for a in (-1.0, 0.0, 1.0):
        grid = gc.EdgeGrid.for_states(1.0, a, spacing=0.02)
        long = gc.EdgeGrid.with_spacing(2 * grid.edge_length, 0.02)
        q1 = gc.mass(stationary.shifted_state(g, a, grid=grid).field)
        q2 = gc.mass(stationary.shifted_state(g, a, grid=long).field)
        assert abs(q1 - q2) < 1e-10 * q2


def test_permutation_leaves_mass_and_energy():
    g = gc.validate_graph(4, 2, (1, 2, 1, 2), 1)
    gp = g.permuted([1, 0, 3, 2])
    grid = gc.EdgeGrid.for_states(1.0, 0.5, spacing=0.02)
    f = stationary.shifted_state(g, 0.5, grid=grid).field
    fp = stationary.shifted_state(gp, 0.5, grid=grid).field
    assert gc.mass(f) == pytest.approx(gc.mass(fp), rel=1e-14)
    assert gc.energy(f) == pytest.approx(gc.energy(fp), rel=1e-13)
