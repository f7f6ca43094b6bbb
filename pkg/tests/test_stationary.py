import math

import numpy as np
import pytest

from nlsgraph import graph as gc
from nlsgraph import stationary as st
from nlsgraph.errors import InadmissiblePattern, NonpositiveOmega, OddN

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def g31():
    return gc.validate_graph(3, 1, (1 / SQRT2, 1, 1), 1)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.0])
def test_profile_solves_scalar_equation(p):
    x = np.linspace(-6, 6, 6001)
    h = x[1] - x[0]
    phi = st.soliton_profile(p, x)
    d2 = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / h**2
    res = -d2 + phi[1:-1] - (p + 1) * phi[1:-1] ** (2 * p + 1)
    assert np.abs(res).max() < 1e-4
    dphi = st.soliton_derivative(p, x)
    np.testing.assert_allclose(dphi[1:-1], (phi[2:] - phi[:-2]) / (2 * h), atol=1e-5)


def test_profile_p1_is_sech():
    x = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(st.soliton_profile(1.0, x), 1 / np.cosh(x), rtol=1e-14)


@pytest.mark.parametrize("a", [-0.7, 0.0, 0.7])
def test_residual_second_order(g31, a):
    res = []
    for h in (0.02, 0.01):
        grid = gc.EdgeGrid.for_states(1.0, a, spacing=h)
        res.append(st.stationary_residual(st.shifted_state(g31, a, grid=grid)))
    assert math.log2(res[0] / res[1]) == pytest.approx(2.0, abs=0.15)


def test_vertex_values_exact(g31):
    s = st.shifted_state(g31, 0.7)
    v = s.field.values[:, 0].real
    gamma = v / g31.vertex_weights
    assert np.ptp(gamma) == 0.0


def test_positive_and_real(g31):
    s = st.shifted_state(g31, -0.7)
    assert np.all(s.real > 0)
    assert np.all(s.field.values.imag == 0)


def test_complement_pattern_swaps_sign(g31):
    pat = gc.canonical_pattern(g31)
    s1 = st.shifted_state(g31, 0.7, pat)
    s2 = st.shifted_state(g31, -0.7, pat.complement(), grid=s1.grid)
    np.testing.assert_array_equal(s1.field.values, s2.field.values)


def test_permutation_covariance():
    g = gc.validate_graph(4, 2, (1, 2, 1, 2), 1)
    gp = g.permuted([1, 0, 3, 2])
    grid = gc.EdgeGrid.for_states(1.0, 0.5, spacing=0.02)
    s = st.shifted_state(g, 0.5, grid=grid)
    sp_ = st.shifted_state(gp, 0.5, grid=grid)
    np.testing.assert_array_equal(s.field.values[[1, 0, 3, 2]], sp_.field.values)


def test_scaling_mass_law(g31):
    s = st.half_soliton(g31, gc.EdgeGrid.with_spacing(40, 0.005))
    s4 = st.scale_state(s, 4.0, gc.EdgeGrid.with_spacing(40, 0.005))
    # Q(omega) = omega^(1/p - 1/2) Q(1); p = 1 gives a factor 2
    assert gc.mass(s4.field) / gc.mass(s.field) == pytest.approx(2.0, rel=1e-4)
    with pytest.raises(NonpositiveOmega):
        st.scale_state(s, 0.0)


def test_inadmissible_pattern_rejected(g31):
    with pytest.raises(InadmissiblePattern):
        st.shifted_state(g31, 0.5, gc.SignPattern((0, 0, 0)))
    # a = 0 does not need the balance
    st.shifted_state(g31, 0.0, gc.SignPattern((0, 0, 0)))


@pytest.mark.parametrize("n, fam", [(2, 1), (4, 3), (6, 10), (8, 35)])
def test_family_count(n, fam):
    assert st.count_families(n) == fam
    g = gc.validate_graph(n, n // 2, (1.0,) * n, 1)
    pats = st.enumerate_patterns(g)
    assert len(pats) == 2 * fam
    assert all(p.is_admissible(g) for p in pats)


def test_family_count_odd():
    with pytest.raises(OddN):
        st.count_families(5)


def test_weighted_patterns(g31):
    pats = {p.m for p in st.enumerate_patterns(g31)}
    assert pats == {(1, 0, 0), (0, 1, 1)}


def test_save_state_sidecar(tmp_path, g31):
    import json
    s = st.shifted_state(g31, 0.7, grid=gc.EdgeGrid.for_states(1.0, 0.7, spacing=0.05))
    st.save_state(s, tmp_path / "s.csv")
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta == {"a": 0.7, "omega": 1.0, "pattern": [1, 0, 0]}
    back = gc.field_from_csv(tmp_path / "s.csv", g31)
    np.testing.assert_array_equal(back.values, s.field.values)
