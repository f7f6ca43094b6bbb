import math

import mpmath as mp
import numpy as np
import pytest

from nlsgraph import graph as gc
from nlsgraph import shooting as sh
from nlsgraph.errors import LambdaTooCloseToContinuum, WindowInvalid

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def g31():
    return gc.validate_graph(3, 1, (1 / SQRT2, 1, 1), 1)


def test_closed_form_initial_value():
    v = sh.closed_form_v(0.0, -3.0)
    assert float(v) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("lam", [-3.0, -1.2, -0.3, 0.5])
def test_integrator_matches_closed_form(lam):
    sol = sh.DecayingSolution(1.0, lam)
    x = np.linspace(-3, 3, 25)
    v, _ = sol(x)
    np.testing.assert_allclose(v, sh.closed_form_v(x, lam), rtol=1e-9)
    assert sol.terminal_defect() == 0.0


@pytest.mark.parametrize("a", [0.1, 0.5, 1.3, -0.8])
def test_lambda1_closed_form_against_mpmath(a):
    mp.mp.dps = 30
    t = mp.tanh(abs(mp.mpf(a)))
    ref = -mp.mpf(3) / 2 * t * (t + mp.sqrt(1 + 3 / mp.cosh(a) ** 2))
    assert sh.lambda1_closed_form(a) == pytest.approx(float(ref), rel=1e-14)


@pytest.mark.parametrize("lam", [-2.0, -0.4, 0.6])
def test_wronskian_constant(lam):
    f = sh.terminal_solution(1.5, lam, 1.0, 0.0, x_max=3.0, x_min=-3.0)
    g = sh.terminal_solution(1.5, lam, 0.0, 1.0, x_max=3.0, x_min=-3.0)
    w = sh.wronskian(f, g, np.linspace(-3, 3, 13))
    np.testing.assert_allclose(w, 1.0, atol=1e-9)


@pytest.mark.parametrize("n, k, alphas, a, lam", [
    (3, 1, (1 / SQRT2, 1, 1), 0.7, -0.5),
    (3, 1, (1 / SQRT2, 1, 1), -0.7, -1.7),
    (4, 2, (1, 1, 1, 1), 0.4, -0.9),
    (5, 2, (1, 2, 2, 2, 2), 0.3, -0.2),
])
def test_closed_determinant_equals_matrix_determinant(n, k, alphas, a, lam):
    g = gc.validate_graph(n, k, alphas, 2 if n == 5 else 1)
    closed = sh.determinant(g, a, lam)
    direct = np.linalg.det(sh.matching_matrix(g, a, lam))
    assert abs(closed) == pytest.approx(abs(direct), rel=1e-9)


@pytest.mark.parametrize("p", [1.0, 2.0, 0.5])
def test_scalar_ground_state(p):
    assert sh.scalar_ground_state(p) == pytest.approx(sh.scalar_ground_state_exact(p), abs=1e-10)


@pytest.mark.parametrize("a", [-0.7, 0.0, 0.7])
def test_morse_count_matches_prediction(g31, a):
    rep = sh.find_point_spectrum(g31, a)
    assert (rep.morse_index, rep.zero_multiplicity) == sh.predicted_counts(g31, a)


def test_multiplicity_from_edge_symmetry():
    g = gc.validate_graph(6, 3, (1.0,) * 6, 1)
    rep = sh.find_point_spectrum(g, 0.5)
    assert rep.morse_index == 3
    assert max(e.mult for e in rep.entries) == 2


def test_lambda_errors(g31):
    with pytest.raises(LambdaTooCloseToContinuum):
        sh.DecayingSolution(1.0, 1.0)
    with pytest.raises(WindowInvalid):
        sh.find_point_spectrum(g31, 0.5, window=(-1.0, 1.0))
    with pytest.raises(WindowInvalid):
        sh.find_point_spectrum(g31, 0.5, window=(0.2, -1.0))


def test_zero_path_moves_with_lambda():
    path = sh.zero_path(1.0, [-2.5, -1.0])
    assert len(path) == 2
    for lam, x0 in path:
        v, _ = sh.DecayingSolution(1.0, lam)(x0)
        assert abs(float(v)) < 1e-9


@pytest.mark.parametrize("a", [0.3, 0.7, 1.5])
def test_case_function_symmetries(g31, a):
    lam0 = sh.scalar_ground_state_exact(1.0)
    mv = sh.matching_values(g31, a, lam0)
    assert abs(mv.case_c) < 1e-9
    assert mv.v_a * mv.v_ma > 0
    assert abs(sh.matching_values(g31, a, 0.0).case_c) < 1e-9


@pytest.mark.parametrize("a", [-0.7, 0.7])
def test_no_spurious_determinant_roots(g31, a):
    # for N = 3, K = 1 every factor of the determinant is simple, so each
    # eigenvalue is a sign change of the determinant and vice versa
    rep = sh.find_point_spectrum(g31, a)
    lams = np.linspace(*sh.default_window(1.0), 160)
    det = np.array([sh.determinant(g31, a, x) for x in lams])
    cells = np.flatnonzero(np.sign(det[:-1]) != np.sign(det[1:]))
    assert len(cells) == len(rep.entries)
    for i, e in zip(cells, rep.entries):
        assert lams[i] - 1e-8 <= e.lam <= lams[i + 1] + 1e-8
