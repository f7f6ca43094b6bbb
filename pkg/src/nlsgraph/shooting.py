"""Half-line shooting for the point spectrum of the Hessian ``L_+``.

The scalar equation

    -v'' + v - (2p+1)(p+1) sech^2(p x) v = lam v

has, for every ``lam < 1``, a unique solution with
``v(x) exp(sqrt(1-lam) x) -> 1`` as ``x -> +inf``.  It is computed through
``w = v exp(k x)``, ``k = sqrt(1-lam)``, which satisfies

    w'' = 2 k w' - V(x) w,      w(+inf) = 1, w'(+inf) = 0,

integrated leftward from a point where the potential is below 1e-14.  On a
star graph the edge eigenfunctions of ``L_+`` are ``c_j v(x + s_j)``, and
``lam`` is an eigenvalue iff one of

    (a) v(a) = 0,   (b) v(-a) = 0,   (c) v(-a) v'(a) + v(a) v'(-a) = 0

holds; (a) counts ``K-1`` times, (b) ``N-K-1`` times and (c) once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import graph as gc
from .errors import (
    IntegratorFailure,
    LambdaTooCloseToContinuum,
    NoZeroFound,
    RootRefinementFailure,
    WindowInvalid,
)
from .graph import SignPattern, StarGraph

CONTINUUM_GAP = 1e-6
RTOL = 1e-13
ATOL = 1e-15
SCAN_RTOL = 1e-10
ROOT_XTOL = 1e-12
MERGE_TOL = 1e-8
ZERO_TOL = 1e-7


def potential_strength(power: float) -> float:
    return (2 * power + 1) * (power + 1)


def window_end(power: float, a: float = 0.0) -> float:
    """Right end ``x_max`` where the potential is negligible."""
    return max(20.0, abs(a) + 15.0) / min(1.0, power)


def default_window(power: float) -> tuple[float, float]:
    return -(1.0 + potential_strength(power)), 0.95


def scalar_ground_state_exact(power: float) -> float:
    """Lowest eigenvalue ``1 - (p+1)^2`` of the whole-line scalar operator.

    The potential is of Poeschl-Teller type, ``nu (nu+1) p^2 sech^2(p x)``
    with ``nu = (p+1)/p``.
    """
    return 1.0 - (power + 1.0) ** 2


def _check_lambda(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam >= 1.0 - CONTINUUM_GAP):
        raise LambdaTooCloseToContinuum(
            f"need lambda < 1 - {CONTINUUM_GAP}, got max {lam.max()}"
        )
    return lam


def _integrate_w(power, lams, x_max, x_stop, x_eval=None, rtol=RTOL, atol=ATOL,
                 w_end=None, dw_end=None, dense=False):
    """Integrate the ``w`` equation for a vector of ``lams`` from ``x_max`` to ``x_stop``."""
    lams = np.atleast_1d(lams)
    m = lams.size
    k = np.sqrt(1.0 - lams)
    c = potential_strength(power)
    two_k = 2.0 * k

    def rhs(x, y):
        pot = c / np.cosh(power * x) ** 2
        w, dw = y[:m], y[m:]
        return np.concatenate([dw, two_k * dw - pot * w])

    y0 = np.concatenate([
        np.ones(m) if w_end is None else np.broadcast_to(w_end, m),
        np.zeros(m) if dw_end is None else np.broadcast_to(dw_end, m),
    ]).astype(float)
    sol = solve_ivp(
        rhs, (x_max, x_stop), y0, method="DOP853", rtol=rtol, atol=atol,
        t_eval=x_eval, dense_output=dense,
    )
    if sol.status != 0:
        raise IntegratorFailure(sol.message)
    return sol, k


class DecayingSolution:
    """Evaluator for the solution decaying like ``exp(-sqrt(1-lam) x)``.

    ``sol(x)`` returns ``(v, v')``.  Values are accurate to the integrator
    tolerance relative to the growing solution, so far to the left of the
    origin at an eigenvalue only the absolute error is small.
    """

    def __init__(self, power: float, lam: float, x_max: float | None = None,
                 x_min: float | None = None, rtol: float = RTOL):
        self.power = float(power)
        self.lam = float(_check_lambda(lam))
        self.k = math.sqrt(1.0 - self.lam)
        self.x_max = window_end(power) if x_max is None else float(x_max)
        self.x_min = -self.x_max if x_min is None else float(x_min)
        self._sol, _ = _integrate_w(self.power, self.lam, self.x_max, self.x_min,
                                    rtol=rtol, dense=True)

    def w(self, x):
        """Return ``(w, w')`` where ``w = v exp(k x)``."""
        y = self._sol.sol(np.asarray(x, dtype=float))
        return y[0], y[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        w, dw = self.w(x)
        e = np.exp(-self.k * x)
        return w * e, (dw - self.k * w) * e

    def terminal_defect(self) -> float:
        """``|w(x_max) - 1|``; zero by construction."""
        return float(abs(self.w(self.x_max)[0] - 1.0))


def decaying_solution(power: float, lam: float, x_max: float | None = None) -> DecayingSolution:
    return DecayingSolution(power, lam, x_max)


def terminal_solution(power, lam, v_end, dv_end, x_max=None, x_min=None, rtol=RTOL):
    """Solution with prescribed ``(v, v')`` at ``x_max``; returns an ``x -> (v, v')`` callable."""
    lam = float(_check_lambda(lam))
    k = math.sqrt(1.0 - lam)
    x_max = window_end(power) if x_max is None else x_max
    x_min = -x_max if x_min is None else x_min
    scale = math.exp(k * x_max)
    sol, _ = _integrate_w(power, lam, x_max, x_min, rtol=rtol, dense=True,
                          w_end=v_end * scale, dw_end=(dv_end + k * v_end) * scale)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        w, dw = sol.sol(x)
        e = np.exp(-k * x)
        return w * e, (dw - k * w) * e

    return evaluate


def wronskian(f, g, x):
    """``f g' - f' g`` for two ``x -> (y, y')`` callables."""
    fv, fd = f(x)
    gv, gd = g(x)
    return fv * gd - fd * gv


# ---------------------------------------------------------------------------
# matching conditions


class MatchingValues(NamedTuple):
    v_a: np.ndarray
    v_ma: np.ndarray
    dv_a: np.ndarray
    dv_ma: np.ndarray
    case_c: np.ndarray


def _matching(power, a, lams, rtol=RTOL):
    lams = _check_lambda(np.atleast_1d(lams))
    pts = sorted({abs(a), -abs(a)}, reverse=True)
    x_max = window_end(power, a)
    sol, k = _integrate_w(power, lams, x_max, pts[-1], x_eval=pts, rtol=rtol)
    m = lams.size
    vals = {}
    for i, x in enumerate(pts):
        e = np.exp(-k * x)
        w, dw = sol.y[:m, i], sol.y[m:, i]
        vals[x] = (w * e, (dw - k * w) * e)
    v_a, dv_a = vals[a if a in vals else -a]
    v_ma, dv_ma = vals[-a if -a in vals else a]
    case_c = v_ma * dv_a + v_a * dv_ma
    return MatchingValues(v_a, v_ma, dv_a, dv_ma, case_c)


def matching_values(graph: StarGraph, a: float, lam: float) -> MatchingValues:
    """``v(a), v(-a), v'(a), v'(-a)`` and ``v(-a) v'(a) + v(a) v'(-a)``."""
    mv = _matching(graph.power, a, lam)
    return MatchingValues(*(float(x[0]) for x in mv))


def _groups(graph: StarGraph, pattern: SignPattern | None):
    """Boolean mask of edges carrying ``phi(x + a)``."""
    if pattern is None:
        pattern = gc.canonical_pattern(graph)
    return pattern.signs < 0


def determinant(graph: StarGraph, a: float, lam: float,
                pattern: SignPattern | None = None) -> float:
    """Closed-form determinant of the vertex matching system."""
    plus = _groups(graph, pattern)
    p = graph.power
    mv = matching_values(graph, a, lam)
    n_plus, n_minus = int(plus.sum()), int((~plus).sum())
    pref = np.prod(graph.alpha ** (1.0 / p)) * np.sum(graph.alpha[plus] ** (-2.0 / p))
    return float(pref * mv.v_a ** (n_plus - 1) * mv.v_ma ** (n_minus - 1) * mv.case_c)


def matching_matrix(graph: StarGraph, a: float, lam: float,
                    pattern: SignPattern | None = None) -> np.ndarray:
    """The ``N x N`` homogeneous system for the edge coefficients ``c_j``.

    Rows ``0..N-2`` impose weighted continuity against edge 0, the last row
    the weighted Kirchhoff condition.  Edges are reordered so that the
    ``+a`` group comes first.
    """
    plus = _groups(graph, pattern)
    order = np.concatenate([np.flatnonzero(plus), np.flatnonzero(~plus)])
    alpha = graph.alpha[order]
    p = graph.power
    mv = matching_values(graph, a, lam)
    val = np.where(plus[order], mv.v_a, mv.v_ma)
    der = np.where(plus[order], mv.dv_a, mv.dv_ma)
    n = graph.n_edges
    mat = np.zeros((n, n))
    mat[:-1, 0] = alpha[0] ** (1 / p) * val[0]
    mat[np.arange(n - 1), np.arange(1, n)] = -alpha[1:] ** (1 / p) * val[1:]
    mat[-1] = alpha ** (-1 / p) * der
    return mat


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class SpectralEntry:
    lam: float
    mult: int
    case: str

    def to_dict(self):
        return {"lambda": self.lam, "mult": self.mult, "case": self.case}


@dataclass
class SpectralReport:
    entries: list[SpectralEntry]
    morse_index: int
    zero_multiplicity: int
    meta: dict = field(default_factory=dict)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues repeated by multiplicity."""
        return np.repeat([e.lam for e in self.entries], [e.mult for e in self.entries])

    def to_dict(self):
        return {
            "entries": [e.to_dict() for e in self.entries],
            "morse_index": self.morse_index,
            "zero_multiplicity": self.zero_multiplicity,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _sign_change_cells(f):
    s = np.sign(f)
    return np.flatnonzero((s[:-1] * s[1:] <= 0) & ~((s[:-1] == 0) & (s[1:] == 0)))


def _brackets(lams, values, func):
    """Brackets of sign changes; adjacent bracket pairs are rescanned 10x finer."""
    cells = _sign_change_cells(values)
    out = []
    skip = set()
    for i in cells:
        if i in skip:
            continue
        if i + 1 in cells:
            fine = np.linspace(lams[i], lams[i + 2], 21)
            fv = func(fine)
            out.extend((fine[j], fine[j + 1]) for j in _sign_change_cells(fv))
            skip.add(i + 1)
        else:
            out.append((lams[i], lams[i + 1]))
    return out


def _refine(func, lo, hi):
    flo, fhi = func(lo), func(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise RootRefinementFailure(f"no sign change on [{lo}, {hi}]")
    try:
        return brentq(func, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
    except (RuntimeError, ValueError) as exc:
        raise RootRefinementFailure(str(exc)) from exc


def find_point_spectrum(graph: StarGraph, a: float, window=None, n_grid: int = 2000,
                        pattern: SignPattern | None = None) -> SpectralReport:
    """Eigenvalues of ``L_+`` below ``window[1]`` with multiplicities.

    Each case function is scanned on a uniform grid in ``lam``, sign changes
    are bracketed and refined by Brent's method, coincident roots (within
    1e-8) are merged with summed multiplicities.
    """
    p = graph.power
    lo, hi = default_window(p) if window is None else window
    if not lo < hi or hi >= 1.0 - CONTINUUM_GAP:
        raise WindowInvalid(f"bad window ({lo}, {hi})")
    plus = _groups(graph, pattern)
    mults = {"A": int(plus.sum()) - 1, "B": int((~plus).sum()) - 1, "C": 1}
    index = {"A": 0, "B": 1, "C": 4}

    lams = np.linspace(lo, hi, n_grid)
    scan = _matching(p, a, lams, rtol=SCAN_RTOL)

    roots = []
    for case, mult in mults.items():
        if mult <= 0:
            continue

        def coarse(x, _i=index[case]):
            return _matching(p, a, x, rtol=SCAN_RTOL)[_i]

        def fine(x, _i=index[case]):
            return float(_matching(p, a, x)[_i][0])

        for lo_b, hi_b in _brackets(lams, scan[index[case]], coarse):
            roots.append((_refine(fine, lo_b, hi_b), mult, case))

    roots.sort()
    entries: list[SpectralEntry] = []
    for lam, mult, case in roots:
        if entries and abs(lam - entries[-1].lam) <= MERGE_TOL:
            prev = entries.pop()
            tag = prev.case if prev.case == case else "combined"
            entries.append(SpectralEntry(prev.lam, prev.mult + mult, tag))
        else:
            entries.append(SpectralEntry(float(lam), mult, case))

    morse = sum(e.mult for e in entries if e.lam < -ZERO_TOL)
    zeros = sum(e.mult for e in entries if abs(e.lam) <= ZERO_TOL)
    return SpectralReport(entries, morse, zeros,
                          meta={"a": a, "window": [lo, hi], "n_grid": n_grid})


def predicted_counts(graph: StarGraph, a: float, pattern: SignPattern | None = None):
    """``(negatives, zeros)`` of ``L_+`` expected for a shifted state.

    With the canonical pattern the Morse index is ``K`` for ``a < 0`` and
    ``N - K`` for ``a > 0``, plus a simple zero; at ``a = 0`` it is ``(1, N-1)``.
    """
    if a == 0:
        return 1, graph.n_edges - 1
    plus = _groups(graph, pattern)
    n_plus = int(plus.sum())
    return (n_plus if a < 0 else graph.n_edges - n_plus), 1


def lambda1_closed_form(a: float) -> float:
    """Second negative eigenvalue for ``p = 1`` as a function of the shift."""
    t = math.tanh(abs(a))
    sech2 = 1.0 / math.cosh(a) ** 2
    return -1.5 * t * (t + math.sqrt(1.0 + 3.0 * sech2))


def closed_form_v(x, lam):
    """Decaying solution for ``p = 1`` in closed form."""
    x = np.asarray(x, dtype=float)
    k = math.sqrt(1.0 - lam)
    num = 3.0 - lam + 3.0 * k * np.tanh(x) - 3.0 / np.cosh(x) ** 2
    return np.exp(-k * x) * num / (3.0 - lam + 3.0 * k)


def scalar_ground_state(power: float, n_scan: int = 400) -> float:
    """Lowest scalar eigenvalue, located as the root of ``v'(0; lam)``."""
    lo = -(1.0 + potential_strength(power))
    lams = np.linspace(lo, -1e-3, n_scan)
    dv0 = _matching(power, 0.0, lams, rtol=SCAN_RTOL).dv_a
    cells = _sign_change_cells(dv0)
    if len(cells) == 0:
        raise RootRefinementFailure("no even bound state found")
    i = cells[0]
    return _refine(lambda x: float(_matching(power, 0.0, x).dv_a[0]), lams[i], lams[i + 1])


def zero_path(power: float, lambdas, x_step: float = 0.02):
    """``[(lam, x0(lam))]``: the zero of ``v(.; lam)`` closest to ``+inf``."""
    out = []
    x_max = window_end(power)
    for lam in np.atleast_1d(lambdas):
        sol = DecayingSolution(power, lam, x_max)
        xs = np.arange(x_max, -x_max - x_step / 2, -x_step)
        v = sol(xs)[0]
        cells = _sign_change_cells(v)
        if len(cells) == 0:
            raise NoZeroFound(f"v(.; {lam}) has no zero on [-{x_max}, {x_max}]")
        i = cells[0]
        if v[i] == 0:
            x0 = xs[i]
        else:
            x0 = brentq(lambda x: float(sol(x)[0]), xs[i + 1], xs[i], xtol=1e-13)
        out.append((float(lam), float(x0)))
    return out
