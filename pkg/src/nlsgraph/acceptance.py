"""Acceptance checks A1-A14.

Each item is a function of a shared :class:`Context` (which caches states,
operators and spectra between items) returning an :class:`ItemResult`.
Used by ``nlsgraph verify`` and by ``tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time
import timeit
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import dynamics as dy
from . import graph as gc
from . import operators as ops
from . import shooting as sh
from . import stationary as st
from .errors import ConstraintViolated, GraphNLSError, NoGrowthDetected

SQRT2 = math.sqrt(2.0)
# -1.5 tanh(0.5) (tanh(0.5) + sqrt(1 + 3 sech^2(0.5))) in 30-digit arithmetic
LAMBDA1_HALF = -1.5908163189146636

# (label, N, K, alphas, a, expected Morse (neg, zero), expected real unstable count)
MORSE_TABLE = [
    ("N=4 K=2 a=+0.7", 4, 2, (1.0,) * 4, 0.7, (2, 1), 1),
    ("N=4 K=2 a=-0.7", 4, 2, (1.0,) * 4, -0.7, (2, 1), 1),
    ("N=6 K=3 a=+1.0", 6, 3, (1.0,) * 6, 1.0, (3, 1), 2),
    ("N=3 K=1 a=-0.7", 3, 1, (1.0, SQRT2, SQRT2), -0.7, (1, 1), 0),
    ("N=3 K=1 a=+0.7", 3, 1, (1.0, SQRT2, SQRT2), 0.7, (2, 1), 1),
]


@dataclass
class ItemResult:
    item: str
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{self.item:<4} {mark}  {self.title} ({self.seconds:.1f} s): {self.detail}"


class Context:
    """Memoised graphs, states, operators and stability reports."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._cache = {}

    def _memo(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def graph(self, n, k, alphas, p=1.0):
        return self._memo(("graph", n, k, alphas, p), lambda: gc.validate_graph(n, k, alphas, p))

    def state(self, n, k, alphas, a, p=1.0, spacing=0.01):
        g = self.graph(n, k, alphas, p)
        return self._memo(
            ("state", n, k, alphas, a, p, spacing),
            lambda: st.shifted_state(g, a, grid=gc.EdgeGrid.for_states(p, a, spacing=spacing)))

    def operator(self, n, k, alphas, a, kind, p=1.0, spacing=0.01):
        s = self.state(n, k, alphas, a, p, spacing)
        return self._memo(("op", n, k, alphas, a, kind, p, spacing),
                          lambda: ops.assemble(s.graph, s, kind))

    def stability(self, n, k, alphas, a):
        lp = self.operator(n, k, alphas, a, "Lplus")
        lm = self.operator(n, k, alphas, a, "Lminus")
        return self._memo(("stab", n, k, alphas, a), lambda: ops.stability_spectrum(lp, lm))

    def shooting(self, n, k, alphas, a):
        g = self.graph(n, k, alphas)
        return self._memo(("shoot", n, k, alphas, a), lambda: sh.find_point_spectrum(g, a))


def _timed(func):
    """Time an item; a library error inside it is reported as a failure."""
    def run(ctx):
        t0 = time.perf_counter()
        try:
            res = func(ctx)
        except GraphNLSError as exc:
            res = ItemResult(func.__name__.upper(), "raised", False,
                             f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = func.__name__
    run.__doc__ = func.__doc__
    return run


# ---------------------------------------------------------------------------


@_timed
def a1(ctx):
    ok1 = gc.validate_graph(4, 2, (1, 1, 1, 1), 1.0)
    ok2 = gc.validate_graph(3, 1, (1, SQRT2, SQRT2), 1.0)
    try:
        gc.validate_graph(4, 2, (1, 1, 1, 2), 1.0)
        rejected = False
    except ConstraintViolated:
        rejected = True

    def three():
        gc.validate_graph(4, 2, (1, 1, 1, 1), 1.0)
        gc.validate_graph(3, 1, (1, SQRT2, SQRT2), 1.0)
        try:
            gc.validate_graph(4, 2, (1, 1, 1, 2), 1.0)
        except ConstraintViolated:
            pass

    per_call = min(timeit.repeat(three, number=20, repeat=5)) / 20 / 3
    passed = ok1.n_edges == 4 and ok2.constraint_residual <= 1e-12 and rejected and per_call < 1e-3
    return ItemResult("A1", "constraint gate", passed,
                      f"valid, valid (residual {ok2.constraint_residual:.1e}), "
                      f"rejected={rejected}; {per_call * 1e6:.0f} us per call",
                      values={"per_call": per_call})


@_timed
def a2(ctx):
    x = np.linspace(-8.0, 8.0, 1601)
    worst = 0.0
    for lam in (-3.0, -2.0, -1.0, -0.5, 0.0, 0.5):
        v = sh.decaying_solution(1.0, lam)(x)[0]
        worst = max(worst, float(np.abs(v - sh.closed_form_v(x, lam)).max()))
    return ItemResult("A2", "closed-form decaying solution", worst < 1e-8,
                      f"max |v - v_closed| = {worst:.2e} (< 1e-8)", values={"max_err": worst})


@_timed
def a3(ctx):
    lam0 = sh.scalar_ground_state(1.0)
    rep = ctx.shooting(4, 2, (1.0,) * 4, 0.7)
    graph_lam0 = rep.entries[0].lam
    errs = []
    for h in (0.04, 0.02, 0.01):
        lp = ctx.operator(4, 2, (1.0,) * 4, 0.7, "Lplus", spacing=h)
        errs.append(abs(ops.lowest_eigenpairs(lp, 1)[0][0] + 3.0))
    orders = [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]
    passed = (abs(lam0 + 3) < 1e-8 and abs(graph_lam0 + 3) < 1e-8 and errs[-1] < 5e-3
              and min(orders) >= 1.8)
    return ItemResult("A3", "ground state lam0 = -3", passed,
                      f"shooting |lam0+3| = {abs(lam0 + 3):.1e} (scalar), {abs(graph_lam0 + 3):.1e}"
                      f" (graph); discrete errors {', '.join(f'{e:.2e}' for e in errs)}, "
                      f"orders {orders[0]:.2f}, {orders[1]:.2f}",
                      values={"errors": errs, "orders": orders})


def _case_b_root(a):
    """lam1 as the root of v(-a; lam) in (lam0, 0), i.e. case (b)."""
    rep = sh.find_point_spectrum(gc.validate_graph(4, 2, (1.0,) * 4, 1.0), a)
    cands = [e for e in rep.entries if e.case in ("B", "combined") and e.lam < -1e-7]
    return cands[-1].lam if cands else float("nan")


@_timed
def a4(ctx):
    closed = sh.lambda1_closed_form(0.5)
    shoot = _case_b_root(0.5)
    small = [abs(_case_b_root(s)) for s in (0.1, 0.01)]
    far = _case_b_root(20.0)
    passed = (abs(shoot - closed) < 1e-8 and abs(closed - LAMBDA1_HALF) < 1e-14
              and small[1] < small[0] < 0.5 and abs(far + 3.0) < 1e-8
              and abs(sh.lambda1_closed_form(0.0)) == 0.0)
    return ItemResult("A4", "lam1 root and limits", passed,
                      f"lam1(0.5): shooting {shoot:.12f} vs closed {closed:.12f} "
                      f"(diff {abs(shoot - closed):.1e}; reference {LAMBDA1_HALF}); "
                      f"|lam1(0.1)| = {small[0]:.3e}, "
                      f"|lam1(0.01)| = {small[1]:.3e}; |lam1(20)+3| = {abs(far + 3):.1e}",
                      values={"diff": abs(shoot - closed), "far": far})


@_timed
def a5(ctx):
    parts, passed = [], True
    for label, n, k, al, a, expect, _ in MORSE_TABLE:
        rep = ctx.shooting(n, k, al, a)
        shoot = (rep.morse_index, rep.zero_multiplicity)
        disc = ops.morse_index(ctx.operator(n, k, al, a, "Lplus"))
        ok = shoot == expect and disc == expect
        passed &= ok
        parts.append(f"{label}: shoot {shoot} disc {disc}{'' if ok else ' != ' + str(expect)}")
    return ItemResult("A5", "Morse-index table", passed, "; ".join(parts))


@_timed
def a6(ctx):
    parts, passed, worst = [], True, 0.0
    for label, n, k, al, a, _, expect in MORSE_TABLE:
        rep = ctx.stability(n, k, al, a)
        worst = max(worst, rep.quartet_error)
        ok = rep.n_real_positive == expect and rep.quartet_error <= ops.QUARTET_TOL
        passed &= ok
        lams = ", ".join(f"{lam:.6f}x{m}" for lam, m in rep.real_positive) or "none"
        parts.append(f"{label}: {rep.n_real_positive} (want {expect}) [{lams}]")
    return ItemResult("A6", "unstable eigenvalue counts", passed,
                      "; ".join(parts) + f"; quartet error {worst:.1e}",
                      values={"quartet": worst})


@_timed
def a7(ctx):
    parts, passed = [], True
    for label, n, k, al, a, _, _ in MORSE_TABLE:
        lm = ctx.operator(n, k, al, a, "Lminus")
        pairs = ops.lowest_eigenpairs(lm, 2)
        lam0, vec = pairs[0]
        phi = lm.from_field(lm.state.field)
        cos = abs(vec @ phi) / np.linalg.norm(phi)
        ok = abs(lam0) <= lm.tol_zero and cos > 1 - 1e-6 and pairs[1][0] > lm.tol_zero
        passed &= ok
        parts.append(f"{label}: lam0 {lam0:.1e}, 1-cos {1 - cos:.1e}, next {pairs[1][0]:.3f}")
    return ItemResult("A7", "L- kernel and nonnegativity", passed, "; ".join(parts))


@_timed
def a8(ctx):
    parts, passed = [], True
    for p in (0.5, 1.0, 1.5):
        lam0 = sh.scalar_ground_state_exact(p)
        lams = np.linspace(lam0, 0.0, 52)[1:-1]
        x0 = np.array([x for _, x in sh.zero_path(p, lams)])
        steps = np.diff(x0)
        ok = bool((steps > 0).all())
        passed &= ok
        parts.append(f"p={p}: min step {steps.min():.2e}, x0 in [{x0[0]:.3f}, {x0[-1]:.3f}]")
    return ItemResult("A8", "zero-path monotonicity", passed, "; ".join(parts))


@_timed
def a9(ctx):
    s = ctx.state(4, 2, (1.0,) * 4, 0.7)
    init = s.field * np.exp(0.3j)
    traj = dy.evolve(s.graph, init, 1e-3, 20.0)
    qd, ed = traj.mass_drift, traj.energy_drift
    taus = (0.1, 0.05, 0.025)
    e_drifts, q_drifts = [], []
    for tau in taus:
        t = dy.evolve(s.graph, init, tau, 20.0)
        e_drifts.append(t.energy_drift)
        q_drifts.append(t.mass_drift)
    orders = [math.log2(e_drifts[i] / e_drifts[i + 1]) for i in range(2)]
    passed = qd < 1e-8 and ed < 1e-6 and min(orders) >= 1.8 and max(q_drifts) < 1e-8
    return ItemResult("A9", "conservation", passed,
                      f"tau=1e-3: Q drift {qd:.1e}, E drift {ed:.1e}; E drifts at tau {taus}: "
                      f"{', '.join(f'{e:.2e}' for e in e_drifts)} (orders {orders[0]:.2f}, "
                      f"{orders[1]:.2f}); Q drifts {max(q_drifts):.1e} (round-off floor)",
                      values={"q": qd, "e": ed, "orders": orders})


@_timed
def a10(ctx):
    g = ctx.graph(3, 1, (1.0, SQRT2, SQRT2))
    res = dy.transit_test(g, 1.0, -8.0)
    ctx._cache["transit"] = res
    control = gc.StarGraph(3, 1, (1.0, 1.0, 1.0), 1.0)  # violates the constraint
    ctl = dy.transit_test(control, 1.0, -8.0)
    passed = (res.profile_error < 1e-2 and res.transmitted_mass_fraction > 0.999
              and ctl.transmitted_mass_fraction < res.transmitted_mass_fraction - 1e-3)
    return ItemResult("A10", "reflectionless transit", passed,
                      f"profile error {res.profile_error:.2e}, transmitted "
                      f"{res.transmitted_mass_fraction:.7f}; control alpha=(1,1,1) transmitted "
                      f"{ctl.transmitted_mass_fraction:.4f}",
                      values={"err": res.profile_error, "frac": res.transmitted_mass_fraction,
                              "control": ctl.transmitted_mass_fraction})


@_timed
def a11(ctx):
    parts, passed = [], True
    for n, k, al, a in ((4, 2, (1.0,) * 4, 0.7), (3, 1, (1.0, SQRT2, SQRT2), 0.7)):
        spec = ctx.stability(n, k, al, a).max_growth_rate
        fit = dy.growth_rate(ctx.graph(n, k, al), ctx.state(n, k, al, a), ctx.seed, 50.0)
        rel = abs(fit.rate / spec - 1)
        passed &= rel < 0.05
        parts.append(f"N={n} a={a:+}: fitted {fit.rate:.5f} vs spectral {spec:.5f} "
                     f"({100 * rel:.2f}%, R^2 {fit.r_squared:.6f})")
    try:
        fit = dy.growth_rate(ctx.graph(3, 1, (1.0, SQRT2, SQRT2)),
                             ctx.state(3, 1, (1.0, SQRT2, SQRT2), -0.7), ctx.seed, 50.0, tau=5e-3)
        passed = False
        parts.append(f"N=3 a=-0.7: unexpected growth {fit.rate:.4f}")
    except NoGrowthDetected as exc:
        parts.append(f"N=3 a=-0.7: no growth ({exc})")
    return ItemResult("A11", "growth-rate match", passed, "; ".join(parts))


@_timed
def a12(ctx):
    g = ctx.graph(3, 1, (1.0, SQRT2, SQRT2))
    s = ctx.state(3, 1, (1.0, SQRT2, SQRT2), 0.7)
    pert = dy.seeded_perturbation(g, s.grid, ctx.seed, 1e-3, s.field)
    traj = dy.evolve(g, s.field + pert, 1e-3, 10.0)
    mb = dy.momentum_balance(traj)
    lows = [mb.min_rhs]
    if "transit" in ctx._cache:
        lows.append(dy.momentum_balance(ctx._cache["transit"].trajectory).min_rhs)
    pair_err = float(np.abs(mb.pairwise - mb.rhs).max())
    passed = mb.max_mismatch < 1e-4 and min(lows) >= -1e-8 and pair_err < 1e-10
    return ItemResult("A12", "momentum balance", passed,
                      f"max |dP/dt - rhs| {mb.max_mismatch:.2e} with max |rhs| "
                      f"{np.abs(mb.rhs).max():.3f}; min rhs {min(lows):.1e} (K=1, m1=1); "
                      f"pairwise form agrees to {pair_err:.1e}",
                      values={"mismatch": mb.max_mismatch, "min_rhs": min(lows)})


@_timed
def a13(ctx):
    counts = [st.count_families(n) for n in (2, 4, 6)]
    agree = True
    for n in (2, 4, 6, 8):
        g = gc.validate_graph(n, n // 2, (1.0,) * n, 1.0)
        found = {p.m for p in st.enumerate_patterns(g)}
        brute = {m for m in product((0, 1), repeat=n) if sum(m) * 2 == n}
        agree &= found == brute and len(found) == 2 * st.count_families(n)
    passed = counts == [1, 3, 10] and agree
    return ItemResult("A13", "family count", passed,
                      f"count_families(2, 4, 6) = {counts}; brute force agrees for N<=8: {agree}")


@_timed
def a14(ctx):
    s = ctx.state(3, 1, (1.0, SQRT2, SQRT2), 0.7)
    mu = gc.mass(s.field)
    e_phi = dy.state_energy(s)
    e2 = dy.free_wave_energy(SQRT2, 1.0, mu)
    e1 = dy.free_wave_energy(1.0, 1.0, mu)
    ratio = e2 / e_phi
    passed = e2 < e_phi and abs(ratio / 4 - 1) < 1e-6 and abs(e1 / e_phi - 1) < 1e-6
    return ItemResult("A14", "energy ordering", passed,
                      f"E(Phi) = {e_phi:.10f}, E_1 = {e1:.10f}, E_2 = {e2:.10f}, "
                      f"E_2/E(Phi) = {ratio:.10f}",
                      values={"ratio": ratio})


ITEMS = {
    "A1": (a1, {"graph"}),
    "A2": (a2, {"spectrum", "shooting"}),
    "A3": (a3, {"spectrum", "shooting", "operators"}),
    "A4": (a4, {"spectrum", "shooting"}),
    "A5": (a5, {"spectrum", "shooting", "operators"}),
    "A6": (a6, {"spectrum", "operators", "stability"}),
    "A7": (a7, {"spectrum", "operators"}),
    "A8": (a8, {"spectrum", "shooting"}),
    "A9": (a9, {"dynamics"}),
    "A10": (a10, {"dynamics"}),
    "A11": (a11, {"dynamics", "stability"}),
    "A12": (a12, {"dynamics"}),
    "A13": (a13, {"families", "stationary"}),
    "A14": (a14, {"energy", "dynamics"}),
}


def select(name: str | None):
    """Item ids matching ``name`` (an id like ``A5`` or a tag like ``spectrum``)."""
    if not name:
        return list(ITEMS)
    key = name.strip()
    if key.upper() in ITEMS:
        return [key.upper()]
    chosen = [i for i, (_, tags) in ITEMS.items() if key.lower() in tags]
    if not chosen:
        raise KeyError(f"no acceptance item or tag named {name!r}")
    return chosen


def run(name: str | None = None, seed: int = 0, echo=print):
    ctx = Context(seed)
    results = []
    for item in select(name):
        res = ITEMS[item][0](ctx)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
