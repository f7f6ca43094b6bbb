"""Half-soliton and shifted stationary states on a star graph.

Edge ``j`` of a shifted state carries ``alpha_j**(-1/p) * phi(x + s_j)`` with
``phi(x) = sech(p x)**(1/p)`` and edge shift ``s_j = (-1)**(m_j + 1) * a``.
With the canonical pattern (``m_j = 1`` on incoming edges) incoming edges are
shifted by ``+a`` and outgoing edges by ``-a``; the complementary pattern
with ``-a`` gives the same state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import graph as gc
from .errors import InadmissiblePattern, NonpositiveOmega, OddN
from .graph import EdgeGrid, GraphField, SignPattern, StarGraph

MAX_BRUTE_FORCE_EDGES = 20


def soliton_profile(power: float, x):
    """``sech(p x)**(1/p)``, the line soliton at unit frequency."""
    x = np.asarray(x, dtype=float)
    # sech via exp(-|px|) avoids overflow in cosh for large arguments
    z = np.abs(power * x)
    sech = 2.0 * np.exp(-z) / (1.0 + np.exp(-2.0 * z))
    return sech ** (1.0 / power)


def soliton_derivative(power: float, x):
    """``phi'(x) = -sech(p x)**(1/p) * tanh(p x)``."""
    x = np.asarray(x, dtype=float)
    return -soliton_profile(power, x) * np.tanh(power * x)


@dataclass(frozen=True)
class ShiftedState:
    shift: float
    pattern: SignPattern
    field: GraphField
    omega: float = 1.0

    @property
    def graph(self) -> StarGraph:
        return self.field.graph

    @property
    def grid(self) -> EdgeGrid:
        return self.field.grid

    @property
    def edge_shifts(self) -> np.ndarray:
        """Shift ``s_j`` in the unit-frequency variable ``z = sqrt(omega) x``."""
        return edge_shifts(self.pattern, self.shift)

    @property
    def real(self) -> np.ndarray:
        return self.field.values.real

    def sidecar(self) -> dict:
        return {"a": self.shift, "omega": self.omega, "pattern": list(self.pattern.m)}


def edge_shifts(pattern: SignPattern, a: float) -> np.ndarray:
    return -pattern.signs * a


def _profiles(graph, grid, shifts, omega):
    p = graph.power
    z = math.sqrt(omega) * grid.x[None, :] + shifts[:, None]
    amp = omega ** (1.0 / (2.0 * p))
    return amp * graph.vertex_weights[:, None] * soliton_profile(p, z)


def shifted_state(
    graph: StarGraph,
    a: float,
    pattern: SignPattern | None = None,
    grid: EdgeGrid | None = None,
    omega: float = 1.0,
) -> ShiftedState:
    """Shifted state with shift ``a`` (``a = 0`` gives the half-soliton).

    Raises :class:`InadmissiblePattern` when ``a != 0`` and the pattern does
    not balance the weights, i.e. the Kirchhoff condition would fail.
    """
    if omega <= 0:
        raise NonpositiveOmega(f"omega must be positive, got {omega}")
    if pattern is None:
        pattern = gc.canonical_pattern(graph)
    if len(pattern) != graph.n_edges:
        raise InadmissiblePattern(f"pattern {pattern.m} has wrong length")
    if a != 0:
        gc.check_pattern(graph, pattern)
    if grid is None:
        grid = EdgeGrid.for_states(graph.power, a, omega=omega)
    else:
        grid.check_truncation(graph.power, a, omega)
    vals = _profiles(graph, grid, edge_shifts(pattern, a), omega)
    return ShiftedState(float(a), pattern, GraphField(graph, grid, vals), float(omega))


def half_soliton(graph: StarGraph, grid: EdgeGrid | None = None, omega: float = 1.0):
    return shifted_state(graph, 0.0, None, grid, omega)


def scale_state(state: ShiftedState, omega: float, grid: EdgeGrid | None = None):
    """Rescale a unit-frequency state to frequency ``omega``.

    ``Phi_omega(x) = omega**(1/(2p)) Phi(sqrt(omega) x)``, so the shift
    parameter stays attached to the rescaled variable.
    """
    if omega <= 0:
        raise NonpositiveOmega(f"omega must be positive, got {omega}")
    total = state.omega * omega
    if grid is None:
        grid = state.grid if omega == 1 else None
    return shifted_state(state.graph, state.shift, state.pattern, grid, total)


def stationary_residual(state: ShiftedState) -> float:
    """Max interior residual of ``-Phi'' + omega Phi - (p+1) alpha^2 Phi^(2p+1)``
    plus both vertex residuals."""
    f = state.field
    g = f.graph
    u = f.values.real
    h = f.h
    d2 = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) / h**2
    inner = u[:, 1:-1]
    nonlin = (g.power + 1) * g.alpha[:, None] ** 2 * np.abs(inner) ** (2 * g.power) * inner
    res = np.abs(-d2 + state.omega * inner - nonlin).max()
    cont, kirch = gc.vertex_residuals(f)
    return float(res + cont + kirch)


def count_families(n_edges: int) -> int:
    """Number of families for unit weights: ``N! / (2 ((N/2)!)^2)``."""
    if n_edges < 2 or n_edges % 2:
        raise OddN(f"family count needs an even N >= 2, got {n_edges}")
    return math.comb(n_edges, n_edges // 2) // 2


def enumerate_patterns(graph: StarGraph) -> list[SignPattern]:
    """All sign patterns balancing the weights, found by brute force.

    Brute force is used for ``N <= 20``; beyond that only the two canonical
    patterns are returned.
    """
    n = graph.n_edges
    if n > MAX_BRUTE_FORCE_EDGES:
        return list(gc.canonical_patterns(graph))
    q = graph.alpha ** (-2.0 / graph.power)
    codes = np.arange(2**n)
    bits = (codes[:, None] >> np.arange(n - 1, -1, -1)) & 1
    bracket = ((1 - 2 * bits) * q).sum(axis=1)
    ok = np.abs(bracket) <= gc.CONSTRAINT_RTOL * q.sum()
    return [SignPattern(tuple(row)) for row in bits[ok]]


def save_state(state: ShiftedState, csv_path, json_path=None):
    gc.field_to_csv(state.field, csv_path)
    if json_path is None:
        json_path = Path(csv_path).with_suffix(".json")
    Path(json_path).write_text(json.dumps(state.sidecar(), indent=2))
