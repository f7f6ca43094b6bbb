"""Star graphs, per-edge grids, graph-valued fields and the conserved functionals.

A star graph carries ``N`` half-lines joined at one vertex; edges ``0..K-1``
are the incoming group and ``K..N-1`` the outgoing group.  Every edge is
truncated to ``[0, L]`` and sampled on the same uniform grid, grid point 0
being the vertex.

The vertex conditions are weighted continuity
``alpha_j**(1/p) * psi_j(0)`` equal for all ``j`` and the weighted Kirchhoff
condition ``sum_j alpha_j**(-1/p) * psi_j'(0) = 0``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConstraintViolated,
    GridMismatch,
    InadmissiblePattern,
    InvalidTopology,
    NonpositiveWeight,
    TruncationTooShort,
)

CONSTRAINT_RTOL = 1e-12
TAIL_TOL = 1e-12


@dataclass(frozen=True)
class StarGraph:
    """Star graph with ``n_edges`` half-lines, ``n_incoming`` of them incoming.

    Constructing the dataclass directly does not check the weight constraint;
    use :func:`validate_graph` for that.  Direct construction is how the
    constraint-violating control graphs of the transit experiments are built.
    """

    n_edges: int
    n_incoming: int
    alphas: tuple[float, ...]
    power: float

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if len(self.alphas) != self.n_edges:
            raise InvalidTopology(
                f"expected {self.n_edges} weights, got {len(self.alphas)}"
            )

    @property
    def alpha(self) -> np.ndarray:
        return np.asarray(self.alphas)

    @property
    def vertex_weights(self) -> np.ndarray:
        """``alpha_j**(-1/p)``: vertex value of edge ``j`` per unit shared value."""
        return self.alpha ** (-1.0 / self.power)

    @property
    def incoming(self) -> np.ndarray:
        return np.arange(self.n_edges) < self.n_incoming

    @property
    def constraint_sums(self) -> tuple[float, float]:
        q = self.alpha ** (-2.0 / self.power)
        return float(q[self.incoming].sum()), float(q[~self.incoming].sum())

    @property
    def constraint_residual(self) -> float:
        s_in, s_out = self.constraint_sums
        return abs(s_in - s_out) / s_in

    def to_dict(self) -> dict:
        return {
            "edges": self.n_edges,
            "incoming": self.n_incoming,
            "alphas": list(self.alphas),
            "p": self.power,
        }

    def permuted(self, order) -> "StarGraph":
        """Graph with edges relabelled by ``order`` (must keep the groups)."""
        order = list(order)
        k = self.n_incoming
        if sorted(order[:k]) != list(range(k)):
            raise InvalidTopology("permutation mixes incoming and outgoing edges")
        return StarGraph(self.n_edges, k, tuple(self.alphas[i] for i in order), self.power)


def validate_graph(n_edges, n_incoming, alphas, power) -> StarGraph:
    """Build a :class:`StarGraph` after checking topology, weights and constraint.

    Raises
    ------
    InvalidTopology
        ``n_incoming`` not strictly between 0 and ``n_edges``, or wrong
        number of weights.
    NonpositiveWeight
        Some ``alpha_j <= 0`` (or ``power <= 0``).
    ConstraintViolated
        ``sum_in alpha**(-2/p)`` and ``sum_out alpha**(-2/p)`` differ by more
        than 1e-12 relative.
    """
    vals = [n_edges, n_incoming, power, *alphas]
    if not all(np.isfinite(float(v)) for v in vals):
        raise ValueError("graph parameters must be finite")
    if int(n_edges) != n_edges or int(n_incoming) != n_incoming:
        raise InvalidTopology("edge counts must be integers")
    n_edges, n_incoming = int(n_edges), int(n_incoming)
    if not 0 < n_incoming < n_edges:
        raise InvalidTopology(f"need 0 < K < N, got K={n_incoming}, N={n_edges}")
    if len(alphas) != n_edges:
        raise InvalidTopology(f"expected {n_edges} weights, got {len(alphas)}")
    if power <= 0:
        raise NonpositiveWeight(f"power must be positive, got {power}")
    if any(a <= 0 for a in alphas):
        raise NonpositiveWeight(f"weights must be positive, got {list(alphas)}")
    graph = StarGraph(n_edges, n_incoming, tuple(alphas), float(power))
    res = graph.constraint_residual
    if res > CONSTRAINT_RTOL:
        s_in, s_out = graph.constraint_sums
        raise ConstraintViolated(
            f"sum_in={s_in!r} != sum_out={s_out!r} (relative residual {res:.3e})"
        )
    return graph


def graph_from_dict(d: dict, validate: bool = True) -> StarGraph:
    missing = {"edges", "incoming", "alphas", "p"} - set(d)
    if missing:
        raise KeyError(f"graph spec missing field(s): {sorted(missing)}")
    args = (d["edges"], d["incoming"], list(d["alphas"]), d["p"])
    if validate:
        return validate_graph(*args)
    return StarGraph(int(args[0]), int(args[1]), tuple(args[2]), float(args[3]))


# ---------------------------------------------------------------------------
# grids


def tail_length(power: float, max_shift: float = 0.0, omega: float = 1.0) -> float:
    """Edge length beyond which ``sech**(1/p)(p (sqrt(omega) x - |a|))`` is below 1e-12."""
    decay = (math.log(2.0) - power * math.log(TAIL_TOL)) / power
    return (abs(max_shift) + decay) / math.sqrt(omega)


def default_length(power: float, max_shift: float = 0.0, omega: float = 1.0) -> float:
    base = max(20.0, abs(max_shift) + 20.0) / min(1.0, power) / math.sqrt(omega)
    return max(base, tail_length(power, max_shift, omega))


@dataclass(frozen=True)
class EdgeGrid:
    """Uniform grid on ``[0, edge_length]`` shared by every edge."""

    edge_length: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 4 or not self.edge_length > 0:
            raise ValueError("grid needs a positive length and at least 4 points")

    @property
    def spacing(self) -> float:
        return self.edge_length / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.edge_length, self.n_points)

    @classmethod
    def with_spacing(cls, length: float, spacing: float) -> "EdgeGrid":
        n = int(math.ceil(length / spacing - 1e-9)) + 1
        return cls((n - 1) * spacing, n)

    @classmethod
    def for_states(cls, power, max_shift=0.0, spacing=0.01, omega=1.0) -> "EdgeGrid":
        """Default grid: truncation long enough for shifts up to ``max_shift``."""
        return cls.with_spacing(default_length(power, max_shift, omega), spacing)

    def check_truncation(self, power, max_shift=0.0, omega=1.0):
        need = tail_length(power, max_shift, omega)
        if self.edge_length < need:
            raise TruncationTooShort(
                f"edge length {self.edge_length} < {need:.2f} needed for |a|={max_shift}"
            )

    def to_dict(self) -> dict:
        return {"length": self.edge_length, "points": self.n_points}

    @classmethod
    def from_dict(cls, d: dict) -> "EdgeGrid":
        return cls(float(d["length"]), int(d["points"]))


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class GraphField:
    """Complex samples ``values[j, i] = psi_j(x_i)`` on a shared edge grid."""

    graph: StarGraph
    grid: EdgeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (self.graph.n_edges, self.grid.n_points):
            raise GridMismatch(
                f"values shape {vals.shape} does not match "
                f"({self.graph.n_edges}, {self.grid.n_points})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains NaN or Inf")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def h(self) -> float:
        return self.grid.spacing

    def with_values(self, values) -> "GraphField":
        return GraphField(self.graph, self.grid, values)

    def __add__(self, other: "GraphField") -> "GraphField":
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __mul__(self, c) -> "GraphField":
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def _check_same_grid(f: GraphField, g: GraphField):
    if f.grid != g.grid or f.graph.n_edges != g.graph.n_edges:
        raise GridMismatch("fields live on different grids")


def zero_field(graph: StarGraph, grid: EdgeGrid) -> GraphField:
    return GraphField(graph, grid, np.zeros((graph.n_edges, grid.n_points)))


def edge_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """d/dx along the last axis: centred inside, 3-point one-sided at both ends."""
    return np.gradient(values, h, axis=-1, edge_order=2)


def vertex_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """One-sided second-order ``psi_j'(0)`` for every edge."""
    return (-3.0 * values[..., 0] + 4.0 * values[..., 1] - values[..., 2]) / (2.0 * h)


def trapezoid(values: np.ndarray, h: float) -> np.ndarray:
    return np.trapezoid(values, dx=h, axis=-1)


def mass(field: GraphField) -> float:
    """``Q = sum_j int |psi_j|^2`` by the composite trapezoid rule."""
    return float(trapezoid(np.abs(field.values) ** 2, field.h).sum())


def energy(field: GraphField) -> float:
    """``E = ||Psi'||^2 - sum_j alpha_j^2 int |psi_j|^(2p+2)``."""
    g = field.graph
    dpsi = edge_derivative(field.values, field.h)
    kinetic = trapezoid(np.abs(dpsi) ** 2, field.h).sum()
    pot = trapezoid(np.abs(field.values) ** (2 * g.power + 2), field.h)
    return float(kinetic - (g.alpha**2 * pot).sum())


def momentum(field: GraphField, pattern: "SignPattern") -> float:
    """``P = sum_j (-1)^m_j int Im(psi_j' conj(psi_j))``."""
    dpsi = edge_derivative(field.values, field.h)
    density = np.imag(dpsi * np.conj(field.values))
    return float((pattern.signs * trapezoid(density, field.h)).sum())


def vertex_residuals(field: GraphField) -> tuple[float, float]:
    """Return ``(continuity, kirchhoff)`` residuals at the vertex.

    Continuity is the largest pairwise gap between the weighted vertex values
    ``alpha_j**(1/p) psi_j(0)``; Kirchhoff is ``|sum_j alpha_j**(-1/p) psi_j'(0)|``
    with one-sided second-order differences.
    """
    g = field.graph
    w = g.vertex_weights
    scaled = field.values[:, 0] / w
    gaps = np.abs(scaled[:, None] - scaled[None, :])
    flux = np.sum(w * vertex_derivative(field.values, field.h))
    return float(gaps.max()), float(abs(flux))


# ---------------------------------------------------------------------------
# sign patterns


@dataclass(frozen=True)
class SignPattern:
    """Bits ``m_j``; edge ``j`` enters sums with sign ``(-1)**m_j``."""

    m: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(b) for b in self.m)
        if any(b not in (0, 1) for b in m):
            raise ValueError(f"pattern bits must be 0/1, got {self.m}")
        object.__setattr__(self, "m", m)

    @property
    def signs(self) -> np.ndarray:
        return np.where(np.asarray(self.m) == 1, -1.0, 1.0)

    def complement(self) -> "SignPattern":
        return SignPattern(tuple(1 - b for b in self.m))

    def balance(self, graph: StarGraph) -> float:
        """``sum_j (-1)^m_j alpha_j^(-2/p)`` relative to ``sum_j alpha_j^(-2/p)``."""
        q = graph.alpha ** (-2.0 / graph.power)
        return float(np.dot(self.signs, q) / q.sum())

    def is_admissible(self, graph: StarGraph, rtol: float = CONSTRAINT_RTOL) -> bool:
        return len(self.m) == graph.n_edges and abs(self.balance(graph)) <= rtol

    def __len__(self):
        return len(self.m)


def canonical_pattern(graph: StarGraph) -> SignPattern:
    """``m_j = 1`` on incoming edges, 0 on outgoing ones."""
    return SignPattern(tuple(int(b) for b in graph.incoming))


def canonical_patterns(graph: StarGraph) -> tuple[SignPattern, SignPattern]:
    p = canonical_pattern(graph)
    return p, p.complement()


def check_pattern(graph: StarGraph, pattern: SignPattern):
    if len(pattern) != graph.n_edges:
        raise InadmissiblePattern(f"pattern {pattern.m} has wrong length")
    if not pattern.is_admissible(graph):
        raise InadmissiblePattern(
            f"pattern {pattern.m} unbalanced: relative bracket {pattern.balance(graph):.3e}"
        )


def all_patterns(n: int):
    return (SignPattern(bits) for bits in itertools.product((0, 1), repeat=n))


# ---------------------------------------------------------------------------
# serialisation


def load_graph(path, validate: bool = True) -> StarGraph:
    return graph_from_dict(json.loads(Path(path).read_text()), validate=validate)


def save_graph(graph: StarGraph, path):
    Path(path).write_text(json.dumps(graph.to_dict(), indent=2))


def field_to_csv(field: GraphField, path):
    """Write ``edge,x,re,im`` rows, edges numbered from 0."""
    n, m = field.values.shape
    x = field.grid.x
    rows = np.column_stack(
        [
            np.repeat(np.arange(n), m),
            np.tile(x, n),
            field.values.real.ravel(),
            field.values.imag.ravel(),
        ]
    )
    np.savetxt(
        path, rows, delimiter=",", header="edge,x,re,im", comments="",
        fmt=["%d", "%.17g", "%.17g", "%.17g"],
    )


def field_from_csv(path, graph: StarGraph) -> GraphField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    edges = data[:, 0].astype(int)
    n = graph.n_edges
    if set(edges) != set(range(n)):
        raise GridMismatch(f"CSV holds edges {sorted(set(edges))}, graph has {n}")
    x = data[edges == 0, 1]
    grid = EdgeGrid(float(x[-1]), len(x))
    if not np.allclose(x, grid.x, rtol=0, atol=1e-9 * max(1.0, x[-1])):
        raise GridMismatch("CSV abscissae are not a uniform grid from 0")
    values = np.empty((n, len(x)), dtype=complex)
    for j in range(n):
        rows = data[edges == j]
        if len(rows) != len(x):
            raise GridMismatch(f"edge {j} has {len(rows)} samples, expected {len(x)}")
        values[j] = rows[:, 2] + 1j * rows[:, 3]
    return GraphField(graph, grid, values)
