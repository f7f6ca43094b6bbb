"""Discrete Hessians L+ and L- on a star graph and their spectra.

Discretisation: piecewise-linear elements with a lumped mass matrix on each
edge, a homogeneous Dirichlet condition at ``x = L`` and one shared vertex
unknown ``gamma`` with ``U_j(0) = w_j gamma``, ``w_j = alpha_j**(-1/p)``.
Continuity holds exactly and the weighted Kirchhoff condition is the natural
boundary condition of the quadratic form.  The stored matrix is the
mass-symmetrised ``M^{-1/2} K M^{-1/2}``, so interior rows read
``(-U_{i-1} + 2 U_i - U_{i+1}) / h^2 + (omega + V_i) U_i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import eigensolver
from .errors import GridMismatch, NonPositiveLminusBeyondKernel
from .graph import GraphField, StarGraph
from .stationary import ShiftedState

KINDS = ("Lplus", "Lminus")
REAL_TOL = 1e-7
QUARTET_TOL = 1e-8
GALERKIN_MODES = 200
REFINE_CLUSTER = 0.05
REFINE_ITERS = 60


def potential_coefficient(power: float, kind: str) -> float:
    if kind == "Lplus":
        return (2 * power + 1) * (power + 1)
    if kind == "Lminus":
        return power + 1
    raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


@dataclass(frozen=True, eq=False)
class GraphOperator:
    kind: str
    matrix: sp.csr_matrix
    state: ShiftedState
    potential: np.ndarray  # (N, n) potential V_j(x_i), omega not included
    mass_diag: np.ndarray  # lumped mass per unknown
    meta: dict = field(default_factory=dict)

    @property
    def graph(self) -> StarGraph:
        return self.state.graph

    @property
    def grid(self):
        return self.state.grid

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def h(self) -> float:
        return self.grid.spacing

    @property
    def tol_zero(self) -> float:
        """``10 h^2 (1 + max|V|)``: half-width of the numerical zero band."""
        scale = 1.0 + np.abs(self.potential).max()
        return 10.0 * self.h**2 * scale

    def to_field(self, vec) -> GraphField:
        """Nodal values of the function whose symmetrised coordinates are ``vec``."""
        vals = coords_to_values(self.graph, self.grid.n_points, self.mass_diag, vec)
        return GraphField(self.graph, self.grid, vals)

    def from_field(self, f: GraphField) -> np.ndarray:
        """Symmetrised coordinates of a real field (vertex value by weighted least squares)."""
        if f.grid != self.grid or f.graph.n_edges != self.graph.n_edges:
            raise GridMismatch("field and operator live on different grids")
        return values_to_coords(self.graph, self.mass_diag, f.values.real)

    def apply(self, vec) -> np.ndarray:
        return self.matrix @ vec

    def to_coo_text(self, path):
        coo = self.matrix.tocoo()
        rows = np.column_stack([coo.row, coo.col, coo.data])
        np.savetxt(path, rows, fmt=["%d", "%d", "%.17g"], header="row col value")


def assemble_matrix(graph: StarGraph, grid, shifted: np.ndarray):
    """Symmetrised matrix of ``-d^2/dx^2 + shifted`` and the lumped mass.

    ``shifted`` holds the zeroth-order coefficient at every node, shape
    ``(N, n_points)``.  Unknowns are ordered edge by edge (interior nodes
    ``1 .. n-2``), then the vertex value ``gamma``.
    """
    h = grid.spacing
    n = grid.n_points
    m = n - 2  # interior unknowns per edge
    big_n = graph.n_edges
    w = graph.vertex_weights
    dim = big_n * m + 1
    v = dim - 1
    mass = np.full(dim, h)
    mass[v] = 0.5 * h * (w**2).sum()

    # upper triangle only, then mirrored: bit-exact symmetry
    diag = np.empty(dim)
    diag[:v] = (2.0 / h**2 + shifted[:, 1:n - 1]).ravel()
    diag[v] = ((w**2).sum() / h + 0.5 * h * (w**2 * shifted[:, 0]).sum()) / mass[v]
    idx = np.arange(v).reshape(big_n, m)
    up_r = idx[:, :-1].ravel()
    up_c = idx[:, 1:].ravel()
    up_v = np.full(up_r.size, -1.0 / h**2)
    vx_r = idx[:, 0]
    vx_v = -w / h / np.sqrt(h * mass[v])
    rows = np.concatenate([up_r, vx_r])
    cols = np.concatenate([up_c, np.full(big_n, v)])
    vals = np.concatenate([up_v, vx_v])
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim))
    mat = (upper + upper.T + sp.diags(diag)).tocsr()
    mat.sort_indices()
    return mat, mass


def values_to_coords(graph: StarGraph, mass: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Nodal values ``(N, n)`` to symmetrised coordinates (real or complex)."""
    w = graph.vertex_weights
    gamma = (w * values[:, 0]).sum() / (w**2).sum()
    u = np.concatenate([values[:, 1:-1].ravel(), [gamma]])
    return u * np.sqrt(mass)


def coords_to_values(graph: StarGraph, n_points: int, mass: np.ndarray, vec) -> np.ndarray:
    u = np.asarray(vec) / np.sqrt(mass)
    vals = np.zeros((graph.n_edges, n_points), dtype=u.dtype)
    vals[:, 1:n_points - 1] = u[:-1].reshape(graph.n_edges, n_points - 2)
    vals[:, 0] = graph.vertex_weights * u[-1]
    return vals


def assemble(graph: StarGraph, state: ShiftedState, kind: str) -> GraphOperator:
    """Assemble ``L_+`` or ``L_-`` linearised about ``state``."""
    if state.graph.n_edges != graph.n_edges or state.graph.alphas != graph.alphas \
            or state.graph.power != graph.power:
        raise GridMismatch("state does not live on this graph")
    c = potential_coefficient(graph.power, kind)
    phi = np.abs(state.field.values)
    pot = -c * graph.alpha[:, None] ** 2 * phi ** (2 * graph.power)
    mat, mass = assemble_matrix(graph, state.grid, state.omega + pot)
    return GraphOperator(kind, mat, state, pot, mass,
                         {"c": c, "h": state.grid.spacing, "n_points": state.grid.n_points,
                          "omega": state.omega})


def lowest_eigenpairs(op: GraphOperator, k: int, *, tol: float = 1e-9,
                      block_size: int | None = None):
    """The ``k`` smallest eigenpairs as ``[(lam, vec), ...]``.

    Eigenvectors are orthonormal in the symmetrised coordinates, which equals
    orthonormality in the lumped L2 inner product after :meth:`to_field`.
    """
    if block_size is None:
        block_size = max(op.graph.n_edges, 4)
    vals, vecs = eigensolver.lowest_eigenpairs(
        op.matrix, k, sigma=_sigma(op), block_size=block_size, tol=tol)
    return [(float(vals[i]), vecs[:, i]) for i in range(vals.size)]


def _spectrum_past(op: GraphOperator, threshold: float):
    """Lowest eigenvalues, enough of them to include one above ``threshold``."""
    k = op.graph.n_edges + 4
    while True:
        pairs = lowest_eigenpairs(op, k)
        lams = np.array([lam for lam, _ in pairs])
        if lams[-1] > threshold or k >= op.dimension:
            return lams
        k *= 2


def morse_index(op: GraphOperator) -> tuple[int, int]:
    """``(negatives, zeros)`` with the zero band ``|lam| <= tol_zero``."""
    tol = op.tol_zero
    lams = _spectrum_past(op, tol)
    return int((lams < -tol).sum()), int((np.abs(lams) <= tol).sum())


@dataclass
class StabilityReport:
    real_positive: list  # [(lam, multiplicity)]
    max_growth_rate: float
    purely_imaginary_count: int
    zero_count: int = 0
    quartet_error: float = 0.0
    n_modes: int = 0
    mu: np.ndarray = field(default=None, repr=False)
    galerkin: np.ndarray = field(default=None, repr=False)

    @property
    def n_real_positive(self) -> int:
        return sum(mult for _, mult in self.real_positive)

    def to_dict(self) -> dict:
        return {
            "real_positive": [[lam, mult] for lam, mult in self.real_positive],
            "max_growth_rate": self.max_growth_rate,
            "purely_imaginary_count": self.purely_imaginary_count,
            "zero_count": self.zero_count,
            "quartet_error": self.quartet_error,
            "n_modes": self.n_modes,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def _cluster(values, tol):
    """Group sorted values into (mean, count) clusters of relative width ``tol``."""
    out = []
    for v in sorted(values):
        if out and abs(v - out[-1][0]) <= tol * max(1.0, abs(v)):
            mean, cnt = out[-1]
            out[-1] = ((mean * cnt + v) / (cnt + 1), cnt + 1)
        else:
            out.append((v, 1))
    return out


def _sigma(op: GraphOperator) -> float:
    return op.state.omega + op.potential.min() - 0.5


def galerkin_basis(lp: GraphOperator, lm: GraphOperator, n_modes: int = GALERKIN_MODES,
                   seed: int = 0):
    """Orthonormal basis for the low-lying parts of both operators.

    Shift-invert block Krylov spaces of dimension about ``n_modes`` for L+
    and L-, merged.  The start block is the state plus one random profile
    copied onto every edge; its span is invariant under edge permutations,
    so the Galerkin space is too and symmetric degeneracies survive exactly.
    """
    g = lm.graph
    m = lm.grid.n_points - 2
    r = np.random.default_rng(seed).standard_normal(m)
    start = np.zeros((lm.dimension, g.n_edges + 1))
    start[:, 0] = lm.from_field(lm.state.field)
    for j in range(g.n_edges):
        start[j * m:(j + 1) * m, j + 1] = r
    parts = [eigensolver.krylov_basis(o.matrix, n_modes, sigma=_sigma(o), start=start,
                                      block_size=1) for o in (lm, lp)]
    q, rr = np.linalg.qr(np.hstack(parts))
    keep = np.abs(np.diag(rr)) > 1e-10 * np.abs(np.diag(rr)).max()
    return q[:, keep]


def stability_spectrum(lp: GraphOperator, lm: GraphOperator,
                       n_modes: int = GALERKIN_MODES, basis=None) -> StabilityReport:
    """Eigenvalues of ``lam [U; W] = [[0, L-], [-L+, 0]] [U; W]``.

    Galerkin projection onto the low-lying eigenvectors of both operators,
    then the symmetric reduction ``S = D^{1/2} V^T L+ V D^{1/2}`` with the
    kernel of ``L-`` (the direction of the state) removed.  A negative
    eigenvalue ``mu`` of ``S`` is a real pair ``+-sqrt(-mu)``.
    """
    if lp.grid != lm.grid or lp.state is not lm.state and \
            not np.array_equal(lp.state.field.values, lm.state.field.values):
        raise GridMismatch("operators must share grid and state")
    if basis is None:
        basis = galerkin_basis(lp, lm, n_modes)
    am = basis.T @ (lm.matrix @ basis)
    ap = basis.T @ (lp.matrix @ basis)
    am = 0.5 * (am + am.T)
    ap = 0.5 * (ap + ap.T)
    tol = lm.tol_zero

    d, v = np.linalg.eigh(am)
    phi = basis.T @ lm.from_field(lm.state.field)
    overlap = np.abs(v.T @ phi)
    kernel = int(np.argmax(overlap))
    rest = np.delete(np.arange(d.size), kernel)
    if (d[rest] <= tol).any():
        bad = d[rest][d[rest] <= tol]
        raise NonPositiveLminusBeyondKernel(
            f"L- has eigenvalue(s) {bad} besides its kernel; refine the grid")
    vr = v[:, rest] * np.sqrt(d[rest])
    s = vr.T @ ap @ vr
    mu = np.linalg.eigvalsh(0.5 * (s + s.T))

    # mu = -lam^2; the zero band is that of L+, the cruder of the two
    zero_band = max(tol, lp.tol_zero)
    galerkin = np.sqrt(-mu[mu < -zero_band])
    galerkin = galerkin[galerkin > REAL_TOL]
    zeros = int((np.abs(mu) <= zero_band).sum())
    imag = int((mu > zero_band).sum())

    # non-symmetric eigenvalues of the projected block matrix: an
    # independent check of the reduction and of the +-lam symmetry
    quartet = _quartet_error(ap, am, galerkin, np.sqrt(zero_band))

    # polish each cluster on the full sparse problem, at +lam and at -lam
    real = []
    if galerkin.size:
        block = block_operator(lp, lm)
        for guess, count in _cluster(galerkin, REFINE_CLUSTER):
            plus = refine_real_eigenvalues(block, guess, count)
            minus = refine_real_eigenvalues(block, -guess, count)
            quartet = max(quartet, float(np.abs(np.sort(plus) + np.sort(minus)[::-1]).max()))
            real.extend(plus)
    real = np.array(real)
    real = real[real > REAL_TOL]
    clusters = _cluster(real, 1e-6)
    return StabilityReport(
        real_positive=[(float(lam), int(c)) for lam, c in clusters[::-1]],
        max_growth_rate=float(real.max()) if real.size else 0.0,
        purely_imaginary_count=imag,
        zero_count=zeros,
        quartet_error=quartet,
        n_modes=basis.shape[1],
        mu=mu,
        galerkin=np.sort(galerkin)[::-1],
    )


def block_eigenvalues(ap, am) -> np.ndarray:
    n = ap.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, n:] = am
    big[n:, :n] = -ap
    return np.linalg.eigvals(big)


def _quartet_error(ap, am, real, floor):
    """Worst violation of ``lam -> -lam`` symmetry of the block spectrum.

    Eigenvalues inside ``|lam| <= floor`` (the split generalised kernel)
    are skipped.  The real ones must also match the symmetric reduction
    (``real``); a count mismatch returns ``inf``.
    """
    ev = block_eigenvalues(ap, am)
    ev = ev[np.abs(ev) > floor]
    if ev.size == 0:
        return 0.0 if real.size == 0 else float("inf")
    err = np.abs(ev[:, None] + ev[None, :]).min(axis=1) / np.maximum(1.0, np.abs(ev))
    scale = max(1.0, np.abs(ev).max())
    r = ev[np.abs(ev.imag) <= 1e-8 * scale].real
    pos = np.sort(r[r > 0])
    if pos.size != real.size:
        return float("inf")
    return float(max(err.max(), np.abs(pos - np.sort(real)).max(initial=0.0)))


def block_operator(lp: GraphOperator, lm: GraphOperator) -> sp.csc_matrix:
    """Sparse ``[[0, L-], [-L+, 0]]`` in symmetrised coordinates."""
    return sp.bmat([[None, lm.matrix], [-lp.matrix, None]], format="csc")


def refine_real_eigenvalues(block, guess: float, count: int, tol: float = 1e-12,
                            seed: int = 0) -> list:
    """``count`` eigenvalues of ``block`` nearest ``guess`` by block inverse iteration.

    The eigenvalues sought are real; the block carries one extra vector so
    a degenerate cluster separates cleanly from its nearest neighbour.
    """
    n = block.shape[0]
    lu = eigensolver._factor(block, guess)
    rng = np.random.default_rng(seed)
    z, _ = np.linalg.qr(rng.standard_normal((n, count + 1)))
    prev = None
    for _ in range(REFINE_ITERS):
        z, _ = np.linalg.qr(lu.solve(z))
        t = z.T @ (block @ z)
        ev = np.linalg.eigvals(t)
        ev = ev[np.argsort(np.abs(ev - guess))][:count]
        if prev is not None and np.abs(ev - prev).max() <= tol * max(1.0, abs(guess)):
            break
        prev = ev
    return [float(e.real) for e in ev]
