"""Lowest eigenpairs of a sparse symmetric matrix.

Shift-invert block Lanczos with full reorthogonalisation.  The block size
is chosen at least as large as the largest expected eigenvalue multiplicity
(edge symmetries produce exact degeneracies up to ``N - 1``); a single-vector
Krylov space would see only one copy of each degenerate eigenvalue.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import FactorizationSingular, NoConvergence


def _factor(matrix, sigma):
    shifted = (matrix - sigma * sp.identity(matrix.shape[0], format="csc")).tocsc()
    try:
        return splu(shifted)
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise FactorizationSingular(str(exc)) from exc


def _orthonormalize(block, basis, rng):
    """Orthogonalise ``block`` against ``basis`` (twice) and itself.

    Columns that vanish are replaced by fresh random directions, which is
    how the iteration escapes an invariant subspace.
    """
    for _ in range(2):
        if basis is not None and basis.shape[1]:
            block = block - basis @ (basis.T @ block)
    q, r = np.linalg.qr(block)
    small = np.abs(np.diag(r)) < 1e-10 * max(1.0, np.abs(r).max())
    if small.any():
        fresh = rng.standard_normal((block.shape[0], int(small.sum())))
        for _ in range(2):
            if basis is not None and basis.shape[1]:
                fresh = fresh - basis @ (basis.T @ fresh)
            fresh = fresh - q[:, ~small] @ (q[:, ~small].T @ fresh)
        fq, _ = np.linalg.qr(fresh)
        q[:, small] = fq
        r[small, :] = 0.0
    return q, r


def lowest_eigenpairs(matrix, k: int, *, sigma: float | None = None,
                      block_size: int = 4, tol: float = 1e-9, seed: int = 0,
                      max_dim: int | None = None):
    """The ``k`` smallest eigenvalues of symmetric ``matrix`` and eigenvectors.

    Parameters
    ----------
    matrix : sparse symmetric matrix
    k : int
        Number of eigenpairs.
    sigma : float, optional
        Shift; must lie below the spectrum (default: a Gershgorin bound
        minus one).  The iteration runs on ``(matrix - sigma)^{-1}``.
    block_size : int
        Lanczos block width; at least the largest multiplicity wanted.
    tol : float
        Required residual ``||A u - lam u||`` for unit ``u``.

    Returns
    -------
    vals : (k,) ndarray, ascending
    vecs : (n, k) ndarray with orthonormal columns
    """
    a = sp.csr_matrix(matrix)
    n = a.shape[0]
    k = min(k, n)
    b = max(1, min(block_size, n))
    if sigma is None:
        diag = a.diagonal()
        off = np.asarray(abs(a).sum(axis=1)).ravel() - np.abs(diag)
        sigma = float((diag - off).min()) - 1.0
    lu = _factor(a, sigma)
    if max_dim is None:
        max_dim = min(n, max(20 * k + 10 * b, 400))
    rng = np.random.default_rng(seed)

    q, _ = _orthonormalize(rng.standard_normal((n, b)), None, rng)
    blocks = [q]
    diag_blocks = []
    off_blocks = []
    check_every = max(1, (k + b - 1) // b)
    steps = 0
    while True:
        w = lu.solve(blocks[-1])
        a_j = blocks[-1].T @ w
        a_j = 0.5 * (a_j + a_j.T)
        diag_blocks.append(a_j)
        basis = np.hstack(blocks)
        q_next, r = _orthonormalize(w, basis, rng)
        off_blocks.append(r)
        steps += 1
        dim = basis.shape[1]
        if steps % check_every == 0 or dim + b > max_dim:
            vals, vecs, ok = _ritz(a, sigma, basis, diag_blocks, off_blocks, k, tol)
            if ok:
                return vals, vecs
            if dim + b > max_dim:
                resid = _residuals(a, vals, vecs)
                raise NoConvergence(
                    f"Krylov dimension {dim} exhausted; worst residual {resid.max():.2e}"
                )
        blocks.append(q_next)


def _ritz(a, sigma, basis, diag_blocks, off_blocks, k, tol):
    b = diag_blocks[0].shape[0]
    m = len(diag_blocks)
    t = np.zeros((m * b, m * b))
    for j, d in enumerate(diag_blocks):
        t[j * b:(j + 1) * b, j * b:(j + 1) * b] = d
        if j + 1 < m:
            r = off_blocks[j]
            t[(j + 1) * b:(j + 2) * b, j * b:(j + 1) * b] = r
            t[j * b:(j + 1) * b, (j + 1) * b:(j + 2) * b] = r.T
    theta, s = np.linalg.eigh(t)
    kk = min(k, theta.size)
    order = np.argsort(theta)[::-1][:kk]  # largest theta <-> smallest eigenvalue
    vecs = basis @ s[:, order]
    # one Rayleigh-Ritz pass on the unshifted matrix sharpens the eigenvalues
    h = vecs.T @ (a @ vecs)
    lam, y = np.linalg.eigh(0.5 * (h + h.T))
    vecs = vecs @ y
    if kk < k:
        return lam, vecs, False
    resid = _residuals(a, lam, vecs)
    return lam, vecs, bool(np.all(resid <= tol))


def _residuals(a, vals, vecs):
    return np.linalg.norm(a @ vecs - vecs * vals, axis=0)


def krylov_basis(matrix, dim: int, *, sigma: float, start=None, block_size: int = 4,
                 seed: int = 0) -> np.ndarray:
    """Orthonormal basis of the block Krylov space of ``(matrix - sigma)^{-1}``.

    ``start`` columns (if given) seed the first block, padded with random
    vectors up to ``block_size``.  Used as a Galerkin space for the
    low-lying part of the spectrum.  Whole blocks are kept, so the result
    may have a few more than ``dim`` columns; if the span of ``start`` is
    invariant under a symmetry commuting with ``matrix`` then so is the
    returned space.
    """
    a = sp.csr_matrix(matrix)
    n = a.shape[0]
    dim = min(dim, n)
    rng = np.random.default_rng(seed)
    cols = [] if start is None else [np.asarray(start, dtype=float).reshape(n, -1)]
    have = 0 if start is None else cols[0].shape[1]
    b = max(block_size, have)
    if have < b:
        cols.append(rng.standard_normal((n, b - have)))
    q = _deflated(np.hstack(cols), None)
    lu = _factor(a, sigma)
    blocks = [q]
    total = q.shape[1]
    while total < dim:
        q = _deflated(lu.solve(blocks[-1]), np.hstack(blocks))
        if q.shape[1] == 0:
            break
        blocks.append(q)
        total += q.shape[1]
    return np.hstack(blocks)


def _deflated(block, basis, tol=1e-10):
    """Orthonormalise and drop (rather than replace) dependent columns."""
    norms = np.linalg.norm(block, axis=0)
    for _ in range(2):
        if basis is not None:
            block = block - basis @ (basis.T @ block)
    q, r = np.linalg.qr(block)
    keep = np.abs(np.diag(r)) > tol * max(norms.max(), 1e-300)
    return q[:, keep]
