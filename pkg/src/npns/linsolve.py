"""Sparse five-point operators and cached linear solves.

All operators act on C-ordered flattenings of (nx, ny) arrays (axis 0 is x).
Cell-centered Dirichlet data enters through the half-cell ghost closure:
a Dirichlet boundary face adds 2/h^2 to the adjacent cell diagonal and
(2/h^2)*w to the right-hand side.  Neumann (zero-flux) faces add nothing,
so the all-Neumann operator has exactly zero row and column sums, which is
what makes flux-form transport conserve mass to roundoff.

Systems are solved by a cached sparse LU up to DIRECT_LIMIT unknowns and by
conjugate gradients (relative residual CG_RTOL) above it.  Factorizations
are memoized because the simulation loop solves the same operators every
step; the cache is capped and evicts in FIFO order.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg, splu

from .errors import SolverError

# Direct factorization up to 128x128 cells; beyond that memory and factor
# time favor CG.  Repeated solves reuse the cached factor either way.
DIRECT_LIMIT = 128 * 128
CG_RTOL = 1e-10
_CACHE_CAP = 64

_matrices: "OrderedDict[tuple, sparse.csr_matrix]" = OrderedDict()
_factors: "OrderedDict[tuple, object]" = OrderedDict()

EDGE_ORDER = ("bottom", "top", "left", "right")


def clear_cache():
    _matrices.clear()
    _factors.clear()


def _cache_get(cache, key, build):
    hit = cache.get(key)
    if hit is not None:
        cache.move_to_end(key)
        return hit
    value = build()
    cache[key] = value
    while len(cache) > _CACHE_CAP:
        cache.popitem(last=False)
    return value


def _tridiag(n: int, h: float, end0: float, end1: float) -> sparse.csr_matrix:
    """1D negative Laplacian with custom first/last diagonal entries (in units of 1/h^2)."""
    inv = 1.0 / (h * h)
    diag = np.full(n, 2.0 * inv)
    diag[0] = end0 * inv
    diag[-1] = end1 * inv
    off = np.full(n - 1, -inv)
    return sparse.diags([off, diag, off], [-1, 0, 1], format="csr")


def masks_key(masks: dict[str, np.ndarray]) -> tuple:
    return tuple(masks[e].tobytes() for e in EDGE_ORDER)


def cell_laplacian(nx: int, ny: int, hx: float, hy: float,
                   masks: dict[str, np.ndarray] | str) -> sparse.csr_matrix:
    """Negative cell Laplacian; masks mark Dirichlet boundary faces per edge.

    masks may be 'dirichlet' or 'neumann' for uniform closures.
    """
    if masks == "dirichlet":
        lx1 = _tridiag(nx, hx, 3.0, 3.0)
        ly1 = _tridiag(ny, hy, 3.0, 3.0)
        return (sparse.kron(lx1, sparse.eye(ny)) + sparse.kron(sparse.eye(nx), ly1)).tocsr()
    if masks == "neumann":
        lx1 = _tridiag(nx, hx, 1.0, 1.0)
        ly1 = _tridiag(ny, hy, 1.0, 1.0)
        return (sparse.kron(lx1, sparse.eye(ny)) + sparse.kron(sparse.eye(nx), ly1)).tocsr()

    lap = cell_laplacian(nx, ny, hx, hy, "neumann").tolil()
    extra = np.zeros((nx, ny))
    extra[:, 0] += (2.0 / hy**2) * masks["bottom"]
    extra[:, -1] += (2.0 / hy**2) * masks["top"]
    extra[0, :] += (2.0 / hx**2) * masks["left"]
    extra[-1, :] += (2.0 / hx**2) * masks["right"]
    lap.setdiag(lap.diagonal() + extra.ravel())
    return lap.tocsr()


def boundary_rhs(nx: int, ny: int, hx: float, hy: float,
                 masks: dict[str, np.ndarray] | str,
                 w_edges: dict[str, np.ndarray]) -> np.ndarray:
    """Right-hand-side contribution of Dirichlet face values, shape (nx, ny)."""
    if masks == "dirichlet":
        masks = {"bottom": np.ones(nx, bool), "top": np.ones(nx, bool),
                 "left": np.ones(ny, bool), "right": np.ones(ny, bool)}
    out = np.zeros((nx, ny))
    out[:, 0] += (2.0 / hy**2) * masks["bottom"] * w_edges["bottom"]
    out[:, -1] += (2.0 / hy**2) * masks["top"] * w_edges["top"]
    out[0, :] += (2.0 / hx**2) * masks["left"] * w_edges["left"]
    out[-1, :] += (2.0 / hx**2) * masks["right"] * w_edges["right"]
    return out


def staggered_laplacian(shape: tuple[int, int], hx: float, hy: float,
                        wall_axis: int) -> sparse.csr_matrix:
    """Negative Laplacian for one velocity component's interior faces.

    Along wall_axis the first/last unknowns neighbor wall faces that hold
    known zeros (no-slip), so the 1D operator keeps its interior diagonal.
    Along the other axis the wall sits half a spacing outside and is
    imposed by ghost reflection (diagonal 3/h^2 at the ends).
    """
    m, n = shape
    if wall_axis == 0:
        t0 = _tridiag(m, hx, 2.0, 2.0)
        t1 = _tridiag(n, hy, 3.0, 3.0)
    else:
        t0 = _tridiag(m, hx, 3.0, 3.0)
        t1 = _tridiag(n, hy, 2.0, 2.0)
    return (sparse.kron(t0, sparse.eye(n)) + sparse.kron(sparse.eye(m), t1)).tocsr()


def _cg_solve(mat: sparse.csr_matrix, b: np.ndarray, rtol: float) -> np.ndarray:
    x, info = cg(mat, b, rtol=rtol, atol=0.0, maxiter=20 * b.size)
    if info != 0:
        res = float(np.max(np.abs(mat @ x - b)))
        raise SolverError("conjugate gradients failed to converge", residual=res)
    return x


def cached_matrix(key: tuple, build) -> sparse.csr_matrix:
    """Fetch (or build and memoize) an operator matrix by key."""
    return _cache_get(_matrices, key, build)


def solve_cached(key: tuple, build_matrix, rhs: np.ndarray,
                 method: str = "auto", rtol: float = CG_RTOL) -> np.ndarray:
    """Solve build_matrix() @ x = rhs, caching the matrix and its factor by key."""
    mat = _cache_get(_matrices, key, build_matrix)
    n = mat.shape[0]
    if method == "direct" or (method == "auto" and n <= DIRECT_LIMIT):
        factor = _cache_get(_factors, key, lambda: splu(mat.tocsc()))
        return factor.solve(rhs)
    return _cg_solve(mat, rhs, rtol)


def solve_cell_dirichlet(nx: int, ny: int, hx: float, hy: float, eps: float,
                         rhs: np.ndarray, w_edges: dict[str, np.ndarray],
                         method: str = "auto", rtol: float = CG_RTOL) -> np.ndarray:
    """Solve -eps * Lap(phi) = rhs with phi = w on the boundary.

    Returns the (nx, ny) cell array.  Raises SolverError with the final
    residual if the iteration fails.
    """
    key = ("cell_dirichlet", nx, ny, hx, hy, eps)
    full = rhs + eps * boundary_rhs(nx, ny, hx, hy, "dirichlet", w_edges)
    x = solve_cached(key, lambda: eps * cell_laplacian(nx, ny, hx, hy, "dirichlet"),
                     full.ravel(), method, rtol)
    return x.reshape(nx, ny)


def solve_neumann_pinned(nx: int, ny: int, hx: float, hy: float,
                         rhs: np.ndarray, method: str = "auto",
                         rtol: float = CG_RTOL) -> np.ndarray:
    """Solve the all-Neumann Poisson problem Lap-free nullspace fixed to zero mean.

    rhs must be (discretely) mean-free for consistency; the solution is
    returned with its mean removed.
    """
    n = nx * ny
    b = rhs.ravel().copy()
    if method == "direct" or (method == "auto" and n <= DIRECT_LIMIT):
        # Pin one cell: with a consistent rhs the dropped equation is
        # satisfied automatically, and the mean is removed afterwards.
        def build():
            lap = cell_laplacian(nx, ny, hx, hy, "neumann").tolil()
            lap[0, :] = 0.0
            lap[0, 0] = 1.0
            return lap.tocsr()

        key = ("cell_neumann_pinned", nx, ny, hx, hy)
        b[0] = 0.0
        x = solve_cached(key, build, b, "direct")
    else:
        key = ("cell_neumann", nx, ny, hx, hy)
        mat = _cache_get(_matrices, key, lambda: cell_laplacian(nx, ny, hx, hy, "neumann"))
        b -= b.mean()
        x = _cg_solve(mat, b, rtol)
    x -= x.mean()
    return x.reshape(nx, ny)
