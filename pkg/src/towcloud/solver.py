"""Dirichlet problems for the game operator, and their fixed-point solver.

Discretization: nodes within ``eps`` of the domain boundary form the
boundary strip and are pinned to ``g``; every other node is interior and
must satisfy ``L u = f``.  Rearranging the operator gives the update

    u(x) <- alpha/2 (min + max) + beta * avg - eps^2 * f(x)

over the closed eps-neighborhood of x (self included), which is a monotone,
nonexpansive map with the boundary data as anchor.  ``solve`` runs plain
Jacobi (simultaneous) sweeps of this map — deliberately no relaxation, no
acceleration — until the sup-norm change of one sweep drops to
``tol * eps^2``.  By the identity ``u' - u = eps^2 (L u - f)``, that
stopping rule bounds the operator residual by ``tol``.

The sweep kernel is JIT-compiled with numba when available; a pure-numpy
fallback computes the same segment reductions in the same fixed id order,
so results are deterministic either way and independent of any worker
count.

For p = 2 the min+max weight vanishes and the problem is linear;
``solve_linear_p2`` assembles the sparse system and solves it directly,
serving as an exact cross-check on the iteration.
"""

import json
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import SpatialIndex, boundary_strip

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

__all__ = [
    "AssemblyError",
    "DirichletProblem",
    "SolveReport",
    "assemble",
    "fixed_point_map",
    "residual",
    "solve",
    "solve_linear_p2",
    "export_solution_csv",
]


class AssemblyError(ValueError):
    """A problem instance that cannot be sensibly discretized."""


@dataclass
class DirichletProblem:
    """Assembled discrete Dirichlet problem.

    ``indptr``/``indices`` hold the closed eps-neighborhoods of the interior
    nodes in CSR form (global node ids, ascending within each row);
    ``f_values`` aligns with ``interior_ids`` and ``g_values`` with
    ``boundary_ids``.
    """

    cloud: object
    index: object
    params: object
    interior_ids: np.ndarray
    boundary_ids: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def cards(self):
        return np.diff(self.indptr)


@dataclass
class SolveReport:
    """Outcome of one ``solve`` call; serializes to single-line JSON."""

    iterations: int
    final_residual: float
    sup_change_last_sweep: float
    wall_time: float
    converged: bool
    tolerance: float

    def to_json(self):
        payload = {
            "converged": bool(self.converged),
            "final_residual": self.final_residual,
            "iterations": int(self.iterations),
            "sup_change_last_sweep": self.sup_change_last_sweep,
            "tolerance": self.tolerance,
            "wall_time": self.wall_time,
        }
        return json.dumps(payload, sort_keys=True)


def assemble(cloud, params, f, g):
    """Discretize ``L u = f`` with boundary data ``g`` on a cloud.

    Parameters
    ----------
    cloud : DataCloud
    params : GameParams
    f, g : objects with ``value(points) -> array``
        Forcing (evaluated at interior nodes) and boundary data (evaluated
        at strip nodes).  Smooth fields and manufactured forcings both fit.

    Raises
    ------
    AssemblyError
        If the boundary strip is empty or swallows every node, if any
        interior node has a singleton neighborhood (isolated), or if f/g
        evaluate to non-finite values.
    """
    if cloud.n >= 2 ** 31:
        raise AssemblyError("cloud too large for 32-bit node indexing")
    eps = params.eps
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        bids = boundary_strip(cloud, eps)
    if bids.shape[0] == cloud.n:
        raise AssemblyError(
            "boundary strip exhausts the cloud (n=%d, eps=%g): the "
            "Dirichlet problem has no interior nodes" % (cloud.n, eps))
    if bids.shape[0] == 0:
        raise AssemblyError(
            "no cloud node lies within eps=%g of the boundary; the "
            "problem has no data to anchor to" % eps)
    mask = np.zeros(cloud.n, dtype=bool)
    mask[bids] = True
    iids = np.nonzero(~mask)[0].astype(np.int64)

    index = SpatialIndex.for_cloud(cloud, eps)
    rows = []
    isolated = []
    for i in iids:
        nbr = index.ball_neighbors(cloud.points[i], eps)
        if nbr.shape[0] < 2:
            isolated.append(int(i))
        rows.append(nbr)
    if isolated:
        shown = ", ".join(str(i) for i in isolated[:10])
        more = "" if len(isolated) <= 10 else " (+%d more)" % (
            len(isolated) - 10)
        raise AssemblyError(
            "isolated interior nodes (eps-neighborhood is just the node "
            "itself): %s%s; enlarge eps or densify the cloud"
            % (shown, more))
    indptr = np.zeros(iids.shape[0] + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([r.shape[0] for r in rows])
    indices = (np.concatenate(rows) if rows
               else np.empty(0, dtype=np.int64)).astype(np.int32)

    f_values = np.asarray(f.value(cloud.points[iids]), dtype=float)
    g_values = np.asarray(g.value(cloud.points[bids]), dtype=float)
    if not np.all(np.isfinite(f_values)):
        raise AssemblyError("forcing f is not finite at some interior node")
    if not np.all(np.isfinite(g_values)):
        raise AssemblyError("boundary data g is not finite at some "
                            "strip node")
    return DirichletProblem(cloud, index, params, iids, bids,
                            f_values, g_values, indptr, indices)


# ---------------------------------------------------------------------------
# Sweep kernels
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _sweep_jit(u, out, interior, indptr, indices, fshift, half_alpha,
                   beta):  # pragma: no cover - exercised via fixed_point_map
        max_change = 0.0
        for r in range(interior.shape[0]):
            a = indptr[r]
            b = indptr[r + 1]
            vmin = np.inf
            vmax = -np.inf
            s = 0.0
            for t in range(a, b):
                v = u[indices[t]]
                s += v
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
            nv = half_alpha * (vmin + vmax) + beta * (s / (b - a)) \
                - fshift[r]
            ch = abs(nv - u[interior[r]])
            if ch > max_change:
                max_change = ch
            out[interior[r]] = nv
        return max_change


def _sweep_numpy(u, out, interior, indptr, indices, fshift, half_alpha,
                 beta):
    gathered = u[indices]
    heads = indptr[:-1]
    sums = np.add.reduceat(gathered, heads)
    mins = np.minimum.reduceat(gathered, heads)
    maxs = np.maximum.reduceat(gathered, heads)
    cards = np.diff(indptr)
    nv = half_alpha * (mins + maxs) + beta * (sums / cards) - fshift
    change = float(np.max(np.abs(nv - u[interior]))) if interior.size \
        else 0.0
    out[interior] = nv
    return change


def _sweep(u, out, problem, fshift, use_numba=True):
    half_alpha = 0.5 * problem.params.alpha
    beta = problem.params.beta
    if _HAVE_NUMBA and use_numba:
        return float(_sweep_jit(u, out, problem.interior_ids,
                                problem.indptr, problem.indices, fshift,
                                half_alpha, beta))
    return _sweep_numpy(u, out, problem.interior_ids, problem.indptr,
                        problem.indices, fshift, half_alpha, beta)


def fixed_point_map(problem, u):
    """One Jacobi sweep of the Dirichlet update; returns a new array.

    Interior nodes get ``alpha/2 (min+max) + beta avg - eps^2 f`` computed
    from the *input* u; boundary nodes are pinned to g regardless of the
    input values there.
    """
    u = np.asarray(u, dtype=float)
    out = u.copy()
    out[problem.boundary_ids] = problem.g_values
    eps = problem.params.eps
    fshift = eps * eps * problem.f_values
    _sweep(u, out, problem, fshift)
    return out


def residual(problem, u):
    """Max over interior nodes of |L u - f|, from the assembled rows."""
    u = np.asarray(u, dtype=float)
    gathered = u[problem.indices]
    heads = problem.indptr[:-1]
    sums = np.add.reduceat(gathered, heads)
    mins = np.minimum.reduceat(gathered, heads)
    maxs = np.maximum.reduceat(gathered, heads)
    cards = problem.cards
    ui = u[problem.interior_ids]
    e2 = problem.params.eps ** 2
    l2 = (sums / cards - ui) / e2
    linf = ((mins - ui) + (maxs - ui)) / (2.0 * e2)
    lval = problem.params.alpha * linf + problem.params.beta * l2
    if lval.size == 0:
        return 0.0
    return float(np.max(np.abs(lval - problem.f_values)))


def default_init(problem):
    """Boundary data extended inward by nearest-strip value.

    Each interior node starts from the g-value of its nearest boundary
    node (exact ties -> smallest node id), which keeps the first iterate
    inside [min g, max g].
    """
    cloud = problem.cloud
    u0 = np.zeros(cloud.n, dtype=float)
    u0[problem.boundary_ids] = problem.g_values
    if problem.interior_ids.size:
        lo, hi = cloud.domain.bounding_box()
        bindex = SpatialIndex(cloud.points[problem.boundary_ids], lo, hi,
                              problem.params.eps)
        for i in problem.interior_ids:
            pos, _ = bindex.nearest(cloud.points[i])
            u0[i] = problem.g_values[pos]
    return u0


def solve(problem, tol=1e-9, max_iter=1_000_000, init=None):
    """Iterate the Jacobi map to its fixed point.

    Parameters
    ----------
    problem : DirichletProblem
    tol : float
        Sweep-change tolerance in units of eps^2: iteration stops once the
        sup-norm change of a sweep is at most ``tol * eps^2``, i.e. once
        the operator residual is at most ``tol``.
    max_iter : int
        Sweep cap; hitting it reports converged=False.
    init : array, optional
        Starting values (boundary entries are overwritten by g).  Default
        is the nearest-boundary extension of g.

    Returns
    -------
    (u, SolveReport)

    Raises
    ------
    RuntimeError
        If iterates stop being finite (e.g. absurdly scaled forcing).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    t0 = time.perf_counter()
    u = np.array(init, dtype=float) if init is not None \
        else default_init(problem)
    if u.shape != (problem.cloud.n,):
        raise ValueError("init must have one value per node")
    u[problem.boundary_ids] = problem.g_values
    nxt = u.copy()
    eps = problem.params.eps
    fshift = eps * eps * problem.f_values
    threshold = tol * eps * eps
    change = np.inf
    it = 0
    while it < max_iter:
        change = _sweep(u, nxt, problem, fshift)
        u, nxt = nxt, u
        it += 1
        if not math.isfinite(change) or (
                it % 256 == 0
                and not np.all(np.isfinite(u[problem.interior_ids]))):
            raise RuntimeError(
                "iteration blew up (non-finite values at sweep %d); "
                "check the scaling of f and g" % it)
        if change <= threshold:
            break
    final_res = residual(problem, u)
    report = SolveReport(
        iterations=it,
        final_residual=final_res,
        sup_change_last_sweep=float(change),
        wall_time=time.perf_counter() - t0,
        converged=bool(change <= threshold and final_res <= tol),
        tolerance=tol,
    )
    return u, report


def solve_linear_p2(problem):
    """Direct sparse solve of the p = 2 (pure averaging) problem.

    Assembles ``(I - A) u = -eps^2 f + (boundary coupling)`` over interior
    nodes and eliminates it with scipy's sparse LU.  Raises ValueError if
    the problem's p is not 2, or if some connected component of interior
    nodes never touches the boundary strip (the system is then singular;
    the offending component is named).
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components
    from scipy.sparse.linalg import spsolve

    if problem.params.p != 2:
        raise ValueError("direct linear solve applies only at p = 2")
    n = problem.cloud.n
    iids = problem.interior_ids
    k = iids.shape[0]
    row_of = np.full(n, -1, dtype=np.int64)
    row_of[iids] = np.arange(k)
    gfull = np.zeros(n, dtype=float)
    gfull[problem.boundary_ids] = problem.g_values

    cards = problem.cards.astype(float)
    rows_rep = np.repeat(np.arange(k), problem.cards)
    cols = problem.indices
    col_rows = row_of[cols]
    inv_card = 1.0 / cards[rows_rep]

    interior_entry = col_rows >= 0
    A = csr_matrix((inv_card[interior_entry],
                    (rows_rep[interior_entry], col_rows[interior_entry])),
                   shape=(k, k))

    # ungrounded components make (I - A) singular: find them first
    ncomp, labels = connected_components(A, directed=False)
    has_boundary = np.zeros(ncomp, dtype=bool)
    bweight = np.zeros(k, dtype=float)
    np.add.at(bweight, rows_rep[~interior_entry], 1.0)
    has_boundary[labels[bweight > 0]] = True
    if not np.all(has_boundary):
        bad = int(np.nonzero(~has_boundary)[0][0])
        members = iids[labels == bad]
        shown = ", ".join(str(i) for i in members[:10])
        more = "" if members.shape[0] <= 10 else " (+%d more)" % (
            members.shape[0] - 10)
        raise ValueError(
            "singular p=2 system: interior component {%s%s} has no "
            "boundary contact" % (shown, more))

    e2 = problem.params.eps ** 2
    rhs = -e2 * problem.f_values
    np.add.at(rhs, rows_rep[~interior_entry],
              inv_card[~interior_entry] * gfull[cols[~interior_entry]])

    from scipy.sparse import identity
    M = (identity(k, format="csr") - A).tocsc()
    u_int = spsolve(M, rhs)
    u = gfull.copy()
    u[iids] = u_int
    return u


def export_solution_csv(problem, u, path):
    """Write ``node_id,x1..xN,u,is_boundary`` rows for every node."""
    u = np.asarray(u, dtype=float)
    pts = problem.cloud.points
    dim = pts.shape[1]
    is_b = np.zeros(problem.cloud.n, dtype=int)
    is_b[problem.boundary_ids] = 1
    header = ("node_id,"
              + ",".join("x%d" % (k + 1) for k in range(dim))
              + ",u,is_boundary")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(problem.cloud.n):
            coords = ",".join("%.17g" % c for c in pts[i])
            fh.write("%d,%s,%.17g,%d\n" % (i, coords, u[i], is_b[i]))
