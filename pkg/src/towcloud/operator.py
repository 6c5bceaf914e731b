"""Pointwise game operators on data clouds.

The basic operator at a cloud node x splits into two parts over the closed
eps-neighborhood (the node itself included):

* an average part ``(mean u - u(x)) / eps^2``, weighted beta = (N+2)/(N+p);
* a min+max part ``(min u + max u - 2 u(x)) / (2 eps^2)``, weighted
  alpha = (p-2)/(N+p).

``eval_L`` is literally ``alpha * eval_Linf + beta * eval_L2`` — the three
functions share one pass over the neighborhood, so the decomposition holds
bitwise.  All statistics are computed on *differences* ``u(Z) - u(x)``,
which keeps evaluations well-scaled and makes constant shifts cancel before
any rounding can see them.

The extremal operators ``eval_Lplus`` / ``eval_Lminus`` replace the min+max
bracket by a two-step search: an outer point within ``lam * eps`` of x, then
an inner point within ``tau * eps^2`` of the *reflection* of the outer point
through x.  Outer candidates whose reflected ball is empty are skipped; if
every candidate is skipped the plain min+max bracket is used and the
evaluation is flagged as a fallback.
"""

from dataclasses import dataclass

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

__all__ = [
    "alpha_beta",
    "GameParams",
    "PucciParams",
    "OperatorEval",
    "eval_L2",
    "eval_Linf",
    "eval_L",
    "eval_components",
    "eval_Lplus",
    "eval_Lminus",
    "eval_Lplus_at",
    "eval_Lminus_at",
    "export_operator_evals",
]


def alpha_beta(p, dim):
    """Game weights ((p-2)/(N+p), (N+2)/(N+p)); they sum to 1 exactly
    in exact arithmetic and to within one ulp in floats.

    Raises ValueError for p < 2 (the min+max weight would turn negative and
    every monotonicity argument collapses).
    """
    if p < 2.0:
        raise ValueError("p must be at least 2")
    if dim < 1:
        raise ValueError("dim must be at least 1")
    denom = dim + float(p)
    return (float(p) - 2.0) / denom, (dim + 2.0) / denom


@dataclass(frozen=True)
class GameParams:
    """Dimension N, exponent p >= 2, and interaction radius eps > 0."""

    dim: int
    p: float
    eps: float

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        alpha_beta(self.p, self.dim)  # validates p and dim

    @property
    def alpha(self):
        return alpha_beta(self.p, self.dim)[0]

    @property
    def beta(self):
        return alpha_beta(self.p, self.dim)[1]


@dataclass(frozen=True)
class PucciParams:
    """Extremal-operator radii: outer ``lam * eps``, inner ``tau * eps^2``.

    The ordering eval_Lminus <= eval_L <= eval_Lplus needs lam >= 1 (so the
    outer search covers the plain neighborhood) and a cloud dense enough
    that reflected balls are populated.
    """

    lam: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if self.lam <= 0.0 or self.tau <= 0.0:
            raise ValueError("lam and tau must be positive")


@dataclass(frozen=True)
class OperatorEval:
    """One pointwise evaluation: value, neighborhood size, and flags."""

    value: float
    card: int
    degenerate: bool = False
    fallback: bool = False


if _HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _range_stats_jit(pts, ua, x, rr, ux):  # pragma: no cover
        card = 0
        total = 0.0
        dmin = np.inf
        dmax = -np.inf
        for t in range(pts.shape[0]):
            d2 = 0.0
            for k in range(pts.shape[1]):
                dd = pts[t, k] - x[k]
                d2 += dd * dd
            if d2 <= rr:
                v = ua[t] - ux
                card += 1
                total += v
                if v < dmin:
                    dmin = v
                if v > dmax:
                    dmax = v
        return card, total, dmin, dmax


def _range_stats_numpy(pts, ua, x, rr, ux):
    d2 = np.sum((pts - x) ** 2, axis=1)
    sel = d2 <= rr
    m = int(np.count_nonzero(sel))
    if m == 0:
        return 0, 0.0, np.inf, -np.inf
    diffs = ua[sel] - ux
    return (m, float(np.sum(diffs)), float(np.min(diffs)),
            float(np.max(diffs)))


def _diff_stats(index, u, x, ux, r):
    """(card, mean_diff, min_diff, max_diff) of u - ux over the closed
    r-ball around x, streamed cell block by cell block in fixed order.

    Each block is narrowed by first coordinate before the exact
    squared-distance test; the per-block statistics come from a fused jit
    kernel when numba is available (pure-numpy otherwise — the two paths
    agree to float roundoff, and each is deterministic on its own).
    """
    ua = index.aligned(u)
    rr = r * r
    card = 0
    total = 0.0
    dmin = np.inf
    dmax = -np.inf
    x = np.ascontiguousarray(x, dtype=float)
    x0 = float(x[0])
    stats = _range_stats_jit if _HAVE_NUMBA else _range_stats_numpy
    for a, b in index.iter_cell_ranges(x, r):
        a, b = index.narrow_range(a, b, x0, r)
        if b <= a:
            continue
        m, tot, lo, hi = stats(index.points_by_cell[a:b], ua[a:b], x, rr,
                               ux)
        if m == 0:
            continue
        card += m
        total += float(tot)
        dmin = min(dmin, float(lo))
        dmax = max(dmax, float(hi))
    if card == 0:
        return 0, 0.0, 0.0, 0.0
    return card, total / card, dmin, dmax


def _node_xu(u, node, index):
    u = np.asarray(u, dtype=float)
    x = index.points[node]
    return u, x, float(u[node])


def eval_L2(u, node, params, index):
    """Average part: (mean over the closed eps-ball of u - u(x)) / eps^2.

    A singleton neighborhood (the node alone) evaluates to 0 and is flagged
    degenerate.
    """
    u, x, ux = _node_xu(u, node, index)
    card, mean_d, _, _ = _diff_stats(index, u, x, ux, params.eps)
    return OperatorEval(mean_d / (params.eps * params.eps), card,
                        degenerate=card <= 1)


def eval_Linf(u, node, params, index):
    """Min+max part: (min u + max u - 2 u(x)) / (2 eps^2) over the ball."""
    u, x, ux = _node_xu(u, node, index)
    card, _, dmin, dmax = _diff_stats(index, u, x, ux, params.eps)
    return OperatorEval((dmin + dmax) / (2.0 * params.eps * params.eps),
                        card, degenerate=card <= 1)


def eval_components(u, node, params, index):
    """(L, L2, Linf, card) at a cloud node from one neighborhood pass.

    Returns a tuple of plain floats plus the neighborhood cardinality; the
    composition ``L = alpha * Linf + beta * L2`` holds bitwise because all
    three values come from the same difference statistics.
    """
    u, x, ux = _node_xu(u, node, index)
    card, mean_d, dmin, dmax = _diff_stats(index, u, x, ux, params.eps)
    e2 = params.eps * params.eps
    l2 = mean_d / e2
    linf = (dmin + dmax) / (2.0 * e2)
    return params.alpha * linf + params.beta * l2, l2, linf, card


def eval_L(u, node, params, index):
    """Full operator: alpha * eval_Linf + beta * eval_L2, one shared pass."""
    lval, _, _, card = eval_components(u, node, params, index)
    return OperatorEval(lval, card, degenerate=card <= 1)


def _pucci_bracket(index, u, x, ux, params, pucci, want_max):
    """Extremal pair bracket (best pair sum - 2 ux) and a fallback flag.

    Scans outer candidates in the closed lam*eps ball; each contributes the
    best (max or min) of ``u(Z_i) + u(Z_j)`` over inner points Z_j in the
    closed tau*eps^2 ball around 2x - Z_i.  Empty reflected balls skip the
    candidate; if nothing survives, the min+max bracket of the plain
    eps-ball is returned with fallback=True.
    """
    eps = params.eps
    outer = index.ball_neighbors(x, pucci.lam * eps)
    r_in = pucci.tau * eps * eps
    best = None
    for i in outer:
        refl = 2.0 * x - index.points[i]
        inner = index.ball_neighbors(refl, r_in)
        if inner.shape[0] == 0:
            continue
        vals = u[inner]
        pair = float(u[i]) + (float(np.max(vals)) if want_max
                              else float(np.min(vals)))
        if best is None or (pair > best if want_max else pair < best):
            best = pair
    if best is not None:
        return best - 2.0 * ux, False
    _, _, dmin, dmax = _diff_stats(index, u, x, ux, eps)
    return dmin + dmax, True


def eval_Lplus_at(u, x, ux, params, pucci, index):
    """Upper extremal operator at an arbitrary point x with value ux.

    The coordinate-level entry point exists because off-cloud evaluation is
    the only way the all-candidates-skipped fallback can actually trigger: a
    cloud node always finds itself in its own reflected ball.
    """
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    bracket, fb = _pucci_bracket(index, u, x, ux, params, pucci, True)
    card, mean_d, _, _ = _diff_stats(index, u, x, ux, params.eps)
    e2 = params.eps * params.eps
    value = params.alpha * (bracket / (2.0 * e2)) \
        + params.beta * (mean_d / e2)
    return OperatorEval(value, card, degenerate=card <= 1, fallback=fb)


def eval_Lminus_at(u, x, ux, params, pucci, index):
    """Lower extremal operator at an arbitrary point x with value ux."""
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    bracket, fb = _pucci_bracket(index, u, x, ux, params, pucci, False)
    card, mean_d, _, _ = _diff_stats(index, u, x, ux, params.eps)
    e2 = params.eps * params.eps
    value = params.alpha * (bracket / (2.0 * e2)) \
        + params.beta * (mean_d / e2)
    return OperatorEval(value, card, degenerate=card <= 1, fallback=fb)


def eval_Lplus(u, node, params, pucci, index):
    """Upper extremal operator at cloud node ``node``."""
    u, x, ux = _node_xu(u, node, index)
    return eval_Lplus_at(u, x, ux, params, pucci, index)


def eval_Lminus(u, node, params, pucci, index):
    """Lower extremal operator at cloud node ``node``."""
    u, x, ux = _node_xu(u, node, index)
    return eval_Lminus_at(u, x, ux, params, pucci, index)


def export_operator_evals(path, cloud, u, params, pucci=None, index=None):
    """Evaluate every node and write the operator CSV.

    Columns: ``node_id,L,L2,Linf,Lplus,Lminus,card,flags`` with floats in
    full 17-significant-digit form.  ``flags`` is a ';'-joined subset of
    {degenerate, plus_fallback, minus_fallback}, empty when clean.
    """
    from .geometry import SpatialIndex

    u = np.asarray(u, dtype=float)
    if pucci is None:
        pucci = PucciParams()
    if index is None:
        index = SpatialIndex.for_cloud(cloud, params.eps)
    with open(path, "w") as fh:
        fh.write("node_id,L,L2,Linf,Lplus,Lminus,card,flags\n")
        for i in range(cloud.n):
            full = eval_L(u, i, params, index)
            l2 = eval_L2(u, i, params, index)
            linf = eval_Linf(u, i, params, index)
            plus = eval_Lplus(u, i, params, pucci, index)
            minus = eval_Lminus(u, i, params, pucci, index)
            flags = []
            if full.degenerate:
                flags.append("degenerate")
            if plus.fallback:
                flags.append("plus_fallback")
            if minus.fallback:
                flags.append("minus_fallback")
            fh.write("%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s\n" % (
                i, full.value, l2.value, linf.value, plus.value,
                minus.value, full.card, ";".join(flags)))
