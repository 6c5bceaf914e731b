"""Independent reference computations used to check the library.

Everything in this file is deliberately primitive: plain Python loops over
plain floats, no numpy vectorization, and no imports from the package under
test.  These routines were written against the mathematical definitions
alone, before the corresponding library code, so agreement between the two
is evidence rather than tautology.

Shared conventions (the library must match them): closed balls decided on
squared distances, a node counts as its own neighbor, ids break ties.
"""

import math


def dist2(a, b):
    return sum((ai - bi) ** 2 for ai, bi in zip(a, b))


def brute_ball(points, x, r):
    """Ids (ascending) of points with squared distance to x at most r*r."""
    rr = r * r
    return [i for i, z in enumerate(points) if dist2(z, x) <= rr]


def brute_nearest(points, x):
    """(id, distance) of the nearest point; exact ties -> smallest id."""
    best_i, best_d2 = -1, float("inf")
    for i, z in enumerate(points):
        d2 = dist2(z, x)
        if d2 < best_d2:
            best_i, best_d2 = i, d2
    return best_i, math.sqrt(best_d2)


def alpha_beta_ref(p, dim):
    return (p - 2.0) / (dim + p), (dim + 2.0) / (dim + p)


def operator_value_ref(points, u, i, eps, p, dim):
    """Straight-from-definition evaluation of the operator at node i."""
    alpha, beta = alpha_beta_ref(p, dim)
    nbr = brute_ball(points, points[i], eps)
    vals = [u[j] for j in nbr]
    avg = sum(vals) / len(vals)
    bracket = (min(vals) + max(vals) - 2.0 * u[i]) / (2.0 * eps * eps)
    return alpha * bracket + beta * (avg - u[i]) / (eps * eps)


def pucci_bracket_ref(points, u, x, ux, eps, lam, tau, want_max):
    """Exhaustive pair enumeration of the extremal bracket at x.

    Outer candidates are cloud points in the closed lam*eps ball around x;
    for each, inner points are cloud points in the closed tau*eps^2 ball
    around the reflection 2x - Z_i.  Candidates with an empty inner ball
    are skipped.  Returns (bracket, fallback): if every candidate is
    skipped (or there are none), falls back to the plain min+max bracket
    over the eps-neighborhood.
    """
    outer = brute_ball(points, x, lam * eps)
    best = None
    for i in outer:
        refl = [2.0 * xc - zc for xc, zc in zip(x, points[i])]
        inner = brute_ball(points, refl, tau * eps * eps)
        if not inner:
            continue
        inner_vals = [u[j] for j in inner]
        pair = u[i] + (max(inner_vals) if want_max else min(inner_vals))
        if best is None or (pair > best if want_max else pair < best):
            best = pair
    if best is not None:
        return best - 2.0 * ux, False
    near = brute_ball(points, x, eps)
    vals = [u[j] for j in near] or [ux]
    return min(vals) + max(vals) - 2.0 * ux, True


def jacobi_solve_ref(points, eps, p, dim, f_vals, g_fun, boundary_dist,
                     max_iter=1_000_000):
    """Plain-loop Jacobi iteration for the Dirichlet problem.

    boundary_dist(x) gives distance to the domain boundary; nodes within
    eps are boundary nodes pinned to g_fun(x).  Interior update:
    u <- alpha/2 (min + max) + beta * avg - eps^2 * f, over the closed
    eps-neighborhood (self included).  Iterates until the sweep is a
    bitwise no-op or max_iter, whichever first.  Returns (u, iterations).
    """
    n = len(points)
    alpha, beta = alpha_beta_ref(p, dim)
    is_boundary = [boundary_dist(x) <= eps for x in points]
    if all(is_boundary):
        raise ValueError("no interior nodes")
    nbrs = [brute_ball(points, points[i], eps) for i in range(n)]
    # start from boundary data extended by nearest-boundary value
    u = []
    for i in range(n):
        if is_boundary[i]:
            u.append(g_fun(points[i]))
        else:
            j = min((jj for jj in range(n) if is_boundary[jj]),
                    key=lambda jj: (dist2(points[i], points[jj]), jj))
            u.append(g_fun(points[j]))
    it = 0
    while it < max_iter:
        new = list(u)
        for i in range(n):
            if is_boundary[i]:
                continue
            vals = [u[j] for j in nbrs[i]]
            avg = sum(vals) / len(vals)
            new[i] = (0.5 * alpha * (min(vals) + max(vals)) + beta * avg
                      - eps * eps * f_vals[i])
        it += 1
        if new == u:
            break
        u = new
    return u, it


def quartiles_ref(values):
    """(q1, median, q3) with linear interpolation, matching numpy defaults."""
    xs = sorted(values)
    n = len(xs)

    def at(q):
        pos = q * (n - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        return xs[lo] * (1.0 - frac) + xs[hi] * frac

    return at(0.25), at(0.5), at(0.75)
