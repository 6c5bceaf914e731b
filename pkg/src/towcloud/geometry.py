"""Domains, sampling densities, random data clouds, and neighbor search.

Domains are one of three shapes with exact closed-form membership and
boundary-distance tests: a euclidean ball, an axis-aligned box, or an
annulus.  A :class:`Density` is a strictly positive smooth field over a
domain, normalized at construction (by midpoint quadrature) to unit mass.
Point clouds are drawn i.i.d. from a density by vectorized rejection
sampling with a constant envelope, so the draw order is a pure function of
the seed.

Neighbor queries run through :class:`SpatialIndex`, a uniform bucket grid
over the domain's bounding box.  Ball membership is decided on *squared*
distances (``d2 <= r*r``), and every query that returns ids returns them
sorted ascending; both conventions are relied on by the operator and solver
layers for determinism.
"""

import math
import warnings
from itertools import product

import numpy as np

__all__ = [
    "unit_ball_volume",
    "Ball",
    "Box",
    "Annulus",
    "make_domain",
    "midpoint_quadrature",
    "ball_mass",
    "Density",
    "DataCloud",
    "sample_cloud",
    "boundary_strip",
    "SpatialIndex",
    "ball_neighbors",
    "transport",
    "covering_radius",
    "save_cloud_csv",
    "load_cloud_csv",
]


def unit_ball_volume(dim):
    """Volume of the unit ball in R^dim."""
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


def _points(x, dim):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def _maybe_scalar(out, single):
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

class Ball:
    """Open euclidean ball with center ``center`` and radius ``radius``."""

    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if self.radius <= 0.0:
            raise ValueError("ball radius must be positive")
        self.dim = self.center.shape[0]

    def contains(self, x):
        pts, single = _points(x, self.dim)
        d2 = np.sum((pts - self.center) ** 2, axis=1)
        return _maybe_scalar(d2 < self.radius * self.radius, single)

    def boundary_distance(self, x):
        pts, single = _points(x, self.dim)
        d = np.sqrt(np.sum((pts - self.center) ** 2, axis=1))
        return _maybe_scalar(np.abs(self.radius - d), single)

    def boundary_projection(self, x):
        pts, single = _points(x, self.dim)
        v = pts - self.center
        d = np.sqrt(np.sum(v ** 2, axis=1))
        unit = np.zeros_like(v)
        unit[:, 0] = 1.0  # direction for a point sitting exactly at center
        ok = d > 0.0
        unit[ok] = v[ok] / d[ok, None]
        return _maybe_scalar(self.center + self.radius * unit, single)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    @property
    def volume(self):
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    @property
    def diameter(self):
        return 2.0 * self.radius

    def anchor(self):
        return self.center.copy()

    def __repr__(self):
        return "Ball(center=%s, radius=%r)" % (self.center.tolist(),
                                               self.radius)


class Box:
    """Open axis-aligned box with corners ``lo < hi`` componentwise."""

    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.lo >= self.hi):
            raise ValueError("box requires lo < hi componentwise")
        self.dim = self.lo.shape[0]

    def contains(self, x):
        pts, single = _points(x, self.dim)
        ok = np.all((pts > self.lo) & (pts < self.hi), axis=1)
        return _maybe_scalar(ok, single)

    def boundary_distance(self, x):
        pts, single = _points(x, self.dim)
        outside = np.maximum(np.maximum(self.lo - pts, pts - self.hi), 0.0)
        d_out = np.sqrt(np.sum(outside ** 2, axis=1))
        margin = np.min(np.minimum(pts - self.lo, self.hi - pts), axis=1)
        out = np.where(d_out > 0.0, d_out, margin)
        return _maybe_scalar(out, single)

    def boundary_projection(self, x):
        pts, single = _points(x, self.dim)
        proj = np.clip(pts, self.lo, self.hi)
        inside = np.all((pts > self.lo) & (pts < self.hi), axis=1)
        for i in np.nonzero(inside)[0]:
            p = proj[i]
            lo_m = p - self.lo
            hi_m = self.hi - p
            axis = int(np.argmin(np.minimum(lo_m, hi_m)))
            # nearer face wins; exact tie goes to the low face
            p[axis] = self.lo[axis] if lo_m[axis] <= hi_m[axis] \
                else self.hi[axis]
        return _maybe_scalar(proj, single)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    @property
    def diameter(self):
        return float(np.sqrt(np.sum((self.hi - self.lo) ** 2)))

    def anchor(self):
        return 0.5 * (self.lo + self.hi)

    def __repr__(self):
        return "Box(lo=%s, hi=%s)" % (self.lo.tolist(), self.hi.tolist())


class Annulus:
    """Open annulus ``inner < |x - center| < outer``."""

    kind = "annulus"

    def __init__(self, center, inner, outer):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.inner = float(inner)
        self.outer = float(outer)
        if not 0.0 < self.inner < self.outer:
            raise ValueError("annulus requires 0 < inner < outer")
        self.dim = self.center.shape[0]

    def contains(self, x):
        pts, single = _points(x, self.dim)
        d2 = np.sum((pts - self.center) ** 2, axis=1)
        ok = (d2 > self.inner * self.inner) & (d2 < self.outer * self.outer)
        return _maybe_scalar(ok, single)

    def boundary_distance(self, x):
        pts, single = _points(x, self.dim)
        d = np.sqrt(np.sum((pts - self.center) ** 2, axis=1))
        out = np.where(d < self.inner, self.inner - d,
                       np.where(d > self.outer, d - self.outer,
                                np.minimum(d - self.inner, self.outer - d)))
        return _maybe_scalar(out, single)

    def boundary_projection(self, x):
        pts, single = _points(x, self.dim)
        v = pts - self.center
        d = np.sqrt(np.sum(v ** 2, axis=1))
        unit = np.zeros_like(v)
        unit[:, 0] = 1.0
        ok = d > 0.0
        unit[ok] = v[ok] / d[ok, None]
        to_inner = np.abs(d - self.inner)
        to_outer = np.abs(self.outer - d)
        r = np.where(to_inner <= to_outer, self.inner, self.outer)
        return _maybe_scalar(self.center + r[:, None] * unit, single)

    def bounding_box(self):
        return self.center - self.outer, self.center + self.outer

    @property
    def volume(self):
        w = unit_ball_volume(self.dim)
        return w * (self.outer ** self.dim - self.inner ** self.dim)

    @property
    def diameter(self):
        return 2.0 * self.outer

    def anchor(self):
        a = self.center.copy()
        a[0] += 0.5 * (self.inner + self.outer)
        return a

    def __repr__(self):
        return "Annulus(center=%s, inner=%r, outer=%r)" % (
            self.center.tolist(), self.inner, self.outer)


def make_domain(kind, **kw):
    """Construct a domain by kind name: 'ball', 'box', or 'annulus'."""
    if kind == "ball":
        return Ball(kw["center"], kw["radius"])
    if kind == "box":
        return Box(kw["lo"], kw["hi"])
    if kind == "annulus":
        return Annulus(kw["center"], kw["inner"], kw["outer"])
    raise ValueError("unknown domain kind %r" % (kind,))


# ---------------------------------------------------------------------------
# Quadrature and densities
# ---------------------------------------------------------------------------

def _quad_cells_default(dim):
    return {1: 8192, 2: 512}.get(dim, 64)


def midpoint_quadrature(domain, fn, cells_per_axis=None):
    """Midpoint-rule integral of ``fn`` over the domain.

    The bounding box is tiled with ``cells_per_axis`` cells per axis and the
    cell centers inside the domain contribute ``fn(center) * cell_volume``.
    This rule *defines* the normalization used by :class:`Density`.
    """
    if cells_per_axis is None:
        cells_per_axis = _quad_cells_default(domain.dim)
    lo, hi = domain.bounding_box()
    h = (hi - lo) / cells_per_axis
    axes = [lo[k] + h[k] * (np.arange(cells_per_axis) + 0.5)
            for k in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    mask = domain.contains(pts)
    if not np.any(mask):
        return 0.0
    vals = np.asarray(fn(pts[mask]), dtype=float)
    return float(np.sum(vals) * np.prod(h))


def ball_mass(density, center, radius, cells_per_axis=256):
    """Midpoint-quadrature mass of a density over a closed ball."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dim = center.shape[0]
    h = 2.0 * radius / cells_per_axis
    axes = [center[k] - radius + h * (np.arange(cells_per_axis) + 0.5)
            for k in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    d2 = np.sum((pts - center) ** 2, axis=1)
    mask = d2 <= radius * radius
    vals = np.asarray(density.value(pts[mask]), dtype=float)
    return float(np.sum(vals) * h ** dim)


class Density:
    """Strictly positive sampling density over a domain, unit total mass.

    Parameters
    ----------
    field : SmoothField
        Raw (unnormalized) density expression; must be bounded between
        ``phi0`` and ``phi1`` on the domain.
    domain : Ball | Box | Annulus
    phi0, phi1 : float
        Declared positive lower/upper bounds for the *raw* field.  They are
        rescaled together with the field, so after construction they bound
        the normalized density.
    lipschitz_bound : float, optional
        Declared Lipschitz constant of the raw field (informational; scaled
        along with everything else).
    cells_per_axis : int, optional
        Resolution of the normalizing midpoint quadrature.

    The normalization factor is computed once so that
    :func:`midpoint_quadrature` of ``value`` over the domain equals 1 on the
    construction grid; ``quadrature_mass()`` re-checks it.  Bounds are
    spot-checked on a 33-per-axis probe grid.
    """

    def __init__(self, field, domain, phi0, phi1, lipschitz_bound=None,
                 cells_per_axis=None):
        if not 0.0 < phi0 <= phi1:
            raise ValueError("need 0 < phi0 <= phi1")
        self.field = field
        self.domain = domain
        self.dim = domain.dim
        self._cells = (cells_per_axis if cells_per_axis is not None
                       else _quad_cells_default(domain.dim))
        raw_mass = midpoint_quadrature(domain, field.value, self._cells)
        if not raw_mass > 0.0:
            raise ValueError("density has nonpositive mass on the domain")
        self.scale = 1.0 / raw_mass
        self.phi0 = phi0 * self.scale
        self.phi1 = phi1 * self.scale
        self.lipschitz_bound = (None if lipschitz_bound is None
                                else lipschitz_bound * self.scale)
        self._spot_check_bounds()

    def _spot_check_bounds(self):
        lo, hi = self.domain.bounding_box()
        axes = [np.linspace(lo[k], hi[k], 33) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        pts = pts[self.domain.contains(pts)]
        if pts.shape[0] == 0:
            return
        vals = self.value(pts)
        slack = 1e-9 * max(1.0, self.phi1)
        if np.min(vals) < self.phi0 - slack or \
                np.max(vals) > self.phi1 + slack:
            raise ValueError(
                "density leaves its declared bounds on the probe grid: "
                "range [%.6g, %.6g] vs declared [%.6g, %.6g]"
                % (np.min(vals), np.max(vals), self.phi0, self.phi1))

    # Field protocol, so a Density can stand in wherever a SmoothField is
    # expected (the normalization constant rides along exactly).
    def value(self, x):
        return self.scale * self.field.value(x)

    def gradient(self, x):
        return self.scale * self.field.gradient(x)

    def hessian(self, x):
        return self.scale * self.field.hessian(x)

    def quadrature_mass(self, cells_per_axis=None):
        """Re-run the normalizing quadrature; should return ~1."""
        cells = cells_per_axis if cells_per_axis is not None else self._cells
        return midpoint_quadrature(self.domain, self.value, cells)

    def __repr__(self):
        return "Density(%r, phi0=%.6g, phi1=%.6g)" % (
            self.field, self.phi0, self.phi1)


# ---------------------------------------------------------------------------
# Clouds
# ---------------------------------------------------------------------------

class DataCloud:
    """An id-ordered array of sample points strictly inside a domain."""

    def __init__(self, points, domain, density=None, seed=0):
        self.points = np.ascontiguousarray(np.asarray(points, dtype=float))
        if self.points.ndim != 2 or self.points.shape[1] != domain.dim:
            raise ValueError("points must have shape (n, %d)" % domain.dim)
        if not bool(np.all(domain.contains(self.points))):
            raise ValueError("cloud points must lie strictly inside "
                             "the domain")
        self.domain = domain
        self.density = density
        self.seed = int(seed)
        self.n = self.points.shape[0]

    def __len__(self):
        return self.n

    def __repr__(self):
        return "DataCloud(n=%d, dim=%d, seed=%d)" % (
            self.n, self.points.shape[1], self.seed)


# Abort rejection sampling once this many proposals have produced an
# acceptance rate below ACCEPT_FLOOR: the declared envelope is then almost
# certainly wrong.
ACCEPT_FLOOR = 1e-4
_ACCEPT_WARMUP = 200_000


def sample_cloud(domain, density, n, seed):
    """Draw ``n`` i.i.d. points from ``density`` by rejection sampling.

    Proposals are uniform on the bounding box with a constant envelope
    ``phi1``; the accept stream is consumed in draw order, so the resulting
    cloud is a pure function of ``seed``.

    Raises RuntimeError if the observed acceptance rate stays below 1e-4
    after a warmup, which indicates a malformed density/envelope pair.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box()
    batch = int(max(65536, min(2 * n, 4_194_304)))
    out = []
    got = 0
    proposed = 0
    accepted = 0
    while got < n:
        pts = rng.uniform(lo, hi, size=(batch, domain.dim))
        v = rng.uniform(0.0, density.phi1, size=batch)
        keep = domain.contains(pts) & (v <= density.value(pts))
        acc = pts[keep]
        proposed += batch
        accepted += acc.shape[0]
        if proposed >= _ACCEPT_WARMUP and accepted < ACCEPT_FLOOR * proposed:
            raise RuntimeError(
                "rejection sampling acceptance rate %.2e after %d proposals; "
                "density envelope looks malformed" % (
                    accepted / proposed, proposed))
        out.append(acc)
        got += acc.shape[0]
    pts = np.concatenate(out, axis=0)[:n]
    return DataCloud(pts, domain, density=density, seed=seed)


def boundary_strip(cloud, eps):
    """Ids of cloud nodes within distance ``eps`` of the domain boundary.

    The strip plays the role of discrete boundary data carrier.  Returns a
    sorted int array; warns if the strip swallows the whole cloud (the
    Dirichlet problem is then degenerate — no interior nodes remain).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    d = cloud.domain.boundary_distance(cloud.points)
    ids = np.nonzero(d <= eps)[0].astype(np.int64)
    if ids.shape[0] == cloud.n:
        warnings.warn("boundary strip exhausts the entire cloud; "
                      "no interior nodes remain", RuntimeWarning,
                      stacklevel=2)
    return ids


# ---------------------------------------------------------------------------
# Spatial index
# ---------------------------------------------------------------------------

class SpatialIndex:
    """Uniform bucket grid over the domain's bounding box.

    ``cell_edge`` defaults to the intended query radius, which makes every
    radius-``cell_edge`` ball query touch at most 3 cells per axis.  Queries
    with other radii remain exact (the cell range adapts); only efficiency
    is tuned to the construction radius.
    """

    def __init__(self, points, lo, hi, cell_edge):
        if cell_edge <= 0.0:
            raise ValueError("cell_edge must be positive")
        self.points = np.asarray(points, dtype=float)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.cell_edge = float(cell_edge)
        self.dim = self.points.shape[1]
        span = self.hi - self.lo
        self.cells = np.maximum(
            1, np.ceil(span / self.cell_edge - 1e-12).astype(np.int64))
        coords = np.floor((self.points - self.lo) / self.cell_edge)
        coords = np.clip(coords, 0, self.cells - 1).astype(np.int64)
        linear = np.ravel_multi_index(coords.T, self.cells)
        # cell-major, first-coordinate-minor: within a cell, entries are
        # sorted by x1 so ball queries can binary-search a narrow slab
        # before paying for exact distances; in 1-D the cell id is itself
        # monotone in x1, so a single-key sort already gives that order
        if self.dim == 1:
            order = np.argsort(self.points[:, 0], kind="stable")
        else:
            order = np.lexsort((self.points[:, 0], linear))
        self.order = order.astype(np.int64)
        sorted_linear = linear[order]
        self.occupied, first = np.unique(sorted_linear, return_index=True)
        self.starts = np.append(first, sorted_linear.shape[0]).astype(
            np.int64)
        self._pts_by_cell = self.points[self.order]
        self._x_by_cell = np.ascontiguousarray(self._pts_by_cell[:, 0])
        self._aligned_cache = None

    @classmethod
    def for_cloud(cls, cloud, cell_edge):
        lo, hi = cloud.domain.bounding_box()
        return cls(cloud.points, lo, hi, cell_edge)

    def _cell_slice(self, linear_id):
        pos = np.searchsorted(self.occupied, linear_id)
        if pos < self.occupied.shape[0] and self.occupied[pos] == linear_id:
            return self.starts[pos], self.starts[pos + 1]
        return 0, 0

    def iter_cell_ranges(self, x, r):
        """Yield (a, b) ranges into the cell-sorted order for B_r(x).

        Each range addresses one grid cell overlapping the query ball's
        bounding box: ids are ``self.order[a:b]`` and coordinates
        ``self.points_by_cell[a:b]``, sorted by first coordinate within the
        range.  Ranges come in increasing linear cell order; callers must
        still filter by distance (``narrow_range`` cheapens that).  Query
        centers outside the bounding box are fine (ranges clip, possibly to
        nothing).
        """
        x = np.asarray(x, dtype=float)
        k_lo = np.floor((x - r - self.lo) / self.cell_edge).astype(np.int64)
        k_hi = np.floor((x + r - self.lo) / self.cell_edge).astype(np.int64)
        k_lo = np.maximum(k_lo, 0)
        k_hi = np.minimum(k_hi, self.cells - 1)
        if np.any(k_lo > k_hi):
            return
        ranges = [range(int(a), int(b) + 1) for a, b in zip(k_lo, k_hi)]
        for cell in product(*ranges):
            lin = int(np.ravel_multi_index(cell, self.cells))
            a, b = self._cell_slice(lin)
            if b > a:
                yield int(a), int(b)

    def narrow_range(self, a, b, x0, r):
        """Shrink a cell range to entries whose first coordinate allows
        membership in a radius-``r`` ball centered at first coordinate
        ``x0``.

        Entries are sorted by first coordinate within each cell, so two
        binary searches bound the candidates.  The interval carries a
        few-ulp slack: the exact squared-distance test downstream never
        loses a member to the rounding of ``x0 - r`` / ``x0 + r``.
        """
        slack = 8.0 * np.finfo(float).eps * (abs(x0) + r)
        xs = self._x_by_cell
        a2 = a + int(np.searchsorted(xs[a:b], x0 - r - slack, side="left"))
        b2 = a + int(np.searchsorted(xs[a:b], x0 + r + slack,
                                     side="right"))
        return a2, b2

    @property
    def points_by_cell(self):
        return self._pts_by_cell

    def aligned(self, values):
        """``values`` permuted into cell-sorted order, cached per array.

        Lets per-node evaluations over many query points reuse one gather
        of the node values instead of re-gathering per query; the cache is
        keyed on object identity, so mutate-and-requery must pass a fresh
        array (library code always does).
        """
        cached = self._aligned_cache
        if cached is not None and cached[0] is values:
            return cached[1]
        out = np.asarray(values, dtype=float)[self.order]
        self._aligned_cache = (values, out)
        return out

    def ball_neighbors(self, x, r):
        """Ids of points with squared distance to x at most r*r, ascending."""
        x = np.asarray(x, dtype=float)
        found = []
        rr = r * r
        for a, b in self.iter_cell_ranges(x, r):
            a, b = self.narrow_range(a, b, float(x[0]), r)
            if b <= a:
                continue
            d2 = np.sum((self._pts_by_cell[a:b] - x) ** 2, axis=1)
            hit = self.order[a:b][d2 <= rr]
            if hit.shape[0]:
                found.append(hit)
        if not found:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(found))

    def nearest(self, x):
        """(id, distance) of the nearest point; exact ties -> smallest id.

        Expanding-ring search: after all cells within Chebyshev cell-radius
        ``rho`` of the query's (virtual) cell are scanned, any unscanned
        point is at least ``rho * cell_edge`` away, which gives the stopping
        rule.
        """
        if self.points.shape[0] == 0:
            raise ValueError("index holds no points")
        x = np.asarray(x, dtype=float)
        home = np.floor((x - self.lo) / self.cell_edge).astype(np.int64)
        best_d2 = np.inf
        best_id = -1
        max_ring = int(np.max(np.maximum(home - 0, self.cells - home))) + 2
        for rho in range(max_ring + 1):
            k_lo = np.maximum(home - rho, 0)
            k_hi = np.minimum(home + rho, self.cells - 1)
            if np.all(k_lo > k_hi):
                continue
            ranges = [range(int(a), int(b) + 1) for a, b in zip(k_lo, k_hi)]
            for cell in product(*ranges):
                if rho > 0 and np.max(np.abs(np.array(cell) - home)) < rho:
                    continue  # interior cells were scanned on earlier rings
                lin = int(np.ravel_multi_index(cell, self.cells))
                a, b = self._cell_slice(lin)
                if b <= a:
                    continue
                d2 = np.sum((self._pts_by_cell[a:b] - x) ** 2, axis=1)
                ids = self.order[a:b]
                j = int(np.argmin(d2))
                m = d2[j]
                cand = int(np.min(ids[d2 == m]))
                if m < best_d2 or (m == best_d2 and cand < best_id):
                    best_d2 = m
                    best_id = cand
            if best_id >= 0 and best_d2 <= (rho * self.cell_edge) ** 2:
                break
        return best_id, math.sqrt(best_d2)

    def __repr__(self):
        return "SpatialIndex(n=%d, cell_edge=%r, cells=%s)" % (
            self.points.shape[0], self.cell_edge, self.cells.tolist())


def ball_neighbors(index, x, r):
    """Sorted ids of cloud points in the closed ball of radius r around x."""
    return index.ball_neighbors(x, r)


def transport(index, x):
    """Id of the cloud point nearest to x (exact ties -> smallest id)."""
    return index.nearest(x)[0]


def _fine_index(points, lo, hi, target_occupancy=4.0):
    n, dim = points.shape
    span = np.maximum(hi - lo, 1e-300)
    edge = float((np.prod(span) * target_occupancy / max(n, 1))
                 ** (1.0 / dim))
    edge = min(edge, float(np.max(span)))
    return SpatialIndex(points, lo, hi, max(edge, 1e-12))


def covering_radius(cloud, probe_count=1000, seed=0):
    """Monte-Carlo estimate of how far a domain point can be from the cloud.

    Draws ``probe_count`` uniform points in the domain (deterministic in
    ``seed``) and returns the max distance from a probe to its nearest
    cloud point.  This lower-bounds the true covering radius; it is the
    quantity ladder reports log against eps/2.

    The probe stream is keyed on ``(seed, tag)`` rather than the bare seed:
    a cloud sampled with the same integer seed draws box-uniform proposals
    through the identical generator path, and for a constant density the
    probes would otherwise replay the cloud's own points verbatim and
    report a radius of zero.
    """
    rng = np.random.default_rng([seed, 0x636F76])
    lo, hi = cloud.domain.bounding_box()
    probes = np.empty((0, cloud.domain.dim))
    while probes.shape[0] < probe_count:
        cand = rng.uniform(lo, hi, size=(4 * probe_count, cloud.domain.dim))
        cand = cand[cloud.domain.contains(cand)]
        probes = np.concatenate([probes, cand], axis=0)
    probes = probes[:probe_count]
    if cloud.domain.dim == 1:
        # nearest neighbor on a line is one of the two sorted brackets
        xs = np.sort(cloud.points[:, 0])
        q = probes[:, 0]
        pos = np.clip(np.searchsorted(xs, q), 1, xs.shape[0] - 1)
        d = np.minimum(np.abs(q - xs[pos - 1]), np.abs(q - xs[pos]))
        return float(np.max(d))
    idx = _fine_index(cloud.points, lo, hi)
    return max(idx.nearest(p)[1] for p in probes)


# ---------------------------------------------------------------------------
# Cloud CSV round-trip
# ---------------------------------------------------------------------------

def save_cloud_csv(cloud, path):
    """Write ``id,x1,...,xN`` rows with full 17-significant-digit floats."""
    dim = cloud.points.shape[1]
    header = "id," + ",".join("x%d" % (k + 1) for k in range(dim))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(cloud.n):
            coords = ",".join("%.17g" % c for c in cloud.points[i])
            fh.write("%d,%s\n" % (i, coords))


def load_cloud_csv(path, domain, density=None, seed=0):
    """Read a cloud written by :func:`save_cloud_csv`; exact round-trip."""
    with open(path) as fh:
        header = fh.readline().strip()
        dim = domain.dim
        expect = "id," + ",".join("x%d" % (k + 1) for k in range(dim))
        if header != expect:
            raise ValueError("unexpected cloud header %r (want %r)"
                             % (header, expect))
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            rows.append((int(parts[0]), [float(v) for v in parts[1:]]))
    rows.sort(key=lambda t: t[0])
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError("cloud ids must be 0..n-1 without gaps")
    pts = np.array([r[1] for r in rows], dtype=float)
    return DataCloud(pts, domain, density=density, seed=seed)
