"""Sample a weighted cloud and poke at its neighborhood structure.

Draws points from a tilted density on the unit square, builds the bucket
index, and reports the quantities the rest of the library leans on: ball
neighborhood sizes, the boundary strip, and the covering radius.
"""

import numpy as np

from towcloud import (
    Box,
    Density,
    SpatialIndex,
    ball_neighbors,
    boundary_strip,
    covering_radius,
    parse_expression,
    sample_cloud,
    transport,
)

domain = Box([0.0, 0.0], [1.0, 1.0])
# density proportional to 1 + x1: more points near the right edge
density = Density(parse_expression("1 + x1", 2), domain, 1.0, 2.0)

n = 4000
eps = 0.12
cloud = sample_cloud(domain, density, n, seed=11)
print("sampled %d points, dim %d" % (cloud.n, cloud.points.shape[1]))
print("mean x1 = %.3f (tilted density pulls it above 0.5)"
      % cloud.points[:, 0].mean())

lo, hi = domain.bounding_box()
index = SpatialIndex(cloud.points, lo, hi, eps)
sizes = np.array([ball_neighbors(index, cloud.points[i], eps).size
                  for i in range(0, n, 40)])
print("eps-ball cardinality over a node subsample: "
      "min %d, median %d, max %d"
      % (sizes.min(), int(np.median(sizes)), sizes.max()))

strip = boundary_strip(cloud, eps)
print("boundary strip at depth eps: %d of %d nodes" % (strip.size, n))

r_n = covering_radius(cloud, seed=1)
print("covering radius estimate: %.4f (eps/r ratio %.1f)"
      % (r_n, eps / r_n))

# the transport map sends an arbitrary domain point to its nearest node
x = np.array([0.5, 0.5])
j = transport(index, x)
print("transport of %s -> node %d at %s, distance %.4f"
      % (x, j, np.round(cloud.points[j], 4),
         np.linalg.norm(cloud.points[j] - x)))
