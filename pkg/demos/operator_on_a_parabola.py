"""Evaluate the cloud operator on a function with known curvature.

On u(x) = |x|^2 the averaging part should see the Laplacian (2N after
rescaling) and the min/max bracket should see the second derivative along
the gradient (2).  This script prints the three operator layers at interior
nodes of a dense 2-D cloud next to those continuum numbers, then shows the
extremal pair bracketing the operator.
"""

import numpy as np

from towcloud import (
    Ball,
    Density,
    GameParams,
    PucciParams,
    SpatialIndex,
    eval_components,
    eval_L,
    eval_Lminus,
    eval_Lplus,
    kappa2,
    KAPPA_INF,
    parse_expression,
    sample_cloud,
)

dim, p, eps = 2, 3.0, 0.25
domain = Ball([0.0, 0.0], 1.0)
density = Density(parse_expression("1", dim), domain, 1.0, 1.0)
cloud = sample_cloud(domain, density, 20_000, seed=3)
u = np.sum(cloud.points ** 2, axis=1)

lo, hi = domain.bounding_box()
index = SpatialIndex(cloud.points, lo, hi, eps)
params = GameParams(dim=dim, p=p, eps=eps)

# nodes deep enough that the eps-ball sees no boundary truncation
deep = np.nonzero(domain.boundary_distance(cloud.points) > eps)[0][:5]

print("u = |x|^2, p = %g, eps = %g, n = %d" % (p, eps, cloud.n))
print("continuum values: avg part -> kappa2 * 2N = %.4f,"
      " bracket part -> kappa_inf * 2 = %.4f"
      % (kappa2(dim) * 2 * dim, KAPPA_INF * 2.0))
print("%6s %10s %10s %10s %6s" % ("node", "L2", "Linf", "L", "card"))
for node in deep:
    lval, l2, linf, card = eval_components(u, int(node), params, index)
    print("%6d %10.4f %10.4f %10.4f %6d" % (node, l2, linf, lval, card))

pucci = PucciParams(lam=1.5, tau=2.0)
node = int(deep[0])
lp = eval_Lplus(u, node, params, pucci, index)
lm = eval_Lminus(u, node, params, pucci, index)
lv = eval_L(u, node, params, index).value
print("extremal bracket at node %d: %.4f <= %.4f <= %.4f (fallback: %s)"
      % (node, lm.value, lv, lp.value, lp.fallback or lm.fallback))
