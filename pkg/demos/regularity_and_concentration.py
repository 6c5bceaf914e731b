"""Diagnostics: Holder quotients, boundary gaps, and ball-count tails.

Three loosely related health checks on one solved problem.  The Holder
diagnostic estimates sup |u(x)-u(y)| / (|x-y|^gamma + eps^gamma) over node
pairs — solutions should keep it bounded as eps shrinks.  The boundary gap
measures how far strip values drift from the boundary datum at the nearest
boundary point.  The concentration check replays cloud sampling many times
and compares the observed tail of an eps-ball count against its
exponential bound.
"""

import numpy as np

from towcloud import (
    Ball,
    Density,
    GameParams,
    assemble,
    boundary_gap,
    concentration_check,
    holder_diagnostic,
    parse_expression,
    sample_cloud,
    solve,
)

domain = Ball([0.0, 0.0], 1.0)
density = Density(parse_expression("1", 2), domain, 1.0, 1.0)
g = parse_expression("x1 - 0.3*x2^2", 2)
f = parse_expression("1", 2)

print("Holder quotient of solutions as the graph refines:")
for n, eps in ((1000, 0.3), (4000, 0.2), (16000, 0.13)):
    cloud = sample_cloud(domain, density, n, seed=5)
    problem = assemble(cloud, GameParams(dim=2, p=4.0, eps=eps), f, g)
    u, _ = solve(problem, tol=1e-9)
    c_holder = holder_diagnostic(u, cloud, eps, gamma=0.5, max_pairs=50_000,
                                 seed=1)
    gap = boundary_gap(u, g, cloud, eps)
    print("  n=%6d eps=%.2f: C_0.5 = %.3f, boundary gap %.4f over %d "
          "strip nodes" % (n, eps, c_holder, gap.gap, gap.count))

print("ball-count concentration (n=5000 points, 100 resamples):")
for lam in (0.05, 0.1, 0.2):
    rate, bound = concentration_check(domain, density, n=5000,
                                      seed_count=100, eps=0.25, lam=lam)
    print("  lam=%.2f: exceedance rate %.3f vs bound %.3g"
          % (lam, rate, min(bound, 1.0)))
