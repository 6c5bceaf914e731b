"""Assemble and solve one Dirichlet problem, then sanity-check the answer.

A forced problem on the unit square: boundary data g, right-hand side f,
p = 3.5.  The script prints the solve report, verifies the residual, checks
the maximum-principle bound by hand, and finishes with the p = 2 case where
an independent sparse direct solve is available for comparison.
"""

import numpy as np

from towcloud import (
    Box,
    Density,
    GameParams,
    assemble,
    parse_expression,
    residual,
    sample_cloud,
    solve,
    solve_linear_p2,
)

domain = Box([0.0, 0.0], [1.0, 1.0])
density = Density(parse_expression("1", 2), domain, 1.0, 1.0)
cloud = sample_cloud(domain, density, 3000, seed=21)

g = parse_expression("x1^2 - 0.5*x2", 2)
f = parse_expression("2*sin(3*x1)*cos(2*x2)", 2)
params = GameParams(dim=2, p=3.5, eps=0.18)

problem = assemble(cloud, params, f, g)
print("assembled: %d nodes, %d boundary, %d interior"
      % (cloud.n, problem.boundary_ids.size, problem.interior_ids.size))

u, report = solve(problem, tol=1e-10)
print("solved in %d sweeps, residual %.2e, converged=%s"
      % (report.iterations, report.final_residual, report.converged))
print("residual recomputed independently: %.2e" % residual(problem, u))

gb = g.value(cloud.points[problem.boundary_ids])
f_inf = float(np.max(np.abs(f.value(cloud.points))))
print("value range [%.3f, %.3f] vs boundary range [%.3f, %.3f] "
      "and forcing size %.3f"
      % (u.min(), u.max(), gb.min(), gb.max(), f_inf))

# p = 2: the fixed point solves a linear system, so a sparse LU gives an
# independent answer to compare against
params2 = GameParams(dim=2, p=2.0, eps=0.18)
problem2 = assemble(cloud, params2, f, g)
u_iter, _ = solve(problem2, tol=1e-11)
u_direct = solve_linear_p2(problem2)
print("p=2 cross-check: sup |iterative - direct| = %.2e"
      % np.max(np.abs(u_iter - u_direct)))
