"""Watch the operator close in on its continuum target along a ladder.

A theoretical (n, eps) schedule on the unit interval, five seeds per rung,
test function with curvature, p = 3.  The operator evaluated on the test
function at interior probes should approach kappa(N, p) * [weighted
Laplacian + (p - 2) * infinity Laplacian]; the script prints the median
worst-probe error per rung and writes the rows, the quartile summary, and
an SVG chart next to this file.

The theoretical schedule grows n like eps^-(3N+5+(N+2)a), fast enough for
the min/max bracket to settle; the cheaper practical schedule
(n ~ eps^-(N+2) log(1/eps)) is meant for solution-convergence ladders,
where the solve — not the pointwise bracket — is the expensive part, and
its sampling noise would dominate a consistency plot.
"""

import os

import numpy as np

from towcloud import (
    Box,
    Density,
    GameParams,
    consistency_experiment,
    ladder_chart,
    make_schedule,
    parse_expression,
    write_svg,
)

domain = Box([0.0], [1.0])
density = Density(parse_expression("1", 1), domain, 1.0, 1.0)
test_u = parse_expression("x1 + 0.2*x1^2", 1)

schedule = make_schedule(1, "theoretical", 0.35, 0.75, 3, a=0.1)
print("schedule: n = %s, eps = %s"
      % (list(schedule.n), [round(e, 4) for e in schedule.eps]))

params = GameParams(dim=1, p=3.0, eps=schedule.eps[0])
report = consistency_experiment(domain, density, test_u, params, schedule,
                                seeds=[1, 2, 3, 4, 5], probes=100)

for level in range(schedule.levels):
    errs = report.values(level, "err_L")
    print("level %d: n=%7d eps=%.4f median err_L %.4e"
          % (level, schedule.n[level], schedule.eps[level],
             float(np.median(errs))))
for flag in report.flags:
    print("flag:", flag)

out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")
os.makedirs(out, exist_ok=True)
report.write_rows_csv(os.path.join(out, "consistency_rows.csv"))
report.write_aggregate_csv(os.path.join(out, "consistency_agg.csv"))
write_svg(os.path.join(out, "consistency.svg"),
          ladder_chart(report, ["err_L", "err_L2", "err_Linf"],
                       title="operator vs target"))
print("wrote out/consistency_rows.csv, out/consistency_agg.csv, "
      "out/consistency.svg")
