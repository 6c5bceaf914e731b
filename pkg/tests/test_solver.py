"""Dirichlet problem assembly, fixed-point solving, and the linear route."""

import json

import numpy as np
import pytest

from towcloud.calculus import parse_expression
from towcloud.geometry import (
    Ball,
    Box,
    DataCloud,
    Density,
    SpatialIndex,
    sample_cloud,
)
from towcloud.operator import GameParams, eval_L
from towcloud.solver import (
    AssemblyError,
    assemble,
    default_init,
    export_solution_csv,
    fixed_point_map,
    residual,
    solve,
    solve_linear_p2,
)

import oracles


class _Const:
    def __init__(self, c):
        self.c = float(c)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.c
        return np.full(x.shape[0], self.c)


class _Coord:
    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(x[0])
        return x[:, 0].copy()


A1_PTS = np.array([[0.05], [0.25], [0.45], [0.5], [0.55], [0.75], [0.95]])


def _a1_problem(p=4.0, eps=0.3):
    dom = Box([0.0], [1.0])
    cloud = DataCloud(A1_PTS, dom)
    params = GameParams(dim=1, p=p, eps=eps)
    return assemble(cloud, params, _Const(0.0), _Coord())


def _random_instance(rng, n=300, p=3.0, eps=0.2):
    dom = Ball([0.0, 0.0], 1.0)
    dens = Density(parse_expression("1", 2), dom, 1.0, 1.0)
    cloud = sample_cloud(dom, dens, n, seed=int(rng.integers(0, 2 ** 31)))
    params = GameParams(dim=2, p=p, eps=eps)
    return cloud, params


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def test_assemble_partitions_nodes():
    prob = _a1_problem()
    assert list(prob.boundary_ids) == [0, 1, 5, 6]
    assert list(prob.interior_ids) == [2, 3, 4]
    assert np.array_equal(prob.cards, np.diff(prob.indptr))
    # neighborhoods include self: interior node 2 at 0.45 reaches 1..5
    start, stop = prob.indptr[0], prob.indptr[1]
    assert list(prob.indices[start:stop]) == [1, 2, 3, 4, 5]


def test_assemble_boundary_values_from_g():
    prob = _a1_problem()
    assert np.array_equal(prob.g_values, A1_PTS[[0, 1, 5, 6], 0])


def test_assemble_rejects_degenerate_instances():
    dom = Box([0.0], [1.0])
    params = GameParams(dim=1, p=3.0, eps=0.3)
    # strip swallows everything
    tiny = DataCloud(np.array([[0.1], [0.9]]), dom)
    with pytest.raises(AssemblyError, match="no interior"):
        assemble(tiny, params, _Const(0.0), _Coord())
    # no boundary nodes at all
    deep = DataCloud(np.array([[0.45], [0.5], [0.55]]), dom)
    with pytest.raises(AssemblyError, match="anchor"):
        assemble(deep, GameParams(dim=1, p=3.0, eps=0.01),
                 _Const(0.0), _Coord())
    # isolated interior node
    iso = DataCloud(np.array([[0.05], [0.5], [0.95]]), dom)
    with pytest.raises(AssemblyError, match="isolated"):
        assemble(iso, GameParams(dim=1, p=3.0, eps=0.1),
                 _Const(0.0), _Coord())


def test_assemble_rejects_non_finite_data():
    class _Nan:
        def value(self, x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape[0] if x.ndim > 1 else 1)
            out[...] = np.nan
            return out if x.ndim > 1 else float("nan")

    dom = Box([0.0], [1.0])
    cloud = DataCloud(np.linspace(0.05, 0.95, 12)[:, None], dom)
    with pytest.raises(AssemblyError, match="finite"):
        assemble(cloud, GameParams(dim=1, p=3.0, eps=0.2), _Nan(), _Coord())
    with pytest.raises(AssemblyError, match="finite"):
        assemble(cloud, GameParams(dim=1, p=3.0, eps=0.2), _Const(0.0),
                 _Nan())


# ---------------------------------------------------------------------------
# The sweep map
# ---------------------------------------------------------------------------

def test_fixed_point_map_pins_boundary():
    prob = _a1_problem()
    u = np.full(7, 123.0)
    out = fixed_point_map(prob, u)
    assert np.array_equal(out[prob.boundary_ids], prob.g_values)
    assert out is not u


def test_fixed_point_map_shift_equivariant_on_interior():
    prob = _a1_problem()
    rng = np.random.default_rng(3)
    for c in (1.0, -2.5, 17.0):
        u = rng.normal(size=7)
        a = fixed_point_map(prob, u)[prob.interior_ids]
        b = fixed_point_map(prob, u + c)[prob.interior_ids]
        assert np.all(np.abs(b - (a + c)) <= 1e-12 * max(1.0, abs(c)))


def test_fixed_point_map_monotone():
    prob = _a1_problem()
    rng = np.random.default_rng(5)
    for _ in range(20):
        u = rng.normal(size=7)
        v = u + np.abs(rng.normal(size=7))
        assert np.all(fixed_point_map(prob, u) <= fixed_point_map(prob, v))


def test_default_init_extends_boundary_data():
    prob = _a1_problem()
    u0 = default_init(prob)
    assert np.array_equal(u0[prob.boundary_ids], prob.g_values)
    # 0.45/0.5 are nearest strip node 1 (0.25); 0.55 is nearest node 5
    assert u0[2] == 0.25 and u0[3] == 0.25 and u0[4] == 0.75


# ---------------------------------------------------------------------------
# solve: the frozen small instance
# ---------------------------------------------------------------------------

def test_solve_small_instance_frozen_values():
    prob = _a1_problem()
    u, report = solve(prob, tol=1e-12)
    assert report.converged
    # exact fixed point by hand algebra: b = 0.3595/0.586, a = (0.32+0.12 b)/0.76
    assert u[2] == pytest.approx(0.5179180887372014, abs=1e-11)
    assert u[3] == pytest.approx(0.5179180887372014, abs=1e-11)
    assert u[4] == pytest.approx(0.613481228668942, abs=1e-11)
    assert np.array_equal(u[prob.boundary_ids], prob.g_values)


def test_solve_agrees_with_plain_loop_oracle():
    dom = Box([0.0], [1.0])
    u, report = solve(_a1_problem(), tol=1e-12)
    ref, iters = oracles.jacobi_solve_ref(
        A1_PTS.tolist(), 0.3, 4.0, 1,
        [0.0] * 7, lambda x: x[0],
        lambda x: dom.boundary_distance(np.asarray(x)))
    assert iters < 1_000_000
    assert float(np.max(np.abs(u - np.asarray(ref)))) <= 1e-10


def test_solve_constant_boundary_data_gives_constant():
    dom = Ball([0.0, 0.0], 1.0)
    dens = Density(parse_expression("1", 2), dom, 1.0, 1.0)
    cloud = sample_cloud(dom, dens, 400, seed=9)
    prob = assemble(cloud, GameParams(dim=2, p=5.0, eps=0.3),
                    _Const(0.0), _Const(4.25))
    u, report = solve(prob, tol=1e-12)
    assert report.converged
    assert np.all(u == 4.25)


def test_solve_deterministic_bitwise():
    rng = np.random.default_rng(11)
    cloud, params = _random_instance(rng)
    prob = assemble(cloud, params, _Const(1.0), _Coord())
    u1, _ = solve(prob, tol=1e-10)
    u2, _ = solve(prob, tol=1e-10)
    assert np.array_equal(u1, u2)


def test_solve_report_shape_and_stopping_rule():
    prob = _a1_problem()
    u, report = solve(prob, tol=1e-9)
    assert report.converged
    assert report.final_residual <= 1e-9
    assert report.sup_change_last_sweep <= 1e-9 * 0.3 ** 2
    assert report.tolerance == 1e-9
    payload = json.loads(report.to_json())
    assert set(payload) == {"converged", "final_residual", "iterations",
                            "sup_change_last_sweep", "tolerance",
                            "wall_time"}
    assert "\n" not in report.to_json()


def test_solve_hits_max_iter_without_converging():
    prob = _a1_problem()
    u, report = solve(prob, tol=1e-12, max_iter=2)
    assert not report.converged
    assert report.iterations == 2


def test_solve_residual_matches_pointwise_operator():
    rng = np.random.default_rng(13)
    cloud, params = _random_instance(rng, n=250, p=4.0, eps=0.25)
    prob = assemble(cloud, params, _Const(0.5), _Coord())
    u, _ = solve(prob, tol=1e-10)
    r = residual(prob, u)
    lo, hi = cloud.domain.bounding_box()
    idx = SpatialIndex(cloud.points, lo, hi, params.eps)
    worst = max(abs(eval_L(u, int(i), params, idx).value - 0.5)
                for i in prob.interior_ids)
    assert r == pytest.approx(worst, abs=1e-12)


def test_solution_comparison_monotone_in_data():
    # f1 <= f2 with g1 >= g2 implies u1 >= u2 nodewise on converged pairs
    rng = np.random.default_rng(17)
    for trial in range(5):
        cloud, params = _random_instance(rng, n=220, p=3.5, eps=0.3)
        p1 = assemble(cloud, params, _Const(-0.5), _Const(2.0))
        p2 = assemble(cloud, params, _Const(0.75), _Const(1.0))
        u1, r1 = solve(p1, tol=1e-11)
        u2, r2 = solve(p2, tol=1e-11)
        assert r1.converged and r2.converged
        assert np.all(u1 >= u2 - 1e-9)


def test_solve_initialization_independent_p_gt_2():
    # uniqueness for p > 2 on a fixed cloud is not asserted, only reported:
    # three distinct starts should land on (numerically) the same function
    rng = np.random.default_rng(19)
    cloud, params = _random_instance(rng, n=200, p=6.0, eps=0.3)
    prob = assemble(cloud, params, _Const(0.3), _Coord())
    sols = []
    for init in (None, np.zeros(cloud.n), 5.0 * np.ones(cloud.n)):
        u, rep = solve(prob, tol=1e-11, init=init)
        assert rep.converged
        sols.append(u)
    spread = max(float(np.max(np.abs(a - b)))
                 for a in sols for b in sols)
    print("p>2 multi-init sup spread: %.3e" % spread)


# ---------------------------------------------------------------------------
# Linear route (p = 2)
# ---------------------------------------------------------------------------

def test_linear_p2_matches_iterative():
    rng = np.random.default_rng(23)
    cloud, params = _random_instance(rng, n=500, p=2.0, eps=0.25)
    prob = assemble(cloud, params, _Const(1.0), _Coord())
    u_direct = solve_linear_p2(prob)
    u_iter, rep = solve(prob, tol=1e-11)
    assert rep.converged
    assert float(np.max(np.abs(u_direct - u_iter))) <= 1e-8


def test_linear_p2_rejects_ungrounded_component():
    # interior cluster around 0.5 never touches the boundary strip
    dom = Box([0.0], [1.0])
    pts = np.array([[0.05], [0.48], [0.5], [0.52], [0.95]])
    cloud = DataCloud(pts, dom)
    prob = assemble(cloud, GameParams(dim=1, p=2.0, eps=0.1),
                    _Const(0.0), _Coord())
    with pytest.raises(ValueError, match="component"):
        solve_linear_p2(prob)


def test_linear_p2_requires_p_exactly_2():
    prob = _a1_problem(p=4.0)
    with pytest.raises(ValueError):
        solve_linear_p2(prob)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def test_export_solution_csv_schema(tmp_path):
    prob = _a1_problem()
    u, _ = solve(prob, tol=1e-10)
    path = tmp_path / "solution.csv"
    export_solution_csv(prob, u, str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "node_id,x1,u,is_boundary"
    assert len(lines) == 8
    row = lines[3].split(",")  # node 2
    assert int(row[0]) == 2
    assert float(row[1]) == 0.45
    assert float(row[2]) == u[2]
    assert row[3] == "0"
    assert lines[1].split(",")[3] == "1"  # node 0 is boundary
