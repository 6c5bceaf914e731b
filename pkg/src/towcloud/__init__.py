"""Tug-of-war operators on random data clouds.

The package samples point clouds from a density on a bounded domain, builds
the averaging/extremal operator of a tug-of-war game with noise on the
cloud's epsilon-graph, solves the associated Dirichlet problem by fixed-point
iteration, and measures consistency and convergence against weighted
p-Laplacian targets along seeded experiment ladders.

Modules
-------
geometry     domains, densities, cloud sampling, fixed-radius search
calculus     expression fields, exact derivatives, continuum targets
operator     pointwise operator and Pucci-type extremal evaluations
solver       Dirichlet problem assembly and fixed-point / linear solves
experiments  schedules, consistency and convergence ladders, diagnostics
config       TOML run configuration with canonical serialization
svgchart     dependency-free SVG charts for ladder reports
cli          the ``towcloud`` command-line entry point
"""

from .calculus import (
    ExpressionError,
    SmoothField,
    parse_expression,
    kappa2,
    KAPPA_INF,
    kappa,
    weighted_laplacian,
    infinity_laplacian,
    p_target,
    manufactured_f,
)
from .geometry import (
    Ball,
    Box,
    Annulus,
    make_domain,
    Density,
    DataCloud,
    sample_cloud,
    boundary_strip,
    SpatialIndex,
    ball_neighbors,
    transport,
    covering_radius,
    save_cloud_csv,
    load_cloud_csv,
)
from .operator import (
    alpha_beta,
    GameParams,
    PucciParams,
    eval_L,
    eval_L2,
    eval_Linf,
    eval_components,
    eval_Lplus,
    eval_Lminus,
)
from .solver import (
    AssemblyError,
    DirichletProblem,
    SolveReport,
    assemble,
    solve,
    solve_linear_p2,
    residual,
    export_solution_csv,
)
from .experiments import (
    Schedule,
    make_schedule,
    LadderReport,
    consistency_experiment,
    convergence_experiment,
    holder_diagnostic,
    boundary_gap,
    concentration_check,
)
from .config import RunConfig, ConfigError, parse_config, load_config
from .svgchart import ladder_chart, index_chart, write_svg

__version__ = "0.1.0"

__all__ = [
    "ExpressionError", "SmoothField", "parse_expression", "kappa2",
    "KAPPA_INF", "kappa", "weighted_laplacian", "infinity_laplacian",
    "p_target", "manufactured_f",
    "Ball", "Box", "Annulus", "make_domain", "Density", "DataCloud",
    "sample_cloud", "boundary_strip", "SpatialIndex", "ball_neighbors",
    "transport", "covering_radius", "save_cloud_csv", "load_cloud_csv",
    "alpha_beta", "GameParams", "PucciParams", "eval_L", "eval_L2",
    "eval_Linf", "eval_components", "eval_Lplus", "eval_Lminus",
    "AssemblyError", "DirichletProblem", "SolveReport", "assemble",
    "solve", "solve_linear_p2", "residual", "export_solution_csv",
    "Schedule", "make_schedule", "LadderReport", "consistency_experiment",
    "convergence_experiment", "holder_diagnostic", "boundary_gap",
    "concentration_check",
    "RunConfig", "ConfigError", "parse_config", "load_config",
    "ladder_chart", "index_chart", "write_svg",
    "__version__",
]
