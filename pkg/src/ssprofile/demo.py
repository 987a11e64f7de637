"""Bundled parameter sets and shrinker candidates used by the CLI and the tests."""

from __future__ import annotations

import math

from .core import BoundaryData, PhysicalParams, build_grid
from .shrinker import candidate_grid, synthetic_candidate

# Global expander run. The bootstrap chain only closes for very small data, so
# these values come from a lattice search maximizing the chain slack.
EXPANDER_PARAMS = PhysicalParams.degenerate(d=3, alpha=0.2)
EXPANDER_BOUNDARY = BoundaryData(a_slope=1e-20, delta=1e-10, p_delta=1e-6, theta0=1e-26,
                                 eps_norm=0.6)
EXPANDER_GRID = {"inner": 256, "outer": 8192, "grading": 1.03,
                 "r_max": 20.0 / math.sqrt(1e-6), "outer_length": 1.0 / math.sqrt(1e-6)}

# Moderate data where the Picard iteration needs several steps.
CONTRACTION_PARAMS = PhysicalParams.degenerate(d=3, alpha=0.5)
CONTRACTION_BOUNDARY = BoundaryData(a_slope=1e-3, delta=1e-2, p_delta=1e-2, theta0=5e-4,
                                    eps_norm=0.375)

# alpha = 1 with the forced initial temperature
LINEAR_PARAMS = PhysicalParams(d=3, alpha=1.0, c_v=1.0, kappa=1.0, gas_r=1.0, mu0=1.0,
                               lambda0=0.0)
LINEAR_BOUNDARY = BoundaryData(a_slope=1e-3, delta=1e-2, p_delta=1e-2, theta0=2e-3,
                               eps_norm=0.5)


def expander_grid(spec=EXPANDER_GRID, boundary=EXPANDER_BOUNDARY):
    return build_grid(boundary.delta, spec["r_max"], spec["inner"], spec["outer"],
                      spec["grading"], spec.get("outer_length"))


# ---------------------------------------------------------------------------
# shrinker candidates
# ---------------------------------------------------------------------------

SHRINKER_PARAMS = PhysicalParams.degenerate(d=3, alpha=0.5, c_v=0.5)

# (params, candidate keyword arguments)
ZERO_CANDIDATE = (SHRINKER_PARAMS, dict(p_inf=1e-6, cav_exponent=0.0, eps=1.0,
                                        theta_a=0.0, u_a=0.0))

VALID_CANDIDATES = [
    (SHRINKER_PARAMS, dict(p_inf=1e-6, cav_exponent=2.0, eps=1.0, theta_a=1e-4, u_a=1e-4)),
    (SHRINKER_PARAMS, dict(p_inf=4e-7, cav_exponent=1.0, eps=0.5, theta_a=5e-4, u_a=5e-4)),
    (SHRINKER_PARAMS, dict(p_inf=1e-6, cav_exponent=3.0, eps=2.0, theta_a=8e-4, u_a=-3e-4)),
    (SHRINKER_PARAMS, dict(p_inf=1e-7, cav_exponent=0.5, eps=1.0, theta_a=1e-5, u_a=9e-4)),
    (PhysicalParams.degenerate(d=4, alpha=0.3, c_v=0.2),
     dict(p_inf=1e-5, cav_exponent=2.0, eps=1.0, theta_a=2e-4, u_a=2e-4)),
    (PhysicalParams.degenerate(d=5, alpha=0.2, c_v=0.5, kappa=2.0),
     dict(p_inf=1e-4, cav_exponent=1.5, eps=1.5, theta_a=5e-4, u_a=1e-4)),
]

# (params, candidate keyword arguments, name of the supremum expected to fail)
VIOLATING_CANDIDATES = [
    (SHRINKER_PARAMS, dict(p_inf=1e-6, cav_exponent=2.0, eps=1.0, theta_a=1e-2, u_a=1e-4),
     "<r>^2 Theta"),
    (SHRINKER_PARAMS, dict(p_inf=1e-6, cav_exponent=2.0, eps=1.0, theta_a=1e-4, u_a=0.1),
     "|U/(r Theta)|"),
    (SHRINKER_PARAMS, dict(p_inf=1e-2, cav_exponent=2.0, eps=1.0, theta_a=1e-4, u_a=1e-4),
     "P^(1-alpha)"),
    (SHRINKER_PARAMS, dict(p_inf=1e-6, cav_exponent=2.0, eps=0.01, theta_a=1e-4, u_a=1e-4),
     "|U'/(r Theta')| on r>eps"),
    (SHRINKER_PARAMS, dict(p_inf=1e-6, cav_exponent=2.0, eps=100.0, theta_a=1e-4, u_a=1e-4,
                           p_scale=1.0),
     "exp(sqrt(disc))<=2 on (0,eps)"),
]


def make_candidate(kwargs, nodes=2048):
    eps = kwargs["eps"]
    inner = nodes // 4
    grid = candidate_grid(eps, inner=inner, outer=nodes - inner + 1)
    return synthetic_candidate(grid=grid, **kwargs)


def zero_candidate(nodes=2048):
    params, kw = ZERO_CANDIDATE
    return params, make_candidate(kw, nodes), kw["eps"]
