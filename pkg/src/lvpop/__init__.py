"""Simulation and analysis of Lotka-Volterra type population protocols."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .graphs import Graph  # noqa: E402
from .protocol import (  # noqa: E402
    BUILTINS, ProtocolSpec, Rule, ValidatedProtocol, builtin, is_absorbing, is_irreducible,
    load_protocol, protocol_from_dict, protocol_to_dict, resolve_protocol, validate,
)
from .states import AggregateState, GraphState, StarState  # noqa: E402
from .rng import make_rng, seed_for_trial  # noqa: E402
from .engine import (  # noqa: E402
    Recorder, RunOutcome, run_star, run_to_absorption, step_aggregate, step_effective,
    step_graph, step_star,
)
from .potential import (  # noqa: E402
    PotentialVector, compute_b, expected_delta_U, nett_matrix, potential_U,
    star_product_potential,
)
from .continuous import (  # noqa: E402
    Orbit, d_infty, d_U, estimate_period, linear_approx_rps, rhs, rk4_integrate,
)
