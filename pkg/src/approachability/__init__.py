"""Approachability of convex sets in games with partial monitoring, via optimal transport
on the lifted game of outcome distributions."""

from importlib.resources import files

from .exceptions import (
    ApproachabilityError,
    ConfigError,
    InfeasibleError,
    InfeasibleFlagError,
    InsufficientExplorationError,
    InvalidArgumentError,
    InvalidWitnessError,
    NoNormalError,
)
from .game import Flag, Game, flag_of, flag_preimage_vertices, lipschitz_constant, mixed_payoff
from .geometry import Polytope, TargetSet, distance_and_projection, proximal_normal
from .transport import DiscreteMeasure, displacement_interpolate, project_measure, pushforward, w1, w2, w2_distance
from .full import b_set_response, blackwell_step, convex_approachable_full, exclusion_strategy
from .partial import BlockConfig, BlockStrategy, compatible_payoffs, convex_approachable_partial, flag_estimator
from .informative import (
    InformativeStrategy,
    MeasureTarget,
    ProductGrid,
    rho_image,
    secondary_point_probe,
    smooth,
    theorem3_check,
    tilde_b_response,
)
from .displacement import DisplacementTarget, hat_b_response, hat_update, is_convex_game, theorem5_check
from .harness import RunConfig, Trace, check, fit_rate, run

__version__ = "0.1.0"


def example_game(name: str = "example1") -> Game:
    """Bundled games: ``example1`` (two actions, three opponent actions, two signals) and ``xor``."""
    from .io import load_game

    return load_game(files(__package__) / "data" / f"{name}.json")
