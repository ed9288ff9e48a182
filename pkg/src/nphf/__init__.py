"""Action-space-conditioned heuristic functions for n-puzzle variants."""

__version__ = "0.1.0"

from .domains import DomainSpec, count_free_slots, generate_random, make_fixed, prune_irreversible
from .errors import NPuzzleError
from .puzzle import (
    Direction,
    PuzzleDomain,
    PuzzleState,
    apply_action,
    available_actions,
    encode,
    goal_state,
    is_goal,
    random_walk,
)

__all__ = [
    "Direction",
    "DomainSpec",
    "NPuzzleError",
    "PuzzleDomain",
    "PuzzleState",
    "apply_action",
    "available_actions",
    "count_free_slots",
    "encode",
    "generate_random",
    "goal_state",
    "is_goal",
    "make_fixed",
    "prune_irreversible",
    "random_walk",
    "__version__",
]
