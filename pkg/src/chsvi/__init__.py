"""Anytime certified planning for cooperative multi-agent control.

Transforms a partial-history-sharing model into the coordinator's staged
POMDP and runs heuristic search value iteration on prescription-valued
actions, maintaining alpha-vector lower bounds and alpha-constraint upper
bounds until the gap at the initial belief closes.
"""

from .envs import (DecTigerParams, MultiCastParams, gen_dectiger,
                   gen_multicast, relax_model)
from .model import (DecModel, InvalidModelError, Prescription, StagedBelief,
                    StagedModel, build_staged, validate_model)
from .modelio import ModelParseError, load_model, save_model

__all__ = [
    "DecModel", "DecTigerParams", "InvalidModelError", "ModelParseError",
    "MultiCastParams", "Prescription", "StagedBelief", "StagedModel",
    "build_staged", "gen_dectiger", "gen_multicast", "load_model",
    "relax_model", "save_model", "validate_model",
]

__version__ = "0.1.0"
