"""cityloop: integrated land use, travel demand and traffic assignment
with congested travel-time feedback between simulated years."""

from .errors import (
    EmptyChoiceSetError,
    InvariantError,
    ScenarioError,
    SchemaError,
    StageFailure,
    UnreachableODError,
)
from .scenario_io import load_scenario, save_scenario
from .streams import RandomStream, agent_uniforms, derive_stream
from .types import (
    Network,
    Population,
    RunSettings,
    ScenarioBundle,
    SkimSet,
    TripTable,
    UtilitySpec,
)

__version__ = "0.1.0"

__all__ = [
    "EmptyChoiceSetError",
    "InvariantError",
    "Network",
    "Population",
    "RandomStream",
    "RunSettings",
    "ScenarioBundle",
    "ScenarioError",
    "SchemaError",
    "SkimSet",
    "StageFailure",
    "TripTable",
    "UnreachableODError",
    "UtilitySpec",
    "agent_uniforms",
    "derive_stream",
    "load_scenario",
    "save_scenario",
]
