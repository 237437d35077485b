"""Exception types shared across the pipeline."""


class ScenarioError(Exception):
    """Base class for scenario input and validation failures."""


class SchemaError(ScenarioError):
    """A CSV, spec or config file violates its declared schema."""


class InvariantError(ScenarioError):
    """Loaded or simulated data violates a domain invariant."""


class EmptyChoiceSetError(ValueError):
    """A constrained choice set has no available alternative left."""


class UnreachableODError(RuntimeError):
    """A demanded origin-destination pair is not connected."""

    def __init__(self, origin_zone, destination_zone):
        self.origin_zone = origin_zone
        self.destination_zone = destination_zone
        super().__init__(
            f"no path from zone {origin_zone} to zone {destination_zone}"
        )


class StageFailure(RuntimeError):
    """A pipeline stage aborted; partial outputs stay on disk."""

    def __init__(self, stage, year, cause):
        self.stage = stage
        self.year = year
        self.cause = cause
        super().__init__(f"stage '{stage}' failed in year {year}: {cause}")
