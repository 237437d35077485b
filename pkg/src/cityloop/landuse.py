"""Annual land-use step: control-total transition, relocation, developer
supply under zoning caps, and location choice with market clearing.

Sub-models run in a fixed order (transition, relocation, developer,
location choice); every stochastic decision draws from a stream keyed by
(global_seed, year, model, agent), so the step is reproducible and
independent of iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from .choice import (
    capacity_placement,
    market_clearing_assignment,
    mnl_probabilities,
    utility_matrix,
)
from .errors import InvariantError
from .streams import agent_uniforms, derive_stream
from .types import DeveloperParams, Population, RunSettings, ScenarioBundle, UtilitySpec


# ---------------------------------------------------------------------------
# transition to control totals


def _clone_households(pop: Population, n_new: int, pick: np.ndarray) -> Population:
    hh = pop.households
    persons = pop.persons
    clones = hh.iloc[pick].copy()
    new_ids = np.arange(n_new, dtype=np.int64) + int(hh["household_id"].max()) + 1
    old_ids = clones["household_id"].to_numpy(copy=True)
    clones["household_id"] = new_ids
    clones["zone_id"] = 0  # unplaced until location choice
    clones["tenure_years"] = 0

    # clone the members too; fresh person ids, workplace reset
    by_hh = persons.groupby("household_id")
    member_frames = []
    next_pid = int(persons["person_id"].max()) + 1 if len(persons) else 1
    for old, new in zip(old_ids, new_ids):
        if old not in by_hh.groups:
            continue
        members = by_hh.get_group(old).copy()
        members["person_id"] = np.arange(len(members), dtype=np.int64) + next_pid
        next_pid += len(members)
        members["household_id"] = new
        members["workplace_zone"] = 0
        member_frames.append(members)
    new_persons = (
        pd.concat([persons] + member_frames, ignore_index=True) if member_frames else persons.copy()
    )
    new_hh = pd.concat([hh, clones], ignore_index=True)
    return Population(new_hh, new_persons, pop.jobs.copy())


def _remove_households(pop: Population, drop_positions: np.ndarray) -> Population:
    hh = pop.households
    dropped_ids = set(int(i) for i in hh.iloc[drop_positions]["household_id"])
    new_hh = hh.drop(hh.index[drop_positions]).reset_index(drop=True)
    keep = ~pop.persons["household_id"].isin(dropped_ids)
    return Population(new_hh, pop.persons.loc[keep].reset_index(drop=True), pop.jobs.copy())


def transition(
    population: Population, control_totals: pd.DataFrame, year: int, stream
) -> Population:
    """Grow or shrink households and jobs to the year's control totals.

    Additions resample existing records with replacement; household clones
    carry cloned members with fresh ids, and everything new starts
    unplaced (zone_id 0).  Removals sample uniformly without replacement.
    """
    if year not in control_totals.index:
        raise InvariantError(f"control totals: no targets for year {year}")
    target_hh = int(control_totals.loc[year, "households"])
    target_jobs = int(control_totals.loc[year, "jobs"])

    pop = population
    n = len(pop.households)
    if target_hh > n:
        k = target_hh - n
        pick = np.minimum((stream.uniforms(k) * n).astype(np.int64), n - 1)
        pop = _clone_households(pop, k, pick)
    elif target_hh < n:
        k = n - target_hh
        if k > n:
            raise InvariantError(f"year {year}: cannot remove {k} of {n} households")
        order = stream.permutation(n)
        pop = _remove_households(pop, np.sort(order[:k]))
    else:
        pop = pop.copy()

    jobs = pop.jobs
    m = len(jobs)
    if target_jobs > m:
        k = target_jobs - m
        pick = np.minimum((stream.uniforms(k) * m).astype(np.int64), m - 1)
        clones = jobs.iloc[pick].copy()
        clones["job_id"] = np.arange(k, dtype=np.int64) + int(jobs["job_id"].max()) + 1
        clones["zone_id"] = 0
        pop.jobs = pd.concat([jobs, clones], ignore_index=True)
    elif target_jobs < m:
        k = m - target_jobs
        order = stream.permutation(m)
        pop.jobs = jobs.drop(jobs.index[np.sort(order[:k])]).reset_index(drop=True)
    return pop


# ---------------------------------------------------------------------------
# relocation


def relocation(
    households: pd.DataFrame, annual_move_rate: float, year: int, global_seed: int
) -> Tuple[pd.DataFrame, np.ndarray]:
    """Flag placed households as movers, each independently with the
    annual rate; movers' zone_id resets to 0.  Returns (households, mover ids)."""
    if not 0.0 <= annual_move_rate <= 1.0:
        raise InvariantError("annual_move_rate must be in [0, 1]")
    hh = households.copy()
    placed = hh["zone_id"].to_numpy() != 0
    ids = hh["household_id"].to_numpy(dtype=np.int64)
    if placed.any() and annual_move_rate > 0:
        u = agent_uniforms(global_seed, year, "relocation", ids)
        movers = placed & (u < annual_move_rate)
    else:
        movers = np.zeros(len(hh), dtype=bool)
    hh.loc[movers, "zone_id"] = 0
    return hh, ids[movers]


# ---------------------------------------------------------------------------
# developer


def developer_step(
    zones: pd.DataFrame, params: DeveloperParams
) -> Tuple[pd.DataFrame, pd.Series]:
    """Add residential units where prices clear the construction threshold.

    Per qualifying zone the addition is the smallest of: units_per_build,
    the remaining zoning cap, and the growth-share bound (floor of
    max_share_growth_per_zone times current units).
    """
    zones = zones.copy()
    units = zones["residential_units"].to_numpy(dtype=np.int64)
    cap = zones["max_residential_units"].to_numpy(dtype=np.int64)
    price = zones["avg_price"].to_numpy(dtype=float)
    eligible = (price > params.price_to_build_threshold) & (units < cap)
    share_bound = np.floor(params.max_share_growth_per_zone * units).astype(np.int64)
    build = np.minimum(
        np.minimum(params.units_per_build, cap - units), share_bound
    )
    build = np.where(eligible, np.maximum(build, 0), 0)
    zones["residential_units"] = units + build
    return zones, pd.Series(build, index=zones["zone_id"].to_numpy(), name="built")


# ---------------------------------------------------------------------------
# location choice


def household_alternatives(zones: pd.DataFrame, access: Optional[pd.DataFrame]) -> pd.DataFrame:
    """Zone alternative table for the household location spec."""
    occ = zones["residential_units"].to_numpy(dtype=np.int64) - _occupied(zones)
    alts = pd.DataFrame(
        {
            "price": zones["avg_price"].to_numpy(dtype=float),
            "supply": occ,
            "log_vacant": np.log1p(np.maximum(occ, 0)),
        },
        index=pd.Index(zones["zone_id"].to_numpy(dtype=np.int64), name="zone_id"),
    )
    alts = _join_access(alts, access)
    return alts


def _occupied(zones: pd.DataFrame) -> np.ndarray:
    if "households" in zones.columns:
        return zones["households"].to_numpy(dtype=np.int64)
    raise KeyError("zones frame needs a 'households' occupancy column")


def _join_access(alts: pd.DataFrame, access: Optional[pd.DataFrame]) -> pd.DataFrame:
    if access is None:
        alts["access_jobs"] = 0.0
        alts["access_logsum"] = 0.0
    else:
        acc = access.set_index("zone_id")
        alts["access_jobs"] = acc["access_jobs"].reindex(alts.index).fillna(0.0).to_numpy()
        alts["access_logsum"] = acc["access_logsum"].reindex(alts.index).fillna(0.0).to_numpy()
    return alts


def household_location_choice(
    households: pd.DataFrame,
    zones: pd.DataFrame,
    spec: UtilitySpec,
    access: Optional[pd.DataFrame],
    year: int,
    settings: RunSettings,
):
    """Place unplaced households via market clearing over zones.

    Submarkets are zones with vacant units (supply = units - occupied);
    zone avg_price is updated to the cleared prices.  Returns
    (households', zones', MarketClearingResult or None).
    """
    hh = households.copy()
    unplaced = hh.loc[hh["zone_id"] == 0]
    zones = zones.copy()
    if len(unplaced) == 0:
        return hh, zones, None

    counts = hh.loc[hh["zone_id"] != 0].groupby("zone_id").size()
    zframe = zones.copy()
    zframe["households"] = zframe["zone_id"].map(counts).fillna(0).astype(np.int64)
    alts = household_alternatives(zframe, access)
    alts = alts.loc[alts["supply"] > 0]
    if alts["supply"].sum() < len(unplaced):
        raise InvariantError(
            f"year {year}: {len(unplaced)} unplaced households but only "
            f"{int(alts['supply'].sum())} vacant units"
        )

    choosers = pd.DataFrame(
        {
            "income": unplaced["income"].to_numpy(dtype=float),
            "hhsize": unplaced["size"].to_numpy(dtype=float),
            "autos": unplaced["autos"].to_numpy(dtype=float),
            "tenure_years": unplaced["tenure_years"].to_numpy(dtype=float),
        },
        index=pd.Index(unplaced["household_id"].to_numpy(dtype=np.int64), name="chooser_id"),
    )
    stream = derive_stream(settings.global_seed, year, "hlc", 0)
    result = market_clearing_assignment(
        choosers,
        alts,
        spec,
        stream,
        max_iters=settings.mc_max_iters,
        tol=settings.mc_tol,
        gamma=settings.mc_gamma,
    )
    hh = hh.set_index("household_id")
    hh.loc[result.placements.index, "zone_id"] = result.placements.to_numpy()
    hh = hh.reset_index()[list(households.columns)]

    zones = zones.set_index("zone_id")
    zones.loc[result.prices.index, "avg_price"] = result.prices.to_numpy()
    zones = zones.reset_index()[list(zframe.columns.drop("households"))]
    return hh, zones, result


def job_location_choice(
    jobs: pd.DataFrame,
    zones: pd.DataFrame,
    households: pd.DataFrame,
    spec: UtilitySpec,
    access: Optional[pd.DataFrame],
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Place unplaced jobs by MNL with capacity enforcement only (no price
    feedback); supply is each zone's vacant job spaces."""
    jobs = jobs.copy()
    unplaced = jobs.loc[jobs["zone_id"] == 0]
    if len(unplaced) == 0:
        return jobs

    counts = jobs.loc[jobs["zone_id"] != 0].groupby("zone_id").size()
    vacant = zones["max_job_spaces"].to_numpy(dtype=np.int64) - (
        zones["zone_id"].map(counts).fillna(0).astype(np.int64).to_numpy()
    )
    alts = pd.DataFrame(
        {
            "price": zones["avg_price"].to_numpy(dtype=float),
            "supply": vacant,
            "log_vacant_spaces": np.log1p(np.maximum(vacant, 0)),
        },
        index=pd.Index(zones["zone_id"].to_numpy(dtype=np.int64), name="zone_id"),
    )
    alts = _join_access(alts, access)
    alts = alts.loc[alts["supply"] > 0]
    if alts["supply"].sum() < len(unplaced):
        raise InvariantError(
            f"year {year}: {len(unplaced)} unplaced jobs but only "
            f"{int(alts['supply'].sum())} vacant job spaces"
        )
    choosers = pd.DataFrame(
        index=pd.Index(unplaced["job_id"].to_numpy(dtype=np.int64), name="chooser_id")
    )
    v = utility_matrix(spec, choosers, alts)
    exp_v = np.exp(v - v.max(axis=1, keepdims=True))
    stream = derive_stream(settings.global_seed, year, "elc", 0)
    placements = capacity_placement(
        exp_v,
        choosers.index.to_numpy(dtype=np.int64),
        alts.index.to_numpy(dtype=np.int64),
        alts["supply"].to_numpy(dtype=np.int64),
        stream,
    )
    jobs = jobs.set_index("job_id")
    jobs.loc[placements.index, "zone_id"] = placements.to_numpy()
    return jobs.reset_index()[["job_id", "zone_id", "sector"]]


def expected_zone_demand(
    spec: UtilitySpec, choosers: pd.DataFrame, alternatives: pd.DataFrame
) -> np.ndarray:
    """Pre-clearing expected demand per zone (sum of choice probabilities)."""
    v = utility_matrix(spec, choosers, alternatives)
    return mnl_probabilities(v).sum(axis=0)


# ---------------------------------------------------------------------------
# annual step


@dataclass
class LanduseYearResult:
    population: Population
    zones: pd.DataFrame
    summary: pd.DataFrame
    movers: int
    built: int


def landuse_year(
    bundle: ScenarioBundle, year: int, access: Optional[pd.DataFrame]
) -> LanduseYearResult:
    """Run one land-use year: transition, relocation, developer, location
    choice.  Returns new population/zones plus the per-zone summary."""
    settings = bundle.settings
    stream = derive_stream(settings.global_seed, year, "transition", 0)
    pop = transition(bundle.population, bundle.control_totals, year, stream)

    hh, mover_ids = relocation(pop.households, settings.annual_move_rate, year, settings.global_seed)
    pop = Population(hh, pop.persons, pop.jobs)

    zones, built = developer_step(bundle.zones, settings.developer)

    hh, zones, _ = household_location_choice(
        pop.households, zones, bundle.specs["hlc"], access, year, settings
    )
    jobs = job_location_choice(
        pop.jobs, zones, hh, bundle.specs["elc"], access, year, settings
    )
    pop = Population(hh, pop.persons, jobs)

    hh_counts = hh.loc[hh["zone_id"] != 0].groupby("zone_id").size()
    job_counts = jobs.loc[jobs["zone_id"] != 0].groupby("zone_id").size()
    summary = pd.DataFrame(
        {
            "year": year,
            "zone_id": zones["zone_id"].to_numpy(dtype=np.int64),
            "households": zones["zone_id"].map(hh_counts).fillna(0).astype(np.int64).to_numpy(),
            "jobs": zones["zone_id"].map(job_counts).fillna(0).astype(np.int64).to_numpy(),
            "units": zones["residential_units"].to_numpy(dtype=np.int64),
            "price": zones["avg_price"].to_numpy(dtype=float),
        }
    )
    return LanduseYearResult(
        population=pop,
        zones=zones,
        summary=summary,
        movers=len(mover_ids),
        built=int(built.sum()),
    )
