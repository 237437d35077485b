"""Daily travel demand: long-term choices, coordinated daily activity
patterns, tour- and trip-level models, ending in a vehicle trip table.

Model steps run sequentially (each consumes the previous step's outputs);
within a step, per-agent draws come from streams keyed by the agent id, so
results do not depend on processing order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional

import numpy as np
import pandas as pd

from .choice import (
    mnl_probabilities,
    monte_carlo_choice,
    sample_alternatives,
    systematic_utility,
    utility_matrix,
)
from .errors import InvariantError, SchemaError
from .streams import agent_uniforms, derive_stream
from .types import RunSettings, SkimSet, TripTable, TRIP_MODES, period_of_hour

PATTERNS = ("M", "N", "H")

#: trip legs must use a mode permitted by the tour's mode
TOUR_TRIP_MODES: Dict[str, tuple] = {
    "drive_alone": ("drive_alone",),
    "shared": ("shared", "walk"),
    "transit": ("transit", "walk"),
    "walk": ("walk",),
}

TOUR_COLUMNS = [
    "tour_id",
    "person_id",
    "household_id",
    "purpose",
    "origin_zone",
    "destination_zone",
    "mode",
    "depart_hour",
    "return_hour",
]
TRIP_COLUMNS = ["trip_id", "tour_id", "person_id", "origin", "destination", "hour", "mode"]


# ---------------------------------------------------------------------------
# long-term models


def workplace_choice(
    persons: pd.DataFrame,
    households: pd.DataFrame,
    zone_jobs: pd.Series,
    spec,
    skims: SkimSet,
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Assign a workplace zone to every worker who lacks one.

    MNL over a sampled zone set; utilities combine the AM drive time from
    home and a log-size employment term (plus whatever else the spec binds).
    """
    persons = persons.copy()
    hh_zone = households.set_index("household_id")["zone_id"]
    hh_income = households.set_index("household_id")["income"]
    todo = persons.loc[(persons["is_worker"] == 1) & (persons["workplace_zone"] == 0)]
    if len(todo) == 0:
        return persons

    zone_ids = skims.zone_ids
    jobs = zone_jobs.reindex(zone_ids).fillna(0).to_numpy(dtype=float)
    am_auto = skims.matrix("auto", "AM")
    log1p_jobs = np.log1p(jobs)

    chosen = {}
    for row in todo.itertuples(index=False):
        home = int(hh_zone.get(row.household_id, 0))
        if home == 0:
            continue  # members of unplaced households make no long-term choice
        universe = pd.DataFrame(
            {
                "am_time": am_auto[skims.zone_index(home)],
                "log1p_jobs": log1p_jobs,
            },
            index=pd.Index(zone_ids, name="zone_id"),
        )
        stream = derive_stream(settings.global_seed, year, "workplace", int(row.person_id))
        cs = sample_alternatives(
            universe, settings.workplace_sample_size, stream, chooser_id=int(row.person_id)
        )
        chooser = {"income": float(hh_income.get(row.household_id, 0.0)), "age": float(row.age)}
        v = systematic_utility(spec, chooser, cs)
        p = mnl_probabilities(v, cs.availability)
        j = monte_carlo_choice(p, stream.uniform())
        chosen[int(row.person_id)] = int(cs.alt_ids[j])

    if chosen:
        picked = pd.Series(chosen)
        persons = persons.set_index("person_id")
        persons.loc[picked.index, "workplace_zone"] = picked.to_numpy()
        persons = persons.reset_index()[
            ["person_id", "household_id", "age", "is_worker", "is_student", "workplace_zone"]
        ]
    return persons


def auto_ownership(
    households: pd.DataFrame,
    access: Optional[pd.DataFrame],
    spec,
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Draw 0/1/2 autos per household from the ownership spec."""
    hh = households.copy()
    if len(hh) == 0:
        return hh
    choosers = pd.DataFrame(
        {
            "income": hh["income"].to_numpy(dtype=float),
            "hhsize": hh["size"].to_numpy(dtype=float),
        }
    )
    if access is not None:
        acc = access.set_index("zone_id")
        choosers["access_jobs"] = (
            acc["access_jobs"].reindex(hh["zone_id"]).fillna(0.0).to_numpy()
        )
        choosers["access_logsum"] = (
            acc["access_logsum"].reindex(hh["zone_id"]).fillna(0.0).to_numpy()
        )
    else:
        choosers["access_jobs"] = 0.0
        choosers["access_logsum"] = 0.0
    alts = pd.DataFrame(
        {"autos": [0.0, 1.0, 2.0], "d1": [0.0, 1.0, 0.0], "d2": [0.0, 0.0, 1.0]},
        index=pd.Index([0, 1, 2], name="autos_choice"),
    )
    v = utility_matrix(spec, choosers, alts)
    p = mnl_probabilities(v)
    u = agent_uniforms(
        settings.global_seed, year, "auto_ownership", hh["household_id"].to_numpy(dtype=np.int64)
    )
    hh["autos"] = monte_carlo_choice(p, u).astype(np.int64)
    return hh


# ---------------------------------------------------------------------------
# coordinated daily activity patterns


@lru_cache(maxsize=16)
def _combo_codes(n: int) -> np.ndarray:
    """All 3^n pattern combinations, lexicographic, codes 0=M 1=N 2=H."""
    grids = np.meshgrid(*([np.arange(3)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int8)


def cdap_combination_utilities(utilities: np.ndarray, joint_coeff: float):
    """Utilities of every pattern combination for one household group.

    Combination utility is the sum of member pattern utilities plus
    joint_coeff times the number of member pairs that both choose N.
    """
    n = utilities.shape[0]
    codes = _combo_codes(n)
    member = np.arange(n)
    total = utilities[member[None, :], codes].sum(axis=1)
    n_joint = (codes == 1).sum(axis=1).astype(float)
    total = total + joint_coeff * n_joint * (n_joint - 1) / 2.0
    return codes, total


def cdap_household(
    utilities: np.ndarray,
    m_eligible: np.ndarray,
    joint_coeff: float,
    stream,
    max_group: int = 5,
):
    """Pick one pattern per member by MNL over the full enumeration.

    ``utilities`` is (members, 3) in (M, N, H) order; members whose
    ``m_eligible`` flag is false never receive M.  Raises when the group
    exceeds the enumeration cap (callers split large households).
    """
    n = utilities.shape[0]
    if n < 1:
        raise ValueError("household must have at least one member")
    if n > max_group:
        raise InvariantError(f"household of {n} exceeds the CDAP enumeration cap {max_group}")
    codes, total = cdap_combination_utilities(utilities, joint_coeff)
    avail = ~((codes == 0) & ~np.asarray(m_eligible, dtype=bool)[None, :]).any(axis=1)
    p = mnl_probabilities(total, avail)
    j = monte_carlo_choice(p, stream.uniform())
    return [PATTERNS[c] for c in codes[j]]


def cdap_assign(
    persons: pd.DataFrame,
    households: pd.DataFrame,
    spec,
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Run CDAP per household; large households split into person-id-ordered
    groups of at most the enumeration cap."""
    persons = persons.copy()
    persons["pattern"] = "H"
    alts = pd.DataFrame(
        {"dM": [1.0, 0.0, 0.0], "dN": [0.0, 1.0, 0.0]}, index=pd.Index([0, 1, 2])
    )
    chooser_cols = pd.DataFrame(
        {
            "is_worker": persons["is_worker"].to_numpy(dtype=float),
            "is_student": persons["is_student"].to_numpy(dtype=float),
            "age": persons["age"].to_numpy(dtype=float),
        }
    )
    u_all = utility_matrix(spec, chooser_cols, alts)  # (persons, 3)
    eligible = (persons["is_worker"] == 1) | (persons["is_student"] == 1)
    eligible = eligible.to_numpy()

    placed = set(
        int(h)
        for h in households.loc[households["zone_id"] != 0, "household_id"]
    )
    pos_of = {int(pid): i for i, pid in enumerate(persons["person_id"])}
    patterns = persons["pattern"].to_numpy(dtype=object)

    grouped = persons.groupby("household_id", sort=True)
    for hh_id, members in grouped:
        if int(hh_id) not in placed:
            continue  # unplaced households stay home
        member_ids = sorted(int(p) for p in members["person_id"])
        stream = derive_stream(settings.global_seed, year, "cdap", int(hh_id))
        for start in range(0, len(member_ids), settings.cdap_max_group):
            group = member_ids[start : start + settings.cdap_max_group]
            rows = [pos_of[pid] for pid in group]
            chosen = cdap_household(
                u_all[rows],
                eligible[rows],
                settings.cdap_joint_coeff,
                stream,
                settings.cdap_max_group,
            )
            for pid, pat in zip(group, chosen):
                patterns[pos_of[pid]] = pat
    persons["pattern"] = patterns
    return persons


# ---------------------------------------------------------------------------
# tour generation and tour-level choices


def generate_tours(
    persons: pd.DataFrame,
    households: pd.DataFrame,
    freq_spec,
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Mandatory tours for M patterns, frequency-drawn discretionary tours
    for N patterns, nothing for H."""
    hh_zone = households.set_index("household_id")["zone_id"]
    n_pool = persons.loc[persons["pattern"] == "N"]
    counts = {}
    if len(n_pool):
        choosers = pd.DataFrame(
            {
                "is_worker": n_pool["is_worker"].to_numpy(dtype=float),
                "age": n_pool["age"].to_numpy(dtype=float),
            }
        )
        alts = pd.DataFrame(
            {"n_tours": [0.0, 1.0, 2.0], "d1": [0.0, 1.0, 0.0], "d2": [0.0, 0.0, 1.0]},
            index=pd.Index([0, 1, 2]),
        )
        p = mnl_probabilities(utility_matrix(freq_spec, choosers, alts))
        u = agent_uniforms(
            settings.global_seed,
            year,
            "tour_frequency",
            n_pool["person_id"].to_numpy(dtype=np.int64),
        )
        drawn = monte_carlo_choice(p, u)
        counts = dict(zip((int(i) for i in n_pool["person_id"]), (int(c) for c in drawn)))

    rows = []
    tour_id = 0
    for row in persons.sort_values("person_id").itertuples(index=False):
        home = int(hh_zone.get(row.household_id, 0))
        if home == 0 or row.pattern == "H":
            continue
        if row.pattern == "M":
            if row.is_worker == 1:
                if row.workplace_zone == 0:
                    raise InvariantError(
                        f"person {int(row.person_id)}: mandatory pattern without a workplace"
                    )
                purpose, dest = "work", int(row.workplace_zone)
            elif row.is_student == 1:
                purpose, dest = "school", 0  # destination chosen later
            else:
                raise InvariantError(
                    f"person {int(row.person_id)}: M pattern for a non-worker non-student"
                )
            tour_id += 1
            rows.append((tour_id, int(row.person_id), int(row.household_id), purpose, home, dest))
        else:  # N
            for _ in range(counts.get(int(row.person_id), 0)):
                tour_id += 1
                rows.append((tour_id, int(row.person_id), int(row.household_id), "other", home, 0))

    tours = pd.DataFrame(rows, columns=TOUR_COLUMNS[:6])
    tours["mode"] = ""
    tours["depart_hour"] = -1
    tours["return_hour"] = -1
    return tours


def tour_destination(
    tours: pd.DataFrame,
    households: pd.DataFrame,
    zone_jobs: pd.Series,
    spec,
    skims: SkimSet,
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Pick destinations for tours that still lack one (school and other
    purposes): MNL over sampled zones with impedance plus attraction size."""
    tours = tours.copy()
    todo = tours.loc[tours["destination_zone"] == 0]
    if len(todo) == 0:
        return tours
    zone_ids = skims.zone_ids
    md_auto = skims.matrix("auto", "MD")
    attraction = np.log1p(zone_jobs.reindex(zone_ids).fillna(0).to_numpy(dtype=float))
    hh_income = households.set_index("household_id")["income"]

    chosen = {}
    for row in todo.itertuples(index=False):
        universe = pd.DataFrame(
            {
                "md_time": md_auto[skims.zone_index(int(row.origin_zone))],
                "log1p_attraction": attraction,
            },
            index=pd.Index(zone_ids, name="zone_id"),
        )
        stream = derive_stream(settings.global_seed, year, "tour_destination", int(row.tour_id))
        cs = sample_alternatives(
            universe, settings.destination_sample_size, stream, chooser_id=int(row.tour_id)
        )
        chooser = {"income": float(hh_income.get(row.household_id, 0.0))}
        v = systematic_utility(spec, chooser, cs)
        p = mnl_probabilities(v, cs.availability)
        j = monte_carlo_choice(p, stream.uniform())
        chosen[int(row.tour_id)] = int(cs.alt_ids[j])
    tours = tours.set_index("tour_id")
    picked = pd.Series(chosen)
    tours.loc[picked.index, "destination_zone"] = picked.to_numpy()
    return tours.reset_index()[TOUR_COLUMNS]


def _matrix_utilities(spec, choosers: pd.DataFrame, attrs: Dict[str, np.ndarray], shape):
    """Utility matrix where alternative attributes may vary per chooser.

    ``attrs`` maps alternative columns to (J,) rows or (n, J) matrices.
    """
    v = np.zeros(shape)
    for var, beta in spec.terms:
        if "*" in var:
            ccol, _, acol = var.partition("*")
            if ccol not in choosers.columns or acol not in attrs:
                raise SchemaError(f"variable '{var}' not resolvable")
            v += beta * choosers[ccol].to_numpy(dtype=float)[:, None] * attrs[acol]
        elif var in attrs:
            v += beta * attrs[var]
        elif var in choosers.columns:
            v += beta * choosers[var].to_numpy(dtype=float)[:, None]
        else:
            raise SchemaError(f"variable '{var}' not resolvable")
    return v


def _mode_times(skims: SkimSet, origins, destinations, periods) -> np.ndarray:
    """(n, 4) travel times in TRIP_MODES order; shared rides use auto time."""
    n = len(origins)
    out = np.empty((n, len(TRIP_MODES)))
    o_idx = np.fromiter((skims.zone_index(int(z)) for z in origins), dtype=np.int64, count=n)
    d_idx = np.fromiter((skims.zone_index(int(z)) for z in destinations), dtype=np.int64, count=n)
    for k, mode in enumerate(TRIP_MODES):
        skim_mode = {"drive_alone": "auto", "shared": "auto"}.get(mode, mode)
        for period in set(periods):
            mask = np.asarray(periods) == period
            m = skims.matrix(skim_mode, period)
            out[mask, k] = m[o_idx[mask], d_idx[mask]]
    return out


_MODE_DUMMIES = {
    "d_shared": np.array([0.0, 1.0, 0.0, 0.0]),
    "d_transit": np.array([0.0, 0.0, 1.0, 0.0]),
    "d_walk": np.array([0.0, 0.0, 0.0, 1.0]),
}


def tour_mode(
    tours: pd.DataFrame,
    households: pd.DataFrame,
    spec,
    skims: SkimSet,
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Tour mode MNL over drive_alone / shared / transit / walk.

    Zero-auto households cannot drive alone; walk drops out beyond the
    walk-time threshold; shared is always available.  Work tours price
    the AM skims, everything else MD (departure is chosen later).
    """
    tours = tours.copy()
    if len(tours) == 0:
        tours["mode"] = pd.Series(dtype=object)
        return tours
    hh_autos = households.set_index("household_id")["autos"]
    hh_income = households.set_index("household_id")["income"]
    periods = np.where(tours["purpose"] == "work", "AM", "MD")
    times = _mode_times(skims, tours["origin_zone"], tours["destination_zone"], periods)

    autos = tours["household_id"].map(hh_autos).fillna(0).to_numpy(dtype=float)
    avail = np.ones((len(tours), len(TRIP_MODES)), dtype=bool)
    avail[:, TRIP_MODES.index("drive_alone")] = autos >= 1
    walk_col = TRIP_MODES.index("walk")
    avail[:, walk_col] = times[:, walk_col] <= settings.walk_threshold_min
    assert avail[:, TRIP_MODES.index("shared")].all(), "shared must always be available"

    choosers = pd.DataFrame(
        {
            "income": tours["household_id"].map(hh_income).fillna(0.0).to_numpy(dtype=float),
            "autos": autos,
        }
    )
    attrs = {"time": times, **_MODE_DUMMIES}
    v = _matrix_utilities(spec, choosers, attrs, times.shape)
    p = mnl_probabilities(v, avail)
    u = agent_uniforms(
        settings.global_seed, year, "tour_mode", tours["tour_id"].to_numpy(dtype=np.int64)
    )
    idx = monte_carlo_choice(p, u)
    tours["mode"] = [TRIP_MODES[i] for i in idx]
    return tours


def _hour_probabilities(spec) -> np.ndarray:
    alts = pd.DataFrame(
        {f"h{h:02d}": np.eye(24)[h] for h in range(24)}, index=pd.Index(range(24))
    )
    v = utility_matrix(spec, pd.DataFrame(index=[0]), alts)
    return mnl_probabilities(v[0])


def departure_time(
    tours: pd.DataFrame,
    work_spec,
    other_spec,
    duration_spec,
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Departure hour by MNL over all 24 hours; durations are 9 h for work
    and a 2/4-hour MNL draw otherwise.  Returns clamp to hour 23 (and the
    departure backs off to 22 in the one corner where the clamp would
    collapse the tour)."""
    tours = tours.copy()
    if len(tours) == 0:
        tours["depart_hour"] = pd.Series(dtype=np.int64)
        tours["return_hour"] = pd.Series(dtype=np.int64)
        return tours
    p_work = _hour_probabilities(work_spec)
    p_other = _hour_probabilities(other_spec)
    alts = pd.DataFrame(
        {"duration": [2.0, 4.0], "d4": [0.0, 1.0]}, index=pd.Index([0, 1])
    )
    p_dur = mnl_probabilities(utility_matrix(duration_spec, pd.DataFrame(index=[0]), alts)[0])

    u = agent_uniforms(
        settings.global_seed,
        year,
        "departure",
        tours["tour_id"].to_numpy(dtype=np.int64),
        n_draws=2,
    )
    departs = np.empty(len(tours), dtype=np.int64)
    returns = np.empty(len(tours), dtype=np.int64)
    purposes = tours["purpose"].to_numpy(dtype=object)
    for i in range(len(tours)):
        hours_p = p_work if purposes[i] in ("work", "school") else p_other
        depart = int(monte_carlo_choice(hours_p, u[i, 0]))
        if purposes[i] == "work":
            duration = 9
        else:
            duration = int(alts["duration"].iloc[monte_carlo_choice(p_dur, u[i, 1])])
        ret = min(depart + duration, 23)
        if depart >= ret:
            depart = ret - 1
        departs[i] = depart
        returns[i] = ret
    tours["depart_hour"] = departs
    tours["return_hour"] = returns
    return tours


# ---------------------------------------------------------------------------
# trips


def make_trips(tours: pd.DataFrame) -> pd.DataFrame:
    """Two legs per tour: out at the departure hour, back at the return."""
    rows = []
    for row in tours.itertuples(index=False):
        t = int(row.tour_id)
        rows.append(
            (t * 2 - 1, t, int(row.person_id), int(row.origin_zone), int(row.destination_zone), int(row.depart_hour))
        )
        rows.append(
            (t * 2, t, int(row.person_id), int(row.destination_zone), int(row.origin_zone), int(row.return_hour))
        )
    trips = pd.DataFrame(rows, columns=TRIP_COLUMNS[:6])
    trips["mode"] = ""
    return trips


def trip_mode(
    trips: pd.DataFrame,
    tours: pd.DataFrame,
    spec,
    skims: SkimSet,
    year: int,
    settings: RunSettings,
) -> pd.DataFrame:
    """Leg mode MNL restricted to the modes its tour mode permits."""
    trips = trips.copy()
    if len(trips) == 0:
        trips["mode"] = pd.Series(dtype=object)
        return trips
    tour_modes = trips["tour_id"].map(tours.set_index("tour_id")["mode"])
    periods = np.array(
        [period_of_hour(int(h), settings.period_hours) for h in trips["hour"]], dtype=object
    )
    times = _mode_times(skims, trips["origin"], trips["destination"], periods)
    avail = np.zeros((len(trips), len(TRIP_MODES)), dtype=bool)
    for i, tm in enumerate(tour_modes):
        for mode in TOUR_TRIP_MODES[tm]:
            avail[i, TRIP_MODES.index(mode)] = True
    attrs = {"time": times, **_MODE_DUMMIES}
    v = _matrix_utilities(spec, pd.DataFrame(index=trips.index), attrs, times.shape)
    p = mnl_probabilities(v, avail)
    u = agent_uniforms(
        settings.global_seed, year, "trip_mode", trips["trip_id"].to_numpy(dtype=np.int64)
    )
    idx = monte_carlo_choice(p, u)
    trips["mode"] = [TRIP_MODES[i] for i in idx]
    return trips


def build_trip_table(trips: pd.DataFrame, settings: RunSettings) -> TripTable:
    """Vehicle trips by (origin, destination, period): drive-alone trips
    count 1, shared trips 1/occupancy, other modes none."""
    if len(trips) == 0:
        return TripTable.empty()
    weight = np.where(
        trips["mode"] == "drive_alone",
        1.0,
        np.where(trips["mode"] == "shared", 1.0 / settings.occupancy_factor, 0.0),
    )
    frame = pd.DataFrame(
        {
            "origin": trips["origin"].to_numpy(dtype=np.int64),
            "destination": trips["destination"].to_numpy(dtype=np.int64),
            "period": [period_of_hour(int(h), settings.period_hours) for h in trips["hour"]],
            "vehicle_trips": weight,
        }
    )
    frame = frame.loc[frame["vehicle_trips"] > 0]
    if len(frame) == 0:
        return TripTable.empty()
    agg = (
        frame.groupby(["origin", "destination", "period"], as_index=False)["vehicle_trips"]
        .sum()
    )
    return TripTable(agg)


# ---------------------------------------------------------------------------
# the full day


@dataclass
class DemandDayResult:
    persons: pd.DataFrame
    households: pd.DataFrame
    tours: pd.DataFrame
    trips: pd.DataFrame
    trip_table: TripTable


def demand_day(
    population,
    specs: Dict,
    skims: SkimSet,
    access: Optional[pd.DataFrame],
    year: int,
    settings: RunSettings,
) -> DemandDayResult:
    """Run the whole demand day and aggregate the auto trips."""
    zone_jobs = (
        population.jobs.loc[population.jobs["zone_id"] != 0].groupby("zone_id").size()
    )
    persons = workplace_choice(
        population.persons, population.households, zone_jobs, specs["workplace"], skims, year, settings
    )
    households = auto_ownership(
        population.households, access, specs["auto_ownership"], year, settings
    )
    persons = cdap_assign(persons, households, specs["cdap"], year, settings)
    tours = generate_tours(persons, households, specs["nonmand_frequency"], year, settings)
    tours = tour_destination(
        tours, households, zone_jobs, specs["nonmand_destination"], skims, year, settings
    )
    tours = tour_mode(tours, households, specs["tour_mode"], skims, year, settings)
    tours = departure_time(
        tours, specs["depart_work"], specs["depart_other"], specs["nonmand_duration"], year, settings
    )
    trips = make_trips(tours)
    trips = trip_mode(trips, tours, specs["trip_mode"], skims, year, settings)
    table = build_trip_table(trips, settings)
    return DemandDayResult(persons, households, tours, trips, table)
