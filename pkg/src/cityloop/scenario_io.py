"""Scenario ingestion and serialization.

All interchange is CSV (header row mandatory, UTF-8, "." decimal separator)
plus a sectioned key-value config file parsed with configparser (INI
grammar; see README).  Numeric parsing rejects NaN and infinities.  Errors
name the file, row and column (schema violations) or the offending entity
(invariant violations).
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import InvariantError, ScenarioError, SchemaError
from .types import (
    DeveloperParams,
    Network,
    PERIODS,
    Population,
    RunSettings,
    ScenarioBundle,
    SkimSet,
    TripTable,
    UtilitySpec,
)

# ---------------------------------------------------------------------------
# column schemas


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "int" | "float" | "str"
    min: Optional[float] = None
    gt: Optional[float] = None
    choices: Optional[Tuple[str, ...]] = None


ZONE_COLUMNS = (
    Column("zone_id", "int", min=1),
    Column("area", "float", gt=0),
    Column("max_residential_units", "int", min=0),
    Column("max_job_spaces", "int", min=0),
    Column("avg_price", "float", gt=0),
)
NODE_COLUMNS = (
    Column("node_id", "int", min=1),
    Column("x", "float"),
    Column("y", "float"),
    Column("zone_id", "int", min=0),  # 0 = outside every zone
)
LINK_COLUMNS = (
    Column("link_id", "int", min=1),
    Column("from_node", "int", min=1),
    Column("to_node", "int", min=1),
    Column("length", "float", gt=0),
    Column("capacity", "float", gt=0),
    Column("free_flow_time", "float", gt=0),
    Column("alpha", "float", min=0),
    Column("beta", "float", min=1),
)
HOUSEHOLD_COLUMNS = (
    Column("household_id", "int", min=1),
    Column("zone_id", "int", min=0),
    Column("income", "float", gt=0),
    Column("size", "int", min=1),
    Column("autos", "int", min=0),
    Column("tenure_years", "int", min=0),
)
PERSON_COLUMNS = (
    Column("person_id", "int", min=1),
    Column("household_id", "int", min=1),
    Column("age", "int", min=0),
    Column("is_worker", "int", min=0),
    Column("is_student", "int", min=0),
    Column("workplace_zone", "int", min=0),
)
JOB_COLUMNS = (
    Column("job_id", "int", min=1),
    Column("zone_id", "int", min=0),
    Column("sector", "str"),
)
CONTROL_COLUMNS = (
    Column("year", "int", min=0),
    Column("households", "int", min=0),
    Column("jobs", "int", min=0),
)
SPEC_COLUMNS = (
    Column("spec_name", "str"),
    Column("variable", "str"),
    Column("coefficient", "float"),
)
SKIM_COLUMNS = (
    Column("mode", "str"),
    Column("period", "str", choices=PERIODS),
    Column("origin", "int", min=1),
    Column("destination", "int", min=1),
    Column("minutes", "float", gt=0),
)
TRIP_TABLE_COLUMNS = (
    Column("origin", "int", min=1),
    Column("destination", "int", min=1),
    Column("period", "str", choices=PERIODS),
    Column("vehicle_trips", "float", min=0),
)
ACCESS_COLUMNS = (
    Column("zone_id", "int", min=1),
    Column("access_jobs", "float"),
    Column("access_logsum", "float"),
)

# spec name -> (chooser columns, alternative columns) it may reference
_HOURS = tuple(f"h{h:02d}" for h in range(24))
SPEC_SCHEMAS: Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...]]] = {
    "hlc": (
        ("income", "hhsize", "autos", "tenure_years"),
        ("price", "log_vacant", "access_jobs", "access_logsum"),
    ),
    "elc": ((), ("price", "log_vacant_spaces", "access_jobs", "access_logsum")),
    "workplace": (("income", "age"), ("am_time", "log1p_jobs")),
    "auto_ownership": (
        ("income", "hhsize", "access_jobs", "access_logsum"),
        ("autos", "d1", "d2"),
    ),
    "cdap": (("is_worker", "is_student", "age"), ("dM", "dN")),
    "nonmand_frequency": (("is_worker", "age"), ("n_tours", "d1", "d2")),
    "nonmand_destination": (("income",), ("md_time", "log1p_attraction")),
    "tour_mode": (("income", "autos"), ("time", "d_shared", "d_transit", "d_walk")),
    "depart_work": ((), _HOURS),
    "depart_other": ((), _HOURS),
    "nonmand_duration": ((), ("duration", "d4")),
    "trip_mode": ((), ("time", "d_shared", "d_transit", "d_walk")),
    "access_mode": ((), ("time", "d_shared", "d_transit", "d_walk")),
}
REQUIRED_SPECS = tuple(SPEC_SCHEMAS)


# ---------------------------------------------------------------------------
# generic table reading / writing


def _parse_cell(raw: str, col: Column, fname: str, row: int):
    value = raw.strip()
    where = f"{fname}, row {row}, column '{col.name}'"
    if value == "":
        raise SchemaError(f"{where}: empty value")
    if col.kind == "int":
        try:
            out = int(value)
        except ValueError:
            raise SchemaError(f"{where}: '{value}' is not an integer") from None
    elif col.kind == "float":
        try:
            out = float(value)
        except ValueError:
            raise SchemaError(f"{where}: '{value}' is not a number") from None
        if not np.isfinite(out):
            raise SchemaError(f"{where}: non-finite value '{value}'")
    else:
        out = value
    if col.choices is not None and out not in col.choices:
        raise SchemaError(f"{where}: '{out}' not one of {list(col.choices)}")
    if col.min is not None and out < col.min:
        raise SchemaError(f"{where}: {out} is below the minimum {col.min}")
    if col.gt is not None and not out > col.gt:
        raise SchemaError(f"{where}: {out} must be > {col.gt}")
    return out


def read_table(path: Path, columns: Sequence[Column]) -> pd.DataFrame:
    """Read a schema-checked CSV into typed columns (extras are ignored)."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"missing input file: {path}")
    fname = path.name
    data: Dict[str, list] = {c.name: [] for c in columns}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{fname}: empty file (header row is mandatory)") from None
        header = [h.strip() for h in header]
        pos = {}
        for c in columns:
            if c.name not in header:
                raise SchemaError(f"{fname}: missing column '{c.name}'")
            pos[c.name] = header.index(c.name)
        for row_no, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            for c in columns:
                if pos[c.name] >= len(row):
                    raise SchemaError(f"{fname}, row {row_no}: too few fields")
                data[c.name].append(_parse_cell(row[pos[c.name]], c, fname, row_no))
    frame = pd.DataFrame(data)
    for c in columns:
        if c.kind == "int":
            frame[c.name] = frame[c.name].astype(np.int64)
        elif c.kind == "float":
            frame[c.name] = frame[c.name].astype(float)
        else:
            frame[c.name] = frame[c.name].astype(object)
    return frame


def _format_cell(value) -> str:
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    return str(value)


def write_frame(path: Path, frame: pd.DataFrame, columns: Optional[Sequence[str]] = None):
    """Write a CSV deterministically (LF line endings, repr floats)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(columns) if columns is not None else list(frame.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in frame[cols].itertuples(index=False):
            writer.writerow([_format_cell(v) for v in row])


# ---------------------------------------------------------------------------
# utility specs


def parse_specs(frame: pd.DataFrame) -> Dict[str, UtilitySpec]:
    specs: Dict[str, list] = {}
    for name, var, coef in zip(frame["spec_name"], frame["variable"], frame["coefficient"]):
        specs.setdefault(str(name), []).append((str(var), float(coef)))
    out = {}
    for name, terms in specs.items():
        if name not in SPEC_SCHEMAS:
            raise SchemaError(f"specs: unknown spec name '{name}'")
        out[name] = UtilitySpec(name, tuple(terms))
    missing = [n for n in REQUIRED_SPECS if n not in out]
    if missing:
        raise SchemaError(f"specs: missing required spec(s) {missing}")
    for spec in out.values():
        validate_spec_bindings(spec)
    return out


def validate_spec_bindings(spec: UtilitySpec):
    """Check every variable resolves against the spec's declared schemas."""
    chooser_cols, alt_cols = SPEC_SCHEMAS[spec.name]
    for var in spec.variables:
        if "*" in var:
            left, _, right = var.partition("*")
            if left not in chooser_cols:
                raise SchemaError(
                    f"spec '{spec.name}': '{left}' (in '{var}') is not a chooser attribute"
                )
            if right not in alt_cols:
                raise SchemaError(
                    f"spec '{spec.name}': '{right}' (in '{var}') is not an alternative attribute"
                )
        else:
            in_chooser = var in chooser_cols
            in_alt = var in alt_cols
            if in_chooser and in_alt:
                raise SchemaError(f"spec '{spec.name}': variable '{var}' is ambiguous")
            if not (in_chooser or in_alt):
                raise SchemaError(f"spec '{spec.name}': variable '{var}' is not resolvable")


def specs_frame(specs: Dict[str, UtilitySpec]) -> pd.DataFrame:
    rows = []
    for name in sorted(specs):
        for var, coef in specs[name].terms:
            rows.append((name, var, coef))
    return pd.DataFrame(rows, columns=["spec_name", "variable", "coefficient"])


# ---------------------------------------------------------------------------
# config file

_PERIOD_DEFAULT = "AM:6-9,MD:10-14,PM:15-18"

_CONFIG_KEYS = {
    "scenario": {
        "name": str,
        "global_seed": int,
        "start_year": int,
        "end_year": int,
        "data_dir": str,
    },
    "landuse": {
        "annual_move_rate": float,
        "price_to_build_threshold": float,
        "units_per_build": int,
        "max_share_growth_per_zone": float,
        "mc_gamma": float,
        "mc_tol": float,
        "mc_max_iters": int,
    },
    "demand": {
        "occupancy_factor": float,
        "walk_threshold_min": float,
        "walk_speed_kmh": float,
        "cdap_max_group": int,
        "cdap_joint_coeff": float,
        "workplace_sample_size": int,
        "destination_sample_size": int,
        "period_hours": str,
    },
    "assignment": {
        "gap_tol": float,
        "max_iters": int,
        "threads": int,
        "node_mapping": str,
        "access_threshold_min": float,
        "transit_time_factor": float,
        "transit_wait_min": float,
    },
}


def _parse_period_hours(text: str) -> Dict[str, Tuple[int, int]]:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            period, hours = part.split(":")
            lo, hi = hours.split("-")
            out[period.strip()] = (int(lo), int(hi))
        except ValueError:
            raise SchemaError(f"config: bad period_hours entry '{part}'") from None
    for period in out:
        if period not in PERIODS or period == "NT":
            raise SchemaError(f"config: period_hours names unknown period '{period}'")
    return out


def read_config(path: Path) -> RunSettings:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"missing config file: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise SchemaError(f"config: {exc}") from None

    settings = RunSettings()
    for section in parser.sections():
        if section not in _CONFIG_KEYS:
            raise SchemaError(f"config: unknown section [{section}]")
        for key, raw in parser[section].items():
            if key not in _CONFIG_KEYS[section]:
                raise SchemaError(f"config: unknown key '{key}' in [{section}]")
            conv = _CONFIG_KEYS[section][key]
            try:
                value = conv(raw)
            except ValueError:
                raise SchemaError(f"config: [{section}] {key} = '{raw}' is not a {conv.__name__}") from None
            if key == "period_hours":
                settings.period_hours = _parse_period_hours(raw)
            elif key == "price_to_build_threshold":
                settings.developer.price_to_build_threshold = value
            elif key == "units_per_build":
                settings.developer.units_per_build = value
            elif key == "max_share_growth_per_zone":
                settings.developer.max_share_growth_per_zone = value
            elif key == "max_iters":
                settings.fw_max_iters = value
            else:
                setattr(settings, key, value)
    settings.validate()
    return settings


def write_config(path: Path, settings: RunSettings):
    ph = ",".join(f"{p}:{lo}-{hi}" for p, (lo, hi) in settings.period_hours.items())
    text = f"""# cityloop scenario configuration (INI grammar, see README)
[scenario]
name = {settings.name}
global_seed = {settings.global_seed}
start_year = {settings.start_year}
end_year = {settings.end_year}
data_dir = .

[landuse]
annual_move_rate = {settings.annual_move_rate}
price_to_build_threshold = {settings.developer.price_to_build_threshold}
units_per_build = {settings.developer.units_per_build}
max_share_growth_per_zone = {settings.developer.max_share_growth_per_zone}
mc_gamma = {settings.mc_gamma}
mc_tol = {settings.mc_tol}
mc_max_iters = {settings.mc_max_iters}

[demand]
occupancy_factor = {settings.occupancy_factor}
walk_threshold_min = {settings.walk_threshold_min}
walk_speed_kmh = {settings.walk_speed_kmh}
cdap_max_group = {settings.cdap_max_group}
cdap_joint_coeff = {settings.cdap_joint_coeff}
workplace_sample_size = {settings.workplace_sample_size}
destination_sample_size = {settings.destination_sample_size}
period_hours = {ph}

[assignment]
gap_tol = {settings.gap_tol}
max_iters = {settings.fw_max_iters}
threads = {settings.threads}
node_mapping = {settings.node_mapping}
access_threshold_min = {settings.access_threshold_min}
transit_time_factor = {settings.transit_time_factor}
transit_wait_min = {settings.transit_wait_min}
"""
    Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# cross-reference validation


def validate_population(zones: pd.DataFrame, population: Population):
    zone_ids = set(int(z) for z in zones["zone_id"])
    hh = population.households
    persons = population.persons
    jobs = population.jobs

    for frame, key, label in (
        (hh, "household_id", "household"),
        (persons, "person_id", "person"),
        (jobs, "job_id", "job"),
    ):
        if frame[key].duplicated().any():
            dup = int(frame.loc[frame[key].duplicated(), key].iloc[0])
            raise InvariantError(f"duplicate {label} id {dup}")

    bad = hh.loc[(hh["zone_id"] != 0) & ~hh["zone_id"].isin(zone_ids)]
    if len(bad):
        row = bad.iloc[0]
        raise InvariantError(
            f"household {int(row['household_id'])}: unknown zone_id {int(row['zone_id'])}"
        )
    hh_ids = set(int(h) for h in hh["household_id"])
    bad = persons.loc[~persons["household_id"].isin(hh_ids)]
    if len(bad):
        row = bad.iloc[0]
        raise InvariantError(
            f"person {int(row['person_id'])}: unknown household_id {int(row['household_id'])}"
        )
    bad = persons.loc[
        (persons["workplace_zone"] != 0) & ~persons["workplace_zone"].isin(zone_ids)
    ]
    if len(bad):
        row = bad.iloc[0]
        raise InvariantError(
            f"person {int(row['person_id'])}: unknown workplace_zone {int(row['workplace_zone'])}"
        )
    bad = jobs.loc[(jobs["zone_id"] != 0) & ~jobs["zone_id"].isin(zone_ids)]
    if len(bad):
        row = bad.iloc[0]
        raise InvariantError(f"job {int(row['job_id'])}: unknown zone_id {int(row['zone_id'])}")

    occ = hh.loc[hh["zone_id"] != 0].groupby("zone_id").size()
    caps = zones.set_index("zone_id")["max_residential_units"]
    over = occ[occ > caps.reindex(occ.index)]
    if len(over):
        z = int(over.index[0])
        raise InvariantError(
            f"zone {z}: {int(over.iloc[0])} households exceed max_residential_units {int(caps[z])}"
        )
    jocc = jobs.loc[jobs["zone_id"] != 0].groupby("zone_id").size()
    jcaps = zones.set_index("zone_id")["max_job_spaces"]
    jover = jocc[jocc > jcaps.reindex(jocc.index)]
    if len(jover):
        z = int(jover.index[0])
        raise InvariantError(
            f"zone {z}: {int(jover.iloc[0])} jobs exceed max_job_spaces {int(jcaps[z])}"
        )


def attach_residential_units(zones: pd.DataFrame, households: pd.DataFrame) -> pd.DataFrame:
    """Initial housing stock: one unit per placed household (no vacancy);
    the developer step grows it from there."""
    zones = zones.copy()
    occ = households.loc[households["zone_id"] != 0].groupby("zone_id").size()
    zones["residential_units"] = (
        zones["zone_id"].map(occ).fillna(0).astype(np.int64)
    )
    return zones


# ---------------------------------------------------------------------------
# bundle load / save


def load_scenario(config_path) -> ScenarioBundle:
    """Load and fully validate a scenario directory from its config file."""
    config_path = Path(config_path)
    settings = read_config(config_path)
    data_dir = (config_path.parent / settings.data_dir).resolve()

    zones = read_table(data_dir / "zones.csv", ZONE_COLUMNS)
    if zones["zone_id"].duplicated().any():
        dup = int(zones.loc[zones["zone_id"].duplicated(), "zone_id"].iloc[0])
        raise InvariantError(f"duplicate zone_id {dup}")
    zones = zones.sort_values("zone_id").reset_index(drop=True)

    nodes = read_table(data_dir / "nodes.csv", NODE_COLUMNS)
    links = read_table(data_dir / "links.csv", LINK_COLUMNS)
    zone_ids = set(int(z) for z in zones["zone_id"])
    bad_zone = nodes.loc[(nodes["zone_id"] != 0) & ~nodes["zone_id"].isin(zone_ids)]
    if len(bad_zone):
        row = bad_zone.iloc[0]
        raise InvariantError(
            f"node {int(row['node_id'])}: unknown zone_id {int(row['zone_id'])}"
        )
    network = Network(nodes, links)
    uncovered = zone_ids - set(network.zone_centroids)
    if uncovered:
        raise InvariantError(f"zone {sorted(uncovered)[0]}: no network node in zone")

    population = Population(
        households=read_table(data_dir / "households.csv", HOUSEHOLD_COLUMNS)
        .sort_values("household_id")
        .reset_index(drop=True),
        persons=read_table(data_dir / "persons.csv", PERSON_COLUMNS)
        .sort_values("person_id")
        .reset_index(drop=True),
        jobs=read_table(data_dir / "jobs.csv", JOB_COLUMNS)
        .sort_values("job_id")
        .reset_index(drop=True),
    )
    validate_population(zones, population)

    control = read_table(data_dir / "control_totals.csv", CONTROL_COLUMNS)
    if control["year"].duplicated().any():
        raise InvariantError("control totals: duplicate year")
    control = control.sort_values("year").set_index("year")
    missing_years = [y for y in settings.years if y not in control.index]
    if missing_years:
        raise InvariantError(f"control totals: missing year(s) {missing_years}")

    specs = parse_specs(read_table(data_dir / "specs.csv", SPEC_COLUMNS))
    zones = attach_residential_units(zones, population.households)

    return ScenarioBundle(
        zones=zones,
        network=network,
        population=population,
        specs=specs,
        control_totals=control,
        settings=settings,
    )


def save_scenario(bundle: ScenarioBundle, out_dir) -> Path:
    """Write a bundle back to a loadable scenario directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_frame(out_dir / "zones.csv", bundle.zones, [c.name for c in ZONE_COLUMNS])
    write_frame(out_dir / "nodes.csv", bundle.network.nodes, [c.name for c in NODE_COLUMNS])
    write_frame(out_dir / "links.csv", bundle.network.links, [c.name for c in LINK_COLUMNS])
    write_population(bundle.population, out_dir)
    ct = bundle.control_totals.reset_index()
    write_frame(out_dir / "control_totals.csv", ct, [c.name for c in CONTROL_COLUMNS])
    write_frame(out_dir / "specs.csv", specs_frame(bundle.specs))
    write_config(out_dir / "config.ini", bundle.settings)
    return out_dir / "config.ini"


def write_population(population: Population, out_dir):
    out_dir = Path(out_dir)
    write_frame(out_dir / "households.csv", population.households, [c.name for c in HOUSEHOLD_COLUMNS])
    write_frame(out_dir / "persons.csv", population.persons, [c.name for c in PERSON_COLUMNS])
    write_frame(out_dir / "jobs.csv", population.jobs, [c.name for c in JOB_COLUMNS])


def read_population(data_dir) -> Population:
    data_dir = Path(data_dir)
    return Population(
        households=read_table(data_dir / "households.csv", HOUSEHOLD_COLUMNS)
        .sort_values("household_id")
        .reset_index(drop=True),
        persons=read_table(data_dir / "persons.csv", PERSON_COLUMNS)
        .sort_values("person_id")
        .reset_index(drop=True),
        jobs=read_table(data_dir / "jobs.csv", JOB_COLUMNS)
        .sort_values("job_id")
        .reset_index(drop=True),
    )


# ---------------------------------------------------------------------------
# skims, trip tables, accessibility


def write_skims(skims: SkimSet, path):
    rows = {"mode": [], "period": [], "origin": [], "destination": [], "minutes": []}
    modes = sorted({m for m, _ in skims.matrices})
    period_order = [p for p in PERIODS if any((m, p) in skims.matrices for m in modes)]
    for mode in modes:
        for period in period_order:
            if (mode, period) not in skims.matrices:
                continue
            m = skims.matrices[(mode, period)]
            for i, o in enumerate(skims.zone_ids):
                for j, d in enumerate(skims.zone_ids):
                    rows["mode"].append(mode)
                    rows["period"].append(period)
                    rows["origin"].append(int(o))
                    rows["destination"].append(int(d))
                    rows["minutes"].append(float(m[i, j]))
    write_frame(Path(path), pd.DataFrame(rows))


def read_skims(path, expected_zone_ids=None) -> SkimSet:
    frame = read_table(Path(path), SKIM_COLUMNS)
    zone_ids = np.unique(
        np.concatenate([frame["origin"].to_numpy(), frame["destination"].to_numpy()])
    )
    if expected_zone_ids is not None:
        expected = np.asarray(sorted(int(z) for z in expected_zone_ids), dtype=np.int64)
        if not np.array_equal(zone_ids, expected):
            raise InvariantError(f"{Path(path).name}: zone ids do not match the scenario")
        zone_ids = expected
    zpos = {int(z): i for i, z in enumerate(zone_ids)}
    n = len(zone_ids)
    matrices: Dict[Tuple[str, str], np.ndarray] = {}
    seen: Dict[Tuple[str, str], np.ndarray] = {}
    for mode, period, o, d, t in zip(
        frame["mode"], frame["period"], frame["origin"], frame["destination"], frame["minutes"]
    ):
        key = (str(mode), str(period))
        if key not in matrices:
            matrices[key] = np.zeros((n, n))
            seen[key] = np.zeros((n, n), dtype=bool)
        i, j = zpos[int(o)], zpos[int(d)]
        if seen[key][i, j]:
            raise InvariantError(f"{Path(path).name}: duplicate cell {key} {o}->{d}")
        matrices[key][i, j] = float(t)
        seen[key][i, j] = True
    for key, mask in seen.items():
        if not mask.all():
            raise InvariantError(f"{Path(path).name}: incomplete matrix for {key}")
    return SkimSet(zone_ids, matrices)


def write_trip_table(table: TripTable, path):
    write_frame(Path(path), table.df, TripTable.COLUMNS)


def read_trip_table(path) -> TripTable:
    frame = read_table(Path(path), TRIP_TABLE_COLUMNS)
    return TripTable(frame)


def write_accessibility(frame: pd.DataFrame, path):
    write_frame(Path(path), frame, [c.name for c in ACCESS_COLUMNS])


def read_accessibility(path) -> pd.DataFrame:
    frame = read_table(Path(path), ACCESS_COLUMNS)
    return frame.sort_values("zone_id").reset_index(drop=True)
