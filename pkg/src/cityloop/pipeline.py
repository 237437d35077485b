"""Annual pipeline: land use -> demand -> assignment -> feedback.

Stages inside a year hand off through disk only (the loosest coupling:
each stage reads its inputs from the files the previous stage wrote), and
the population that starts year t+1 is read back from year t's outputs.
Output trees are byte-deterministic for a fixed seed and inputs; stage
checksums land in a plain-text JSON manifest.  Wall-clock timings are
returned to the caller and never written into the output tree, which keeps
reruns byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import assignment as asg
from . import scenario_io as sio
from .demand import demand_day
from .errors import InvariantError, ScenarioError, StageFailure
from .landuse import landuse_year
from .types import (
    Network,
    PERIODS,
    Population,
    RunSettings,
    ScenarioBundle,
    SkimSet,
    TripTable,
    period_durations,
)

STAGES = ("landuse", "demand", "assignment", "feedback")

LINK_FLOW_COLUMNS = ["period", "link_id", "flow", "time"]
CONVERGENCE_COLUMNS = ["period", "iteration", "relative_gap"]
SUMMARY_COLUMNS = ["year", "zone_id", "households", "jobs", "units", "price"]


# ---------------------------------------------------------------------------
# checksums and manifest


def _file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def stage_checksum(stage_dir: Path) -> str:
    """Order-independent digest of every file in a stage directory."""
    h = hashlib.sha256()
    for path in sorted(Path(stage_dir).glob("*")):
        if path.is_file():
            h.update(path.name.encode("utf-8"))
            h.update(_file_sha256(path).encode("ascii"))
    return h.hexdigest()


def write_manifest(path: Path, manifest: dict):
    Path(path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"missing manifest: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# stage runners


def _reload_zones(landuse_dir: Path) -> pd.DataFrame:
    zones = sio.read_table(landuse_dir / "zones.csv", sio.ZONE_COLUMNS)
    summary = pd.read_csv(landuse_dir / "landuse_summary.csv")
    zones = zones.sort_values("zone_id").reset_index(drop=True)
    units = summary.set_index("zone_id")["units"]
    zones["residential_units"] = (
        zones["zone_id"].map(units).fillna(0).astype(np.int64)
    )
    return zones


def stage_landuse(bundle: ScenarioBundle, year: int, prior_feedback: Path, out_dir: Path):
    access = sio.read_accessibility(prior_feedback / "accessibility.csv")
    result = landuse_year(bundle, year, access)
    out_dir.mkdir(parents=True, exist_ok=True)
    sio.write_frame(out_dir / "zones.csv", result.zones, [c.name for c in sio.ZONE_COLUMNS])
    sio.write_population(result.population, out_dir)
    sio.write_frame(out_dir / "landuse_summary.csv", result.summary, SUMMARY_COLUMNS)
    return result


def stage_demand(
    bundle: ScenarioBundle, year: int, landuse_dir: Path, prior_feedback: Path, out_dir: Path
):
    population = sio.read_population(landuse_dir)
    skims = sio.read_skims(prior_feedback / "skims.csv", bundle.zone_ids())
    access = sio.read_accessibility(prior_feedback / "accessibility.csv")
    result = demand_day(population, bundle.specs, skims, access, year, bundle.settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    sio.write_frame(out_dir / "trips.csv", result.trips,
                    ["trip_id", "tour_id", "person_id", "origin", "destination", "hour", "mode"])
    sio.write_trip_table(result.trip_table, out_dir / "trip_table.csv")
    # serialized hand-off of the long-term choices (workplace, autos)
    persons = result.persons[[c.name for c in sio.PERSON_COLUMNS]]
    updated = Population(result.households, persons, population.jobs)
    sio.write_population(updated, out_dir)
    return result


def stage_assignment(bundle: ScenarioBundle, year: int, demand_dir: Path, out_dir: Path):
    settings = bundle.settings
    table = sio.read_trip_table(demand_dir / "trip_table.csv")
    zone_ids = bundle.zone_ids()
    durations = period_durations(settings.period_hours)
    results: Dict[str, asg.AssignmentResult] = {}
    for period in PERIODS:
        od = table.period_matrix(period, zone_ids) / durations[period]
        results[period] = asg.frank_wolfe_ue(
            bundle.network,
            od,
            zone_ids,
            period=period,
            gap_tol=settings.gap_tol,
            max_iters=settings.fw_max_iters,
            mapping=settings.node_mapping,
            threads=settings.threads,
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    flows_rows = []
    conv_rows = []
    for period in PERIODS:
        r = results[period]
        for lid, flow, t in zip(bundle.network.link_ids, r.flows, r.times):
            flows_rows.append((period, int(lid), float(flow), float(t)))
        for i, gap in enumerate(r.gaps, start=1):
            conv_rows.append((period, i, float(gap)))
    sio.write_frame(out_dir / "link_flows.csv", pd.DataFrame(flows_rows, columns=LINK_FLOW_COLUMNS))
    sio.write_frame(out_dir / "convergence.csv", pd.DataFrame(conv_rows, columns=CONVERGENCE_COLUMNS))
    energy = asg.energy_estimate(bundle.network, results, durations)
    sio.write_frame(out_dir / "energy.csv", energy, ["period", "vmt", "vht", "energy_mj"])
    return results


def _results_from_flows(network: Network, flows_path: Path) -> Dict[str, asg.AssignmentResult]:
    frame = pd.read_csv(flows_path)
    results = {}
    order = pd.Series(np.arange(network.n_links), index=network.link_ids)
    for period in PERIODS:
        sl = frame[frame["period"] == period].set_index("link_id")
        flows = np.zeros(network.n_links)
        times = network.free_flow_time.copy()
        if len(sl):
            idx = order[sl.index].to_numpy()
            flows[idx] = sl["flow"].to_numpy(dtype=float)
            times[idx] = sl["time"].to_numpy(dtype=float)
        results[period] = asg.AssignmentResult(period, flows, times, 0, [0.0])
    return results


def stage_feedback(bundle: ScenarioBundle, year: int, landuse_dir: Path, assignment_dir: Path, out_dir: Path):
    results = _results_from_flows(bundle.network, assignment_dir / "link_flows.csv")
    zone_ids = bundle.zone_ids()
    skims = asg.extract_skims(bundle.network, results, zone_ids, bundle.settings)
    summary = pd.read_csv(landuse_dir / "landuse_summary.csv")
    zone_jobs = summary.set_index("zone_id")["jobs"]
    access = asg.accessibility(
        bundle.zones, skims, zone_jobs, bundle.specs["access_mode"], bundle.settings
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    sio.write_skims(skims, out_dir / "skims.csv")
    sio.write_accessibility(access, out_dir / "accessibility.csv")
    return skims


# ---------------------------------------------------------------------------
# year and scenario loops


@dataclass
class YearOutput:
    bundle: ScenarioBundle
    trip_table: TripTable
    skims: SkimSet
    timings: Dict[str, float]


def run_year(bundle: ScenarioBundle, year: int, prior_feedback: Path, year_dir: Path) -> YearOutput:
    """One pipeline pass; every stage writes before the next stage reads."""
    year_dir = Path(year_dir)
    timings: Dict[str, float] = {}

    def timed(stage, fn, *args):
        t0 = time.perf_counter()
        try:
            out = fn(*args)
        except Exception as exc:  # partial stage outputs stay for inspection
            raise StageFailure(stage, year, exc) from exc
        timings[stage] = time.perf_counter() - t0
        return out

    landuse_dir = year_dir / "landuse"
    demand_dir = year_dir / "demand"
    assignment_dir = year_dir / "assignment"
    feedback_dir = year_dir / "feedback"

    timed("landuse", stage_landuse, bundle, year, prior_feedback, landuse_dir)
    demand_result = timed("demand", stage_demand, bundle, year, landuse_dir, prior_feedback, demand_dir)
    timed("assignment", stage_assignment, bundle, year, demand_dir, assignment_dir)
    skims = timed("feedback", stage_feedback, bundle, year, landuse_dir, assignment_dir, feedback_dir)

    next_bundle = replace(
        bundle,
        zones=_reload_zones(landuse_dir),
        population=sio.read_population(demand_dir),
    )
    return YearOutput(next_bundle, demand_result.trip_table, skims, timings)


@dataclass
class RunResult:
    manifest_path: Path
    manifest: dict
    timings: Dict[Tuple[int, str], float]


def _prepare_root(out_root: Path) -> Path:
    if out_root.exists():
        if (out_root / "manifest.json").is_file():
            shutil.rmtree(out_root)
        elif any(out_root.iterdir()):
            raise ScenarioError(
                f"output directory {out_root} exists and is not a previous run"
            )
    out_root.mkdir(parents=True, exist_ok=True)
    return out_root


def run_scenario(config_path, out_dir, overrides: Optional[dict] = None) -> RunResult:
    """Loop run_year over the configured horizon and write the manifest."""
    bundle = sio.load_scenario(config_path)
    settings = bundle.settings
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "years":
            settings.end_year = settings.start_year + int(value) - 1
        elif key == "seed":
            settings.global_seed = int(value)
        elif key == "gap_tol":
            settings.gap_tol = float(value)
        elif key == "threads":
            settings.threads = int(value)
        else:
            raise ScenarioError(f"unknown override '{key}'")
    settings.validate()
    missing = [y for y in settings.years if y not in bundle.control_totals.index]
    if missing:
        raise ScenarioError(f"control totals: missing year(s) {missing}")

    out_root = _prepare_root(Path(out_dir) / settings.name)
    timings: Dict[Tuple[int, str], float] = {}

    # bootstrap feedback: free-flow skims and the matching accessibility
    base_dir = out_root / "base"
    base_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    zone_ids = bundle.zone_ids()
    base_skims = asg.free_flow_skims(bundle.network, zone_ids, settings)
    jobs0 = bundle.population.jobs
    zone_jobs = jobs0.loc[jobs0["zone_id"] != 0].groupby("zone_id").size()
    base_access = asg.accessibility(
        bundle.zones, base_skims, zone_jobs, bundle.specs["access_mode"], settings
    )
    sio.write_skims(base_skims, base_dir / "skims.csv")
    sio.write_accessibility(base_access, base_dir / "accessibility.csv")
    timings[(settings.start_year - 1, "base")] = time.perf_counter() - t0

    manifest = {
        "scenario": settings.name,
        "global_seed": settings.global_seed,
        "start_year": settings.start_year,
        "end_year": settings.end_year,
        "zone_count": int(len(zone_ids)),
        "layout": "base/, <year>/{landuse,demand,assignment,feedback}/",
        "base": stage_checksum(base_dir),
        "years": {},
    }

    prior_feedback = base_dir
    for year in settings.years:
        year_dir = out_root / str(year)
        output = run_year(bundle, year, prior_feedback, year_dir)
        bundle = output.bundle
        checksums = {stage: stage_checksum(year_dir / stage) for stage in STAGES}
        manifest["years"][str(year)] = checksums
        for stage, secs in output.timings.items():
            timings[(year, stage)] = secs
        prior_feedback = year_dir / "feedback"

    manifest_path = out_root / "manifest.json"
    write_manifest(manifest_path, manifest)
    return RunResult(manifest_path, manifest, timings)


# ---------------------------------------------------------------------------
# comparison and reporting


def _year_metrics(root: Path, year: int) -> Dict[str, Optional[float]]:
    landuse = pd.read_csv(root / str(year) / "landuse" / "landuse_summary.csv")
    energy = pd.read_csv(root / str(year) / "assignment" / "energy.csv")
    trips = pd.read_csv(root / str(year) / "demand" / "trips.csv")
    table = pd.read_csv(root / str(year) / "demand" / "trip_table.csv")

    metrics: Dict[str, Optional[float]] = {}
    for row in landuse.itertuples(index=False):
        metrics[f"households_zone_{int(row.zone_id)}"] = float(row.households)
    metrics["total_households"] = float(landuse["households"].sum())
    metrics["total_jobs"] = float(landuse["jobs"].sum())
    veh = float(table["vehicle_trips"].sum()) if len(table) else 0.0
    metrics["vehicle_trips"] = veh
    metrics["vmt"] = float(energy["vmt"].sum())
    metrics["vht"] = float(energy["vht"].sum())
    metrics["energy_mj"] = float(energy["energy_mj"].sum())
    metrics["mean_trip_time_min"] = (metrics["vht"] * 60.0 / veh) if veh > 0 else None
    am = energy.loc[energy["period"] == "AM"]
    am_table = table.loc[table["period"] == "AM"] if len(table) else table
    am_veh = float(am_table["vehicle_trips"].sum()) if len(am_table) else 0.0
    metrics["mean_am_time_min"] = (
        float(am["vht"].iloc[0]) * 60.0 / am_veh if am_veh > 0 else None
    )
    n_trips = len(trips)
    for mode in ("drive_alone", "shared", "transit", "walk"):
        share = float((trips["mode"] == mode).sum()) / n_trips if n_trips else None
        metrics[f"mode_share_{mode}"] = share
    return metrics


def compare_scenarios(manifest_a, manifest_b) -> pd.DataFrame:
    """Aligned per-year deltas; cells divide-by-zero as empty, not errors."""
    ma, mb = read_manifest(manifest_a), read_manifest(manifest_b)
    if ma["zone_count"] != mb["zone_count"]:
        raise InvariantError(
            f"mismatched zone systems: {ma['zone_count']} vs {mb['zone_count']} zones"
        )
    years_a = sorted(ma["years"])
    years_b = sorted(mb["years"])
    if years_a != years_b:
        raise InvariantError(f"mismatched year ranges: {years_a} vs {years_b}")
    root_a = Path(manifest_a).parent
    root_b = Path(manifest_b).parent
    rows = []
    for year in years_a:
        a = _year_metrics(root_a, int(year))
        b = _year_metrics(root_b, int(year))
        for metric in a:
            va, vb = a[metric], b.get(metric)
            delta = vb - va if va is not None and vb is not None else None
            pct = (delta / va) if delta is not None and va not in (None, 0.0) else None
            rows.append(
                {
                    "year": int(year),
                    "metric": metric,
                    "value_a": "" if va is None else va,
                    "value_b": "" if vb is None else vb,
                    "delta": "" if delta is None else delta,
                    "pct_delta": "" if pct is None else pct,
                }
            )
    return pd.DataFrame(rows, columns=["year", "metric", "value_a", "value_b", "delta", "pct_delta"])


def report(manifest_path) -> str:
    """Human-readable per-year summary of a finished run."""
    manifest = read_manifest(manifest_path)
    root = Path(manifest_path).parent
    lines = [
        f"scenario: {manifest['scenario']}  seed: {manifest['global_seed']}  "
        f"years: {manifest['start_year']}-{manifest['end_year']}  zones: {manifest['zone_count']}"
    ]
    for year in sorted(manifest["years"]):
        m = _year_metrics(root, int(year))
        conv = pd.read_csv(root / str(year) / "assignment" / "convergence.csv")
        final_gaps = conv.groupby("period")["relative_gap"].last()
        worst = float(final_gaps.max()) if len(final_gaps) else 0.0
        mean_t = m["mean_trip_time_min"]
        lines.append(
            f"{year}: households={m['total_households']:.0f} jobs={m['total_jobs']:.0f} "
            f"veh_trips={m['vehicle_trips']:.1f} vmt={m['vmt']:.1f} vht={m['vht']:.2f} "
            f"energy_mj={m['energy_mj']:.0f} "
            f"mean_trip_min={'n/a' if mean_t is None else f'{mean_t:.2f}'} "
            f"worst_gap={worst:.2e}"
        )
    return "\n".join(lines)
