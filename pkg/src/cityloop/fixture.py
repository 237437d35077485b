"""Deterministic desk-scale scenario generator: 25 zones on a 5x5 grid,
80 nodes, 220 links, 2,000 households, 2,500 jobs, three simulated years.

Used by the test suite and as a quickstart dataset:
``python -m cityloop.fixture out/fixture`` then
``cityloop run out/fixture/config.ini``.
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .scenario_io import write_config, write_frame
from .types import DeveloperParams, RunSettings

N_ZONES = 25
GRID = 5
ZONE_SPACING_KM = 4.0

_ZONE_NODE_OFFSETS = ((-0.8, 0.0), (0.8, 0.6), (0.3, -0.9))
_DIAG_ZONES = (1, 7, 13, 19, 25)
_EXTRA_DIAG_PAIRS = (
    (1, 7), (2, 8), (3, 9), (4, 10), (6, 12), (7, 13),
    (8, 14), (9, 15), (11, 17), (12, 18), (13, 19),
)

# link class -> (speed km/h, capacity veh/h)
_LINK_CLASSES = {
    "local": (30.0, 600.0),
    "arterial": (50.0, 1200.0),
    "freeway": (90.0, 3600.0),
    "ramp": (60.0, 1800.0),
}


def zone_center(z: int):
    gx, gy = (z - 1) % GRID, (z - 1) // GRID
    return (ZONE_SPACING_KM * gx + 2.0, ZONE_SPACING_KM * gy + 2.0)


def _build_network():
    nodes = []
    for z in range(1, N_ZONES + 1):
        cx, cy = zone_center(z)
        for k, (dx, dy) in enumerate(_ZONE_NODE_OFFSETS, start=1):
            nodes.append((z * 10 + k, cx + dx, cy + dy, z))
    for i, z in enumerate(_DIAG_ZONES, start=1):
        cx, cy = zone_center(z)
        nodes.append((900 + i, cx + 0.5, cy - 0.5, 0))
    nodes_df = pd.DataFrame(nodes, columns=["node_id", "x", "y", "zone_id"])
    pos = {int(r.node_id): (r.x, r.y) for r in nodes_df.itertuples(index=False)}

    pairs = []  # (a, b, class)
    for z in range(1, N_ZONES + 1):
        pairs.append((z * 10 + 1, z * 10 + 2, "local"))
        pairs.append((z * 10 + 2, z * 10 + 3, "local"))
    for z in range(1, N_ZONES + 1):
        gx, gy = (z - 1) % GRID, (z - 1) // GRID
        if gx < GRID - 1:
            pairs.append((z * 10 + 2, (z + 1) * 10 + 1, "arterial"))
        if gy < GRID - 1:
            pairs.append((z * 10 + 3, (z + GRID) * 10 + 1, "arterial"))
    for i in range(1, len(_DIAG_ZONES)):
        pairs.append((900 + i, 901 + i, "freeway"))
    for i, z in enumerate(_DIAG_ZONES, start=1):
        pairs.append((900 + i, z * 10 + 1, "ramp"))
    for a, b in _EXTRA_DIAG_PAIRS:
        pairs.append((a * 10 + 3, b * 10 + 2, "arterial"))

    links = []
    link_id = 0
    for a, b, cls in pairs:
        speed, cap = _LINK_CLASSES[cls]
        ax, ay = pos[a]
        bx, by = pos[b]
        length = max(round(math.hypot(bx - ax, by - ay), 3), 0.3)
        fft = round(length / speed * 60.0, 4)
        for u, v in ((a, b), (b, a)):
            link_id += 1
            links.append((link_id, u, v, length, cap, fft, 0.15, 4.0))
    links_df = pd.DataFrame(
        links,
        columns=["link_id", "from_node", "to_node", "length", "capacity", "free_flow_time", "alpha", "beta"],
    )
    assert len(nodes_df) == 80 and len(links_df) == 220
    return nodes_df, links_df


def _zone_weights(rng):
    center = np.array(zone_center(13))
    w = np.empty(N_ZONES)
    for z in range(1, N_ZONES + 1):
        d = np.linalg.norm(np.array(zone_center(z)) - center)
        w[z - 1] = 1.0 + 2.5 * math.exp(-d / 6.0)
    w *= rng.uniform(0.8, 1.2, size=N_ZONES)
    return w / w.sum()


def _build_population(rng, n_households=2000, n_jobs=2500):
    hw = _zone_weights(rng)
    hh_zones = rng.choice(np.arange(1, N_ZONES + 1), size=n_households, p=hw)
    sizes = rng.choice([1, 2, 3, 4, 5], size=n_households, p=[0.28, 0.33, 0.18, 0.13, 0.08])
    incomes = np.round(np.clip(rng.lognormal(4.1, 0.5, size=n_households), 15.0, 400.0), 3)
    autos = rng.choice([0, 1, 2], size=n_households, p=[0.25, 0.5, 0.25])
    tenure = rng.integers(0, 30, size=n_households)
    households = pd.DataFrame(
        {
            "household_id": np.arange(1, n_households + 1, dtype=np.int64),
            "zone_id": hh_zones.astype(np.int64),
            "income": incomes,
            "size": sizes.astype(np.int64),
            "autos": autos.astype(np.int64),
            "tenure_years": tenure.astype(np.int64),
        }
    )

    rows = []
    pid = 0
    for hh_id, size in zip(households["household_id"], households["size"]):
        for k in range(size):
            pid += 1
            if k == 0:
                age = int(rng.integers(25, 71))
            else:
                age = int(rng.integers(3, 71))
            works = int(18 <= age <= 66 and rng.random() < 0.75)
            studies = int(works == 0 and 5 <= age <= 22)
            rows.append((pid, int(hh_id), age, works, studies, 0))
    persons = pd.DataFrame(
        rows,
        columns=["person_id", "household_id", "age", "is_worker", "is_student", "workplace_zone"],
    )

    jw = _zone_weights(rng)
    jw = jw**1.4
    jw /= jw.sum()
    job_zones = rng.choice(np.arange(1, N_ZONES + 1), size=n_jobs, p=jw)
    sectors = rng.choice(["retail", "office", "industrial"], size=n_jobs, p=[0.3, 0.45, 0.25])
    jobs = pd.DataFrame(
        {
            "job_id": np.arange(1, n_jobs + 1, dtype=np.int64),
            "zone_id": job_zones.astype(np.int64),
            "sector": sectors,
        }
    )
    return households, persons, jobs


def _build_zones(rng, households, jobs):
    hh_counts = households.groupby("zone_id").size().reindex(range(1, N_ZONES + 1), fill_value=0)
    job_counts = jobs.groupby("zone_id").size().reindex(range(1, N_ZONES + 1), fill_value=0)
    center = np.array(zone_center(13))
    prices = []
    areas = []
    for z in range(1, N_ZONES + 1):
        d = np.linalg.norm(np.array(zone_center(z)) - center)
        prices.append(round(max(120.0 + 160.0 * math.exp(-d / 8.0) + rng.normal(0, 12.0), 60.0), 2))
        areas.append(round(rng.uniform(80.0, 160.0), 1))
    return pd.DataFrame(
        {
            "zone_id": np.arange(1, N_ZONES + 1, dtype=np.int64),
            "area": areas,
            "max_residential_units": (hh_counts.to_numpy() * 2.5 + 20).astype(np.int64),
            "max_job_spaces": (job_counts.to_numpy() * 2.2 + 20).astype(np.int64),
            "avg_price": prices,
        }
    )


def default_specs(degenerate: bool = False) -> pd.DataFrame:
    rows = [
        ("hlc", "price", -0.008),
        ("hlc", "log_vacant", 1.0),
        ("hlc", "access_jobs", 0.0004),
        ("hlc", "income*price", -2e-05),
        ("elc", "price", -0.002),
        ("elc", "log_vacant_spaces", 1.0),
        ("elc", "access_jobs", 0.0002),
        ("workplace", "am_time", -0.08),
        ("workplace", "log1p_jobs", 1.0),
        ("auto_ownership", "d1", 0.8),
        ("auto_ownership", "d2", 0.2),
        ("auto_ownership", "income*autos", 0.006),
        ("auto_ownership", "hhsize*autos", 0.08),
        ("auto_ownership", "access_jobs*autos", -0.0002),
        ("nonmand_frequency", "d1", 0.3),
        ("nonmand_frequency", "d2", -0.6),
        ("nonmand_destination", "md_time", -0.07),
        ("nonmand_destination", "log1p_attraction", 0.9),
        ("tour_mode", "time", -0.06),
        ("tour_mode", "d_shared", -1.4),
        ("tour_mode", "d_transit", -0.9),
        ("tour_mode", "d_walk", -0.3),
        ("depart_work", "h06", 0.6),
        ("depart_work", "h07", 1.6),
        ("depart_work", "h08", 2.2),
        ("depart_work", "h09", 1.1),
        ("depart_work", "h10", 0.2),
        ("depart_other", "h09", 0.2),
        ("depart_other", "h10", 0.7),
        ("depart_other", "h11", 1.0),
        ("depart_other", "h12", 1.1),
        ("depart_other", "h13", 1.0),
        ("depart_other", "h14", 0.8),
        ("depart_other", "h15", 0.7),
        ("depart_other", "h16", 0.5),
        ("depart_other", "h17", 0.6),
        ("depart_other", "h18", 0.4),
        ("nonmand_duration", "d4", -0.1),
        ("trip_mode", "time", -0.06),
        ("trip_mode", "d_walk", -0.4),
        ("access_mode", "time", -0.06),
        ("access_mode", "d_shared", -1.4),
        ("access_mode", "d_transit", -0.9),
        ("access_mode", "d_walk", -0.3),
    ]
    if degenerate:
        cdap_rows = [("cdap", "dM", -50.0), ("cdap", "dN", -50.0)]
    else:
        cdap_rows = [
            ("cdap", "dM", -4.0),
            ("cdap", "is_worker*dM", 6.0),
            ("cdap", "is_student*dM", 5.0),
            ("cdap", "dN", -0.4),
        ]
    return pd.DataFrame(rows + cdap_rows, columns=["spec_name", "variable", "coefficient"])


def write_fixture(
    out_dir,
    seed: int = 7,
    name: str = "baseline",
    degenerate: bool = False,
    totals_scale: float = 1.0,
    growth_rate: float = 0.02,
    start_year: int = 2020,
    n_years: int = 3,
    units_per_build: int = 60,
    max_share_growth: float = 0.08,
    annual_move_rate: float = 0.15,
    global_seed: int = 42,
) -> Path:
    """Write a complete scenario directory; returns the config path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    nodes, links = _build_network()
    households, persons, jobs = _build_population(rng)
    zones = _build_zones(rng, households, jobs)

    years = list(range(start_year, start_year + n_years))
    hh_t, job_t = len(households), len(jobs)
    totals = []
    for i, year in enumerate(years):
        if degenerate:
            t = (year, hh_t, job_t)
        else:
            grown_hh = int(round(hh_t * (1 + growth_rate) ** i))
            grown_jobs = int(round(job_t * (1 + growth_rate) ** i))
            t = (year, int(round(grown_hh * totals_scale)), int(round(grown_jobs * totals_scale)))
        totals.append(t)
    control = pd.DataFrame(totals, columns=["year", "households", "jobs"])

    write_frame(out_dir / "zones.csv", zones)
    write_frame(out_dir / "nodes.csv", nodes)
    write_frame(out_dir / "links.csv", links)
    write_frame(out_dir / "households.csv", households)
    write_frame(out_dir / "persons.csv", persons)
    write_frame(out_dir / "jobs.csv", jobs)
    write_frame(out_dir / "control_totals.csv", control)
    write_frame(out_dir / "specs.csv", default_specs(degenerate))

    settings = RunSettings(
        name=name,
        global_seed=global_seed,
        start_year=start_year,
        end_year=years[-1],
        annual_move_rate=0.0 if degenerate else annual_move_rate,
        developer=DeveloperParams(50.0, units_per_build, max_share_growth),
    )
    config_path = out_dir / "config.ini"
    write_config(config_path, settings)
    return config_path


def main(argv=None):
    parser = argparse.ArgumentParser(description="generate the desk-scale demo scenario")
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--degenerate", action="store_true", help="zero growth, all-home days")
    args = parser.parse_args(argv)
    path = write_fixture(args.out_dir, seed=args.seed, degenerate=args.degenerate)
    print(path)


if __name__ == "__main__":
    main()
