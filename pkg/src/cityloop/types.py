"""Domain types shared by land use, demand and assignment."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from .errors import InvariantError, SchemaError

PERIODS = ("AM", "MD", "PM", "NT")
SKIM_MODES = ("auto", "transit", "walk")
TRIP_MODES = ("drive_alone", "shared", "transit", "walk")

#: hours (inclusive ranges) mapped to each period; NT catches the rest
DEFAULT_PERIOD_HOURS: Dict[str, Tuple[int, int]] = {
    "AM": (6, 9),
    "MD": (10, 14),
    "PM": (15, 18),
}


def period_of_hour(hour: int, period_hours=None) -> str:
    ranges = period_hours or DEFAULT_PERIOD_HOURS
    for period, (lo, hi) in ranges.items():
        if lo <= hour <= hi:
            return period
    return "NT"


def period_durations(period_hours=None) -> Dict[str, float]:
    """Length of each period in hours; NT absorbs the unassigned hours."""
    ranges = period_hours or DEFAULT_PERIOD_HOURS
    out = {p: float(hi - lo + 1) for p, (lo, hi) in ranges.items()}
    out["NT"] = 24.0 - sum(out.values())
    return out


@dataclass(frozen=True)
class UtilitySpec:
    """Named linear-in-parameters utility: V = sum(beta_k * x_k).

    A variable is either a bare column name resolved against the
    alternative attributes (falling back to the chooser's), or
    ``chooser_col*alt_col`` for an interaction of the two.
    """

    name: str
    terms: Tuple[Tuple[str, float], ...]

    def __post_init__(self):
        names = [v for v, _ in self.terms]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"spec '{self.name}': duplicate variable(s) {dup}")

    @property
    def variables(self) -> List[str]:
        return [v for v, _ in self.terms]

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([b for _, b in self.terms], dtype=float)

    def coefficient(self, variable: str) -> float:
        for v, b in self.terms:
            if v == variable:
                return b
        raise SchemaError(f"spec '{self.name}' has no variable '{variable}'")

    def with_coefficients(self, betas) -> "UtilitySpec":
        betas = np.asarray(betas, dtype=float)
        if betas.shape != (len(self.terms),):
            raise ValueError("coefficient vector length mismatch")
        return UtilitySpec(self.name, tuple((v, float(b)) for (v, _), b in zip(self.terms, betas)))


@dataclass
class Population:
    """Synthetic households, persons and jobs (zone_id 0 = unplaced)."""

    households: pd.DataFrame
    persons: pd.DataFrame
    jobs: pd.DataFrame

    def copy(self) -> "Population":
        return Population(self.households.copy(), self.persons.copy(), self.jobs.copy())

    def equals(self, other: "Population") -> bool:
        return (
            self.households.equals(other.households)
            and self.persons.equals(other.persons)
            and self.jobs.equals(other.jobs)
        )


class Network:
    """Directed road graph with per-link delay parameters and zone centroids.

    Nodes and links are kept in canonical (id-sorted) order; adjacency is a
    CSR-style star sorted by (from_node, to_node_id, link_id) so traversal
    order is deterministic.
    """

    def __init__(self, nodes: pd.DataFrame, links: pd.DataFrame):
        self.nodes = nodes.sort_values("node_id").reset_index(drop=True)
        self.links = links.sort_values("link_id").reset_index(drop=True)
        self._check_unique()

        self.node_ids = self.nodes["node_id"].to_numpy(dtype=np.int64)
        self._node_pos = {int(n): i for i, n in enumerate(self.node_ids)}

        self.link_ids = self.links["link_id"].to_numpy(dtype=np.int64)
        self.length = self.links["length"].to_numpy(dtype=float)
        self.capacity = self.links["capacity"].to_numpy(dtype=float)
        self.free_flow_time = self.links["free_flow_time"].to_numpy(dtype=float)
        self.alpha = self.links["alpha"].to_numpy(dtype=float)
        self.beta = self.links["beta"].to_numpy(dtype=float)

        self.from_idx = self._map_nodes(self.links["from_node"], "from_node")
        self.to_idx = self._map_nodes(self.links["to_node"], "to_node")
        self._check_links()

        # star adjacency, deterministic order
        to_node_ids = self.node_ids[self.to_idx]
        order = np.lexsort((self.link_ids, to_node_ids, self.from_idx))
        self.adj_links = order.astype(np.int64)
        counts = np.bincount(self.from_idx, minlength=self.n_nodes)
        self.adj_start = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

        self.zone_nodes: Dict[int, List[int]] = {}
        node_zone = self.nodes["zone_id"].to_numpy(dtype=np.int64)
        for nid, z in zip(self.node_ids, node_zone):
            if z > 0:
                self.zone_nodes.setdefault(int(z), []).append(int(nid))
        self.zone_centroids = {z: self._centroid(ns) for z, ns in sorted(self.zone_nodes.items())}
        self._check_connected()

    # -- construction helpers -------------------------------------------

    def _check_unique(self):
        if self.nodes["node_id"].duplicated().any():
            dup = int(self.nodes.loc[self.nodes["node_id"].duplicated(), "node_id"].iloc[0])
            raise InvariantError(f"duplicate node_id {dup}")
        if self.links["link_id"].duplicated().any():
            dup = int(self.links.loc[self.links["link_id"].duplicated(), "link_id"].iloc[0])
            raise InvariantError(f"duplicate link_id {dup}")

    def _map_nodes(self, col, label) -> np.ndarray:
        idx = np.empty(len(col), dtype=np.int64)
        for i, nid in enumerate(col.to_numpy(dtype=np.int64)):
            pos = self._node_pos.get(int(nid))
            if pos is None:
                lid = int(self.links["link_id"].iloc[i])
                raise InvariantError(f"link {lid}: {label} {nid} is not a known node")
            idx[i] = pos
        return idx

    def _check_links(self):
        for i in range(self.n_links):
            lid = int(self.link_ids[i])
            if self.from_idx[i] == self.to_idx[i]:
                raise InvariantError(f"link {lid}: from_node equals to_node")
            if not self.capacity[i] > 0:
                raise InvariantError(f"link {lid}: capacity must be > 0")
            if not self.free_flow_time[i] > 0:
                raise InvariantError(f"link {lid}: free_flow_time must be > 0")
            if self.alpha[i] < 0:
                raise InvariantError(f"link {lid}: alpha must be >= 0")
            if self.beta[i] < 1:
                raise InvariantError(f"link {lid}: beta must be >= 1")

    def _centroid(self, node_ids: List[int]) -> int:
        """Center-most node: minimizes summed distance to the zone's nodes."""
        if len(node_ids) == 1:
            return node_ids[0]
        pos = self.nodes.set_index("node_id").loc[node_ids, ["x", "y"]].to_numpy(dtype=float)
        d = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2))
        sums = d.sum(axis=1)
        best = np.flatnonzero(sums == sums.min())
        return int(min(node_ids[i] for i in best))

    def _reachable(self, start_idx: int, forward: bool) -> np.ndarray:
        seen = np.zeros(self.n_nodes, dtype=bool)
        seen[start_idx] = True
        stack = [start_idx]
        heads = self.to_idx if forward else self.from_idx
        tails = self.from_idx if forward else self.to_idx
        # adjacency by tail
        order = np.argsort(tails, kind="stable")
        starts = np.concatenate(([0], np.cumsum(np.bincount(tails, minlength=self.n_nodes))))
        while stack:
            u = stack.pop()
            for k in order[starts[u]:starts[u + 1]]:
                v = heads[k]
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return seen

    def _check_connected(self):
        if not self.zone_centroids:
            raise InvariantError("network has no zone centroids")
        first = self.node_pos(next(iter(self.zone_centroids.values())))
        fwd = self._reachable(first, forward=True)
        bwd = self._reachable(first, forward=False)
        for z, nid in self.zone_centroids.items():
            p = self.node_pos(nid)
            if not (fwd[p] and bwd[p]):
                raise InvariantError(f"zone {z}: centroid node {nid} not strongly connected")

    # -- accessors -------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_links(self) -> int:
        return len(self.link_ids)

    def node_pos(self, node_id: int) -> int:
        return self._node_pos[int(node_id)]

    def centroid_pos(self, zone_id: int) -> int:
        return self.node_pos(self.zone_centroids[int(zone_id)])

    def equals(self, other: "Network") -> bool:
        return self.nodes.equals(other.nodes) and self.links.equals(other.links)


class SkimSet:
    """Per-mode, per-period dense zone-to-zone travel times in minutes."""

    def __init__(self, zone_ids, matrices: Dict[Tuple[str, str], np.ndarray]):
        self.zone_ids = np.asarray(sorted(int(z) for z in zone_ids), dtype=np.int64)
        self._zpos = {int(z): i for i, z in enumerate(self.zone_ids)}
        self.matrices = {k: np.asarray(m, dtype=float) for k, m in matrices.items()}
        n = len(self.zone_ids)
        for (mode, period), m in self.matrices.items():
            if m.shape != (n, n):
                raise InvariantError(f"skim {mode}/{period}: shape {m.shape} != ({n}, {n})")
            if not np.all(np.isfinite(m)):
                raise InvariantError(f"skim {mode}/{period}: non-finite values")
            if not np.all(m > 0):
                raise InvariantError(f"skim {mode}/{period}: non-positive values")

    def zone_index(self, zone_id: int) -> int:
        return self._zpos[int(zone_id)]

    def matrix(self, mode: str, period: str) -> np.ndarray:
        return self.matrices[(mode, period)]

    def time(self, mode: str, period: str, origin_zone: int, destination_zone: int) -> float:
        return float(
            self.matrices[(mode, period)][self.zone_index(origin_zone), self.zone_index(destination_zone)]
        )

    def equals(self, other: "SkimSet") -> bool:
        if not np.array_equal(self.zone_ids, other.zone_ids):
            return False
        if set(self.matrices) != set(other.matrices):
            return False
        return all(np.array_equal(m, other.matrices[k]) for k, m in self.matrices.items())


class TripTable:
    """Vehicle trips by (origin zone, destination zone, period)."""

    COLUMNS = ["origin", "destination", "period", "vehicle_trips"]

    def __init__(self, df: pd.DataFrame):
        df = df[self.COLUMNS].copy()
        df["origin"] = df["origin"].astype(np.int64)
        df["destination"] = df["destination"].astype(np.int64)
        df["period"] = df["period"].astype(str)
        df["vehicle_trips"] = df["vehicle_trips"].astype(float)
        if (df["vehicle_trips"] < 0).any():
            raise InvariantError("trip table: negative vehicle_trips")
        bad = ~df["period"].isin(PERIODS)
        if bad.any():
            raise InvariantError(f"trip table: unknown period '{df.loc[bad, 'period'].iloc[0]}'")
        if df.duplicated(["origin", "destination", "period"]).any():
            raise InvariantError("trip table: duplicate (origin, destination, period)")
        order = {p: i for i, p in enumerate(PERIODS)}
        df = df.sort_values(
            ["period", "origin", "destination"],
            key=lambda c: c.map(order) if c.name == "period" else c,
        ).reset_index(drop=True)
        self.df = df

    @classmethod
    def empty(cls) -> "TripTable":
        return cls(pd.DataFrame(columns=cls.COLUMNS))

    def total(self) -> float:
        return float(self.df["vehicle_trips"].sum())

    def period_slice(self, period: str) -> pd.DataFrame:
        return self.df[self.df["period"] == period]

    def period_matrix(self, period: str, zone_ids) -> np.ndarray:
        zone_ids = np.asarray(sorted(int(z) for z in zone_ids), dtype=np.int64)
        zpos = {int(z): i for i, z in enumerate(zone_ids)}
        m = np.zeros((len(zone_ids), len(zone_ids)), dtype=float)
        sl = self.period_slice(period)
        for o, d, v in zip(sl["origin"], sl["destination"], sl["vehicle_trips"]):
            m[zpos[int(o)], zpos[int(d)]] += float(v)
        return m

    def equals(self, other: "TripTable") -> bool:
        return self.df.equals(other.df)


@dataclass
class DeveloperParams:
    price_to_build_threshold: float
    units_per_build: int
    max_share_growth_per_zone: float

    def validate(self):
        if not (
            self.price_to_build_threshold > 0
            and self.units_per_build > 0
            and self.max_share_growth_per_zone > 0
        ):
            raise SchemaError("developer parameters must all be > 0")


@dataclass
class RunSettings:
    """Scenario-wide knobs; parsed from the sectioned config file."""

    name: str = "scenario"
    global_seed: int = 42
    start_year: int = 2020
    end_year: int = 2022
    data_dir: str = field(default=".", compare=False)
    # land use
    annual_move_rate: float = 0.15
    developer: DeveloperParams = field(
        default_factory=lambda: DeveloperParams(50.0, 40, 0.25)
    )
    mc_gamma: float = 0.5
    mc_tol: float = 0.05
    mc_max_iters: int = 50
    # demand
    occupancy_factor: float = 2.0
    walk_threshold_min: float = 30.0
    walk_speed_kmh: float = 5.0
    cdap_max_group: int = 5
    cdap_joint_coeff: float = 0.4
    workplace_sample_size: int = 25
    destination_sample_size: int = 25
    period_hours: Dict[str, Tuple[int, int]] = field(
        default_factory=lambda: dict(DEFAULT_PERIOD_HOURS)
    )
    # assignment
    gap_tol: float = 1e-4
    fw_max_iters: int = 200
    threads: int = 1
    node_mapping: str = "centroid"  # or "spread"
    access_threshold_min: float = 30.0
    transit_time_factor: float = 1.7
    transit_wait_min: float = 10.0

    def validate(self):
        if self.end_year < self.start_year:
            raise SchemaError("end_year must be >= start_year")
        if not 0.0 <= self.annual_move_rate <= 1.0:
            raise SchemaError("annual_move_rate must be in [0, 1]")
        if self.node_mapping not in ("centroid", "spread"):
            raise SchemaError(f"unknown node_mapping '{self.node_mapping}'")
        if self.gap_tol <= 0 or self.fw_max_iters < 1:
            raise SchemaError("assignment tolerances must be positive")
        if self.threads < 1:
            raise SchemaError("threads must be >= 1")
        self.developer.validate()

    @property
    def years(self) -> List[int]:
        return list(range(self.start_year, self.end_year + 1))


@dataclass
class ScenarioBundle:
    """Everything a run needs, fully validated and cross-referenced."""

    zones: pd.DataFrame
    network: Network
    population: Population
    specs: Dict[str, UtilitySpec]
    control_totals: pd.DataFrame  # indexed by year: households, jobs
    settings: RunSettings

    def zone_ids(self) -> np.ndarray:
        return self.zones["zone_id"].to_numpy(dtype=np.int64)

    def copy(self) -> "ScenarioBundle":
        return ScenarioBundle(
            zones=self.zones.copy(),
            network=self.network,
            population=self.population.copy(),
            specs=dict(self.specs),
            control_totals=self.control_totals.copy(),
            settings=replace(self.settings),
        )

    def equals(self, other: "ScenarioBundle") -> bool:
        return (
            self.zones.equals(other.zones)
            and self.network.equals(other.network)
            and self.population.equals(other.population)
            and self.specs == other.specs
            and self.control_totals.equals(other.control_totals)
            and self.settings == other.settings
        )
