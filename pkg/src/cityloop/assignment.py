"""Static user-equilibrium assignment by Frank-Wolfe, plus skim
extraction, accessibility measures and the transportation-energy estimate.

Each descent iteration solves the all-or-nothing subproblem at current
link times (one shortest-path tree per origin, parallelizable with a
deterministic reduction order) and takes an exact bisection line search on
the Beckmann objective.  The relative gap is
(sum x*t - sum y*t) / sum x*t with y the all-or-nothing flows.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .choice import logsum as mnl_logsum
from .errors import InvariantError, UnreachableODError
from .types import Network, PERIODS, RunSettings, SkimSet, TRIP_MODES, UtilitySpec

INTRAZONAL_FLOOR_MIN = 1.0

#: documented energy intensity by average link speed (km/h -> MJ per veh-km)
ENERGY_RATE_TABLE: Tuple[Tuple[float, float], ...] = (
    (20.0, 3.2),
    (40.0, 2.6),
    (60.0, 2.2),
    (80.0, 2.0),
    (100.0, 2.1),
    (float("inf"), 2.4),
)


def bpr_time(free_flow_time, alpha, beta, capacity, flow):
    """Volume-delay: t = t0 * (1 + alpha * (flow / capacity) ** beta)."""
    flow = np.asarray(flow, dtype=float)
    return free_flow_time * (1.0 + alpha * (flow / capacity) ** beta)


def link_times(network: Network, flows: np.ndarray) -> np.ndarray:
    return bpr_time(
        network.free_flow_time, network.alpha, network.beta, network.capacity, flows
    )


def beckmann(network: Network, flows: np.ndarray) -> float:
    """Objective whose minimum over feasible flows is user equilibrium."""
    x = np.asarray(flows, dtype=float)
    t0, a, b, c = network.free_flow_time, network.alpha, network.beta, network.capacity
    return float(np.sum(t0 * x * (1.0 + a / (b + 1.0) * (x / c) ** b)))


def shortest_paths(network: Network, times: np.ndarray, origin_node: int):
    """One-to-all label-setting shortest paths on current link times.

    Returns (dist, pred_link) indexed by node position; unreachable nodes
    keep dist = +inf and pred_link = -1.  Ties prefer the predecessor with
    the smaller node_id, then the smaller link_id.
    """
    n = network.n_nodes
    dist = np.full(n, np.inf)
    pred_link = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    src = network.node_pos(origin_node)
    dist[src] = 0.0
    heap = [(0.0, int(network.node_ids[src]), src)]
    adj_links, adj_start = network.adj_links, network.adj_start
    to_idx, node_ids, link_ids = network.to_idx, network.node_ids, network.link_ids
    while heap:
        d, _, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for k in adj_links[adj_start[u] : adj_start[u + 1]]:
            v = to_idx[k]
            if done[v]:
                continue
            nd = d + times[k]
            if nd < dist[v]:
                dist[v] = nd
                pred_link[v] = k
                heapq.heappush(heap, (nd, int(node_ids[v]), v))
            elif nd == dist[v] and pred_link[v] >= 0:
                old = pred_link[v]
                new_key = (int(node_ids[network.from_idx[k]]), int(link_ids[k]))
                old_key = (int(node_ids[network.from_idx[old]]), int(link_ids[old]))
                if new_key < old_key:
                    pred_link[v] = k
    return dist, pred_link


def _zone_node_weights(network: Network, mapping: str) -> Dict[int, List[Tuple[int, float]]]:
    """How each zone's demand spreads over network nodes.

    "centroid" puts everything on the center-most node; "spread" splits it
    uniformly across all of the zone's nodes.
    """
    out: Dict[int, List[Tuple[int, float]]] = {}
    for zone, nodes in network.zone_nodes.items():
        if mapping == "centroid":
            out[zone] = [(network.zone_centroids[zone], 1.0)]
        elif mapping == "spread":
            w = 1.0 / len(nodes)
            out[zone] = [(nid, w) for nid in sorted(nodes)]
        else:
            raise InvariantError(f"unknown node mapping '{mapping}'")
    return out


def _node_demand(
    network: Network,
    od_matrix: np.ndarray,
    zone_ids: np.ndarray,
    mapping: str,
) -> Dict[int, Dict[int, Tuple[float, Tuple[int, int]]]]:
    """Zone OD demand expanded to node OD demand.

    Returns {origin_node: {dest_node: (demand, (o_zone, d_zone))}} with the
    zone pair kept for error messages.  Intrazonal cells never touch the
    network and are skipped.
    """
    weights = _zone_node_weights(network, mapping)
    zlist = [int(z) for z in zone_ids]
    demand: Dict[int, Dict[int, Tuple[float, Tuple[int, int]]]] = {}
    rows, cols = np.nonzero(od_matrix)
    for i, j in zip(rows, cols):
        if i == j:
            continue
        oz, dz = zlist[i], zlist[j]
        for o_node, ow in weights[oz]:
            for d_node, dw in weights[dz]:
                if o_node == d_node:
                    continue
                v = float(od_matrix[i, j]) * ow * dw
                if v <= 0:
                    continue
                slot = demand.setdefault(o_node, {})
                prev = slot.get(d_node)
                slot[d_node] = (v + (prev[0] if prev else 0.0), (oz, dz))
    return demand


def _load_origin(network, times, o_node, dests) -> np.ndarray:
    y = np.zeros(network.n_links)
    dist, pred_link = shortest_paths(network, times, o_node)
    o_pos = network.node_pos(o_node)
    for d_node, (value, (oz, dz)) in dests.items():
        d_pos = network.node_pos(d_node)
        if not np.isfinite(dist[d_pos]):
            raise UnreachableODError(oz, dz)
        p = d_pos
        while p != o_pos:
            k = pred_link[p]
            y[k] += value
            p = network.from_idx[k]
    return y


def all_or_nothing(
    network: Network,
    times: np.ndarray,
    od_matrix: np.ndarray,
    zone_ids: np.ndarray,
    mapping: str = "centroid",
    threads: int = 1,
) -> np.ndarray:
    """Load every OD demand onto its current shortest path.

    Trees are computed per origin (optionally in a thread pool); the
    per-origin flow vectors are reduced in ascending origin-node order, so
    the result is bit-identical however many workers run.
    """
    demand = _node_demand(network, od_matrix, zone_ids, mapping)
    origins = sorted(demand)
    y = np.zeros(network.n_links)
    if not origins:
        return y
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda o: _load_origin(network, times, o, demand[o]), origins))
    else:
        parts = [_load_origin(network, times, o, demand[o]) for o in origins]
    for part in parts:  # deterministic ordered reduction
        y += part
    return y


def line_search(network: Network, x: np.ndarray, y: np.ndarray, tol: float = 1e-8) -> float:
    """Exact step: the root of g(l) = sum t(x + l d) * d over [0, 1].

    g is the directional derivative of the Beckmann objective along
    d = y - x, nondecreasing in l by convexity; bisection to ``tol``.
    """
    d = y - x
    if not np.any(d):
        return 0.0

    def g(lam: float) -> float:
        return float(np.dot(link_times(network, x + lam * d), d))

    g0, g1 = g(0.0), g(1.0)
    if g0 >= 0.0:
        return 0.0
    if g1 <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class AssignmentResult:
    period: str
    flows: np.ndarray
    times: np.ndarray
    iterations: int
    gaps: List[float] = field(default_factory=list)

    @property
    def relative_gap(self) -> float:
        return self.gaps[-1] if self.gaps else 0.0


def frank_wolfe_ue(
    network: Network,
    od_matrix: np.ndarray,
    zone_ids: np.ndarray,
    period: str = "AM",
    gap_tol: float = 1e-4,
    max_iters: int = 200,
    mapping: str = "centroid",
    threads: int = 1,
) -> AssignmentResult:
    """Descend to user equilibrium for one period's demand.

    Starts from the all-or-nothing loading at free flow (the empty network
    is infeasible, so the first step is the full jump to that loading) and
    then alternates all-or-nothing directions with exact line search until
    the relative gap meets ``gap_tol`` or ``max_iters`` is hit.
    """
    if od_matrix.sum() <= 0:
        t0 = network.free_flow_time.copy()
        return AssignmentResult(period, np.zeros(network.n_links), t0, 0, [0.0])

    x = all_or_nothing(
        network, network.free_flow_time, od_matrix, zone_ids, mapping, threads
    )
    gaps: List[float] = []
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        times = link_times(network, x)
        y = all_or_nothing(network, times, od_matrix, zone_ids, mapping, threads)
        cx = float(np.dot(x, times))
        cy = float(np.dot(y, times))
        gap = (cx - cy) / cx
        if -1e-12 < gap < 0.0:  # guard float noise when x is already optimal
            gap = 0.0
        gaps.append(gap)
        if gap <= gap_tol:
            break
        lam = line_search(network, x, y)
        x = x + lam * (y - x)
    times = link_times(network, x)
    return AssignmentResult(period, x, times, iterations, gaps)


# ---------------------------------------------------------------------------
# skims


def _centroid_time_matrix(network: Network, times: np.ndarray, zone_ids: np.ndarray) -> np.ndarray:
    """Shortest-path minutes between every pair of zone centroids."""
    n = len(zone_ids)
    out = np.zeros((n, n))
    pos = [network.centroid_pos(int(z)) for z in zone_ids]
    for i, z in enumerate(zone_ids):
        dist, _ = shortest_paths(network, times, network.zone_centroids[int(z)])
        for j in range(n):
            if i == j:
                continue
            d = dist[pos[j]]
            if not np.isfinite(d):
                raise UnreachableODError(int(z), int(zone_ids[j]))
            out[i, j] = d
    return out


def _apply_intrazonal(matrix: np.ndarray) -> np.ndarray:
    """Diagonal rule: half the time to the nearest other zone, floor 1.0."""
    out = matrix.copy()
    n = out.shape[0]
    for i in range(n):
        off = np.delete(out[i], i)
        base = 0.5 * off.min() if len(off) else INTRAZONAL_FLOOR_MIN
        out[i, i] = max(base, INTRAZONAL_FLOOR_MIN)
    return out


def extract_skims(
    network: Network,
    results: Dict[str, AssignmentResult],
    zone_ids: np.ndarray,
    settings: RunSettings,
) -> SkimSet:
    """Congested auto skims per period plus derived transit and walk times.

    Only autos are assigned; transit is a fixed transform of the auto time
    (factor plus wait) and walk converts network distance at walking speed.
    """
    zone_ids = np.asarray(sorted(int(z) for z in zone_ids), dtype=np.int64)
    matrices: Dict[Tuple[str, str], np.ndarray] = {}
    walk_minutes = _apply_intrazonal(
        _centroid_time_matrix(network, network.length, zone_ids) / settings.walk_speed_kmh * 60.0
    )
    for period in PERIODS:
        result = results[period]
        auto = _apply_intrazonal(_centroid_time_matrix(network, result.times, zone_ids))
        matrices[("auto", period)] = auto
        matrices[("transit", period)] = (
            settings.transit_time_factor * auto + settings.transit_wait_min
        )
        matrices[("walk", period)] = walk_minutes
    return SkimSet(zone_ids, matrices)


def free_flow_skims(network: Network, zone_ids: np.ndarray, settings: RunSettings) -> SkimSet:
    """Skims of the empty network (bootstraps the first simulated year)."""
    empty = {
        p: AssignmentResult(p, np.zeros(network.n_links), network.free_flow_time.copy(), 0, [0.0])
        for p in PERIODS
    }
    return extract_skims(network, empty, zone_ids, settings)


# ---------------------------------------------------------------------------
# accessibility


def accessibility(
    zones: pd.DataFrame,
    skims: SkimSet,
    zone_jobs: pd.Series,
    access_spec: UtilitySpec,
    settings: RunSettings,
) -> pd.DataFrame:
    """Zone accessibility: cumulative jobs within the travel-time threshold
    (AM auto) and the jobs-weighted mode-choice logsum."""
    zone_ids = skims.zone_ids
    jobs = zone_jobs.reindex(zone_ids).fillna(0).to_numpy(dtype=float)
    auto = skims.matrix("auto", "AM")
    cumulative = ((auto <= settings.access_threshold_min) * jobs[None, :]).sum(axis=1)

    n = len(zone_ids)
    times = np.stack(
        [
            auto,
            auto,
            skims.matrix("transit", "AM"),
            skims.matrix("walk", "AM"),
        ],
        axis=2,
    )  # (n, n, modes) in TRIP_MODES order
    v = np.zeros_like(times)
    for var, beta in access_spec.terms:
        if var == "time":
            v += beta * times
        elif var in ("d_shared", "d_transit", "d_walk"):
            k = TRIP_MODES.index(var[2:])
            v[:, :, k] += beta
        else:
            raise InvariantError(f"access spec variable '{var}' not supported")
    ls = mnl_logsum(v.reshape(n * n, len(TRIP_MODES))).reshape(n, n)
    weighted = (ls * jobs[None, :]).sum(axis=1)

    return pd.DataFrame(
        {
            "zone_id": zone_ids.astype(np.int64),
            "access_jobs": cumulative,
            "access_logsum": weighted,
        }
    )


# ---------------------------------------------------------------------------
# energy


def _energy_rate(speed_kmh: np.ndarray) -> np.ndarray:
    rate = np.empty_like(speed_kmh)
    remaining = np.ones_like(speed_kmh, dtype=bool)
    for ceiling, value in ENERGY_RATE_TABLE:
        mask = remaining & (speed_kmh < ceiling)
        rate[mask] = value
        remaining &= ~mask
    return rate


def energy_estimate(
    network: Network,
    results: Dict[str, AssignmentResult],
    period_hours: Dict[str, float],
) -> pd.DataFrame:
    """Daily VMT (veh-km), VHT (veh-h) and energy (MJ) per period.

    Link flows are rates (veh/h), so each period's totals scale by its
    duration.  Energy applies the speed-binned intensity table to VMT.
    """
    rows = []
    for period in PERIODS:
        result = results[period]
        hours = period_hours[period]
        x = result.flows
        vmt = float(np.dot(x, network.length)) * hours
        vht = float(np.dot(x, result.times)) / 60.0 * hours
        speed = np.divide(
            network.length,
            result.times / 60.0,
            out=np.zeros_like(network.length),
            where=result.times > 0,
        )
        energy = float(np.dot(x * network.length, _energy_rate(speed))) * hours
        rows.append((period, vmt, vht, energy))
    return pd.DataFrame(rows, columns=["period", "vmt", "vht", "energy_mj"])
