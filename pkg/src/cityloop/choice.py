"""Multinomial logit machinery: probabilities, logsums, sampling,
Monte Carlo selection, constrained choice and market clearing.

Probabilities follow the standard logit form P_i = exp(V_i) / sum_j exp(V_j)
over available alternatives, computed with a max-shift so arbitrarily large
utilities stay finite.  The Gumbel scale is fixed to 1; coefficients absorb
any rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np
import pandas as pd

from .errors import EmptyChoiceSetError, InvariantError, SchemaError
from .streams import RandomStream
from .types import UtilitySpec

PROB_SUM_TOL = 1e-12


@dataclass
class ChoiceSet:
    """Alternatives offered to one chooser, with attributes and availability."""

    chooser_id: int
    alt_ids: np.ndarray
    attrs: Dict[str, np.ndarray]
    availability: np.ndarray

    def __post_init__(self):
        self.alt_ids = np.asarray(self.alt_ids, dtype=np.int64)
        self.availability = np.asarray(self.availability, dtype=bool)
        n = len(self.alt_ids)
        if self.availability.shape != (n,):
            raise ValueError("availability length mismatch")
        for name, col in self.attrs.items():
            col = np.asarray(col, dtype=float)
            if col.shape != (n,):
                raise ValueError(f"attribute '{name}' length mismatch")
            self.attrs[name] = col
        if not self.availability.any():
            raise EmptyChoiceSetError(f"chooser {self.chooser_id}: no available alternative")

    @classmethod
    def from_frame(cls, chooser_id: int, frame: pd.DataFrame, availability=None) -> "ChoiceSet":
        """Build from a DataFrame indexed by alternative id."""
        avail = np.ones(len(frame), dtype=bool) if availability is None else availability
        return cls(
            chooser_id=chooser_id,
            alt_ids=frame.index.to_numpy(dtype=np.int64),
            attrs={c: frame[c].to_numpy(dtype=float) for c in frame.columns},
            availability=avail,
        )

    def position(self, alt_id: int) -> int:
        hits = np.flatnonzero(self.alt_ids == int(alt_id))
        if len(hits) == 0:
            raise KeyError(f"alternative {alt_id} not in choice set")
        return int(hits[0])


def _split_variable(variable: str):
    if "*" in variable:
        left, right = variable.split("*", 1)
        if not left or not right or "*" in right:
            raise SchemaError(f"malformed interaction variable '{variable}'")
        return left, right
    return None, variable


def design_matrix(variables, chooser: Mapping[str, float], choice_set: ChoiceSet) -> np.ndarray:
    """Per-alternative values of each variable, shape (n_alts, n_vars)."""
    n = len(choice_set.alt_ids)
    out = np.empty((n, len(variables)), dtype=float)
    for k, var in enumerate(variables):
        ccol, acol = _split_variable(var)
        if ccol is not None:
            if ccol not in chooser:
                raise SchemaError(f"variable '{var}': chooser attribute '{ccol}' missing")
            if acol not in choice_set.attrs:
                raise SchemaError(f"variable '{var}': alternative attribute '{acol}' missing")
            out[:, k] = float(chooser[ccol]) * choice_set.attrs[acol]
        elif acol in choice_set.attrs:
            out[:, k] = choice_set.attrs[acol]
        elif acol in chooser:
            out[:, k] = float(chooser[acol])
        else:
            raise SchemaError(f"variable '{var}' not resolvable for chooser {choice_set.chooser_id}")
    return out


def systematic_utility(spec: UtilitySpec, chooser: Mapping[str, float], choice_set: ChoiceSet) -> np.ndarray:
    """V_i for every alternative in the set."""
    x = design_matrix(spec.variables, chooser, choice_set)
    v = x @ spec.coefficients
    avail = choice_set.availability
    if not np.all(np.isfinite(v[avail])):
        raise InvariantError(f"spec '{spec.name}': non-finite utility for an available alternative")
    return v


def utility_matrix(spec: UtilitySpec, choosers: pd.DataFrame, alternatives: pd.DataFrame) -> np.ndarray:
    """V for every (chooser, alternative) pair, shape (n_choosers, n_alts).

    All choosers share the alternative table; interactions become outer
    products, so this is the vectorized path used by the location models.
    """
    n, m = len(choosers), len(alternatives)
    v = np.zeros((n, m), dtype=float)
    for var, beta in spec.terms:
        ccol, acol = _split_variable(var)
        if ccol is not None:
            if ccol not in choosers.columns:
                raise SchemaError(f"variable '{var}': chooser attribute '{ccol}' missing")
            if acol not in alternatives.columns:
                raise SchemaError(f"variable '{var}': alternative attribute '{acol}' missing")
            v += beta * np.outer(
                choosers[ccol].to_numpy(dtype=float), alternatives[acol].to_numpy(dtype=float)
            )
        elif acol in alternatives.columns:
            v += beta * alternatives[acol].to_numpy(dtype=float)[None, :]
        elif acol in choosers.columns:
            v += beta * choosers[acol].to_numpy(dtype=float)[:, None]
        else:
            raise SchemaError(f"variable '{var}' not resolvable")
    return v


def mnl_probabilities(v: np.ndarray, availability: Optional[np.ndarray] = None) -> np.ndarray:
    """Logit probabilities over available alternatives (rows sum to 1).

    Accepts a vector or a (choosers x alternatives) matrix; the max of each
    row is subtracted before exponentiation so the result is invariant to
    adding a constant to all utilities.
    """
    v = np.asarray(v, dtype=float)
    one_dim = v.ndim == 1
    v2 = v[None, :] if one_dim else v
    if availability is None:
        avail = np.ones_like(v2, dtype=bool)
    else:
        avail = np.asarray(availability, dtype=bool)
        avail = avail[None, :] if avail.ndim == 1 else avail
        avail = np.broadcast_to(avail, v2.shape)
    if not avail.any(axis=1).all():
        raise EmptyChoiceSetError("a chooser has no available alternative")
    shifted = np.where(avail, v2, -np.inf)
    vmax = shifted.max(axis=1, keepdims=True)
    e = np.exp(shifted - vmax, where=avail, out=np.zeros_like(v2, dtype=float))
    p = e / e.sum(axis=1, keepdims=True)
    return p[0] if one_dim else p


def logsum(v: np.ndarray, availability: Optional[np.ndarray] = None):
    """ln sum(exp(V_j)) over available alternatives (the composite utility)."""
    v = np.asarray(v, dtype=float)
    one_dim = v.ndim == 1
    v2 = v[None, :] if one_dim else v
    if availability is None:
        avail = np.ones_like(v2, dtype=bool)
    else:
        avail = np.asarray(availability, dtype=bool)
        avail = avail[None, :] if avail.ndim == 1 else avail
        avail = np.broadcast_to(avail, v2.shape)
    if not avail.any(axis=1).all():
        raise EmptyChoiceSetError("logsum of an empty choice set")
    shifted = np.where(avail, v2, -np.inf)
    vmax = shifted.max(axis=1, keepdims=True)
    e = np.exp(shifted - vmax, where=avail, out=np.zeros_like(v2, dtype=float))
    out = vmax[:, 0] + np.log(e.sum(axis=1))
    return float(out[0]) if one_dim else out


def monte_carlo_choice(p: np.ndarray, u) -> np.ndarray:
    """Pick the alternative whose cumulative interval [lo, hi) contains u.

    Intervals are ordered by alternative position.  For a probability
    matrix, ``u`` must supply one uniform per row.
    """
    p = np.asarray(p, dtype=float)
    one_dim = p.ndim == 1
    p2 = p[None, :] if one_dim else p
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    if uu.shape != (p2.shape[0],):
        raise ValueError("one uniform draw required per probability row")
    cum = np.cumsum(p2, axis=1)
    idx = np.empty(p2.shape[0], dtype=np.int64)
    for i in range(p2.shape[0]):
        j = int(np.searchsorted(cum[i], uu[i], side="right"))
        if j >= p2.shape[1]:  # guard the u ~ 1.0, cum[-1] < 1.0 rounding corner
            j = int(np.flatnonzero(p2[i] > 0)[-1])
        idx[i] = j
    return int(idx[0]) if one_dim else idx


def sample_alternatives(
    universe: pd.DataFrame,
    n_sample: int,
    stream: RandomStream,
    must_include: Optional[int] = None,
    chooser_id: int = 0,
) -> ChoiceSet:
    """Uniform sample without replacement from an alternative table.

    ``universe`` is indexed by alternative id.  When ``must_include`` is
    given (the observed choice, for estimation) it is always part of the
    sample.  Alternatives come back in universe order so downstream
    cumulative-probability draws are deterministic.
    """
    if n_sample < 1:
        raise ValueError("n_sample must be >= 1")
    n_univ = len(universe)
    if n_univ == 0:
        raise ValueError("empty universe")
    ids = universe.index.to_numpy(dtype=np.int64)
    if must_include is not None and int(must_include) not in set(int(i) for i in ids):
        raise KeyError(f"must_include {must_include} not in universe")
    k = min(n_sample, n_univ)
    if k == n_univ:
        take = np.arange(n_univ)
    else:
        pool = np.arange(n_univ)
        forced = None
        if must_include is not None:
            forced = int(np.flatnonzero(ids == int(must_include))[0])
            pool = pool[pool != forced]
        draw = k if forced is None else k - 1
        # partial Fisher-Yates driven by the stream
        u = stream.uniforms(draw)
        for i in range(draw):
            j = i + int(u[i] * (len(pool) - i))
            pool[i], pool[j] = pool[j], pool[i]
        take = pool[:draw]
        if forced is not None:
            take = np.append(take, forced)
        take = np.sort(take)
    frame = universe.iloc[take]
    return ChoiceSet.from_frame(chooser_id, frame)


def constrained_choice_set(choice_set: ChoiceSet, predicate, chooser: Optional[Mapping] = None) -> ChoiceSet:
    """Clear availability where ``predicate(chooser, alternative)`` is false.

    The alternative is presented as a dict of its attributes plus its id.
    Raises EmptyChoiceSetError when nothing remains (the caller decides the
    fallback for such an infeasible chooser).
    """
    avail = choice_set.availability.copy()
    for i in range(len(choice_set.alt_ids)):
        if not avail[i]:
            continue
        alt = {name: col[i] for name, col in choice_set.attrs.items()}
        alt["alternative_id"] = int(choice_set.alt_ids[i])
        if not predicate(chooser, alt):
            avail[i] = False
    if not avail.any():
        raise EmptyChoiceSetError(f"chooser {choice_set.chooser_id}: constraint removed every alternative")
    return ChoiceSet(choice_set.chooser_id, choice_set.alt_ids.copy(), dict(choice_set.attrs), avail)


@dataclass
class MarketClearingResult:
    placements: pd.Series  # chooser_id -> submarket_id
    prices: pd.Series  # submarket_id -> final price
    demand: pd.Series  # expected demand at final prices
    iterations: int
    converged: bool


def capacity_placement(
    exp_v: np.ndarray,
    chooser_ids: np.ndarray,
    submarket_ids: np.ndarray,
    supply: np.ndarray,
    stream: RandomStream,
) -> pd.Series:
    """Sequentially place choosers in random order, never exceeding supply.

    ``exp_v`` holds exp(utility) per (chooser, submarket); full submarkets
    drop out of later choosers' sets.  Order and draws come from one stream
    so the pass is deterministic.
    """
    n = len(chooser_ids)
    remaining = supply.astype(np.int64).copy()
    if remaining.sum() < n:
        raise InvariantError(
            f"insufficient supply: {int(remaining.sum())} slots for {n} choosers"
        )
    order = stream.permutation(n)
    draws = stream.uniforms(n)
    placed = np.empty(n, dtype=np.int64)
    for step, row in enumerate(order):
        open_mask = remaining > 0
        weights = exp_v[row] * open_mask
        total = weights.sum()
        if total <= 0:  # all open submarkets have underflowed utilities
            weights = open_mask.astype(float)
            total = weights.sum()
        p = weights / total
        j = monte_carlo_choice(p, draws[step])
        placed[row] = j
        remaining[j] -= 1
    return pd.Series(submarket_ids[placed], index=pd.Index(chooser_ids, name="chooser_id"))


def market_clearing_assignment(
    choosers: pd.DataFrame,
    submarkets: pd.DataFrame,
    spec: UtilitySpec,
    stream: RandomStream,
    price_variable: str = "price",
    supply_column: str = "supply",
    max_iters: int = 50,
    tol: float = 0.05,
    gamma: float = 0.5,
) -> MarketClearingResult:
    """Iterative price adjustment to clear submarkets, then placement.

    Expected demand D_m sums each chooser's probability of picking
    submarket m.  While max_m |D_m - s_m| / s_m > tol, prices move by
    p_m <- p_m * (D_m / s_m) ** gamma and utilities are recomputed.  The
    final placement draws choosers in random order with hard capacity
    enforcement, so no submarket ever exceeds its supply.
    """
    if spec.coefficient(price_variable) >= 0:
        raise InvariantError(
            f"spec '{spec.name}': price coefficient must be negative for market clearing"
        )
    subs = submarkets.copy()
    supply = subs[supply_column].to_numpy(dtype=float)
    if np.any(supply <= 0):
        raise InvariantError("every submarket needs positive supply")
    if supply.sum() < len(choosers):
        raise InvariantError(
            f"insufficient supply: {supply.sum():.0f} units for {len(choosers)} choosers"
        )
    prices = subs[price_variable].to_numpy(dtype=float).copy()

    demand = np.full(len(subs), np.nan)
    converged = False
    iterations = 0
    v = None
    for it in range(1, max_iters + 1):
        iterations = it
        subs[price_variable] = prices
        v = utility_matrix(spec, choosers, subs)
        p = mnl_probabilities(v)
        demand = p.sum(axis=0)
        if np.max(np.abs(demand - supply) / supply) <= tol:
            converged = True
            break
        prices = prices * (demand / supply) ** gamma

    if v is None:  # max_iters == 0: place at the posted prices
        subs[price_variable] = prices
        v = utility_matrix(spec, choosers, subs)
        demand = mnl_probabilities(v).sum(axis=0)

    exp_v = np.exp(v - v.max(axis=1, keepdims=True))
    sub_ids = subs.index.to_numpy(dtype=np.int64)
    placements = capacity_placement(
        exp_v,
        choosers.index.to_numpy(dtype=np.int64),
        sub_ids,
        supply,
        stream,
    )
    index = pd.Index(sub_ids, name="submarket_id")
    return MarketClearingResult(
        placements=placements,
        prices=pd.Series(prices, index=index),
        demand=pd.Series(demand, index=index),
        iterations=iterations,
        converged=converged,
    )
