"""Deterministic uniform random streams keyed by (seed, year, model, agent).

Every stochastic decision in the pipeline draws from a stream derived from
the key ``(global_seed, year, model_name, agent_id)``.  Both derivation and
generation are plain 64-bit integer arithmetic, so results are bit-identical
across platforms, runs and thread counts, and any agent's stream can be
re-created in isolation.

Derivation: the four key parts (the model name is first hashed with FNV-1a)
are folded together with a boost-style hash combine built on the splitmix64
finalizer.  Generation is counter-based: draw ``i`` of a stream with seed
``s`` is ``mix64(s + (i + 1) * GOLDEN)`` with the top 53 bits mapped to
[0, 1).  Because draws depend only on (seed, counter), per-agent first draws
for whole agent populations can be produced vectorized (`agent_uniforms`)
and are bit-identical to the scalar path.
"""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_U_GOLDEN = np.uint64(_GOLDEN)
_INV_2_53 = 2.0 ** -53


def _mix64(x: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    x &= _M64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _M64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _M64
    x ^= x >> 31
    return x


def _mix64_np(x: np.ndarray) -> np.ndarray:
    out = x.astype(np.uint64, copy=True)
    out ^= out >> np.uint64(30)
    out *= np.uint64(0xBF58476D1CE4E5B9)
    out ^= out >> np.uint64(27)
    out *= np.uint64(0x94D049BB133111EB)
    out ^= out >> np.uint64(31)
    return out


def _fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _M64
    return h


def _combine(h: int, part: int) -> int:
    # boost-style hash_combine with a splitmix64-mixed part
    return (h ^ (_mix64(part) + _GOLDEN + ((h << 6) & _M64) + (h >> 2))) & _M64


def stream_seed(global_seed: int, year: int, model_name: str, agent_id: int) -> int:
    """64-bit seed for the stream identified by the key tuple."""
    h = 0
    for part in (global_seed & _M64, year & _M64, _fnv1a64(model_name), agent_id & _M64):
        h = _combine(h, part)
    return _mix64(h)


class RandomStream:
    """Counter-based uniform stream over [0, 1)."""

    __slots__ = ("seed", "_count")

    def __init__(self, seed: int):
        self.seed = seed & _M64
        self._count = 0

    def uniform(self) -> float:
        self._count += 1
        z = _mix64(self.seed + self._count * _GOLDEN)
        return (z >> 11) * _INV_2_53

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` draws as a float64 array."""
        counters = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        z = _mix64_np(np.uint64(self.seed) + counters * _U_GOLDEN)
        return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) (argsort of n draws)."""
        return np.argsort(self.uniforms(n), kind="stable")


def derive_stream(global_seed: int, year: int, model_name: str, agent_id: int) -> RandomStream:
    """Stream for one agent of one model in one simulated year."""
    return RandomStream(stream_seed(global_seed, year, model_name, agent_id))


def agent_seeds(global_seed: int, year: int, model_name: str, agent_ids) -> np.ndarray:
    """Vectorized `stream_seed` over an array of agent ids."""
    ids = np.asarray(agent_ids, dtype=np.int64).astype(np.uint64)
    h = 0
    for part in (global_seed & _M64, year & _M64, _fnv1a64(model_name)):
        h = _combine(h, part)
    mixed = _mix64_np(ids)
    h4 = np.uint64(h) ^ (
        mixed
        + _U_GOLDEN
        + np.uint64((h << 6) & _M64)
        + np.uint64(h >> 2)
    )
    return _mix64_np(h4)


def agent_uniforms(global_seed: int, year: int, model_name: str, agent_ids, n_draws: int = 1) -> np.ndarray:
    """First ``n_draws`` uniforms of each agent's stream, vectorized.

    Row ``i`` is bit-identical to
    ``derive_stream(global_seed, year, model_name, agent_ids[i]).uniforms(n_draws)``.
    Returns shape (N,) when ``n_draws == 1``, else (N, n_draws).
    """
    seeds = agent_seeds(global_seed, year, model_name, agent_ids)
    counters = np.arange(1, n_draws + 1, dtype=np.uint64)
    z = _mix64_np(seeds[:, None] + counters[None, :] * _U_GOLDEN)
    u = (z >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return u[:, 0] if n_draws == 1 else u
