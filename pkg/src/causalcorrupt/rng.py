"""Deterministic seed derivation.

Every stochastic component draws from a numpy Generator seeded by a 64-bit
avalanche mix of (global_seed, scene_id, node_name, stream). Derivation is
a pure function of those inputs, so results do not depend on sampling
order, worker count, or scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream tags keep unrelated draws on disjoint substreams.
STREAM_TRACE = 0
STREAM_OP_NOISE = 1
STREAM_SCENE = 2
STREAM_LONGTAIL = 3
STREAM_BOOTSTRAP = 4


def splitmix64(x: int) -> int:
    """One step of the splitmix64 avalanche finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def name_hash(name: str) -> int:
    """Stable 64-bit hash of a node name (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def mix_seed(global_seed: int, scene_id: int, name: str = "", stream: int = STREAM_TRACE) -> int:
    """Derive the 64-bit seed for one (scene, node, stream) cell."""
    h = splitmix64(global_seed & _MASK64)
    h = splitmix64(h ^ (scene_id & _MASK64))
    if name:
        h = splitmix64(h ^ name_hash(name))
    h = splitmix64(h ^ (stream & _MASK64))
    return h


def generator_for(global_seed: int, scene_id: int, name: str = "", stream: int = STREAM_TRACE) -> np.random.Generator:
    """Generator seeded for one (scene, node, stream) cell."""
    return np.random.Generator(np.random.PCG64(mix_seed(global_seed, scene_id, name, stream)))


def _splitmix64_array(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def mix_seed_array(global_seed: int, scene_ids: np.ndarray, stream: int = STREAM_TRACE) -> np.ndarray:
    """Vectorized mix_seed with empty name, one uint64 seed per scene id."""
    ids = np.asarray(scene_ids, dtype=np.uint64)
    h0 = np.uint64(splitmix64(global_seed & _MASK64))
    h = _splitmix64_array(h0 ^ ids)
    return _splitmix64_array(h ^ np.uint64(stream & _MASK64))
