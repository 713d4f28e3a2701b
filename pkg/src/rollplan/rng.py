"""Seed derivation for reproducible, planner-invariant random streams.

Demand, setup-time, and scenario draws come from independent substreams
keyed by (base seed, demand key, replication). The demand key must not
contain planner parameters so every planner sees identical demand paths
(common random numbers).
"""
from __future__ import annotations

import hashlib

import numpy as np

STREAM_DEMAND = 0
STREAM_SETUP = 1
STREAM_SCENARIO = 2


def demand_key(system_id: str, customer: str, alpha: float) -> str:
    return f"{system_id}|{customer}|{alpha!r}"


def derive_seed(base_seed: int, key: str, replication: int, stream: int) -> int:
    digest = hashlib.sha256(f"{base_seed}|{key}|{replication}|{stream}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def stream_rng(base_seed: int, key: str, replication: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(derive_seed(base_seed, key, replication, stream)))
