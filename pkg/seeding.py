#!/usr/bin/env python3
"""
Seeding - named random substreams derived from one root seed
"""

import zlib
from typing import Sequence

import numpy as np

STREAM_NAMES = ("dgp", "accounting", "som", "kmeans", "gap", "cv")


def _stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(root_seed: int, name: str, *path: int) -> np.random.SeedSequence:
    """Seed sequence for a named stage, optionally further indexed (firm, replicate)"""
    return np.random.SeedSequence(int(root_seed), spawn_key=(_stream_key(name), *[int(p) for p in path]))


def substream_seed(root_seed: int, name: str, *path: int) -> int:
    """Integer seed for APIs that take a plain seed"""
    return int(substream(root_seed, name, *path).generate_state(1)[0])


def generator(root_seed: int, name: str, *path: int) -> np.random.Generator:
    """PCG64 generator on a named substream"""
    return np.random.default_rng(substream(root_seed, name, *path))


def child_generators(seed: int, count: int) -> Sequence[np.random.Generator]:
    """Independent generators for restarts or replicates; child i depends only on i"""
    return [np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(i,))) for i in range(count)]
