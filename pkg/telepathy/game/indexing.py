"""
JointIndex convention.

A joint label (one index per party) flattens to
((idx_0 * |S_1| + idx_1) * |S_2| + idx_2) ..., party 0 most significant and the last
party fastest-varying. This is numpy's C order.
"""

import math
from typing import Sequence, Tuple

import numpy as np


def flatten(indices: Sequence[int], sizes: Sequence[int]) -> int:
    """
    Flatten per-party indices into a joint index.

    Args:
        indices: One index per party
        sizes: Set size per party

    Returns:
        int: Joint index
    """
    if len(indices) != len(sizes):
        raise ValueError(f"Got {len(indices)} indices for {len(sizes)} parties")
    joint = 0
    for index, size in zip(indices, sizes):
        if not 0 <= index < size:
            raise ValueError(f"Index {index} outside 0..{size - 1}")
        joint = joint * size + int(index)
    return joint


def unflatten(joint: int, sizes: Sequence[int]) -> Tuple[int, ...]:
    """
    Split a joint index into per-party indices.

    Args:
        joint: Joint index
        sizes: Set size per party

    Returns:
        Tuple[int, ...]: One index per party
    """
    if not 0 <= joint < math.prod(sizes):
        raise ValueError(f"Joint index {joint} outside 0..{math.prod(sizes) - 1}")
    indices = []
    for size in reversed(sizes):
        joint, index = divmod(joint, size)
        indices.append(index)
    return tuple(reversed(indices))


def index_grid(sizes: Sequence[int]) -> np.ndarray:
    """
    All joint labels as an array of shape (prod(sizes), n_parties), row r holding the
    per-party indices of joint index r.
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes:
        return np.zeros((1, 0), dtype=np.int64)
    grid = np.indices(sizes, dtype=np.int64).reshape(len(sizes), -1)
    return grid.T.copy()


def strides(sizes: Sequence[int]) -> np.ndarray:
    """Multiplier of each party's index in the joint index."""
    result = np.ones(len(sizes), dtype=np.int64)
    for j in range(len(sizes) - 2, -1, -1):
        result[j] = result[j + 1] * sizes[j + 1]
    return result
