"""
Exact bin packing for small instances.

Used to decide the minimal number of channels in the load-balancing game. Instances are
tiny (a handful of transmitters), so an exhaustive search over canonical assignments is
exact and fast enough.
"""

import math
from typing import List, Optional, Sequence

from telepathy.models.errors import SpecInvalid

# Capacity slack for floating-point rate sums
CAPACITY_TOL = 1e-9


def _check(rates: Sequence[float], r_star: float) -> None:
    if not (math.isfinite(r_star) and r_star > 0):
        raise SpecInvalid(f"Channel threshold must be positive and finite, got {r_star}")
    for rate in rates:
        if not (math.isfinite(rate) and rate > 0):
            raise SpecInvalid(f"Rates must be positive and finite, got {rate}")


def _fits(load: float, rate: float, r_star: float) -> bool:
    return load + rate <= r_star + CAPACITY_TOL * max(1.0, r_star)


def _assign(
    order: List[int],
    rates: Sequence[float],
    r_star: float,
    n_bins: int,
    loads: List[float],
    assignment: List[int],
    position: int,
) -> bool:
    if position == len(order):
        return True
    item = order[position]
    opened = sum(1 for load in loads if load > 0)
    # A new bin is only ever the first empty one, which removes symmetric duplicates
    for bin_index in range(min(opened + 1, n_bins)):
        if _fits(loads[bin_index], rates[item], r_star):
            loads[bin_index] += rates[item]
            assignment[item] = bin_index
            if _assign(order, rates, r_star, n_bins, loads, assignment, position + 1):
                return True
            loads[bin_index] -= rates[item]
            if loads[bin_index] < CAPACITY_TOL:
                loads[bin_index] = 0.0
    return False


def pack_channels(rates: Sequence[float], r_star: float) -> Optional[List[int]]:
    """
    An assignment of items to the fewest bins of capacity r_star.

    Args:
        rates: Item sizes (data rates)
        r_star: Bin capacity (channel threshold)

    Returns:
        Optional[List[int]]: Bin index per item, or None when some item exceeds r_star
    """
    _check(rates, r_star)
    if any(rate > r_star + CAPACITY_TOL * max(1.0, r_star) for rate in rates):
        return None
    if not rates:
        return []
    order = sorted(range(len(rates)), key=lambda k: -rates[k])
    for n_bins in range(1, len(rates) + 1):
        assignment = [0] * len(rates)
        if _assign(order, rates, r_star, n_bins, [0.0] * n_bins, assignment, 0):
            return assignment
    return None


def min_channels(rates: Sequence[float], r_star: float) -> Optional[int]:
    """
    Exact minimum number of channels of capacity r_star carrying all rates.

    Args:
        rates: Data rates
        r_star: Channel threshold

    Returns:
        Optional[int]: Minimum channel count, or None (infeasible) when a single rate
        exceeds r_star
    """
    assignment = pack_channels(rates, r_star)
    if assignment is None:
        return None
    return len(set(assignment))
