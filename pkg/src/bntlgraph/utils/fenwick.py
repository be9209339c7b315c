"""
Fenwick Tree - Binary indexed tree over non-negative weights

Supports O(log K) point updates and O(log K) inverse-CDF lookups, which keeps
weighted vertex draws cheap when the number of vertices grows large.
"""

import numpy as np


class FenwickTree:
    """
    Prefix sums over a fixed-capacity array of weights (0-based indices).

    Attributes:
        capacity: Number of slots
        total: Sum of all weights
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"FenwickTree capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self._tree = np.zeros(self.capacity + 1, dtype=np.float64)
        self.total = 0.0
        # highest power of two not above capacity, for the descent in find()
        self._top_bit = 1 << (self.capacity.bit_length() - 1)

    def add(self, index: int, delta: float) -> None:
        """Add delta to the weight at index."""
        if not 0 <= index < self.capacity:
            raise IndexError(f"Index {index} outside [0, {self.capacity})")
        i = index + 1
        tree = self._tree
        while i <= self.capacity:
            tree[i] += delta
            i += i & (-i)
        self.total += delta

    def prefix_sum(self, index: int) -> float:
        """Sum of weights at positions 0..index inclusive."""
        i = min(index + 1, self.capacity)
        tree = self._tree
        out = 0.0
        while i > 0:
            out += tree[i]
            i -= i & (-i)
        return float(out)

    def find(self, value: float) -> int:
        """
        Smallest index whose inclusive prefix sum exceeds value.

        Args:
            value: Target in [0, total)

        Returns:
            Slot index
        """
        pos = 0
        remaining = value
        step = self._top_bit
        tree = self._tree
        while step:
            nxt = pos + step
            if nxt <= self.capacity and tree[nxt] <= remaining:
                pos = nxt
                remaining -= tree[nxt]
            step >>= 1
        return min(pos, self.capacity - 1)
