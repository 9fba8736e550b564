"""Compensated summation helpers.

Scalar sums use the Neumaier variant of Kahan summation. Prefix sums are
vectorised: a sequential float64 prefix sum is corrected by the running sum of
the exact rounding error of every addition (two-sum), which keeps 10^6-term
prefixes accurate to a few ulps.
"""
import numpy as np


class KahanSum:
    """Incremental compensated sum (Neumaier's improvement of Kahan's scheme)"""

    def __init__(self):
        self.sum = 0.0
        self.carry = 0.0

    def add(self, value: float) -> None:
        total = self.sum + value
        if abs(self.sum) >= abs(value):
            self.carry += (self.sum - total) + value
        else:
            self.carry += (value - total) + self.sum
        self.sum = total

    def extend(self, values) -> None:
        for value in values:
            self.add(float(value))

    @property
    def value(self) -> float:
        return self.sum + self.carry


def compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Prefix sums S_0 = 0, S_k = x_1 + ... + x_k with two-sum error correction"""
    x = np.asarray(values, dtype=np.float64)
    out = np.zeros(x.size + 1, dtype=np.float64)
    if x.size == 0:
        return out
    partial = np.cumsum(x)
    previous = np.concatenate(([0.0], partial[:-1]))
    # exact error of partial[k] = fl(previous[k] + x[k])
    b_virtual = partial - previous
    a_virtual = partial - b_virtual
    error = (previous - a_virtual) + (x - b_virtual)
    out[1:] = partial + np.cumsum(error)
    return out


def compensated_sum(values: np.ndarray) -> float:
    """Compensated total of a 1-D array"""
    return float(compensated_cumsum(values)[-1])
