"""Numeric value types backed by numpy arrays"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, List, Tuple

import numpy as np

from app.models.schemas import PointRef, Scheme, SystemSpec
from app.utils.errors import DomainError
from app.utils.summation import compensated_cumsum


@dataclass(frozen=True, eq=False)
class RealTrace:
    """Finite real sequence x_1..x_n with a known bound on |x_k|"""
    values: np.ndarray
    bound: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise DomainError("a trace needs at least one value")
        if not np.all(np.isfinite(values)):
            raise DomainError("trace values must be finite")
        if self.bound < 0 or float(np.max(np.abs(values))) > self.bound:
            raise DomainError(f"trace exceeds its bound {self.bound}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    @cached_property
    def prefix_sums(self) -> np.ndarray:
        """S_0..S_n with S_k = x_1 + ... + x_k (compensated)"""
        return compensated_cumsum(self.values)

    @cached_property
    def harmonic_prefix_sums(self) -> np.ndarray:
        """Q_0..Q_n with Q_k = x_1/1 + ... + x_k/k (compensated)"""
        k = np.arange(1, self.values.size + 1, dtype=np.float64)
        return compensated_cumsum(self.values / k)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Orbit-window measure: atoms T^{k-1}x for k = m+1..n with scheme weights.

    Atoms are generated from (system, point, window) on demand so that long
    windows can be streamed in chunks.
    """
    system: SystemSpec
    point: PointRef
    m: int
    n: int
    scheme: Scheme

    def __post_init__(self):
        if not 0 <= self.m < self.n:
            raise DomainError(f"invalid window (m={self.m}, n={self.n})")

    @property
    def window(self) -> Tuple[int, int]:
        return self.m, self.n

    @property
    def atom_count(self) -> int:
        return self.n - self.m


@dataclass(frozen=True, eq=False)
class TestFamily:
    """Probe points p_1..p_J inducing f_j = d(., p_j) weighted by 2^-j"""
    __test__ = False

    system: SystemSpec
    probes: Tuple[Any, ...]

    def __post_init__(self):
        if not self.probes:
            raise DomainError("a test family needs at least one probe")

    @property
    def size(self) -> int:
        return len(self.probes)

    @cached_property
    def weights(self) -> np.ndarray:
        return 0.5 ** np.arange(1, self.size + 1, dtype=np.float64)

    @property
    def truncation_error(self) -> float:
        """Bound on the omitted tail sum_{j>J} 2^-j |...|"""
        return 2.0 ** (1 - self.size)


@dataclass(frozen=True, eq=False)
class MeasureSet:
    """Separated representatives of a cluster of empirical measures"""
    members: List[EmpiricalMeasure]
    cluster_tol: float
    embeddings: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.members:
            raise DomainError("a measure set needs at least one member")

    def __len__(self) -> int:
        return len(self.members)
