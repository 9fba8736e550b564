"""Cesàro, logarithmic and windowed averages of real sequences"""
import logging
import math
import os
import threading
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.models.domain import RealTrace
from app.models.schemas import TailEstimate
from app.utils.errors import DomainError
from app.utils.number_theory import mobius_table
from app.utils.summation import compensated_cumsum, compensated_sum

logger = logging.getLogger(__name__)


class HarmonicTable:
    """Memoized H_0..H_N by compensated direct summation of 1/k.

    Readers see an immutable array; extension happens under a lock and
    swaps the array reference in one assignment.
    """

    def __init__(self, initial_size: int = 1024):
        self._lock = threading.Lock()
        self._table = self._build(initial_size)

    @staticmethod
    def _build(size: int) -> np.ndarray:
        k = np.arange(1, size + 1, dtype=np.float64)
        table = compensated_cumsum(1.0 / k)
        table.setflags(write=False)
        return table

    @property
    def size(self) -> int:
        return self._table.size - 1

    def upto(self, n: int) -> np.ndarray:
        """Array h with h[k] = H_k for k = 0..n (h may be longer)"""
        table = self._table
        if n >= table.size:
            with self._lock:
                table = self._table
                if n >= table.size:
                    size = max(n, 2 * (table.size - 1))
                    logger.debug("extending harmonic table to %d", size)
                    table = self._build(size)
                    self._table = table
        return table

    def __getitem__(self, n: int) -> float:
        return float(self.upto(n)[n])


class AveragingService:
    """Exact and compensated averaging of RealTrace values"""

    def __init__(self):
        self.schedule_n0 = int(os.getenv("ERGODIC_SCHEDULE_N0", "64"))
        self.schedule_ratio = float(os.getenv("ERGODIC_SCHEDULE_RATIO", "1.25"))
        self.window_fraction = float(os.getenv("ERGODIC_WINDOW_FRACTION", "0.25"))
        self.harmonic_table = HarmonicTable()

    # -- harmonic numbers -------------------------------------------------

    def harmonic(self, n: int) -> float:
        """H_n = 1 + 1/2 + ... + 1/n"""
        if n < 1:
            raise DomainError(f"harmonic number needs n >= 1, got {n}")
        return self.harmonic_table[n]

    # -- window averages --------------------------------------------------

    @staticmethod
    def _check_window(trace: RealTrace, m: int, n: int) -> None:
        if m < 0 or n <= m or n > len(trace):
            raise DomainError(
                f"window (m={m}, n={n}) outside trace of length {len(trace)}"
            )

    def cesaro_avg(self, trace: RealTrace, m: int, n: int) -> float:
        """(1/(n-m)) * sum_{k=m+1}^{n} x_k"""
        self._check_window(trace, m, n)
        s = trace.prefix_sums
        return float((s[n] - s[m]) / (n - m))

    def log_avg(self, trace: RealTrace, m: int, n: int) -> float:
        """(1/H_{n-m}) * sum_{k=m+1}^{n} x_k / (k-m)"""
        self._check_window(trace, m, n)
        length = n - m
        if m == 0:
            total = trace.harmonic_prefix_sums[n]
        else:
            i = np.arange(1, length + 1, dtype=np.float64)
            total = compensated_sum(trace.values[m:n] / i)
        return float(total / self.harmonic(length))

    def cesaro_prefix_averages(self, trace: RealTrace) -> np.ndarray:
        """A_1..A_n as an array indexed from 0"""
        k = np.arange(1, len(trace) + 1, dtype=np.float64)
        return trace.prefix_sums[1:] / k

    def log_prefix_averages(self, trace: RealTrace) -> np.ndarray:
        """L_1..L_n with L_k = log_avg(trace, 0, k), indexed from 0"""
        h = self.harmonic_table.upto(len(trace))
        return trace.harmonic_prefix_sums[1:] / h[1:len(trace) + 1]

    def window_averages(
        self,
        trace: RealTrace,
        windows: Sequence[Tuple[int, int]],
        logarithmic: bool,
    ) -> np.ndarray:
        average = self.log_avg if logarithmic else self.cesaro_avg
        return np.array([average(trace, m, n) for m, n in windows], dtype=np.float64)

    # -- summation by parts -----------------------------------------------

    def convex_weights(self, n: int) -> np.ndarray:
        """w_1..w_n with log_avg(0, n) = sum_k w_k A_k.

        w_k = 1/((k+1) H_n) for k < n and w_n = 1/H_n.
        """
        h_n = self.harmonic(n)
        k = np.arange(1, n + 1, dtype=np.float64)
        weights = 1.0 / ((k + 1.0) * h_n)
        weights[-1] = 1.0 / h_n
        return weights

    def sbp_decompose(self, trace: RealTrace, n: int) -> Tuple[float, float]:
        """Split log_avg(0, n) into the Cesàro term and the history term"""
        self._check_window(trace, 0, n)
        h_n = self.harmonic(n)
        averages = self.cesaro_prefix_averages(trace)[:n]
        term_cesaro = averages[-1] / h_n
        if n == 1:
            return float(term_cesaro), 0.0
        k = np.arange(1, n, dtype=np.float64)
        term_history = compensated_sum(averages[:-1] / (k + 1.0)) / h_n
        return float(term_cesaro), float(term_history)

    # -- schedules and tails ----------------------------------------------

    def geometric_schedule(
        self,
        n_max: int,
        n0: Optional[int] = None,
        ratio: Optional[float] = None,
    ) -> List[int]:
        """Distinct points ceil(n0 * ratio^i) up to n_max, ending at n_max"""
        n0 = self.schedule_n0 if n0 is None else n0
        ratio = self.schedule_ratio if ratio is None else ratio
        if n_max < 1 or n0 < 1 or ratio <= 1.0:
            raise DomainError("schedule needs n_max >= 1, n0 >= 1 and ratio > 1")
        schedule: List[int] = []
        i = 0
        while True:
            point = math.ceil(n0 * ratio ** i)
            if point > n_max:
                break
            if not schedule or point > schedule[-1]:
                schedule.append(point)
            i += 1
        if not schedule or schedule[-1] != n_max:
            schedule.append(n_max)
        return schedule

    @staticmethod
    def block_schedule(base: int, n_max: int, midpoints: bool = False) -> List[int]:
        """Prefix lengths ending block j of a base^j block sequence (and block middles)"""
        schedule: List[int] = []
        start, length = 0, 1
        while start + length <= n_max:
            if midpoints and length > 1:
                schedule.append(start + length // 2)
            schedule.append(start + length)
            start += length
            length *= base
        return schedule

    def tail_estimates(
        self,
        values_at_schedule: Sequence[float],
        window_fraction: Optional[float] = None,
        schedule: Optional[Sequence[int]] = None,
    ) -> TailEstimate:
        """Max / min over the last ceil(window_fraction * len) entries"""
        fraction = self.window_fraction if window_fraction is None else window_fraction
        values = [float(v) for v in values_at_schedule]
        if not values:
            raise DomainError("tail estimate needs a non-empty schedule")
        if not 0.0 < fraction <= 1.0:
            raise DomainError(f"window fraction must lie in (0, 1], got {fraction}")
        if schedule is None:
            schedule = list(range(1, len(values) + 1))
        elif len(schedule) != len(values):
            raise DomainError("schedule and values differ in length")
        count = math.ceil(fraction * len(values))
        tail = values[-count:]
        return TailEstimate(
            schedule=[int(s) for s in schedule],
            values=values,
            sup_est=max(tail),
            inf_est=min(tail),
            window_fraction=fraction,
        )

    # -- Möbius-weighted sums ---------------------------------------------

    @staticmethod
    def mobius_sieve(N: int) -> np.ndarray:
        """mu(1)..mu(N) as an int8 array (entry k-1 holds mu(k))"""
        if N < 1:
            raise DomainError(f"Möbius sieve needs N >= 1, got {N}")
        return mobius_table(N)[1:]

    def sarnak_sum(
        self,
        trace: RealTrace,
        N: int,
        logarithmic: bool = False,
        harmonic_normalization: bool = False,
    ) -> float:
        """Möbius-weighted orbit sum; trace entry k holds f(T^k x).

        Cesàro form: (1/N) sum f(T^k x) mu(k).
        Logarithmic form: (1/log N) sum f(T^k x) mu(k) / k, or 1/H_N with
        harmonic_normalization.
        """
        self._check_window(trace, 0, N)
        mu = self.mobius_sieve(N).astype(np.float64)
        values = trace.values[:N] * mu
        if not logarithmic:
            return compensated_sum(values) / N
        if harmonic_normalization:
            norm = self.harmonic(N)
        else:
            if N < 2:
                raise DomainError("logarithmic Sarnak sum needs N >= 2")
            norm = math.log(N)
        k = np.arange(1, N + 1, dtype=np.float64)
        return compensated_sum(values / k) / norm


# Global instance
averaging_service = AveragingService()
