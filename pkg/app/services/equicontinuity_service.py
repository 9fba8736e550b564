"""Mean equicontinuity and mean sensitivity estimators, unique ergodicity, Oxtoby's example"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from app.models.domain import RealTrace, TestFamily
from app.models.schemas import (
    DichotomyConfig,
    DichotomyVerdict,
    ErgodicityVerdict,
    GapScheme,
    ModulusProfile,
    OxtobyReport,
    PointRef,
    Scheme,
    SensitivityReport,
    SystemSpec,
    UniqueErgodicityReport,
    Verdict,
)
from app.services.averaging_service import averaging_service
from app.services.measures_service import measures_service
from app.services.systems_service import _rotation_angles, systems_service
from app.utils.errors import DomainError, SamplerError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DELTA_GRID = [2.0 ** -i for i in range(1, 21)]
# Keeps sampled distances strictly below the ball radius after rounding
INSIDE_MARGIN = 1.0 - 2.0 ** -20
WEYL_OFFSETS = 4
OXTOBY_INTERVALS = 64
# Logarithmic spreads are compared at n and n / LOG_HORIZON_RATIO
LOG_HORIZON_RATIO = 100
LOG_GROWTH_MARGIN = 1.25

Pair = Tuple[PointRef, PointRef]


class PairSampler:
    """Deterministic pair draws for one system.

    Every draw of a stream is seeded by (seed, stream) so results do not
    depend on how the work is later split between threads.
    """

    def __init__(self, sys: SystemSpec, seed: int = 0):
        self.sys = sys
        self.seed = seed

    def _rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def ball_pairs(self, delta: float, count: int, stream: int = 0) -> List[Pair]:
        """Pairs with d(x, y) < delta; distances stratified over (0, delta)"""
        if count < 1:
            raise SamplerError("sampler asked for no pairs")
        rng = self._rng(stream)
        pairs = []
        for i in range(count):
            x = systems_service.sample_point(self.sys, rng)
            u = (i + rng.random()) / count * INSIDE_MARGIN
            if u <= 0.0:
                u = INSIDE_MARGIN / count
            target = max(u * delta, systems_service.perturbation_floor(self.sys))
            pairs.append((x, systems_service.perturb(self.sys, x, target, rng)))
        return pairs

    def measure_pairs(self, count: int, stream: int = 0) -> List[Pair]:
        """Independent pairs from the product of the natural measure"""
        if count < 1:
            raise SamplerError("sampler asked for no pairs")
        rng = self._rng(stream)
        return [
            (systems_service.sample_point(self.sys, rng), systems_service.sample_point(self.sys, rng))
            for _ in range(count)
        ]


class EquicontinuityService:
    """Finite-horizon evidence for the definitions of mean equicontinuity and sensitivity"""

    def __init__(self):
        self.threads = int(os.getenv("ERGODIC_THREADS", str(os.cpu_count() or 1)))
        self.sensitivity_threshold = float(os.getenv("ERGODIC_SENSITIVITY_THRESHOLD", "0.05"))
        self.ue_tol = float(os.getenv("ERGODIC_UE_TOL", "0.01"))

    def _map(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """Ordered map, parallel when more than one worker is allowed"""
        if self.threads <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    # -- pair gaps --------------------------------------------------------

    def pair_gap(
        self, sys: SystemSpec, x: PointRef, y: PointRef, m: int, n: int, scheme: GapScheme
    ) -> float:
        """Cesàro or logarithmic average of d(T^{k-1}x, T^{k-1}y) over k = m+1..n"""
        scheme = GapScheme(scheme)
        trace = systems_service.pair_distance_trace(sys, x, y, n)
        if scheme.logarithmic:
            return averaging_service.log_avg(trace, m, n)
        return averaging_service.cesaro_avg(trace, m, n)

    def cesaro_log_gap(
        self, sys: SystemSpec, x: PointRef, y: PointRef, schedule: Sequence[int]
    ) -> List[float]:
        """|Cesàro - logarithmic| average of the pair distance at each schedule point"""
        schedule = [int(s) for s in schedule]
        if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise DomainError("schedule must be non-empty and increasing")
        trace = systems_service.pair_distance_trace(sys, x, y, schedule[-1])
        idx = np.asarray(schedule) - 1
        cesaro = averaging_service.cesaro_prefix_averages(trace)[idx]
        log = averaging_service.log_prefix_averages(trace)[idx]
        return [float(v) for v in np.abs(cesaro - log)]

    def gap_series(
        self, trace: RealTrace, schedule: Sequence[int], scheme: GapScheme
    ) -> np.ndarray:
        """Scheme average of a distance trace at each schedule point.

        Weyl schemes take, for window length L, the maximum over offsets
        m = 0 .. len(trace) - L spread evenly.
        """
        idx = np.asarray(schedule, dtype=np.int64)
        if not scheme.weyl:
            if scheme.logarithmic:
                return averaging_service.log_prefix_averages(trace)[idx - 1]
            return averaging_service.cesaro_prefix_averages(trace)[idx - 1]
        horizon = len(trace)
        values = []
        for length in idx:
            slack = horizon - int(length)
            offsets = sorted({round(i * slack / (WEYL_OFFSETS - 1)) for i in range(WEYL_OFFSETS)})
            windows = [(m, m + int(length)) for m in offsets]
            values.append(averaging_service.window_averages(trace, windows, scheme.logarithmic).max())
        return np.asarray(values)

    def _tail_of_pair(
        self, sys: SystemSpec, pair: Pair, n_eval: int, scheme: GapScheme
    ) -> Tuple[float, float]:
        schedule = averaging_service.geometric_schedule(n_eval)
        trace = systems_service.pair_distance_trace(sys, pair[0], pair[1], n_eval)
        tail = averaging_service.tail_estimates(self.gap_series(trace, schedule, scheme), schedule=schedule)
        return tail.sup_est, tail.inf_est

    # -- modulus ----------------------------------------------------------

    def modulus_profile(
        self,
        sys: SystemSpec,
        eps_grid: Sequence[float],
        sampler: PairSampler,
        n_eval: int,
        scheme: GapScheme,
        samples_per_delta: int,
        delta_grid: Sequence[float] = DELTA_GRID,
    ) -> ModulusProfile:
        """Largest grid delta whose sampled pairs all keep the tail sup of the gap below eps"""
        eps_grid = [float(e) for e in eps_grid]
        if not eps_grid or any(e <= 0 for e in eps_grid):
            raise DomainError("eps grid must be non-empty and positive")
        if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
            raise DomainError("eps grid must be decreasing")
        scheme = GapScheme(scheme)
        max_gap: Dict[int, Optional[float]] = {}
        exhausted = False

        def worst_gap(index: int) -> Optional[float]:
            nonlocal exhausted
            if index not in max_gap:
                try:
                    pairs = sampler.ball_pairs(delta_grid[index], samples_per_delta, stream=index)
                except SamplerError as e:
                    logger.warning("sampler exhausted at delta=%g: %s", delta_grid[index], e)
                    exhausted = True
                    max_gap[index] = None
                else:
                    sups = self._map(lambda pair: self._tail_of_pair(sys, pair, n_eval, scheme)[0], pairs)
                    max_gap[index] = max(sups)
                    logger.debug("delta=%g worst tail gap %.6f", delta_grid[index], max_gap[index])
            return max_gap[index]

        deltas: List[Optional[float]] = []
        worst: List[Optional[float]] = []
        lo = 0
        last = len(delta_grid) - 1
        for eps in eps_grid:
            def accepted(index: int) -> bool:
                gap = worst_gap(index)
                return gap is not None and gap < eps

            if not accepted(last):
                deltas.append(None)
                worst.append(None)
                lo = last
                continue
            hi = last
            while lo < hi:
                mid = (lo + hi) // 2
                if accepted(mid):
                    hi = mid
                else:
                    lo = mid + 1
            deltas.append(delta_grid[lo])
            worst.append(max_gap[lo])

        return ModulusProfile(
            eps_grid=eps_grid,
            delta_of_eps=deltas,
            max_gap_at_delta=worst,
            scheme=scheme,
            n_eval=n_eval,
            sample_count=samples_per_delta,
            sampler_exhausted=exhausted,
        )

    # -- sensitivity ------------------------------------------------------

    def sensitivity_estimate(
        self,
        sys: SystemSpec,
        sampler: PairSampler,
        n_eval: int,
        scheme: GapScheme,
        pair_count: int,
        mode: str = "ball",
        radius: float = 2.0 ** -10,
        quantile: float = 0.1,
    ) -> SensitivityReport:
        """Low quantile of the tail inf of pair gaps.

        mode='ball' draws pairs inside balls of the given radius; mode='measure'
        draws both points from the natural invariant measure.
        """
        if pair_count < 30:
            raise DomainError(f"sensitivity needs at least 30 pairs, got {pair_count}")
        scheme = GapScheme(scheme)
        if mode == "ball":
            pairs = sampler.ball_pairs(radius, pair_count, stream=len(DELTA_GRID) + 1)
        elif mode == "measure":
            pairs = sampler.measure_pairs(pair_count, stream=len(DELTA_GRID) + 2)
        else:
            raise DomainError(f"unknown sampling mode '{mode}'")

        degenerate = all(systems_service.distance(sys, x, y) == 0.0 for x, y in pairs)
        if degenerate:
            logger.warning("sampler produced only identical pairs; sensitivity estimate is 0")
        infs = self._map(lambda pair: self._tail_of_pair(sys, pair, n_eval, scheme)[1], pairs)
        estimate = float(np.clip(np.quantile(infs, quantile), 0.0, 1.0))
        return SensitivityReport(
            eps_estimate=estimate,
            pair_count=pair_count,
            horizon=n_eval,
            scheme=scheme,
            quantile_used=quantile,
            mode=mode,
            radius=radius if mode == "ball" else None,
            degenerate=degenerate,
        )

    def dichotomy_classify(self, sys: SystemSpec, config: Optional[DichotomyConfig] = None) -> DichotomyVerdict:
        """Mean equicontinuous, mean sensitive, or Undetermined on finite evidence"""
        config = config or DichotomyConfig(threshold=self.sensitivity_threshold)
        sampler = PairSampler(sys, config.seed)
        profile = self.modulus_profile(
            sys, config.eps_grid, sampler, config.n_eval, config.scheme, config.samples_per_delta
        )
        sensitivity = self.sensitivity_estimate(
            sys, sampler, config.n_eval, config.scheme, config.pair_count,
            mode="ball", radius=config.radius, quantile=config.quantile,
        )
        complete = profile.complete
        sensitive = sensitivity.eps_estimate >= config.threshold
        if complete and sensitive:
            logger.warning("complete modulus and sensitivity %.4f >= %.4f; abstaining",
                           sensitivity.eps_estimate, config.threshold)
            verdict = Verdict.UNDETERMINED
        elif complete:
            verdict = Verdict.MEAN_EQUICONTINUOUS
        elif sensitive:
            verdict = Verdict.MEAN_SENSITIVE
        else:
            verdict = Verdict.UNDETERMINED
        return DichotomyVerdict(
            verdict=verdict,
            threshold=config.threshold,
            profile=profile,
            sensitivity=sensitivity,
            conflicting=complete and sensitive,
        )

    # -- unique ergodicity ------------------------------------------------

    def _max_spread(
        self, sys: SystemSpec, start_points: Sequence[PointRef], n: int, scheme: Scheme, family: TestFamily
    ) -> float:
        embeddings = self._map(
            lambda x: measures_service.embed(measures_service.empirical(sys, x, 0, n, scheme), family),
            list(start_points),
        )
        return max(
            (measures_service.rho_embedded(a, b, family) for a, b in combinations(embeddings, 2)),
            default=0.0,
        )

    def unique_ergodicity_test(
        self,
        sys: SystemSpec,
        start_points: Sequence[PointRef],
        n: int,
        scheme: Scheme,
        family: TestFamily,
        tol: Optional[float] = None,
    ) -> UniqueErgodicityReport:
        """Max pairwise rho between empirical(x, 0, n) over the start points.

        Logarithmic averages from different starts keep a startup spread of
        order 1/H_n even for uniquely ergodic systems, so that scheme is
        also judged by rho * H_n: it must not grow by more than
        LOG_GROWTH_MARGIN between n / LOG_HORIZON_RATIO and n. With a second
        invariant measure rho tends to a positive constant and rho * H_n
        grows like H_n.
        """
        if not start_points:
            raise DomainError("need at least one start point")
        tol = self.ue_tol if tol is None else tol
        scheme = Scheme(scheme)
        worst = self._max_spread(sys, start_points, n, scheme, family)
        effective = tol
        reference_n = reference_rho = None
        if scheme == Scheme.LOGARITHMIC and n >= LOG_HORIZON_RATIO:
            reference_n = n // LOG_HORIZON_RATIO
            reference_rho = self._max_spread(sys, start_points, reference_n, scheme, family)
            allowed = LOG_GROWTH_MARGIN * reference_rho * averaging_service.harmonic(reference_n)
            effective = max(tol, allowed / averaging_service.harmonic(n))
            logger.debug("log spread %g at n=%d, %g at n=%d", worst, n, reference_rho, reference_n)
        verdict = ErgodicityVerdict.CONSISTENT if worst <= effective else ErgodicityVerdict.INCONSISTENT
        return UniqueErgodicityReport(
            verdict=verdict,
            max_pairwise_rho=worst,
            tol=tol,
            effective_tol=effective,
            scheme=scheme,
            n=n,
            start_count=len(start_points),
            reference_n=reference_n,
            reference_rho=reference_rho,
        )

    # -- Oxtoby's discontinuous observable --------------------------------

    @staticmethod
    def oxtoby_membership(
        alpha: float, positions: np.ndarray, intervals: int = OXTOBY_INTERVALS, radius_offset: int = 2
    ) -> np.ndarray:
        """Membership in U = union_j (j alpha - r_j, j alpha + r_j), r_j = 2^-(j + radius_offset)"""
        j = np.arange(1, intervals + 1)
        centres = _rotation_angles(alpha, j)
        radii = 0.5 ** (j + radius_offset)
        positions = np.asarray(positions, dtype=np.float64)
        inside = np.zeros(positions.size, dtype=bool)
        for start in range(0, positions.size, 8192):
            chunk = positions[start:start + 8192, None]
            gap = np.abs(chunk - centres[None, :])
            gap = np.minimum(gap, 1.0 - gap)
            inside[start:start + 8192] = (gap < radii[None, :]).any(axis=1)
        return inside

    def oxtoby_experiment(
        self,
        alpha: float,
        n: int,
        mc_samples: int,
        seed: int = 0,
        radius_offset: int = 2,
    ) -> OxtobyReport:
        """Orbit average of 1_U at 0 against the Lebesgue measure of U.

        The orbit point (k-1)alpha with k >= 2 is the centre of interval k-1,
        so it lies in U even when that interval is too small to test in floating point.
        """
        if n < 10:
            raise DomainError(f"Oxtoby experiment needs n >= 10, got {n}")
        if mc_samples < 1:
            raise DomainError("Monte Carlo needs at least one sample")
        rng = np.random.default_rng(seed)
        index = np.arange(n)
        orbit = _rotation_angles(alpha, index)
        at_zero = self.oxtoby_membership(alpha, orbit, radius_offset=radius_offset) | (index >= 1)
        avg_at_zero = float(at_zero.mean())

        samples = self.oxtoby_membership(alpha, rng.random(mc_samples), radius_offset=radius_offset)
        m_of_u = float(samples.mean())
        stderr = float(np.sqrt(m_of_u * (1.0 - m_of_u) / mc_samples))

        start = float(rng.random())
        typical = self.oxtoby_membership(alpha, (start + orbit) % 1.0, radius_offset=radius_offset)
        return OxtobyReport(
            alpha=alpha,
            n=n,
            mc_samples=mc_samples,
            avg_at_zero=avg_at_zero,
            m_of_U_estimate=m_of_u,
            m_of_U_stderr=stderr,
            gap=avg_at_zero - m_of_u,
            avg_at_random_start=float(typical.mean()),
        )


# Global instance
equicontinuity_service = EquicontinuityService()
