"""Empirical measures, the rho metric, Hausdorff distance and V-set estimates"""
import logging
import math
import os
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import ot

from app.models.domain import EmpiricalMeasure, MeasureSet, TestFamily
from app.models.schemas import (
    CircleRotation,
    DoublingMap,
    MeasureSetSummary,
    MeasureSummary,
    PointRef,
    Scheme,
    SystemSpec,
)
from app.services.averaging_service import averaging_service
from app.services.systems_service import Batch, Observable, systems_service
from app.utils.errors import DomainError, SystemMismatchError
from app.utils.summation import KahanSum, compensated_sum

logger = logging.getLogger(__name__)

# Atoms evaluated per chunk when streaming a measure
ATOM_CHUNK = 4096
# Largest measure whose atoms are materialized in one piece
MATERIALIZE_LIMIT = 100_000


class MeasuresService:
    """Operations on empirical measures of orbit windows"""

    def __init__(self):
        self.family_size = int(os.getenv("ERGODIC_TEST_FAMILY_SIZE", "16"))
        self.window_fraction = float(os.getenv("ERGODIC_WINDOW_FRACTION", "0.25"))

    # -- construction -----------------------------------------------------

    def empirical(
        self, sys: SystemSpec, x: PointRef, m: int, n: int, scheme: Scheme
    ) -> EmpiricalMeasure:
        """Atoms T^{k-1}x, k = m+1..n, with arithmetic or logarithmic weights"""
        systems_service._check_point(sys, x)
        return EmpiricalMeasure(system=sys, point=x, m=m, n=n, scheme=Scheme(scheme))

    def dirac(self, sys: SystemSpec, x: PointRef) -> EmpiricalMeasure:
        return self.empirical(sys, x, 0, 1, Scheme.ARITHMETIC)

    def weights(self, mu: EmpiricalMeasure, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """Weights of atoms start..stop-1 (counted from the first atom of the window)"""
        length = mu.atom_count
        stop = length if stop is None else stop
        if mu.scheme == Scheme.ARITHMETIC:
            return np.full(stop - start, 1.0 / length)
        i = np.arange(start + 1, stop + 1, dtype=np.float64)
        return 1.0 / (i * averaging_service.harmonic(length))

    def iter_chunks(
        self, mu: EmpiricalMeasure, shift: int = 0, chunk: int = ATOM_CHUNK
    ) -> Iterator[Tuple[Batch, np.ndarray]]:
        """(atoms, weights) in chunks; shift=1 yields the atoms moved by T"""
        for start in range(0, mu.atom_count, chunk):
            stop = min(start + chunk, mu.atom_count)
            batch = systems_service.orbit_batch(
                mu.system, mu.point, mu.m + start + shift, mu.m + stop + shift
            )
            yield batch, self.weights(mu, start, stop)

    def materialize(self, mu: EmpiricalMeasure) -> Tuple[Batch, np.ndarray]:
        """All atoms and weights at once; long windows must be streamed"""
        if mu.atom_count > MATERIALIZE_LIMIT:
            raise DomainError(
                f"{mu.atom_count} atoms exceed the materialization limit {MATERIALIZE_LIMIT}; stream with iter_chunks"
            )
        return next(self.iter_chunks(mu, chunk=mu.atom_count))

    def atom_rows(self, mu: EmpiricalMeasure) -> Iterator[dict]:
        """{k, point, weight} for the atoms T^{k-1}x of the window, streamed"""
        k = mu.m + 1
        for batch, weights in self.iter_chunks(mu):
            for label, weight in zip(systems_service.batch_labels(mu.system, batch), weights.tolist()):
                yield {"k": k, "point": label, "weight": weight}
                k += 1

    # -- integration ------------------------------------------------------

    def integrate(self, f: Observable, mu: EmpiricalMeasure, shift: int = 0) -> float:
        """sum of weight * f(atom); shift=1 integrates f o T"""
        total = KahanSum()
        for batch, weights in self.iter_chunks(mu, shift=shift):
            total.add(compensated_sum(weights * f(batch)))
        return total.value

    def default_family(self, sys: SystemSpec, size: Optional[int] = None) -> TestFamily:
        size = self.family_size if size is None else size
        return TestFamily(system=sys, probes=tuple(systems_service.default_probes(sys, size)))

    def _probe_batch(self, family: TestFamily) -> Batch:
        return systems_service.stack_points(family.system, list(family.probes))

    def embed(self, mu: EmpiricalMeasure, family: TestFamily, shift: int = 0) -> np.ndarray:
        """(integral of f_j d mu)_j for every probe of the family"""
        probes = self._probe_batch(family)
        totals = [KahanSum() for _ in range(family.size)]
        for batch, weights in self.iter_chunks(mu, shift=shift):
            distances = systems_service.pairwise_distance(mu.system, batch, probes)
            for j, partial in enumerate(weights @ distances):
                totals[j].add(float(partial))
        return np.array([t.value for t in totals], dtype=np.float64)

    @staticmethod
    def rho_embedded(a: np.ndarray, b: np.ndarray, family: TestFamily) -> float:
        return float(np.sum(family.weights * np.abs(a - b)))

    def rho(self, mu: EmpiricalMeasure, nu: EmpiricalMeasure, family: TestFamily) -> float:
        """sum_j 2^-j |int f_j d mu - int f_j d nu|, truncated at J"""
        return self.rho_embedded(self.embed(mu, family), self.embed(nu, family), family)

    # -- circle Wasserstein -----------------------------------------------

    def circle_w1(self, mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
        """Exact W1 on R/Z in unscaled arc length, via POT's level-median form.

        POT integrates F_mu - F_nu from the first atom onward, so both measures
        are rotated to put the leftmost atom at 0 first; W1 is rotation invariant.
        """
        for measure in (mu, nu):
            if not isinstance(measure.system, (CircleRotation, DoublingMap)):
                raise SystemMismatchError("circle_w1 needs measures on a circle system")
        u_pos, u_w = self.materialize(mu)
        v_pos, v_w = self.materialize(nu)
        origin = min(float(u_pos.min()), float(v_pos.min()))
        w1 = ot.wasserstein_circle(
            np.mod(u_pos - origin, 1.0), np.mod(v_pos - origin, 1.0), u_w, v_w, p=1
        )
        return float(np.ravel(w1)[0])

    # -- invariance -------------------------------------------------------

    def pushforward_defect(self, sys: SystemSpec, mu: EmpiricalMeasure, family: TestFamily) -> float:
        """sum_j 2^-j |int f_j d mu - int f_j o T d mu|"""
        if mu.system != sys:
            raise SystemMismatchError("measure was built on a different system")
        return self.rho_embedded(self.embed(mu, family), self.embed(mu, family, shift=1), family)

    # -- sets of measures -------------------------------------------------

    def hausdorff(self, a: MeasureSet, b: MeasureSet, family: TestFamily) -> float:
        """Symmetrized max-min rho distance between two finite sets"""
        if len(a) == 0 or len(b) == 0:
            raise DomainError("Hausdorff distance needs non-empty sets")
        distances = np.array(
            [[self.rho_embedded(u, v, family) for v in b.embeddings] for u in a.embeddings]
        )
        return float(max(distances.min(axis=1).max(), distances.min(axis=0).max()))

    def cluster(
        self, measures: Sequence[EmpiricalMeasure], cluster_tol: float, family: TestFamily
    ) -> MeasureSet:
        """Greedy first-fit clustering in input order"""
        if cluster_tol <= 0:
            raise DomainError("cluster tolerance must be positive")
        if not measures:
            raise DomainError("nothing to cluster")
        members: List[EmpiricalMeasure] = []
        embeddings: List[np.ndarray] = []
        for mu in measures:
            e = self.embed(mu, family)
            if all(self.rho_embedded(e, r, family) >= cluster_tol for r in embeddings):
                members.append(mu)
                embeddings.append(e)
        logger.debug("%d measures -> %d clusters at tol %g", len(measures), len(members), cluster_tol)
        return MeasureSet(members=members, cluster_tol=cluster_tol, embeddings=np.array(embeddings))

    def _tail(self, schedule: Sequence[int], window_fraction: Optional[float]) -> List[int]:
        schedule = [int(n) for n in schedule]
        if not schedule:
            raise DomainError("empty schedule")
        if any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise DomainError("schedule must be increasing")
        fraction = self.window_fraction if window_fraction is None else window_fraction
        return schedule[-math.ceil(fraction * len(schedule)):]

    def vset_estimate(
        self,
        sys: SystemSpec,
        x: PointRef,
        schedule: Sequence[int],
        scheme: Scheme,
        cluster_tol: float,
        family: TestFamily,
        window_fraction: Optional[float] = None,
    ) -> MeasureSet:
        """Clusters of empirical(x, 0, n) for n in the schedule tail"""
        measures = [self.empirical(sys, x, 0, n, scheme) for n in self._tail(schedule, window_fraction)]
        return self.cluster(measures, cluster_tol, family)

    def windowed_vset_estimate(
        self,
        sys: SystemSpec,
        x: PointRef,
        lengths: Sequence[int],
        scheme: Scheme,
        cluster_tol: float,
        family: TestFamily,
        offsets_per_length: int = 4,
        window_fraction: Optional[float] = None,
    ) -> MeasureSet:
        """Clusters of empirical(x, m, m + L) for L in the tail and m = 0, L, 2L, ..."""
        measures = [
            self.empirical(sys, x, i * length, (i + 1) * length, scheme)
            for length in self._tail(lengths, window_fraction)
            for i in range(offsets_per_length)
        ]
        return self.cluster(measures, cluster_tol, family)

    def vset_shift_gap(
        self,
        sys: SystemSpec,
        x: PointRef,
        schedule: Sequence[int],
        scheme: Scheme,
        cluster_tol: float,
        family: TestFamily,
    ) -> float:
        """Hausdorff distance between the V-set estimates at x and at Tx"""
        here = self.vset_estimate(sys, x, schedule, scheme, cluster_tol, family)
        there = self.vset_estimate(sys, systems_service.step(sys, x), schedule, scheme, cluster_tol, family)
        return self.hausdorff(here, there, family)

    def hull_distance(
        self,
        mu: EmpiricalMeasure,
        members: MeasureSet,
        family: TestFamily,
        iterations: int = 500,
    ) -> float:
        """Upper bound on the rho distance from mu to the convex hull of members.

        rho is affine in the measure, so a convex combination of members is
        represented by the same combination of embeddings. Frank-Wolfe on the
        weighted squared distance finds the combination; its rho distance is
        returned, never more than the distance to the nearest member.
        """
        target = self.embed(mu, family)
        vertices = members.embeddings
        scale = family.weights
        distances = [self.rho_embedded(target, v, family) for v in vertices]
        weights = np.zeros(len(vertices))
        weights[int(np.argmin(distances))] = 1.0
        best = min(distances)
        for _ in range(iterations):
            point = weights @ vertices
            gradient = vertices @ (scale * (point - target))
            vertex = int(np.argmin(gradient))
            direction = vertices[vertex] - point
            denom = float(np.sum(scale * direction ** 2))
            if denom <= 0.0:
                break
            step = float(np.clip(-np.sum(scale * (point - target) * direction) / denom, 0.0, 1.0))
            if step == 0.0:
                break
            weights *= 1.0 - step
            weights[vertex] += step
            best = min(best, self.rho_embedded(target, weights @ vertices, family))
        return best

    # -- reporting --------------------------------------------------------

    def summarize(self, mu: EmpiricalMeasure, family: TestFamily) -> MeasureSummary:
        return MeasureSummary(
            atom_count=mu.atom_count,
            window=[mu.m, mu.n],
            scheme=mu.scheme,
            integrals=[float(v) for v in self.embed(mu, family)],
        )

    def summarize_set(self, members: MeasureSet, family: TestFamily) -> MeasureSetSummary:
        summaries = [self.summarize(mu, family) for mu in members.members]
        gaps = [
            self.rho_embedded(a, b, family)
            for i, a in enumerate(members.embeddings)
            for b in members.embeddings[i + 1:]
        ]
        return MeasureSetSummary(
            cluster_tol=members.cluster_tol,
            members=summaries,
            pairwise_min_rho=min(gaps) if gaps else None,
        )


# Global instance
measures_service = MeasuresService()
