"""Measure subcommands: defect, vset, unique-ergodicity"""
import logging
from typing import List

import numpy as np

from app.models.schemas import PointRef, RunConfig, Scheme
from app.services import averaging_service, equicontinuity_service, measures_service, systems_service
from app.utils.commands import CommandResult, CommandRouter, measure_schemes
from app.utils.errors import ErgodicError

logger = logging.getLogger(__name__)

router = CommandRouter(tags=["measures"])

# One row per atom of every cluster representative
VSET_ATOM_FIELDS = ["scheme", "member", "n", "k", "point", "weight"]


def defect_horizons(n: int) -> List[int]:
    """10, 100, ... up to n, ending at n"""
    horizons = []
    h = 10
    while h < n:
        horizons.append(h)
        h *= 10
    horizons.append(n)
    return horizons


def defect_rows(config: RunConfig, strict: bool = True) -> List[dict]:
    sys = config.system
    family = measures_service.default_family(sys, config.family_size)
    rows = []
    for n in defect_horizons(config.n):
        row = {"n": n}
        for scheme in measure_schemes(config, strict):
            mu = measures_service.empirical(sys, config.x, 0, n, scheme)
            row[scheme.value] = measures_service.pushforward_defect(sys, mu, family)
        row["bound_arithmetic"] = 2.0 / n
        row["bound_logarithmic"] = 3.0 / averaging_service.harmonic(n)
        rows.append(row)
        logger.debug("defect at n=%d: %s", n, row)
    return rows


def start_points(config: RunConfig) -> List[PointRef]:
    """x, then y when given, then seeded draws from the natural measure"""
    points = [config.x] + ([config.y] if config.y is not None else [])
    rng = np.random.default_rng(config.seed)
    while len(points) < config.starts:
        points.append(systems_service.sample_point(config.system, rng))
    return points


@router.command("defect")
def defect(config: RunConfig) -> CommandResult:
    """
    Invariance defect rho(mu, T_* mu) of empirical measures at n = 10, 100, ..., --n
    """
    try:
        rows = defect_rows(config)
        fields = ["n"] + [s.value for s in measure_schemes(config)] + ["bound_arithmetic", "bound_logarithmic"]
        last = rows[-1]
        parts = " ".join(f"{s.value}={last[s.value]:.3g}" for s in measure_schemes(config))
        return CommandResult(
            summary=f"defect: n={last['n']} {parts}",
            document={"rows": rows},
            csv_fields=fields,
            csv_rows=rows,
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error computing invariance defects: {str(e)}")


@router.command("vset")
def vset(config: RunConfig) -> CommandResult:
    """
    Clusters of empirical measures along the schedule tail (V-set estimates)

    With both schemes the document also reports how far each logarithmic
    cluster lies from the convex hull of the Cesàro clusters. The CSV lists
    the atoms (k, point, weight) of every cluster representative.
    """
    try:
        sys = config.system
        family = measures_service.default_family(sys, config.family_size)
        schedule = averaging_service.geometric_schedule(config.n, config.n0, config.ratio)

        sets = {
            scheme: measures_service.vset_estimate(
                sys, config.x, schedule, scheme, config.cluster_tol, family, config.window_fraction
            )
            for scheme in measure_schemes(config)
        }
        document = {
            "schedule": schedule,
            "truncation_error": family.truncation_error,
            "sets": {scheme.value: measures_service.summarize_set(s, family) for scheme, s in sets.items()},
        }
        if len(sets) == 2:
            cesaro, log = sets[Scheme.ARITHMETIC], sets[Scheme.LOGARITHMIC]
            document["log_to_cesaro_hull"] = max(
                measures_service.hull_distance(mu, cesaro, family) for mu in log.members
            )

        # streamed only when a CSV is requested
        rows = (
            {"scheme": scheme.value, "member": i, "n": mu.n, **atom}
            for scheme, s in sets.items()
            for i, mu in enumerate(s.members)
            for atom in measures_service.atom_rows(mu)
        )
        parts = " ".join(f"{scheme.value}={len(s)}" for scheme, s in sets.items())
        return CommandResult(
            summary=f"vset clusters: {parts}",
            document=document,
            csv_fields=VSET_ATOM_FIELDS,
            csv_rows=rows,
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error estimating V-sets: {str(e)}")


@router.command("unique-ergodicity")
def unique_ergodicity(config: RunConfig) -> CommandResult:
    """Spread of empirical measures from several start points"""
    try:
        sys = config.system
        family = measures_service.default_family(sys, config.family_size)
        points = start_points(config)
        reports = {
            scheme.value: equicontinuity_service.unique_ergodicity_test(
                sys, points, config.n, scheme, family, config.tol
            )
            for scheme in measure_schemes(config)
        }
        parts = " ".join(
            f"{name}={r.verdict.value}(rho={r.max_pairwise_rho:.3g})" for name, r in reports.items()
        )
        return CommandResult(
            summary=f"unique-ergodicity: {parts}",
            document={"reports": reports, "truncation_error": family.truncation_error},
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error testing unique ergodicity: {str(e)}")
