"""Averaging subcommands: average, sarnak, oxtoby"""
import numpy as np

from app.models.schemas import BinaryShift, CircleRotation, DoublingMap, RunConfig, Scheme, SystemSpec
from app.services import averaging_service, equicontinuity_service, systems_service
from app.utils.commands import CommandResult, CommandRouter, measure_schemes
from app.utils.errors import ConfigError, ErgodicError

router = CommandRouter(tags=["averages"])


def default_observable(sys: SystemSpec) -> str:
    if isinstance(sys, (CircleRotation, DoublingMap)):
        return "cos"
    if isinstance(sys, BinaryShift):
        return "head"
    raise ConfigError("Product systems have no default observable; pass --y to average a pair distance")


@router.command("average")
def average(config: RunConfig) -> CommandResult:
    """
    Cesàro and logarithmic averages along the evaluation schedule

    With --y the averaged sequence is d(T^{k-1}x, T^{k-1}y); otherwise it is the
    default observable (cos on circles, head symbol on the shift) along the orbit of x.
    """
    try:
        sys = config.system
        schemes = measure_schemes(config)

        if config.y is not None:
            trace = systems_service.pair_distance_trace(sys, config.x, config.y, config.n)
            sequence = "distance"
        else:
            sequence = default_observable(sys)
            f = systems_service.observable(sys, sequence)
            trace = systems_service.observable_trace(sys, config.x, f, 0, config.n)

        schedule = averaging_service.geometric_schedule(config.n, config.n0, config.ratio)
        index = np.asarray(schedule) - 1
        cesaro = averaging_service.cesaro_prefix_averages(trace)[index]
        log = averaging_service.log_prefix_averages(trace)[index]
        rows = [
            {"n": n, "cesaro": float(c), "log": float(l), "gap": float(abs(c - l))}
            for n, c, l in zip(schedule, cesaro, log)
        ]

        columns = {Scheme.ARITHMETIC: cesaro, Scheme.LOGARITHMIC: log}
        tails = {
            scheme.value: averaging_service.tail_estimates(columns[scheme], config.window_fraction, schedule)
            for scheme in schemes
        }
        term_cesaro, term_history = averaging_service.sbp_decompose(trace, config.n)

        parts = " ".join(f"{name}={tail.values[-1]:.6g}" for name, tail in tails.items())
        return CommandResult(
            summary=f"average {sequence}: n={config.n} {parts}",
            document={
                "sequence": sequence,
                "tails": tails,
                "summation_by_parts": {"term_cesaro": term_cesaro, "term_history": term_history},
            },
            csv_fields=["n", "cesaro", "log", "gap"],
            csv_rows=rows,
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error computing averages: {str(e)}")


@router.command("sarnak")
def sarnak(config: RunConfig) -> CommandResult:
    """Möbius-weighted orbit sums of the default observable up to N = --n"""
    try:
        sys = config.system
        schemes = measure_schemes(config)
        name = default_observable(sys)
        f = systems_service.observable(sys, name)
        # entry k-1 holds f(T^k x)
        trace = systems_service.observable_trace(sys, config.x, f, 1, config.n + 1)

        values = {}
        for scheme in schemes:
            if scheme == Scheme.ARITHMETIC:
                values["arithmetic"] = averaging_service.sarnak_sum(trace, config.n)
            else:
                values["logarithmic"] = averaging_service.sarnak_sum(trace, config.n, logarithmic=True)
                values["logarithmic_harmonic"] = averaging_service.sarnak_sum(
                    trace, config.n, logarithmic=True, harmonic_normalization=True
                )

        parts = " ".join(f"{key}={value:.6g}" for key, value in values.items())
        return CommandResult(
            summary=f"sarnak {name}: N={config.n} {parts}",
            document={"observable": name, "N": config.n, "sums": values},
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error computing Möbius sums: {str(e)}")


@router.command("oxtoby", requires_system=False)
def oxtoby(config: RunConfig) -> CommandResult:
    """Orbit average of an open-set indicator at 0 against the measure of the set"""
    try:
        alpha = config.alpha
        if alpha is None:
            if not isinstance(config.system, CircleRotation):
                raise ConfigError("oxtoby needs --alpha or a rotation system")
            alpha = config.system.alpha

        report = equicontinuity_service.oxtoby_experiment(alpha, config.n, config.mc_samples, config.seed)
        return CommandResult(
            summary=(
                f"oxtoby: avg_at_zero={report.avg_at_zero:.6g} "
                f"m(U)={report.m_of_U_estimate:.6g}±{report.m_of_U_stderr:.2g} gap={report.gap:.6g}"
            ),
            document={"report": report},
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error running Oxtoby experiment: {str(e)}")
