"""Equicontinuity subcommands: modulus, sensitivity, dichotomy, report"""
from pydantic import ValidationError

from app.models.schemas import DichotomyConfig, RunConfig
from app.routers.measures import defect_rows, start_points
from app.services import equicontinuity_service, measures_service
from app.services.equicontinuity_service import PairSampler
from app.utils.commands import CommandResult, CommandRouter, gap_scheme, measure_schemes
from app.utils.errors import ConfigError, ErgodicError

router = CommandRouter(tags=["equicontinuity"])


def dichotomy_config(config: RunConfig) -> DichotomyConfig:
    try:
        return DichotomyConfig(
            n_eval=config.n,
            scheme=gap_scheme(config),
            samples_per_delta=config.samples,
            pair_count=config.pairs,
            radius=config.radius,
            threshold=config.threshold,
            quantile=config.quantile,
            seed=config.seed,
        )
    except ValidationError as e:
        raise ConfigError(f"Invalid dichotomy parameters: {e}")


@router.command("modulus")
def modulus(config: RunConfig) -> CommandResult:
    """delta(eps) on the default eps grid from sampled pairs"""
    try:
        settings = dichotomy_config(config)
        profile = equicontinuity_service.modulus_profile(
            config.system,
            settings.eps_grid,
            PairSampler(config.system, config.seed),
            settings.n_eval,
            settings.scheme,
            settings.samples_per_delta,
        )
        rows = [
            {"eps": eps, "delta": delta, "scheme": profile.scheme, "n": profile.n_eval, "samples": profile.sample_count}
            for eps, delta in zip(profile.eps_grid, profile.delta_of_eps)
        ]
        found = sum(delta is not None for delta in profile.delta_of_eps)
        return CommandResult(
            summary=f"modulus ({profile.scheme.value}): delta found for {found}/{len(rows)} eps",
            document={"profile": profile},
            csv_fields=["eps", "delta", "scheme", "n", "samples"],
            csv_rows=rows,
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error estimating modulus: {str(e)}")


@router.command("sensitivity")
def sensitivity(config: RunConfig) -> CommandResult:
    """Low quantile of tail pair gaps in small balls or under the natural measure"""
    try:
        report = equicontinuity_service.sensitivity_estimate(
            config.system,
            PairSampler(config.system, config.seed),
            config.n,
            gap_scheme(config),
            config.pairs,
            mode=config.mode,
            radius=config.radius,
            quantile=config.quantile,
        )
        return CommandResult(
            summary=f"sensitivity ({report.scheme.value}, {report.mode}): eps={report.eps_estimate:.6g}",
            document={"report": report},
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error estimating sensitivity: {str(e)}")


@router.command("dichotomy")
def dichotomy(config: RunConfig) -> CommandResult:
    """MeanEquicontinuous, MeanSensitive or Undetermined"""
    try:
        verdict = equicontinuity_service.dichotomy_classify(config.system, dichotomy_config(config))
        return CommandResult(
            summary=f"dichotomy: {verdict.verdict.value} (eps={verdict.sensitivity.eps_estimate:.4g})",
            document={"verdict": verdict},
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error classifying system: {str(e)}")


@router.command("report")
def report(config: RunConfig) -> CommandResult:
    """Defect table, unique-ergodicity test and dichotomy verdict in one document"""
    try:
        sys = config.system
        family = measures_service.default_family(sys, config.family_size)
        points = start_points(config)
        ergodicity = {
            scheme.value: equicontinuity_service.unique_ergodicity_test(
                sys, points, config.n, scheme, family, config.tol
            )
            for scheme in measure_schemes(config, strict=False)
        }
        verdict = equicontinuity_service.dichotomy_classify(sys, dichotomy_config(config))
        verdicts = " ".join(f"{name}={r.verdict.value}" for name, r in ergodicity.items())
        return CommandResult(
            summary=f"report: {verdict.verdict.value} {verdicts}",
            document={
                "defect": defect_rows(config, strict=False),
                "unique_ergodicity": ergodicity,
                "dichotomy": verdict,
            },
        )

    except ErgodicError:
        raise
    except Exception as e:
        raise ErgodicError(f"Error building report: {str(e)}")
