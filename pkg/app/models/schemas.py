"""Pydantic models for systems, points, run configuration and reports"""
import math
from enum import Enum
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------------------
# Symbol sources (points of the binary shift)
# ---------------------------------------------------------------------------

class ConstantSource(FrozenModel):
    """The fixed point s^infinity"""
    kind: Literal["constant"] = "constant"
    symbol: Literal[0, 1] = 0


class PeriodicSource(FrozenModel):
    """The periodic point word^infinity"""
    kind: Literal["periodic"] = "periodic"
    word: str = Field(pattern=r"^[01]+$")


class SturmianSource(FrozenModel):
    """s_k = floor((k+1)alpha + x0) - floor(k alpha + x0)"""
    kind: Literal["sturmian"] = "sturmian"
    alpha: float = Field(gt=0.0, lt=1.0)
    x0: float = 0.0


class BlockSource(FrozenModel):
    """Block j has length base**j and carries symbol j mod 2"""
    kind: Literal["block"] = "block"
    base: int = Field(default=2, ge=2)


class ExplicitSource(FrozenModel):
    """A finite word followed by an extension rule"""
    kind: Literal["explicit"] = "explicit"
    word: str = Field(default="", pattern=r"^[01]*$")
    extension: Literal["zeros", "ones", "repeat", "random"] = "zeros"
    seed: int = 0

    @field_validator("extension")
    @classmethod
    def _repeat_needs_word(cls, value, info):
        if value == "repeat" and not info.data.get("word"):
            raise ValueError("extension 'repeat' needs a non-empty word")
        return value


SymbolSource = Annotated[
    Union[ConstantSource, PeriodicSource, SturmianSource, BlockSource, ExplicitSource],
    Field(discriminator="kind"),
]


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

class CircleRotation(FrozenModel):
    kind: Literal["rotation"] = "rotation"
    alpha: float = Field(gt=0.0, lt=1.0)
    metric_scale: float = Field(default=2.0, gt=0.0, le=2.0)


class DoublingMap(FrozenModel):
    kind: Literal["doubling"] = "doubling"
    metric_scale: float = Field(default=2.0, gt=0.0, le=2.0)


class BinaryShift(FrozenModel):
    """One-sided shift on {0,1}^N; `source` is the reference point of the fixture"""
    kind: Literal["shift"] = "shift"
    source: SymbolSource = Field(default_factory=ConstantSource)
    metric_scale: float = Field(default=1.0, gt=0.0, le=1.0)


class ProductSystem(FrozenModel):
    """Componentwise map with the max metric"""
    kind: Literal["product"] = "product"
    left: "SystemSpec"
    right: "SystemSpec"


SystemSpec = Annotated[
    Union[CircleRotation, DoublingMap, BinaryShift, ProductSystem],
    Field(discriminator="kind"),
]

ProductSystem.model_rebuild()


# ---------------------------------------------------------------------------
# Points
# ---------------------------------------------------------------------------

class CirclePoint(FrozenModel):
    """T^offset applied to `position`.

    For doubling systems the point is the binary expansion of `position`
    followed by zero digits, or by seeded random digits when tail_seed is set.
    """
    kind: Literal["circle"] = "circle"
    position: float = 0.0
    offset: int = Field(default=0, ge=0)
    tail_seed: Optional[int] = None

    @field_validator("position")
    @classmethod
    def _reduce_mod_one(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("position must be finite")
        reduced = value % 1.0
        return 0.0 if reduced == 1.0 else reduced


class ShiftPoint(FrozenModel):
    kind: Literal["shift"] = "shift"
    source: SymbolSource
    offset: int = Field(default=0, ge=0)


class ProductPoint(FrozenModel):
    kind: Literal["product"] = "product"
    left: "PointRef"
    right: "PointRef"


PointRef = Annotated[
    Union[CirclePoint, ShiftPoint, ProductPoint],
    Field(discriminator="kind"),
]

ProductPoint.model_rebuild()


# ---------------------------------------------------------------------------
# Schemes and verdicts
# ---------------------------------------------------------------------------

class Scheme(str, Enum):
    """Weights of an empirical measure"""
    ARITHMETIC = "arithmetic"
    LOGARITHMIC = "logarithmic"


class GapScheme(str, Enum):
    """Averaging used for time-averaged orbit distances"""
    CESARO = "cesaro"
    LOGARITHMIC = "logarithmic"
    WEYL_CESARO = "weyl-cesaro"
    WEYL_LOGARITHMIC = "weyl-logarithmic"

    @property
    def logarithmic(self) -> bool:
        return self in (GapScheme.LOGARITHMIC, GapScheme.WEYL_LOGARITHMIC)

    @property
    def weyl(self) -> bool:
        return self in (GapScheme.WEYL_CESARO, GapScheme.WEYL_LOGARITHMIC)


class Verdict(str, Enum):
    MEAN_EQUICONTINUOUS = "MeanEquicontinuous"
    MEAN_SENSITIVE = "MeanSensitive"
    UNDETERMINED = "Undetermined"


class ErgodicityVerdict(str, Enum):
    CONSISTENT = "UniquelyErgodicConsistent"
    INCONSISTENT = "Inconsistent"


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

class TailEstimate(BaseModel):
    """Finite-n proxy for limsup / liminf along an evaluation schedule"""
    schedule: List[int]
    values: List[float]
    sup_est: float
    inf_est: float
    window_fraction: float

    @property
    def spread(self) -> float:
        return self.sup_est - self.inf_est


class ModulusProfile(BaseModel):
    """delta(eps) for each eps of the grid; None marks a failure"""
    eps_grid: List[float]
    delta_of_eps: List[Optional[float]]
    max_gap_at_delta: List[Optional[float]]
    scheme: GapScheme
    n_eval: int
    sample_count: int
    sampler_exhausted: bool = False

    @property
    def complete(self) -> bool:
        return all(delta is not None for delta in self.delta_of_eps)


class SensitivityReport(BaseModel):
    eps_estimate: float = Field(ge=0.0, le=1.0)
    pair_count: int
    horizon: int
    scheme: GapScheme
    quantile_used: float
    mode: Literal["ball", "measure"]
    radius: Optional[float] = None
    degenerate: bool = False


class DichotomyVerdict(BaseModel):
    verdict: Verdict
    threshold: float
    profile: ModulusProfile
    sensitivity: SensitivityReport
    conflicting: bool = False


class UniqueErgodicityReport(BaseModel):
    verdict: ErgodicityVerdict
    max_pairwise_rho: float
    tol: float
    effective_tol: float
    scheme: Scheme
    n: int
    start_count: int
    reference_n: Optional[int] = None
    reference_rho: Optional[float] = None


class OxtobyReport(BaseModel):
    alpha: float
    n: int
    mc_samples: int
    avg_at_zero: float
    m_of_U_estimate: float
    m_of_U_stderr: float
    gap: float
    avg_at_random_start: float


class MeasureSummary(BaseModel):
    """JSON summary of an empirical measure"""
    atom_count: int
    window: List[int]
    scheme: Scheme
    integrals: List[float]


class MeasureSetSummary(BaseModel):
    cluster_tol: float
    members: List[MeasureSummary]
    pairwise_min_rho: Optional[float] = None


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

# Accepted --scheme values: measure schemes, gap schemes and short aliases
SCHEME_NAMES = {
    "both", "arithmetic", "cesaro", "logarithmic", "log", "weyl-cesaro", "weyl-logarithmic",
}


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run"""
    model_config = ConfigDict(extra="forbid")

    experiment: str
    system: SystemSpec
    x: PointRef
    y: Optional[PointRef] = None
    n: int = Field(default=100_000, ge=1)
    n0: int = Field(default=64, ge=1)
    ratio: float = Field(default=1.25, gt=1.0)
    window_fraction: float = Field(default=0.25, gt=0.0, le=1.0)
    scheme: str = "both"
    seed: int = 0
    alpha: Optional[float] = None
    mc_samples: int = Field(default=100_000, ge=1)
    starts: int = Field(default=10, ge=1)
    pairs: int = Field(default=100, ge=1)
    tol: float = Field(default=0.01, gt=0.0)
    threshold: float = Field(default=0.05, gt=0.0)
    cluster_tol: float = Field(default=0.05, gt=0.0)
    radius: float = Field(default=2.0 ** -10, gt=0.0)
    mode: Literal["ball", "measure"] = "ball"
    samples: int = Field(default=16, ge=2)
    quantile: float = Field(default=0.1, gt=0.0, lt=1.0)
    family_size: int = Field(default=16, ge=1)
    threads: int = Field(default=1, ge=1)
    out_csv: Optional[str] = None
    out_json: Optional[str] = None

    @field_validator("scheme")
    @classmethod
    def known_scheme(cls, v: str) -> str:
        v = v.lower()
        if v not in SCHEME_NAMES:
            raise ValueError(f"unknown scheme '{v}', expected one of {sorted(SCHEME_NAMES)}")
        return v


class DichotomyConfig(BaseModel):
    """Evidence budget for the mean equicontinuity / mean sensitivity dichotomy"""
    eps_grid: List[float] = Field(default_factory=lambda: [2.0 ** -i for i in range(1, 7)])
    n_eval: int = Field(default=10_000, ge=1)
    scheme: GapScheme = GapScheme.CESARO
    samples_per_delta: int = Field(default=16, ge=2)
    pair_count: int = Field(default=30, ge=30)
    radius: float = Field(default=2.0 ** -10, gt=0.0)
    threshold: float = Field(default=0.05, gt=0.0)
    quantile: float = Field(default=0.1, gt=0.0, lt=1.0)
    seed: int = 0
