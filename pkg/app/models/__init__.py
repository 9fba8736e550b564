from .schemas import (
    ConstantSource,
    PeriodicSource,
    SturmianSource,
    BlockSource,
    ExplicitSource,
    SymbolSource,
    CircleRotation,
    DoublingMap,
    BinaryShift,
    ProductSystem,
    SystemSpec,
    CirclePoint,
    ShiftPoint,
    ProductPoint,
    PointRef,
    Scheme,
    GapScheme,
    Verdict,
    ErgodicityVerdict,
    TailEstimate,
    ModulusProfile,
    SensitivityReport,
    DichotomyVerdict,
    UniqueErgodicityReport,
    OxtobyReport,
    MeasureSummary,
    MeasureSetSummary,
    RunConfig,
    DichotomyConfig,
)
from .domain import RealTrace, EmpiricalMeasure, TestFamily, MeasureSet

__all__ = [
    "ConstantSource",
    "PeriodicSource",
    "SturmianSource",
    "BlockSource",
    "ExplicitSource",
    "SymbolSource",
    "CircleRotation",
    "DoublingMap",
    "BinaryShift",
    "ProductSystem",
    "SystemSpec",
    "CirclePoint",
    "ShiftPoint",
    "ProductPoint",
    "PointRef",
    "Scheme",
    "GapScheme",
    "Verdict",
    "ErgodicityVerdict",
    "TailEstimate",
    "ModulusProfile",
    "SensitivityReport",
    "DichotomyVerdict",
    "UniqueErgodicityReport",
    "OxtobyReport",
    "MeasureSummary",
    "MeasureSetSummary",
    "RunConfig",
    "DichotomyConfig",
    "RealTrace",
    "EmpiricalMeasure",
    "TestFamily",
    "MeasureSet",
]
