from .averaging_service import AveragingService, averaging_service
from .systems_service import SystemsService, systems_service
from .measures_service import MeasuresService, measures_service
from .equicontinuity_service import EquicontinuityService, PairSampler, equicontinuity_service

__all__ = [
    "AveragingService",
    "SystemsService",
    "MeasuresService",
    "EquicontinuityService",
    "PairSampler",
    "averaging_service",
    "systems_service",
    "measures_service",
    "equicontinuity_service",
]
