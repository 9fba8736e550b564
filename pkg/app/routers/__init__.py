from .averages import router as averages_router
from .measures import router as measures_router
from .equicontinuity import router as equicontinuity_router

__all__ = [
    "averages_router",
    "measures_router",
    "equicontinuity_router",
]
