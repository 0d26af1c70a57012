"""searchgym: hybrid search orchestration with content-addressed builds."""

__version__ = "0.1.0"

from .schema import DatasetConfig, Document, Violation  # noqa: F401
from .types import CostCounters, ScoredHit  # noqa: F401
