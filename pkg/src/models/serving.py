from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SchedulingPolicy(str, Enum):
    STRICT_ACCURACY = "strict_accuracy"
    STRICT_LATENCY = "strict_latency"


class TraceMix(str, Enum):
    UNIFORM = "uniform"
    ACCURACY_ONLY = "accuracy_only"
    LATENCY_ONLY = "latency_only"
    BURSTY = "bursty"


class Query(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: int = Field(ge=0)
    accuracy_target: float = Field(ge=0, le=1)
    latency_target: float = Field(gt=0)


class QueryTrace(BaseModel):
    queries: List[Query] = Field(min_length=1)
    seed: int = 0
    mix: TraceMix = TraceMix.UNIFORM
    parameters: Dict[str, float] = {}

    @model_validator(mode="after")
    def _check_indices(self) -> "QueryTrace":
        for expected, query in enumerate(self.queries):
            if query.t != expected:
                raise ValueError(f"query indices must run 0..n-1, found {query.t} at position {expected}")
        return self

    def __len__(self) -> int:
        return len(self.queries)


class SchedulerConfig(BaseModel):
    """Scheduler knobs. `window=None` keeps the initial cache forever."""

    policy: SchedulingPolicy = SchedulingPolicy.STRICT_ACCURACY
    window: Optional[int] = Field(10, ge=1)
    seed: int = 0
    initial_cache: Optional[int] = Field(None, ge=0)


class ServingRecord(BaseModel):
    t: int
    subnet_id: str
    subgraph_id: str
    accuracy_target: float
    latency_target: float
    table_latency: float = Field(gt=0)
    fill_latency: float = Field(ge=0)
    served_latency: float = Field(gt=0)
    served_accuracy: float = Field(ge=0, le=1)
    violated: bool
    slo_met: bool
    hit_ratio: float = Field(ge=0, le=1)
    energy: float = Field(ge=0)
    weight_miss_bytes: int = Field(ge=0)
    fill_bytes: int = Field(ge=0)
    cache_updated: bool


class ServingSummary(BaseModel):
    queries: int
    mean_latency: float
    p50_latency: float
    p95_latency: float
    p99_latency: float
    mean_accuracy: float
    violation_rate: float
    slo_attainment: float
    total_energy: float
    mean_hit_ratio: float
    cache_updates: int
    total_fill_bytes: int
