import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..models.exceptions import AggregationError, ShapeValidationError, StructuralError, UndefinedRatioError
from ..models.serving import ServingRecord, ServingSummary

logger = logging.getLogger(__name__)

RECORD_COLUMNS = list(ServingRecord.model_fields)
SCATTER_COLUMNS = [
    "t",
    "subnet_id",
    "accuracy_target",
    "latency_target",
    "served_accuracy",
    "served_latency",
    "violated",
    "slo_met",
]


def cache_hit_ratio(subnet_vector, cached_vector) -> float:
    """||min(SN, G)||_2 / ||SN||_2 for one served query."""
    sn = np.asarray(subnet_vector, dtype=np.float64).reshape(-1)
    g = np.asarray(cached_vector, dtype=np.float64).reshape(-1)
    if sn.shape != g.shape:
        raise StructuralError(f"hit ratio needs equal-length vectors, got {sn.size} and {g.size}")
    if (sn < 0).any() or (g < 0).any():
        raise ShapeValidationError("hit ratio is defined for non-negative vectors only")
    denominator = np.linalg.norm(sn)
    if denominator == 0:
        raise UndefinedRatioError("hit ratio is undefined for an all-zero SubNet vector")
    return float(np.linalg.norm(np.minimum(sn, g)) / denominator)


def aggregate(records: Sequence[ServingRecord]) -> ServingSummary:
    if not records:
        raise AggregationError("cannot summarize an empty record stream")

    latency = np.array([r.served_latency for r in records])
    return ServingSummary(
        queries=len(records),
        mean_latency=float(latency.mean()),
        p50_latency=float(np.percentile(latency, 50)),
        p95_latency=float(np.percentile(latency, 95)),
        p99_latency=float(np.percentile(latency, 99)),
        mean_accuracy=float(np.mean([r.served_accuracy for r in records])),
        violation_rate=float(np.mean([r.violated for r in records])),
        slo_attainment=float(np.mean([r.slo_met for r in records])),
        total_energy=float(np.sum([r.energy for r in records])),
        mean_hit_ratio=float(np.mean([r.hit_ratio for r in records])),
        cache_updates=int(sum(r.cache_updated for r in records)),
        total_fill_bytes=int(sum(r.fill_bytes for r in records)),
    )


def records_to_frame(records: Sequence[ServingRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in records], columns=RECORD_COLUMNS)


def scatter_frame(records: Sequence[ServingRecord]) -> pd.DataFrame:
    """Latency-vs-accuracy points, one row per query."""
    return records_to_frame(records)[SCATTER_COLUMNS]


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_records_csv(
    records: Sequence[ServingRecord],
    path: Union[str, Path],
    header: Optional[Dict[str, Any]] = None,
) -> None:
    """records.csv plus a JSON sidecar holding seeds and config hashes."""
    path = Path(path)
    records_to_frame(records).to_csv(path, index=False)
    _sidecar(path).write_text(json.dumps({"records": len(records), **(header or {})}, indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote {len(records)} records to {path}")


def read_records_csv(path: Union[str, Path]) -> List[ServingRecord]:
    frame = pd.read_csv(
        path, dtype={"subnet_id": str, "subgraph_id": str}, float_precision="round_trip"
    )
    missing = [c for c in RECORD_COLUMNS if c not in frame.columns]
    if missing:
        raise StructuralError(f"{path}: missing record columns {missing}")
    return [ServingRecord.model_validate(row) for row in frame[RECORD_COLUMNS].to_dict(orient="records")]


def write_summary_json(summary: ServingSummary, path: Union[str, Path], header: Optional[Dict[str, Any]] = None):
    payload = {**(header or {}), "summary": summary.model_dump()}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
