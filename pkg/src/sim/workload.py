"""
Synthetic query streams.

A trace is a list of (A_t, L_t) targets. The default mix draws both
independently and uniformly over the range the serving SubNets can cover,
widened by a margin so some queries are infeasible:

    A_t ~ U[min acc - eps, max acc + eps]   (clipped to [0, 1])
    L_t ~ U[0.8 * min table latency, 1.2 * max table latency]

Other mixes:
    accuracy_only  L_t fixed at the loose upper bound, only A_t varies
    latency_only   A_t fixed at the loose lower bound, only L_t varies
    bursty         a target pair is held for a geometric number of queries
                   (mean `burst_mean`) with small Gaussian jitter
"""
import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..models.exceptions import ConfigurationError, StructuralError
from ..models.serving import Query, QueryTrace, TraceMix
from ..models.supernet import SubNetDescriptor
from ..table.latency_table import LatencyTable

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["t", "accuracy_target", "latency_target"]
DEFAULT_BURST_MEAN = 20
JITTER_FRACTION = 0.01


def latency_bounds(table: LatencyTable) -> Tuple[float, float]:
    return 0.8 * float(table.entries.min()), 1.2 * float(table.entries.max())


def accuracy_bounds(subnets: Sequence[SubNetDescriptor], epsilon: float) -> Tuple[float, float]:
    accuracies = [s.accuracy for s in subnets]
    return max(0.0, min(accuracies) - epsilon), min(1.0, max(accuracies) + epsilon)


def _bursts(rng: np.random.Generator, count: int, burst_mean: float) -> np.ndarray:
    """Burst id per query; lengths are geometric with the given mean."""
    ids = np.empty(count, dtype=np.int64)
    position, burst = 0, 0
    while position < count:
        length = int(rng.geometric(1.0 / burst_mean))
        ids[position:position + length] = burst
        position += length
        burst += 1
    return ids


def generate_trace(
    subnets: Sequence[SubNetDescriptor],
    count: int,
    mix: TraceMix = TraceMix.UNIFORM,
    seed: int = 0,
    table: Optional[LatencyTable] = None,
    latency_range: Optional[Tuple[float, float]] = None,
    epsilon: float = 0.01,
    burst_mean: float = DEFAULT_BURST_MEAN,
) -> QueryTrace:
    if not subnets:
        raise ConfigurationError("trace generation needs at least one subnet")
    if count < 1:
        raise ConfigurationError(f"trace length must be >= 1, got {count}")
    if latency_range is None:
        if table is None:
            raise ConfigurationError("trace generation needs a latency table or an explicit latency range")
        latency_range = latency_bounds(table)
    a_lo, a_hi = accuracy_bounds(subnets, epsilon)
    l_lo, l_hi = latency_range
    if not 0 < l_lo <= l_hi:
        raise ConfigurationError(f"invalid latency range [{l_lo}, {l_hi}]")

    mix = TraceMix(mix)
    rng = np.random.default_rng(seed)
    if mix is TraceMix.UNIFORM:
        acc = rng.uniform(a_lo, a_hi, count)
        lat = rng.uniform(l_lo, l_hi, count)
    elif mix is TraceMix.ACCURACY_ONLY:
        acc = rng.uniform(a_lo, a_hi, count)
        lat = np.full(count, l_hi)
    elif mix is TraceMix.LATENCY_ONLY:
        acc = np.full(count, a_lo)
        lat = rng.uniform(l_lo, l_hi, count)
    else:
        burst = _bursts(rng, count, burst_mean)
        n_bursts = int(burst[-1]) + 1
        acc_centers = rng.uniform(a_lo, a_hi, n_bursts)
        lat_centers = rng.uniform(l_lo, l_hi, n_bursts)
        acc = np.clip(acc_centers[burst] + rng.normal(0, JITTER_FRACTION * (a_hi - a_lo), count), a_lo, a_hi)
        lat = np.clip(lat_centers[burst] + rng.normal(0, JITTER_FRACTION * (l_hi - l_lo), count), l_lo, l_hi)

    queries = [
        Query(t=t, accuracy_target=float(a), latency_target=float(l))
        for t, (a, l) in enumerate(zip(acc, lat))
    ]
    parameters = {
        "accuracy_low": a_lo,
        "accuracy_high": a_hi,
        "latency_low": l_lo,
        "latency_high": l_hi,
        "epsilon": epsilon,
    }
    if mix is TraceMix.BURSTY:
        parameters["burst_mean"] = float(burst_mean)
    logger.info(f"Generated {count}-query {mix.value} trace (seed {seed})")
    return QueryTrace(queries=queries, seed=seed, mix=mix, parameters=parameters)


def trace_to_frame(trace: QueryTrace) -> pd.DataFrame:
    return pd.DataFrame([q.model_dump() for q in trace.queries], columns=TRACE_COLUMNS)


def write_trace(trace: QueryTrace, path: Union[str, Path]) -> None:
    """trace.csv plus a JSON sidecar with seed, mix and generator parameters."""
    path = Path(path)
    trace_to_frame(trace).to_csv(path, index=False)
    header = {"queries": len(trace), "seed": trace.seed, "mix": trace.mix.value, "parameters": trace.parameters}
    path.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def read_trace(path: Union[str, Path]) -> QueryTrace:
    path = Path(path)
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != TRACE_COLUMNS:
        raise StructuralError(f"{path}: expected columns {TRACE_COLUMNS}, found {list(frame.columns)}")
    sidecar = path.with_suffix(".json")
    header = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    queries = [
        Query(t=int(t), accuracy_target=float(a), latency_target=float(l))
        for t, a, l in frame.itertuples(index=False, name=None)
    ]
    return QueryTrace(
        queries=queries,
        seed=header.get("seed", 0),
        mix=header.get("mix", TraceMix.UNIFORM),
        parameters=header.get("parameters", {}),
    )
