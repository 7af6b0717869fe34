"""
Design-space exploration over persistent-buffer size, bandwidth and throughput.

Every grid point rebuilds its own cache candidates (PB size decides what can be
held) and its own latency table, and compares the served SubNets' latency with
and without the persistent buffer:

    time_save_pct = 100 * (mean_latency_nopb - mean_latency_pb) / mean_latency_nopb

Both means are taken over the same SubNet decisions, so a policy that admits
slower SubNets once the PB makes them feasible cannot show up as a loss.

Cache policies:
    static_core  the shared core of the serving SubNets, shrunk to fit the PB
                 if needed, held for the whole trace; SubNets are the ones
                 the no-PB replay serves
    scheduler    the full candidate set driven by the cache-aware scheduler;
                 SubNets are the ones the PB replay serves, cache fills included
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from ..accel.cost_model import AcceleratorModel
from ..models.exceptions import ConfigurationError, SGSError
from ..models.hardware import HardwareConfig
from ..models.serving import QueryTrace, SchedulerConfig
from ..models.supernet import SubNetDescriptor
from ..sim.analysis import aggregate
from ..sim.replay import mean_served_latency, replay, replay_without_pb
from ..supernet.elastic import SuperNet, as_shape_array
from ..table.candidates import CandidateSet, build_candidate_set, shrink_to_fit
from ..table.latency_table import LatencyTable, build_table

logger = logging.getLogger(__name__)

DSE_COLUMNS = ["pb_bytes", "bw_bytes_per_s", "flops_per_s", "mean_latency_pb", "mean_latency_nopb", "time_save_pct"]
CACHE_POLICIES = ("static_core", "scheduler")
ABLATION_COLUMNS = (10, 40, 80, 100, 500)
WINDOW_VALUES = (1, 2, 4, 8, 10)

GridPoint = Tuple[int, float, float]


class GridSpec(BaseModel):
    pb_bytes: List[int] = Field(min_length=1)
    bandwidth: List[float] = Field(min_length=1)
    throughput: List[float] = Field(min_length=1)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "GridSpec":
        return cls.model_validate_json(Path(path).read_text())

    def points(self) -> List[GridPoint]:
        return list(product(self.pb_bytes, self.bandwidth, self.throughput))


def static_core_candidates(supernet: SuperNet, subnets: Sequence[SubNetDescriptor], pb_bytes: int) -> CandidateSet:
    """One-column candidate set holding the shared core, shrunk to the PB when it does not fit."""
    shape = as_shape_array(supernet.shared_core(subnets))
    if supernet.shape_bytes(shape) > pb_bytes:
        shape = shrink_to_fit(supernet, shape, pb_bytes)
    return CandidateSet.from_subgraphs(supernet, [supernet.subgraph("static-core", shape)], pb_bytes)


def _point_hw(base_hw: HardwareConfig, point: GridPoint) -> HardwareConfig:
    pb, bw, flops = point
    payload = {**base_hw.model_dump(), "pb_bytes": pb, "bandwidth": bw, "throughput": flops}
    return HardwareConfig(**payload)


def cold_latencies(supernet: SuperNet, subnets: Sequence[SubNetDescriptor], hw: HardwareConfig) -> Dict[str, float]:
    """Per-SubNet latency with nothing cached, keyed by SubNet id."""
    cold = AcceleratorModel(supernet, hw).latency_matrix(subnets, [supernet.empty_subgraph()])[:, 0]
    return {s.id: float(latency) for s, latency in zip(subnets, cold)}


def _run_point(
    point: GridPoint,
    supernet: SuperNet,
    subnets: Sequence[SubNetDescriptor],
    base_hw: HardwareConfig,
    trace: QueryTrace,
    cache_policy: str,
    config: SchedulerConfig,
    max_columns: int,
    alpha: float,
    seed: int,
    grid_samples: int,
) -> dict:
    pb, bw, flops = point
    label = f"grid point (PB={pb}, BW={bw:g}, P={flops:g})"
    try:
        hw = _point_hw(base_hw, point)
        if pb == 0:
            nopb = with_pb = mean_served_latency(replay_without_pb(trace, config, subnets, hw, supernet))
        elif cache_policy == "static_core":
            # Same SubNet per query with and without the PB; only the resident core differs.
            bare = replay_without_pb(trace, config, subnets, hw, supernet)
            candidates = static_core_candidates(supernet, subnets, pb)
            table = build_table(supernet, subnets, candidates, hw)
            core = candidates.ids[0]
            nopb = mean_served_latency(bare)
            with_pb = float(np.mean([table.lookup(r.subnet_id, core) for r in bare]))
        else:
            candidates = build_candidate_set(
                supernet, subnets, hw, max_columns, alpha=alpha, seed=seed, grid_samples=grid_samples
            )
            table = build_table(supernet, subnets, candidates, hw)
            records = replay(trace, config, table, subnets, candidates, hw, supernet)
            cold = cold_latencies(supernet, subnets, hw)
            nopb = float(np.mean([cold[r.subnet_id] for r in records]))
            with_pb = mean_served_latency(records)
    except ValidationError as e:
        raise ConfigurationError(f"{label}: {e}") from e
    except SGSError as e:
        raise type(e)(f"{label}: {e}") from e

    saving = 0.0 if pb == 0 else 100.0 * (nopb - with_pb) / nopb
    logger.info(f"{label}: {nopb * 1e3:.3f} ms -> {with_pb * 1e3:.3f} ms, time save {saving:.2f}%")
    return {
        "pb_bytes": pb,
        "bw_bytes_per_s": bw,
        "flops_per_s": flops,
        "mean_latency_pb": with_pb,
        "mean_latency_nopb": nopb,
        "time_save_pct": saving,
    }


def sweep(
    supernet: SuperNet,
    subnets: Sequence[SubNetDescriptor],
    grid: GridSpec,
    base_hw: HardwareConfig,
    trace: QueryTrace,
    cache_policy: str = "static_core",
    config: Optional[SchedulerConfig] = None,
    max_columns: int = 100,
    alpha: float = 0.5,
    seed: int = 0,
    grid_samples: int = 0,
    workers: int = 1,
) -> pd.DataFrame:
    """One row per grid point, sorted by (PB, BW, P) whatever order the grid lists them in."""
    if cache_policy not in CACHE_POLICIES:
        raise ConfigurationError(f"unknown cache policy {cache_policy!r}, expected one of {CACHE_POLICIES}")
    if not subnets:
        raise ConfigurationError("sweep needs at least one serving subnet")
    config = config or SchedulerConfig(seed=seed)
    points = sorted(set(grid.points()))

    def run(point: GridPoint) -> dict:
        return _run_point(
            point, supernet, subnets, base_hw, trace, cache_policy, config, max_columns, alpha, seed, grid_samples
        )

    logger.info(f"Sweeping {len(points)} grid points with {cache_policy} caching on {workers} worker(s)")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, points))
    else:
        rows = [run(point) for point in points]

    frame = pd.DataFrame(rows, columns=DSE_COLUMNS)
    return frame.sort_values(["pb_bytes", "bw_bytes_per_s", "flops_per_s"], kind="mergesort").reset_index(drop=True)


def row_minimum_improvement(
    supernet: SuperNet, subnets: Sequence[SubNetDescriptor], table: LatencyTable, hw: HardwareConfig
) -> float:
    """Mean over SubNets of the best-column latency saving versus serving without a cache, in percent."""
    cold = AcceleratorModel(supernet, hw).latency_matrix(subnets, [supernet.empty_subgraph()])[:, 0]
    return float((100.0 * (cold - table.row_minima()) / cold).mean())


def table_size_ablation(
    supernet: SuperNet,
    subnets: Sequence[SubNetDescriptor],
    hw: HardwareConfig,
    trace: QueryTrace,
    columns: Iterable[int] = ABLATION_COLUMNS,
    config: Optional[SchedulerConfig] = None,
    alpha: float = 0.5,
    seed: int = 0,
    grid_samples: int = 1000,
) -> pd.DataFrame:
    """Latency improvement as the latency table gains columns.

    Candidate selections for smaller column counts are prefixes of larger ones,
    so the row-minimum improvement cannot decrease with the column count.
    """
    config = config or SchedulerConfig(seed=seed)
    nopb = mean_served_latency(replay_without_pb(trace, config, subnets, hw, supernet))
    rows = []
    for count in sorted(columns):
        candidates = build_candidate_set(supernet, subnets, hw, count, alpha=alpha, seed=seed, grid_samples=grid_samples)
        if len(candidates) < count:
            logger.warning(f"Only {len(candidates)} eligible subgraphs for a {count}-column table")
        table = build_table(supernet, subnets, candidates, hw)
        served = mean_served_latency(replay(trace, config, table, subnets, candidates, hw, supernet))
        rows.append(
            {
                "columns": count,
                "table_columns": len(candidates),
                "row_min_improvement_pct": row_minimum_improvement(supernet, subnets, table, hw),
                "replay_improvement_pct": 100.0 * (nopb - served) / nopb,
            }
        )
    return pd.DataFrame(rows)


def window_sweep(
    trace: QueryTrace,
    table: LatencyTable,
    subnets: Sequence[SubNetDescriptor],
    candidates: CandidateSet,
    hw: HardwareConfig,
    supernet: SuperNet,
    windows: Iterable[Optional[int]] = WINDOW_VALUES,
    config: Optional[SchedulerConfig] = None,
) -> pd.DataFrame:
    """One serving summary per AvgNet window Q on the same trace; None keeps the initial cache."""
    config = config or SchedulerConfig()
    rows = []
    for window in windows:
        if window is not None and window < 1:
            raise ConfigurationError(f"window must be >= 1, got {window}")
        records = replay(
            trace, config.model_copy(update={"window": window}), table, subnets, candidates, hw, supernet
        )
        rows.append({"window": window, **aggregate(records).model_dump()})
    return pd.DataFrame(rows)
