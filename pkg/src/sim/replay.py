import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..accel.cost_model import cache_fill_time, off_chip_energy
from ..models.hardware import HardwareConfig
from ..models.serving import QueryTrace, SchedulerConfig, ServingRecord
from ..models.supernet import SubNetDescriptor
from ..monitoring.metrics import MetricsCollector
from ..sched.scheduler import CacheAwareScheduler
from ..supernet.elastic import SuperNet, as_shape_array
from ..table.candidates import CandidateSet
from ..table.latency_table import LatencyTable, build_table
from .analysis import aggregate, cache_hit_ratio

logger = logging.getLogger(__name__)


def _observe(metrics: MetricsCollector, record: ServingRecord) -> None:
    metrics.increment_counter('queries_served')
    metrics.increment_counter('subnet_selections', labels={'subnet': record.subnet_id})
    metrics.record_histogram('served_latency_seconds', record.served_latency)
    metrics.record_histogram('hit_ratio', record.hit_ratio)
    if record.violated:
        metrics.increment_counter('constraint_violations')
    if not record.slo_met:
        metrics.increment_counter('slo_misses')


def replay(
    trace: QueryTrace,
    config: SchedulerConfig,
    table: LatencyTable,
    subnets: Sequence[SubNetDescriptor],
    candidates: CandidateSet,
    hw: HardwareConfig,
    supernet: SuperNet,
    metrics: Optional[MetricsCollector] = None,
) -> List[ServingRecord]:
    """Serve every query of `trace` in order.

    Bytes fetched by a cache update are charged to the query after the one that
    triggered it, both as latency (bytes / BW) and as energy.
    """
    table.ensure_fresh(hw)
    scheduler = CacheAwareScheduler(table, subnets, candidates, config)
    subnet_vectors = [as_shape_array(s).reshape(-1) for s in subnets]

    # (row, column) -> off-chip weight bytes missing from the cache
    misses: Dict[Tuple[int, int], int] = {}
    energies: Dict[Tuple[int, int, int], float] = {}
    records, pending_fill = [], 0
    for query in trace.queries:
        decision = scheduler.serve(query)
        row, col = decision.subnet_row, candidates.index_of(decision.served_cache_id)
        subnet, cached = subnets[row], candidates.subgraphs[col]

        if (row, col) not in misses:
            misses[row, col] = subnet.weight_bytes - supernet.overlap_bytes(subnet, cached)
        if (row, col, pending_fill) not in energies:
            energies[row, col, pending_fill] = off_chip_energy(supernet, subnet, cached, hw, fill_bytes=pending_fill)
        table_latency = table.lookup(decision.subnet_id, decision.served_cache_id)
        fill_latency = cache_fill_time(pending_fill, hw)
        served_latency = table_latency + fill_latency

        record = ServingRecord(
            t=query.t,
            subnet_id=decision.subnet_id,
            subgraph_id=decision.served_cache_id,
            accuracy_target=query.accuracy_target,
            latency_target=query.latency_target,
            table_latency=table_latency,
            fill_latency=fill_latency,
            served_latency=served_latency,
            served_accuracy=subnet.accuracy,
            violated=decision.violated,
            slo_met=served_latency <= query.latency_target,
            hit_ratio=cache_hit_ratio(subnet_vectors[row], candidates.vectors[col]),
            energy=energies[row, col, pending_fill],
            weight_miss_bytes=misses[row, col],
            fill_bytes=pending_fill,
            cache_updated=decision.cache_updated,
        )
        records.append(record)
        pending_fill = decision.fill_bytes

        if metrics is not None:
            _observe(metrics, record)
            if decision.cache_updated:
                metrics.increment_counter('cache_updates')
                metrics.set_gauge('cache_fill_bytes', decision.fill_bytes)

    summary = aggregate(records)
    logger.info(
        f"Replayed {summary.queries} queries: mean latency {summary.mean_latency * 1e3:.3f} ms, "
        f"mean accuracy {summary.mean_accuracy:.4f}, violations {summary.violation_rate:.1%}, "
        f"hit ratio {summary.mean_hit_ratio:.3f}, {summary.cache_updates} cache updates"
    )
    if summary.violation_rate > 0:
        logger.warning(f"{summary.violation_rate:.1%} of queries fell back outside their hard constraint")
    return records


def replay_without_pb(
    trace: QueryTrace,
    config: SchedulerConfig,
    subnets: Sequence[SubNetDescriptor],
    hw: HardwareConfig,
    supernet: SuperNet,
    metrics: Optional[MetricsCollector] = None,
) -> List[ServingRecord]:
    """Baseline: no persistent buffer, every weight is fetched for every query."""
    bare = hw.with_pb(0)
    candidates = CandidateSet.empty(supernet)
    table = build_table(supernet, subnets, candidates, bare)
    fixed = config.model_copy(update={"window": None, "initial_cache": 0})
    return replay(trace, fixed, table, subnets, candidates, bare, supernet, metrics)


def replay_state_unaware(
    trace: QueryTrace,
    config: SchedulerConfig,
    table: LatencyTable,
    subnets: Sequence[SubNetDescriptor],
    candidates: CandidateSet,
    hw: HardwareConfig,
    supernet: SuperNet,
    metrics: Optional[MetricsCollector] = None,
) -> List[ServingRecord]:
    """Baseline: a persistent buffer holding one seeded random candidate that never changes."""
    fixed = config.model_copy(update={"window": None, "initial_cache": None})
    return replay(trace, fixed, table, subnets, candidates, hw, supernet, metrics)


def mean_served_latency(records: Sequence[ServingRecord]) -> float:
    return float(np.mean([r.served_latency for r in records]))
