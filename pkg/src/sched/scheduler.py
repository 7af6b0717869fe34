"""
Cache-state-aware query scheduler.

Per query: pick the SubNet to serve from the latency-table column of the
currently cached SubGraph (STRICT_ACCURACY minimizes latency among SubNets
meeting A_t; STRICT_LATENCY maximizes accuracy among SubNets meeting L_t).
Every query feeds a running average (AvgNet) of the last Q served SubNet
vectors; every Q queries the candidate SubGraph nearest to AvgNet becomes the
new cache state.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from ..models.exceptions import ConfigurationError, StructuralError
from ..models.serving import Query, SchedulerConfig, SchedulingPolicy
from ..models.supernet import SubNetDescriptor
from ..supernet.elastic import as_shape_array
from ..table.candidates import CandidateSet
from ..table.latency_table import LatencyTable

logger = logging.getLogger(__name__)


@dataclass
class SchedulerState:
    policy: SchedulingPolicy
    window: Optional[int]
    cache_index: int
    cache_id: str
    vector_length: int
    history: Deque[np.ndarray] = field(default_factory=deque)
    history_sum: np.ndarray = None
    queries_since_update: int = 0

    def __post_init__(self):
        if self.history_sum is None:
            self.history_sum = np.zeros(self.vector_length, dtype=np.int64)

    @classmethod
    def initial(cls, config: SchedulerConfig, candidates: CandidateSet) -> "SchedulerState":
        if config.initial_cache is not None:
            index = config.initial_cache
            if index >= len(candidates):
                raise ConfigurationError(
                    f"initial cache index {index} out of range for {len(candidates)} candidates"
                )
        else:
            index = int(np.random.default_rng(config.seed).integers(len(candidates)))
        return cls(
            policy=config.policy,
            window=config.window,
            cache_index=index,
            cache_id=candidates.subgraphs[index].id,
            vector_length=candidates.vectors.shape[1],
        )

    @property
    def avg_net(self) -> np.ndarray:
        if not self.history:
            return np.zeros(self.vector_length, dtype=np.float64)
        return self.history_sum / len(self.history)


@dataclass(frozen=True)
class SubnetChoice:
    subnet_id: str
    row: int
    violated: bool


@dataclass(frozen=True)
class Decision:
    subnet_id: str
    subnet_row: int
    violated: bool
    served_cache_id: str
    cache_updated: bool
    new_cache_id: Optional[str]
    fill_bytes: int


def _check_rows(table: LatencyTable, subnets: Sequence[SubNetDescriptor]) -> None:
    if not subnets:
        raise ConfigurationError("scheduler needs at least one subnet")
    if len(subnets) != len(table.subnet_ids) or any(
        s.id != rid for s, rid in zip(subnets, table.subnet_ids)
    ):
        raise ConfigurationError("latency table rows do not match the serving subnets")


def choose_row(
    policy: SchedulingPolicy,
    accuracies: np.ndarray,
    latencies: np.ndarray,
    accuracy_target: float,
    latency_target: float,
) -> Tuple[int, bool]:
    """Row to serve and whether the hard constraint had to be dropped.

    np.argmin/np.argmax return the first extreme, which breaks ties toward
    the lowest row.
    """
    if policy is SchedulingPolicy.STRICT_ACCURACY:
        feasible = np.flatnonzero(accuracies >= accuracy_target)
        if feasible.size:
            return int(feasible[np.argmin(latencies[feasible])]), False
        return int(np.argmax(accuracies)), True
    feasible = np.flatnonzero(latencies <= latency_target)
    if feasible.size:
        return int(feasible[np.argmax(accuracies[feasible])]), False
    return int(np.argmin(latencies)), True


def select_subnet(
    query: Query, state: SchedulerState, table: LatencyTable, subnets: Sequence[SubNetDescriptor]
) -> SubnetChoice:
    _check_rows(table, subnets)
    accuracies = np.array([s.accuracy for s in subnets], dtype=np.float64)
    latencies = table.column(table.column_index(state.cache_id))
    row, violated = choose_row(state.policy, accuracies, latencies, query.accuracy_target, query.latency_target)
    return SubnetChoice(subnet_id=subnets[row].id, row=row, violated=violated)


def update_average(state: SchedulerState, vector: np.ndarray) -> SchedulerState:
    vector = np.asarray(vector).astype(np.int64).reshape(-1)
    if vector.size != state.vector_length:
        raise StructuralError(f"served vector has {vector.size} entries, expected {state.vector_length}")
    state.history.append(vector)
    state.history_sum = state.history_sum + vector
    if state.window is not None and len(state.history) > state.window:
        state.history_sum = state.history_sum - state.history.popleft()
    return state


def nearest_candidate(state: SchedulerState, candidates: CandidateSet) -> int:
    """Index of the candidate closest to AvgNet in Euclidean distance.

    With n vectors in the history summing to s, |g - s/n| orders the same way as
    |n*g - s|, which is evaluated exactly in integers.
    """
    if len(candidates) == 0:
        raise ConfigurationError("cannot select a cache state from an empty candidate set")
    n = len(state.history)
    if n == 0:
        distances = (candidates.vectors.astype(np.int64) ** 2).sum(axis=1)
    else:
        distances = ((n * candidates.vectors.astype(np.int64) - state.history_sum) ** 2).sum(axis=1)
    return int(np.argmin(distances))


def select_cache(state: SchedulerState, candidates: CandidateSet) -> str:
    return candidates.subgraphs[nearest_candidate(state, candidates)].id


def step(
    query: Query,
    state: SchedulerState,
    table: LatencyTable,
    subnets: Sequence[SubNetDescriptor],
    candidates: CandidateSet,
) -> Tuple[Decision, SchedulerState]:
    choice = select_subnet(query, state, table, subnets)
    served_cache_id = state.cache_id
    update_average(state, as_shape_array(subnets[choice.row]).reshape(-1))
    state.queries_since_update += 1

    new_cache_id, fill_bytes = None, 0
    if state.window is not None and state.queries_since_update >= state.window:
        state.queries_since_update = 0
        index = nearest_candidate(state, candidates)
        if index != state.cache_index:
            fill_bytes = candidates.fill_bytes(state.cache_index, index)
            state.cache_index = index
            state.cache_id = new_cache_id = candidates.subgraphs[index].id
            logger.debug(f"q{query.t}: cache {served_cache_id} -> {new_cache_id}, fetching {fill_bytes} bytes")

    decision = Decision(
        subnet_id=choice.subnet_id,
        subnet_row=choice.row,
        violated=choice.violated,
        served_cache_id=served_cache_id,
        cache_updated=new_cache_id is not None,
        new_cache_id=new_cache_id,
        fill_bytes=fill_bytes,
    )
    return decision, state


class CacheAwareScheduler:
    """Sequential driver around `step` holding the immutable serving artifacts."""

    def __init__(
        self,
        table: LatencyTable,
        subnets: Sequence[SubNetDescriptor],
        candidates: CandidateSet,
        config: SchedulerConfig,
    ):
        _check_rows(table, subnets)
        missing = [gid for gid in candidates.ids if gid not in table.subgraph_ids]
        if missing:
            raise ConfigurationError(f"latency table has no column for candidates {missing[:3]}")
        self.table = table
        self.subnets = list(subnets)
        self.candidates = candidates
        self.config = config
        self.state = SchedulerState.initial(config, candidates)
        logger.info(
            f"Scheduler {config.policy.value}, Q={config.window}, initial cache {self.state.cache_id}"
        )

    def serve(self, query: Query) -> Decision:
        decision, self.state = step(query, self.state, self.table, self.subnets, self.candidates)
        if decision.violated:
            logger.debug(f"q{query.t}: no SubNet meets the hard constraint, served {decision.subnet_id}")
        return decision

    def run(self, queries: Sequence[Query]) -> List[Decision]:
        return [self.serve(q) for q in queries]
