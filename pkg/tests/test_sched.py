from fractions import Fraction

import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import HealthCheck, settings
from hypothesis.stateful import RuleBasedStateMachine, initialize, invariant, rule, run_state_machine_as_test

from src.models.exceptions import ConfigurationError
from src.models.serving import Query, SchedulerConfig, SchedulingPolicy
from src.models.supernet import SubGraphDescriptor, SubNetDescriptor
from src.sched.scheduler import (
    CacheAwareScheduler,
    SchedulerState,
    nearest_candidate,
    select_cache,
    select_subnet,
    step,
    update_average,
)
from src.table.candidates import CandidateSet
from src.table.latency_table import LatencyTable

INSTANCES = 10_000
ACCURACY_GRID = np.round(np.arange(0.70, 0.81, 0.01), 2)


def make_subnets(accuracies):
    return [
        SubNetDescriptor(id=f"s{i}", shape=((1, 1),), weight_bytes=1, accuracy=float(a))
        for i, a in enumerate(accuracies)
    ]


def make_candidates(vectors):
    """Candidates over unit-weight layers, so bytes are just the sum of K*C."""
    pairs = [v.reshape(-1, 2) for v in vectors]
    subgraphs = tuple(
        SubGraphDescriptor(id=f"g{j}", shape=tuple((int(k), int(c)) for k, c in p),
                           weight_bytes=int((p[:, 0] * p[:, 1]).sum()))
        for j, p in enumerate(pairs)
    )
    capacity = max(g.weight_bytes for g in subgraphs)
    return CandidateSet(subgraphs, capacity, np.ones(vectors.shape[1] // 2, dtype=np.int64))


def oracle_row(policy, accuracies, latencies, accuracy_target, latency_target):
    rows = range(len(accuracies))
    if policy is SchedulingPolicy.STRICT_ACCURACY:
        feasible = [i for i in rows if accuracies[i] >= accuracy_target]
        if feasible:
            return min(feasible, key=lambda i: (latencies[i], i)), False
        return max(rows, key=lambda i: (accuracies[i], -i)), True
    feasible = [i for i in rows if latencies[i] <= latency_target]
    if feasible:
        return max(feasible, key=lambda i: (accuracies[i], -i)), False
    return min(rows, key=lambda i: (latencies[i], i)), True


def oracle_nearest(vectors, history):
    n = len(history)
    mean = [Fraction(int(s), n) for s in np.sum(history, axis=0)] if n else [Fraction(0)] * vectors.shape[1]
    distances = [sum((Fraction(int(x)) - m) ** 2 for x, m in zip(v, mean)) for v in vectors]
    best = min(distances)
    return distances.index(best), distances.count(best) > 1


class TestSelectSubnet:
    def test_matches_exhaustive_scan(self, rng):
        feasible_seen = infeasible_seen = 0
        for trial in range(INSTANCES):
            n_rows, n_cols = int(rng.integers(1, 9)), int(rng.integers(1, 5))
            accuracies = rng.choice(ACCURACY_GRID, n_rows)
            entries = rng.integers(1, 11, size=(n_rows, n_cols)) * 1e-3
            subnets = make_subnets(accuracies)
            table = LatencyTable([s.id for s in subnets], [f"g{j}" for j in range(n_cols)], entries, "x")
            policy = SchedulingPolicy.STRICT_ACCURACY if trial % 2 else SchedulingPolicy.STRICT_LATENCY
            column = int(rng.integers(n_cols))
            state = SchedulerState(policy=policy, window=10, cache_index=column, cache_id=f"g{column}",
                                   vector_length=2)
            if rng.random() < 0.3:
                accuracy_target = float(rng.choice(ACCURACY_GRID))
                latency_target = float(rng.integers(1, 11)) * 1e-3
            else:
                accuracy_target = float(rng.uniform(0.68, 0.82))
                latency_target = float(rng.uniform(5e-4, 1.1e-2))
            query = Query(t=0, accuracy_target=accuracy_target, latency_target=latency_target)

            choice = select_subnet(query, state, table, subnets)
            expected = oracle_row(policy, accuracies, entries[:, column], accuracy_target, latency_target)
            assert (choice.row, choice.violated) == expected, trial
            assert choice.subnet_id == f"s{choice.row}"
            if not choice.violated:
                feasible_seen += 1
                if policy is SchedulingPolicy.STRICT_ACCURACY:
                    assert accuracies[choice.row] >= accuracy_target
                else:
                    assert entries[choice.row, column] <= latency_target
            else:
                infeasible_seen += 1
        assert feasible_seen > 1000 and infeasible_seen > 100

    def test_policies_pull_in_opposite_directions(self):
        subnets = make_subnets([0.70, 0.75, 0.80])
        table = LatencyTable([s.id for s in subnets], ["g0"], np.array([[1.0], [2.0], [3.0]]), "x")
        query = Query(t=0, accuracy_target=0.72, latency_target=2.5)
        picks = {}
        for policy in SchedulingPolicy:
            state = SchedulerState(policy=policy, window=10, cache_index=0, cache_id="g0", vector_length=2)
            picks[policy] = select_subnet(query, state, table, subnets).subnet_id
        assert picks == {SchedulingPolicy.STRICT_ACCURACY: "s1", SchedulingPolicy.STRICT_LATENCY: "s1"}

        query = Query(t=0, accuracy_target=0.0, latency_target=10.0)
        state = SchedulerState(policy=SchedulingPolicy.STRICT_ACCURACY, window=10, cache_index=0, cache_id="g0",
                               vector_length=2)
        assert select_subnet(query, state, table, subnets).subnet_id == "s0"
        state.policy = SchedulingPolicy.STRICT_LATENCY
        assert select_subnet(query, state, table, subnets).subnet_id == "s2"

    def test_rows_must_match_table(self):
        subnets = make_subnets([0.7, 0.8])
        table = LatencyTable(["s1", "s0"], ["g0"], np.ones((2, 1)), "x")
        state = SchedulerState(policy=SchedulingPolicy.STRICT_ACCURACY, window=1, cache_index=0, cache_id="g0",
                               vector_length=2)
        with pytest.raises(ConfigurationError):
            select_subnet(Query(t=0, accuracy_target=0.7, latency_target=1.0), state, table, subnets)


class TestSelectCache:
    def test_matches_brute_force(self, rng):
        ties = 0
        for trial in range(INSTANCES):
            length = 2 * int(rng.integers(1, 5))
            if rng.random() < 0.3:
                # two candidates mirrored around a constant history
                center = rng.integers(3, 7, size=length)
                offset = rng.integers(0, 3, size=length)
                offset[0] = max(offset[0], 1)
                others = rng.integers(0, 10, size=(int(rng.integers(0, 5)), length))
                vectors = np.vstack([others, center + offset, center - offset])
                rng.shuffle(vectors)
                history = [center.copy() for _ in range(int(rng.integers(1, 6)))]
            else:
                vectors = rng.integers(0, 7, size=(int(rng.integers(1, 13)), length))
                history = list(rng.integers(0, 7, size=(int(rng.integers(0, 11)), length)))
            vectors = np.unique(vectors, axis=0)
            rng.shuffle(vectors)
            candidates = make_candidates(vectors)

            state = SchedulerState(policy=SchedulingPolicy.STRICT_ACCURACY, window=None, cache_index=0,
                                   cache_id="g0", vector_length=length)
            for vector in history:
                update_average(state, vector)

            expected, tied = oracle_nearest(vectors, history)
            ties += tied
            assert nearest_candidate(state, candidates) == expected, trial
            assert select_cache(state, candidates) == f"g{expected}"
        assert ties > 1000

    def test_empty_history_prefers_smallest_vector(self):
        candidates = make_candidates(np.array([[4, 4], [1, 0], [0, 1]]))
        state = SchedulerState(policy=SchedulingPolicy.STRICT_ACCURACY, window=3, cache_index=0, cache_id="g0",
                               vector_length=2)
        assert select_cache(state, candidates) == "g1"


class AvgNetMachine(RuleBasedStateMachine):
    """The running average always equals the mean of the last Q served vectors."""

    def __init__(self):
        super().__init__()
        self.window = None
        self.pushed = []
        self.state = SchedulerState(policy=SchedulingPolicy.STRICT_ACCURACY, window=None, cache_index=0,
                                    cache_id="g0", vector_length=4)

    @initialize(window=st.one_of(st.none(), st.integers(1, 6)))
    def setup(self, window):
        self.window = window
        self.pushed = []
        self.state = SchedulerState(policy=SchedulingPolicy.STRICT_ACCURACY, window=window, cache_index=0,
                                    cache_id="g0", vector_length=4)

    @rule(vector=st.lists(st.integers(0, 64), min_size=4, max_size=4))
    def serve(self, vector):
        update_average(self.state, np.array(vector))
        self.pushed.append(vector)

    @invariant()
    def average_is_window_mean(self):
        recent = self.pushed if self.window is None else self.pushed[-self.window:]
        expected = np.mean(recent, axis=0) if recent else np.zeros(4)
        np.testing.assert_allclose(self.state.avg_net, expected, rtol=1e-12)
        assert len(self.state.history) == len(recent)


def test_avg_net_window():
    run_state_machine_as_test(
        AvgNetMachine,
        settings=settings(stateful_step_count=50, suppress_health_check=list(HealthCheck)),
    )


class TestStep:
    @pytest.fixture
    def setup(self):
        subnets = [
            SubNetDescriptor(id="small", shape=((2, 2), (2, 2)), weight_bytes=8, accuracy=0.70),
            SubNetDescriptor(id="large", shape=((4, 4), (4, 4)), weight_bytes=32, accuracy=0.80),
        ]
        candidates = make_candidates(np.array([[2, 2, 2, 2], [4, 4, 4, 4]]))
        table = LatencyTable(["small", "large"], ["g0", "g1"], np.array([[1.0, 0.9], [2.0, 1.5]]), "x")
        return subnets, candidates, table

    def test_cache_follows_traffic_every_q_queries(self, setup):
        subnets, candidates, table = setup
        config = SchedulerConfig(window=3, initial_cache=0)
        scheduler = CacheAwareScheduler(table, subnets, candidates, config)
        wants_large = Query(t=0, accuracy_target=0.8, latency_target=10.0)
        decisions = scheduler.run([wants_large.model_copy(update={"t": t}) for t in range(4)])
        assert [d.served_cache_id for d in decisions] == ["g0", "g0", "g0", "g1"]
        assert [d.cache_updated for d in decisions] == [False, False, True, False]
        assert decisions[2].fill_bytes == candidates.fill_bytes(0, 1) == 32 - 8

    def test_unchanged_choice_is_not_an_update(self, setup):
        subnets, candidates, table = setup
        state = SchedulerState.initial(SchedulerConfig(window=1, initial_cache=1), candidates)
        query = Query(t=0, accuracy_target=0.8, latency_target=10.0)
        decision, state = step(query, state, table, subnets, candidates)
        assert not decision.cache_updated and decision.fill_bytes == 0
        assert state.cache_id == "g1"

    def test_no_window_keeps_initial_cache(self, setup):
        subnets, candidates, table = setup
        scheduler = CacheAwareScheduler(table, subnets, candidates, SchedulerConfig(window=None, initial_cache=0))
        decisions = scheduler.run([Query(t=t, accuracy_target=0.8, latency_target=10.0) for t in range(25)])
        assert {d.served_cache_id for d in decisions} == {"g0"}

    def test_seeded_initial_cache(self, resnet_candidates):
        first = SchedulerState.initial(SchedulerConfig(seed=3), resnet_candidates)
        second = SchedulerState.initial(SchedulerConfig(seed=3), resnet_candidates)
        assert first.cache_id == second.cache_id

    def test_initial_cache_out_of_range(self, setup):
        _, candidates, _ = setup
        with pytest.raises(ConfigurationError, match="out of range"):
            SchedulerState.initial(SchedulerConfig(initial_cache=5), candidates)
