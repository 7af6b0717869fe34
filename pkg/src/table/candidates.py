import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..models.exceptions import CapacityError, ConfigurationError, TableLookupError
from ..models.hardware import HardwareConfig
from ..models.supernet import SubGraphDescriptor
from ..supernet.elastic import SuperNet, as_shape_array

logger = logging.getLogger(__name__)

SHRINK_STEPS = 48


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """The restricted set of SubGraphs the persistent buffer may hold."""

    subgraphs: Tuple[SubGraphDescriptor, ...]
    pb_bytes: int
    weight_factor: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.subgraphs:
            raise ConfigurationError("candidate set is empty")
        shapes = np.stack([as_shape_array(g) for g in self.subgraphs])
        vectors = shapes.reshape(len(self.subgraphs), -1)
        if len({v.tobytes() for v in vectors}) != len(self.subgraphs):
            raise ConfigurationError("candidate subgraphs must be distinct")
        for g in self.subgraphs:
            if g.weight_bytes > self.pb_bytes:
                raise CapacityError(f"candidate {g.id} ({g.weight_bytes} bytes) exceeds PB {self.pb_bytes}")
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", {g.id: i for i, g in enumerate(self.subgraphs)})

    @classmethod
    def from_subgraphs(cls, supernet: SuperNet, subgraphs: Sequence[SubGraphDescriptor], pb_bytes: int):
        return cls(tuple(subgraphs), pb_bytes, supernet.weight_factor)

    @classmethod
    def empty(cls, supernet: SuperNet) -> "CandidateSet":
        """Single empty SubGraph: serving without a persistent buffer."""
        return cls((supernet.empty_subgraph("no-pb"),), 0, supernet.weight_factor)

    def __len__(self) -> int:
        return len(self.subgraphs)

    @property
    def ids(self) -> List[str]:
        return [g.id for g in self.subgraphs]

    def index_of(self, subgraph_id: str) -> int:
        try:
            return self._index[subgraph_id]
        except KeyError:
            raise TableLookupError(f"unknown subgraph id {subgraph_id!r}") from None

    def overlap_bytes(self, a: int, b: int) -> int:
        both = np.minimum(self.shapes[a], self.shapes[b])
        return int((both[:, 0] * both[:, 1] * self.weight_factor).sum())

    def fill_bytes(self, old: int, new: int) -> int:
        """Bytes fetched when the buffer switches from candidate `old` to `new`."""
        return self.subgraphs[new].weight_bytes - self.overlap_bytes(new, old)

    def byte_range(self) -> Tuple[int, int]:
        sizes = [g.weight_bytes for g in self.subgraphs]
        return min(sizes), max(sizes)

    def to_json(self, path: Union[str, Path]) -> None:
        payload = {
            "pb_bytes": self.pb_bytes,
            "subgraphs": [g.model_dump(mode="json") for g in self.subgraphs],
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def from_json(cls, path: Union[str, Path], supernet: SuperNet) -> "CandidateSet":
        payload = json.loads(Path(path).read_text())
        subgraphs = [SubGraphDescriptor.model_validate(g) for g in payload["subgraphs"]]
        for g in subgraphs:
            supernet.check_descriptor(g, what=f"subgraph {g.id}")
        return cls.from_subgraphs(supernet, subgraphs, payload["pb_bytes"])


def shrink_to_fit(supernet: SuperNet, shape: np.ndarray, capacity: int) -> np.ndarray:
    """Largest uniform K scaling of `shape` (floored per layer) that fits in `capacity` bytes."""
    best = np.zeros_like(shape)
    lo, hi = 0.0, 1.0
    for _ in range(SHRINK_STEPS):
        mid = (lo + hi) / 2
        candidate = shape.copy()
        candidate[:, 0] = np.floor(mid * shape[:, 0]).astype(np.int64)
        candidate[candidate[:, 0] == 0] = 0
        if supernet.shape_bytes(candidate) <= capacity:
            lo, best = mid, candidate
        else:
            hi = mid
    return best


def farthest_point_order(vectors: np.ndarray, count: int) -> List[int]:
    """Greedy farthest-point sampling from row 0; ties go to the lowest index.

    The first m entries of the order do not depend on `count`, so smaller
    selections are always subsets of larger ones.
    """
    vectors = vectors.astype(np.int64)
    count = min(count, len(vectors))
    order = [0]
    nearest = ((vectors - vectors[0]) ** 2).sum(axis=1)
    while len(order) < count:
        nxt = int(np.argmax(nearest))
        if nearest[nxt] == 0:
            break
        order.append(nxt)
        nearest = np.minimum(nearest, ((vectors - vectors[nxt]) ** 2).sum(axis=1))
    return order


def build_candidate_set(
    supernet: SuperNet,
    subnets: Sequence[SubGraphDescriptor],
    hw: HardwareConfig,
    max_columns: int,
    alpha: float = 0.5,
    seed: int = 0,
    grid_samples: int = 0,
) -> CandidateSet:
    if not subnets:
        raise ConfigurationError("candidate generation needs at least one serving subnet")
    if max_columns < 1:
        raise ConfigurationError(f"max_columns must be >= 1, got {max_columns}")
    if not 0 < alpha <= 1:
        raise ConfigurationError(f"fill fraction must lie in (0, 1], got {alpha}")
    if hw.pb_bytes <= 0:
        raise ConfigurationError("persistent buffer capacity is 0; no SubGraph can be cached")

    capacity = hw.pb_bytes
    lower = alpha * capacity
    rng = np.random.default_rng(seed)

    core = supernet.shared_core(subnets)
    pool = [("core", as_shape_array(core))]
    pool += [(g.id, as_shape_array(g)) for g in supernet.pairwise_intersections(subnets)]
    pool += [(s.id, as_shape_array(s)) for s in subnets]
    pool += list(supernet.uniform_grid())
    pool += [(f"sample-{i}", supernet.random_shape(rng, label=f"sample {i}")) for i in range(grid_samples)]

    kept, seen, shrunk = [], set(), 0
    for label, shape in pool:
        size = supernet.shape_bytes(shape)
        fits_as_is = size <= capacity
        if not fits_as_is:
            shape = shrink_to_fit(supernet, shape, capacity)
            size = supernet.shape_bytes(shape)
            shrunk += 1
        if size == 0:
            continue
        # the all-subnet intersection stays whenever it fits unshrunk
        if size < lower and not (label == "core" and fits_as_is):
            continue
        key = shape.tobytes()
        if key in seen:
            continue
        seen.add(key)
        kept.append(shape)

    if not kept:
        raise ConfigurationError(
            f"no SubGraph fits a {capacity}-byte persistent buffer within [{lower:.0f}, {capacity}] bytes; "
            "use a larger PB or a smaller fill fraction"
        )
    if shrunk:
        logger.debug(f"Shrunk {shrunk} of {len(pool)} pooled subgraphs to fit {capacity} bytes")

    vectors = np.stack([s.reshape(-1) for s in kept])
    order = farthest_point_order(vectors, max_columns)
    subgraphs = [supernet.subgraph(f"sg{rank:04d}", kept[i]) for rank, i in enumerate(order)]
    candidates = CandidateSet.from_subgraphs(supernet, subgraphs, capacity)
    low, high = candidates.byte_range()
    logger.info(
        f"Candidate set: {len(candidates)} of {len(kept)} eligible subgraphs, "
        f"sizes {low / 1e6:.3f}-{high / 1e6:.3f} MB, PB {capacity / 1e6:.3f} MB"
    )
    return candidates
