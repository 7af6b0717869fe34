import logging
import math
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.exceptions import ShapeValidationError, StructuralError
from ..models.supernet import (
    DescriptorFile,
    PicksFile,
    Shape,
    SubGraphDescriptor,
    SubNetDescriptor,
    SubNetPick,
    SuperNetSpec,
)

logger = logging.getLogger(__name__)

ShapeLike = Union[Shape, np.ndarray, SubGraphDescriptor, Sequence[Sequence[int]]]


def as_shape_array(shape: ShapeLike) -> np.ndarray:
    """(N, 2) int64 view of a descriptor, shape tuple, or flat encoded vector."""
    if isinstance(shape, SubGraphDescriptor):
        shape = shape.shape
    arr = np.asarray(shape)
    if arr.ndim == 1:
        if arr.size % 2:
            raise StructuralError(f"encoded vector length {arr.size} is not even")
        arr = arr.reshape(-1, 2)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return arr.astype(np.int64, copy=False)


def intersect_shapes(a: ShapeLike, b: ShapeLike) -> np.ndarray:
    """Element-wise min of two shapes: the weights both share under top-k selection."""
    a, b = as_shape_array(a), as_shape_array(b)
    if a.shape != b.shape:
        raise StructuralError(f"cannot intersect shapes with {len(a)} and {len(b)} layers")
    return np.minimum(a, b)


def to_shape_tuple(arr: np.ndarray) -> Shape:
    return tuple((int(k), int(c)) for k, c in arr)


class SuperNet:
    """Runtime view of a SuperNetSpec: byte accounting, encoding and elastic derivation."""

    def __init__(self, spec: SuperNetSpec):
        self.spec = spec
        self.name = spec.name
        self.layers = spec.layers
        self.n_layers = len(spec.layers)
        self.max_shape = np.array([[layer.k, layer.c] for layer in self.layers], dtype=np.int64)
        self.weight_factor = np.array(
            [layer.r * layer.s * layer.weight_width for layer in self.layers], dtype=np.int64
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SuperNet":
        spec = SuperNetSpec.model_validate_json(Path(path).read_text())
        logger.info(f"Loaded SuperNet {spec.name} with {len(spec.layers)} layers from {path}")
        return cls(spec)

    @property
    def n_stages(self) -> int:
        return len(self.spec.depth_choices)

    def check_shape(self, shape: ShapeLike, what: str = "shape") -> np.ndarray:
        arr = as_shape_array(shape)
        if len(arr) != self.n_layers:
            raise StructuralError(f"{what} has {len(arr)} layers, expected {self.n_layers}")
        if (arr < 0).any():
            raise ShapeValidationError(f"{what} has negative entries")
        over = np.flatnonzero((arr > self.max_shape).any(axis=1))
        if over.size:
            layer = self.layers[over[0]]
            raise ShapeValidationError(
                f"{what} exceeds layer {layer.name}: ({arr[over[0], 0]}, {arr[over[0], 1]}) "
                f"> ({layer.k}, {layer.c})"
            )
        return arr

    def shape_bytes(self, shape: ShapeLike) -> int:
        arr = self.check_shape(shape)
        return int((arr[:, 0] * arr[:, 1] * self.weight_factor).sum())

    def check_descriptor(self, descriptor: SubGraphDescriptor, what: str) -> SubGraphDescriptor:
        """Validate a loaded descriptor's shape and that its stored byte count matches the shape."""
        derived = self.shape_bytes(self.check_shape(descriptor, what=what))
        if descriptor.weight_bytes != derived:
            raise ShapeValidationError(
                f"{what} records {descriptor.weight_bytes} weight bytes, its shape holds {derived}"
            )
        return descriptor

    def subnet(self, id: str, shape: ShapeLike, accuracy: float) -> SubNetDescriptor:
        arr = self.check_shape(shape, what=f"subnet {id}")
        return SubNetDescriptor(
            id=id, shape=to_shape_tuple(arr), weight_bytes=self.shape_bytes(arr), accuracy=accuracy
        )

    def subgraph(self, id: str, shape: ShapeLike) -> SubGraphDescriptor:
        arr = self.check_shape(shape, what=f"subgraph {id}")
        return SubGraphDescriptor(id=id, shape=to_shape_tuple(arr), weight_bytes=self.shape_bytes(arr))

    def empty_subgraph(self, id: str = "empty") -> SubGraphDescriptor:
        return self.subgraph(id, np.zeros_like(self.max_shape))

    # Vector encoding: [K_1, C_1, ..., K_N, C_N]

    def encode(self, descriptor: ShapeLike) -> np.ndarray:
        arr = self.check_shape(descriptor, what=getattr(descriptor, "id", "descriptor"))
        return arr.reshape(-1).astype(np.float64)

    def decode(self, vector: Sequence[float], id: str, accuracy: Optional[float] = None):
        values = np.asarray(vector, dtype=np.float64)
        if values.size != 2 * self.n_layers:
            raise StructuralError(f"vector has {values.size} entries, expected {2 * self.n_layers}")
        rounded = np.rint(values)
        if not np.array_equal(rounded, values):
            raise ShapeValidationError(f"vector for {id} has non-integer entries")
        if accuracy is None:
            return self.subgraph(id, rounded.astype(np.int64))
        return self.subnet(id, rounded.astype(np.int64), accuracy)

    # Sharing semantics

    def intersect(self, a: ShapeLike, b: ShapeLike, id: Optional[str] = None) -> SubGraphDescriptor:
        arr = intersect_shapes(self.check_shape(a), self.check_shape(b))
        if id is None:
            id = f"{getattr(a, 'id', 'a')}&{getattr(b, 'id', 'b')}"
        return self.subgraph(id, arr)

    def overlap_bytes(self, subnet: ShapeLike, subgraph: ShapeLike) -> int:
        arr = intersect_shapes(self.check_shape(subnet), self.check_shape(subgraph))
        return int((arr[:, 0] * arr[:, 1] * self.weight_factor).sum())

    def shared_core(self, subnets: Sequence[SubGraphDescriptor], id: str = "shared-core") -> SubGraphDescriptor:
        if not subnets:
            raise ShapeValidationError("shared core needs at least one subnet")
        arr = self.check_shape(subnets[0])
        for other in subnets[1:]:
            arr = intersect_shapes(arr, self.check_shape(other))
        return self.subgraph(id, arr)

    # Elastic derivation

    def _depths(self, depth: Union[int, Sequence[int]], label: str) -> List[int]:
        depths = [depth] * self.n_stages if isinstance(depth, int) else list(depth)
        if len(depths) != self.n_stages:
            raise ShapeValidationError(f"{label}: {len(depths)} depths given for {self.n_stages} stages")
        for stage, (d, choices) in enumerate(zip(depths, self.spec.depth_choices)):
            if d not in choices:
                raise ShapeValidationError(f"{label}: stage {stage} depth {d} not in {choices}")
        return depths

    def _fractions(self, expand: Union[float, Sequence[float]], label: str) -> List[float]:
        if isinstance(expand, (int, float)):
            fractions = [float(expand) if layer.is_elastic else layer.expand_choices[-1] for layer in self.layers]
        else:
            fractions = [float(f) for f in expand]
            if len(fractions) != self.n_layers:
                raise ShapeValidationError(
                    f"{label}: {len(fractions)} expand fractions given for {self.n_layers} layers"
                )
        for layer, f in zip(self.layers, fractions):
            if layer.kernel_source is None and f not in layer.expand_choices:
                raise ShapeValidationError(
                    f"{label}: layer {layer.name} expand {f} not in {list(layer.expand_choices)}"
                )
        return fractions

    def derive_shape(
        self, depth: Union[int, Sequence[int]], expand: Union[float, Sequence[float]], label: str = "pick"
    ) -> np.ndarray:
        depths = self._depths(depth, label)
        fractions = self._fractions(expand, label)
        shape = np.zeros_like(self.max_shape)
        for i, layer in enumerate(self.layers):
            if layer.stage is not None and layer.block >= depths[layer.stage]:
                continue
            if layer.kernel_source is not None:
                k = shape[layer.kernel_source, 0]
            else:
                k = max(1, int(math.floor(fractions[i] * layer.k + 0.5)))
            if layer.channel_source is not None:
                c = shape[layer.channel_source, 0]
            elif layer.depthwise:
                c = 1
            else:
                c = layer.c
            shape[i] = (k, c)
        return self.check_shape(shape, what=label)

    def enumerate_subnets(self, picks: Iterable[SubNetPick]) -> List[SubNetDescriptor]:
        subnets = []
        for pick in picks:
            shape = self.derive_shape(pick.depth, pick.expand, label=f"pick {pick.id}")
            subnets.append(self.subnet(pick.id, shape, pick.accuracy))
        logger.info(f"Materialized {len(subnets)} subnets of {self.name}")
        return subnets

    def extreme_pick(self, largest: bool, id: str, accuracy: float = 0.0) -> SubNetPick:
        choose = max if largest else min
        return SubNetPick(
            id=id,
            depth=[choose(choices) for choices in self.spec.depth_choices],
            expand=[choose(layer.expand_choices) for layer in self.layers],
            accuracy=accuracy,
        )

    def uniform_grid(self) -> Iterator[Tuple[str, np.ndarray]]:
        """Shapes that use the same choice index in every stage and elastic layer."""
        depth_levels = max((len(c) for c in self.spec.depth_choices), default=1)
        expand_levels = max(len(layer.expand_choices) for layer in self.layers)
        for d in range(depth_levels):
            depth = [choices[min(d, len(choices) - 1)] for choices in self.spec.depth_choices]
            for e in range(expand_levels):
                expand = [layer.expand_choices[min(e, len(layer.expand_choices) - 1)] for layer in self.layers]
                yield f"grid-d{d}-e{e}", self.derive_shape(depth, expand, label=f"grid d{d} e{e}")

    def random_shape(self, rng: np.random.Generator, label: str = "sample") -> np.ndarray:
        depth = [int(rng.choice(choices)) for choices in self.spec.depth_choices]
        expand = [float(rng.choice(layer.expand_choices)) for layer in self.layers]
        return self.derive_shape(depth, expand, label=label)

    def pairwise_intersections(self, subnets: Sequence[SubGraphDescriptor]) -> List[SubGraphDescriptor]:
        return [self.intersect(a, b, id=f"{a.id}&{b.id}") for a, b in combinations(subnets, 2)]


def enumerate_subnets(spec: SuperNetSpec, picks: Iterable[SubNetPick]) -> List[SubNetDescriptor]:
    return SuperNet(spec).enumerate_subnets(picks)


def load_picks(path: Union[str, Path]) -> PicksFile:
    return PicksFile.model_validate_json(Path(path).read_text())


def load_descriptors(path: Union[str, Path]) -> DescriptorFile:
    return DescriptorFile.model_validate_json(Path(path).read_text())


def write_descriptors(path: Union[str, Path], descriptors: DescriptorFile) -> None:
    Path(path).write_text(descriptors.model_dump_json(indent=2) + "\n")
