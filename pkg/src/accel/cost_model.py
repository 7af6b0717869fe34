"""
Analytic accelerator model: roofline-overlap latency with a persistent weight buffer.

Every layer is charged max(compute time, memory time). Compute time is FLOPs over
peak throughput; memory time is the off-chip bytes (weights missing from the
persistent buffer plus input and output activations) over bandwidth. Fetches of
the distinct weights overlap with compute through the ping-pong dynamic buffer,
so the first-tile fill is not modeled. The model targets latency trends rather
than absolute board numbers.
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..models.exceptions import CapacityError, ShapeValidationError
from ..models.hardware import HardwareConfig
from ..models.supernet import LayerSpec, SubGraphDescriptor
from ..supernet.elastic import ShapeLike, SuperNet, as_shape_array

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class LayerCost:
    flops: int
    weight_miss_bytes: int
    weight_hit_bytes: int
    activation_bytes: int
    compute_time: float
    memory_time: float
    latency: float
    memory_bound: bool

    @property
    def off_chip_bytes(self) -> int:
        return self.weight_miss_bytes + self.activation_bytes


def _check_pair(layer: LayerSpec, pair: Pair, what: str) -> Pair:
    k, c = int(pair[0]), int(pair[1])
    if not (0 <= k <= layer.k and 0 <= c <= layer.c):
        raise ShapeValidationError(f"{what} ({k}, {c}) outside layer {layer.name} bounds ({layer.k}, {layer.c})")
    return k, c


def layer_flops(layer: LayerSpec, shape: Pair) -> int:
    """Multiply-accumulates counted as two FLOPs."""
    k, c = _check_pair(layer, shape, "shape")
    return 2 * k * c * layer.r * layer.s * layer.xo * layer.yo


def activation_bytes(layer: LayerSpec, shape: Pair) -> int:
    k, c = _check_pair(layer, shape, "shape")
    in_channels = k if layer.depthwise else c
    xi, yi = layer.xo * layer.stride, layer.yo * layer.stride
    return (in_channels * xi * yi + k * layer.xo * layer.yo) * layer.activation_width


def layer_traffic(layer: LayerSpec, shape: Pair, cached: Pair) -> Tuple[int, int, int]:
    """Returns (weight miss bytes, weight hit bytes, activation bytes)."""
    k, c = _check_pair(layer, shape, "shape")
    kg, cg = _check_pair(layer, cached, "cached shape")
    per_weight = layer.r * layer.s * layer.weight_width
    hit = min(k, kg) * min(c, cg) * per_weight
    miss = k * c * per_weight - hit
    return miss, hit, activation_bytes(layer, (k, c))


def arithmetic_intensity(cost: LayerCost) -> float:
    """FLOPs per off-chip byte; +inf for a layer that moves nothing off-chip."""
    if cost.off_chip_bytes == 0:
        return math.inf
    return cost.flops / cost.off_chip_bytes


def layer_latency(layer: LayerSpec, shape: Pair, cached: Pair, hw: HardwareConfig) -> LayerCost:
    flops = layer_flops(layer, shape)
    miss, hit, act = layer_traffic(layer, shape, cached)
    compute_time = flops / hw.throughput
    memory_time = (miss + act) / hw.bandwidth
    return LayerCost(
        flops=flops,
        weight_miss_bytes=miss,
        weight_hit_bytes=hit,
        activation_bytes=act,
        compute_time=compute_time,
        memory_time=memory_time,
        latency=max(compute_time, memory_time),
        memory_bound=memory_time > compute_time,
    )


class AcceleratorModel:
    """Vectorized form of `layer_latency` over many (SubNet, SubGraph) pairs at once."""

    def __init__(self, supernet: SuperNet, hw: HardwareConfig):
        self.supernet = supernet
        self.hw = hw
        layers = supernet.layers
        self.weight_factor = supernet.weight_factor
        self.flop_factor = np.array([2 * l.r * l.s * l.xo * l.yo for l in layers], dtype=np.int64)
        self.input_factor = np.array(
            [l.xo * l.stride * l.yo * l.stride * l.activation_width for l in layers], dtype=np.int64
        )
        self.output_factor = np.array([l.xo * l.yo * l.activation_width for l in layers], dtype=np.int64)
        self.depthwise = np.array([l.depthwise for l in layers], dtype=bool)

    def _stack(self, shapes: Sequence[ShapeLike], what: str) -> np.ndarray:
        return np.stack([self.supernet.check_shape(s, what=what) for s in shapes]) if len(shapes) else np.zeros(
            (0, self.supernet.n_layers, 2), dtype=np.int64
        )

    def layer_terms(self, subnets: Sequence[ShapeLike], cached: Sequence[ShapeLike]):
        """Per-layer compute and memory times, shaped (subnets, cached, layers)."""
        sn = self._stack(subnets, "subnet")[:, None, :, :]
        g = self._stack(cached, "cached subgraph")[None, :, :, :]
        k, c = sn[..., 0], sn[..., 1]
        in_channels = np.where(self.depthwise, k, c)
        flops = k * c * self.flop_factor
        act = in_channels * self.input_factor + k * self.output_factor
        hit = np.minimum(k, g[..., 0]) * np.minimum(c, g[..., 1]) * self.weight_factor
        miss = k * c * self.weight_factor - hit
        compute_time = np.broadcast_to(flops / self.hw.throughput, miss.shape)
        memory_time = (miss + act) / self.hw.bandwidth
        return compute_time, memory_time, miss, act

    def latency_matrix(self, subnets: Sequence[ShapeLike], cached: Sequence[ShapeLike]) -> np.ndarray:
        compute_time, memory_time, _, _ = self.layer_terms(subnets, cached)
        return np.maximum(compute_time, memory_time).sum(axis=-1)

    def off_chip_bytes_matrix(self, subnets: Sequence[ShapeLike], cached: Sequence[ShapeLike]) -> np.ndarray:
        _, _, miss, act = self.layer_terms(subnets, cached)
        return (miss + act).sum(axis=-1)

    def energy_matrix(self, subnets: Sequence[ShapeLike], cached: Sequence[ShapeLike]) -> np.ndarray:
        return self.off_chip_bytes_matrix(subnets, cached) * self.hw.energy_per_byte


def check_capacity(cached: SubGraphDescriptor, hw: HardwareConfig) -> None:
    if cached.weight_bytes > hw.pb_bytes:
        raise CapacityError(
            f"subgraph {cached.id} needs {cached.weight_bytes} bytes, persistent buffer holds {hw.pb_bytes}"
        )


def subnet_latency(
    supernet: SuperNet, subnet: SubGraphDescriptor, cached: SubGraphDescriptor, hw: HardwareConfig
) -> float:
    """Steady-state latency of one query with `cached` resident in the persistent buffer."""
    check_capacity(cached, hw)
    return float(AcceleratorModel(supernet, hw).latency_matrix([subnet], [cached])[0, 0])


def off_chip_energy(
    supernet: SuperNet,
    subnet: SubGraphDescriptor,
    cached: SubGraphDescriptor,
    hw: HardwareConfig,
    fill_bytes: int = 0,
) -> float:
    check_capacity(cached, hw)
    moved = int(AcceleratorModel(supernet, hw).off_chip_bytes_matrix([subnet], [cached])[0, 0])
    return (moved + fill_bytes) * hw.energy_per_byte


def cache_fill_bytes(supernet: SuperNet, old: ShapeLike, new: ShapeLike) -> int:
    """Bytes of `new` that are not already resident in `old`."""
    return supernet.shape_bytes(new) - supernet.overlap_bytes(new, old)


def cache_fill_time(fill_bytes: int, hw: HardwareConfig) -> float:
    return fill_bytes / hw.bandwidth


def layer_costs(supernet: SuperNet, subnet: ShapeLike, cached: ShapeLike, hw: HardwareConfig):
    """Per-layer LayerCost list, one entry per SuperNet layer."""
    sn, g = as_shape_array(subnet), as_shape_array(cached)
    supernet.check_shape(sn)
    supernet.check_shape(g)
    return [layer_latency(layer, sn[i], g[i], hw) for i, layer in enumerate(supernet.layers)]
