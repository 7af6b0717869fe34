import logging
from typing import List

import pandas as pd

from ..models.hardware import HardwareConfig
from ..supernet.elastic import ShapeLike, SuperNet
from .cost_model import arithmetic_intensity, layer_costs

logger = logging.getLogger(__name__)

ROOFLINE_COLUMNS = [
    "layer",
    "flops",
    "ai_without",
    "ai_with",
    "bound_without",
    "bound_with",
    "latency_without",
    "latency_with",
]


def _bound(memory_bound: bool) -> str:
    return "memory" if memory_bound else "compute"


def roofline_report(supernet: SuperNet, subnet: ShapeLike, cached: ShapeLike, hw: HardwareConfig) -> pd.DataFrame:
    """One row per active layer comparing the cold and cached roofline positions."""
    cold = layer_costs(supernet, subnet, supernet.empty_subgraph(), hw)
    warm = layer_costs(supernet, subnet, cached, hw)
    rows = []
    for layer, before, after in zip(supernet.layers, cold, warm):
        if before.flops == 0:
            continue
        rows.append(
            {
                "layer": layer.name,
                "flops": before.flops,
                "ai_without": arithmetic_intensity(before),
                "ai_with": arithmetic_intensity(after),
                "bound_without": _bound(before.memory_bound),
                "bound_with": _bound(after.memory_bound),
                "latency_without": before.latency,
                "latency_with": after.latency,
            }
        )
    return pd.DataFrame(rows, columns=ROOFLINE_COLUMNS)


def boundedness_flips(report: pd.DataFrame) -> List[str]:
    """Layers pushed from memory-bound to compute-bound by the cache."""
    mask = (report["bound_without"] == "memory") & (report["bound_with"] == "compute")
    return report.loc[mask, "layer"].tolist()


def reverse_flips(report: pd.DataFrame) -> List[str]:
    mask = (report["bound_without"] == "compute") & (report["bound_with"] == "memory")
    return report.loc[mask, "layer"].tolist()
