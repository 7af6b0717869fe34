"""
Dense SubNet x SubGraph latency table.

Rows are serving SubNets, columns are candidate SubGraphs; entry [i][j] is the
steady-state latency of SubNet i while SubGraph j is resident in the persistent
buffer. Lookups are two dict probes and one indexed read.

Serialized form (JSON, floats written with round-trip precision):
    {"format": ..., "hw_fingerprint": ..., "subnet_ids": [...],
     "subgraph_ids": [...], "entries": [[row 0], [row 1], ...]}
"""
import json
import logging
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from ..accel.cost_model import AcceleratorModel, check_capacity
from ..models.exceptions import ConfigurationError, StaleTableError, StructuralError, TableLookupError
from ..models.hardware import HardwareConfig
from ..models.supernet import SubNetDescriptor
from ..supernet.elastic import SuperNet
from .candidates import CandidateSet

logger = logging.getLogger(__name__)

TABLE_FORMAT = "sgs-latency-table/1"


class LatencyTable:
    def __init__(
        self,
        subnet_ids: Sequence[str],
        subgraph_ids: Sequence[str],
        entries: np.ndarray,
        hw_fingerprint: str,
    ):
        entries = np.array(entries, dtype=np.float64, order="C")
        if entries.shape != (len(subnet_ids), len(subgraph_ids)):
            raise StructuralError(
                f"entries shaped {entries.shape} for {len(subnet_ids)} rows and {len(subgraph_ids)} columns"
            )
        if len(set(subnet_ids)) != len(subnet_ids) or len(set(subgraph_ids)) != len(subgraph_ids):
            raise ConfigurationError("latency table ids must be unique")
        entries.setflags(write=False)
        self.subnet_ids = tuple(subnet_ids)
        self.subgraph_ids = tuple(subgraph_ids)
        self.entries = entries
        self.hw_fingerprint = hw_fingerprint
        self._rows = {sid: i for i, sid in enumerate(self.subnet_ids)}
        self._cols = {gid: j for j, gid in enumerate(self.subgraph_ids)}

    @property
    def shape(self):
        return self.entries.shape

    def column_index(self, subgraph_id: str) -> int:
        try:
            return self._cols[subgraph_id]
        except KeyError:
            raise TableLookupError(f"unknown subgraph id {subgraph_id!r}") from None

    def lookup(self, subnet_id: str, subgraph_id: str) -> float:
        rows, cols = self._rows, self._cols
        if subnet_id not in rows:
            raise TableLookupError(f"unknown subnet id {subnet_id!r}")
        if subgraph_id not in cols:
            raise TableLookupError(f"unknown subgraph id {subgraph_id!r}")
        return self.entries.item(rows[subnet_id], cols[subgraph_id])

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, j]

    def row_minima(self) -> np.ndarray:
        return self.entries.min(axis=1)

    def ensure_fresh(self, hw: HardwareConfig) -> None:
        if hw.fingerprint() != self.hw_fingerprint:
            raise StaleTableError(
                f"table built for hardware {self.hw_fingerprint}, current hardware is {hw.fingerprint()}"
            )

    def to_dict(self) -> dict:
        return {
            "format": TABLE_FORMAT,
            "hw_fingerprint": self.hw_fingerprint,
            "subnet_ids": list(self.subnet_ids),
            "subgraph_ids": list(self.subgraph_ids),
            "entries": self.entries.tolist(),
        }

    def to_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "LatencyTable":
        payload = json.loads(Path(path).read_text())
        if payload.get("format") != TABLE_FORMAT:
            raise ConfigurationError(f"{path}: not a {TABLE_FORMAT} file")
        return cls(payload["subnet_ids"], payload["subgraph_ids"], payload["entries"], payload["hw_fingerprint"])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.entries, index=list(self.subnet_ids), columns=list(self.subgraph_ids))
        frame.index.name = "subnet_id"
        return frame

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path)


def build_table(
    supernet: SuperNet,
    subnets: Sequence[SubNetDescriptor],
    candidates: CandidateSet,
    hw: HardwareConfig,
) -> LatencyTable:
    if not subnets:
        raise ConfigurationError("latency table needs at least one subnet")
    for subgraph in candidates.subgraphs:
        check_capacity(subgraph, hw)
    entries = AcceleratorModel(supernet, hw).latency_matrix(subnets, candidates.subgraphs)
    table = LatencyTable([s.id for s in subnets], candidates.ids, entries, hw.fingerprint())
    logger.info(f"Built {table.shape[0]}x{table.shape[1]} latency table for hardware {table.hw_fingerprint}")
    return table


def lookup(table: LatencyTable, subnet_id: str, subgraph_id: str) -> float:
    return table.lookup(subnet_id, subgraph_id)
