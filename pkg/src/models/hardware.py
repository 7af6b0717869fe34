import hashlib
import json
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class HardwareConfig(BaseModel):
    """Accelerator parameters consumed by the analytic cost model.

    Units: bandwidth in bytes/s, throughput in FLOP/s, buffer sizes in bytes,
    energy in joules per off-chip byte.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    bandwidth: float = Field(gt=0, allow_inf_nan=False)
    throughput: float = Field(gt=0, allow_inf_nan=False)
    pb_bytes: int = Field(default=0, ge=0)
    energy_per_byte: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    tile_bytes: Optional[int] = Field(None, gt=0)

    @property
    def ridge_point(self) -> float:
        """FLOPs per byte where compute time equals memory time."""
        return self.throughput / self.bandwidth

    def fingerprint(self) -> str:
        payload = self.model_dump(mode="json", exclude={"name"})
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def with_pb(self, pb_bytes: int) -> "HardwareConfig":
        return HardwareConfig(**{**self.model_dump(), "pb_bytes": pb_bytes})
