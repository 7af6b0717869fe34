from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Per-layer (K, C) pairs in layer order.
Shape = Tuple[Tuple[int, int], ...]


class LayerSpec(BaseModel):
    """Maximal shape of one convolution layer plus its elastic wiring.

    `k`, `c`, `r`, `s`, `xo`, `yo` follow the usual accelerator notation (kernels,
    channels, kernel height/width, output height/width). Input spatial size is
    derived as `xo * stride`, pooling folded into the stride. Depthwise layers
    are encoded with `c = 1` and `k` = channel count.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    k: int = Field(ge=1)
    c: int = Field(ge=1)
    r: int = Field(ge=1)
    s: int = Field(ge=1)
    xo: int = Field(ge=1)
    yo: int = Field(ge=1)
    stride: int = Field(default=1, ge=1)
    weight_width: int = Field(default=1, ge=1)
    activation_width: int = Field(default=1, ge=1)
    stage: Optional[int] = Field(None, ge=0)
    block: Optional[int] = Field(None, ge=0)
    expand_choices: Tuple[float, ...] = (1.0,)
    kernel_source: Optional[int] = Field(None, ge=0)
    channel_source: Optional[int] = Field(None, ge=0)
    depthwise: bool = False

    @field_validator("expand_choices")
    @classmethod
    def _check_fractions(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value:
            raise ValueError("expand_choices must not be empty")
        if any(f <= 0 or f > 1 for f in value):
            raise ValueError("expand fractions must lie in (0, 1]")
        return tuple(sorted(set(value)))

    @model_validator(mode="after")
    def _check_layer(self) -> "LayerSpec":
        if (self.stage is None) != (self.block is None):
            raise ValueError(f"layer {self.name}: stage and block must be set together")
        if self.depthwise and self.c != 1:
            raise ValueError(f"layer {self.name}: depthwise layers are encoded with c = 1")
        return self

    @property
    def is_elastic(self) -> bool:
        return self.kernel_source is None and len(self.expand_choices) > 1


class SuperNetSpec(BaseModel):
    name: str
    resolution: Optional[int] = Field(None, ge=1)
    depth_choices: List[List[int]] = []
    layers: List[LayerSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_wiring(self) -> "SuperNetSpec":
        blocks_per_stage = {}
        for i, layer in enumerate(self.layers):
            if layer.stage is not None:
                if layer.stage >= len(self.depth_choices):
                    raise ValueError(f"layer {layer.name}: stage {layer.stage} has no depth choices")
                blocks_per_stage[layer.stage] = max(blocks_per_stage.get(layer.stage, 0), layer.block + 1)
            for field, source in (("kernel_source", layer.kernel_source), ("channel_source", layer.channel_source)):
                if source is None:
                    continue
                if source >= i:
                    raise ValueError(f"layer {layer.name}: {field} must reference an earlier layer")
                bound = layer.k if field == "kernel_source" else layer.c
                if self.layers[source].k > bound:
                    raise ValueError(
                        f"layer {layer.name}: {field} {self.layers[source].name} is wider than this layer"
                    )
        for stage, choices in enumerate(self.depth_choices):
            if not choices or any(d < 0 for d in choices):
                raise ValueError(f"stage {stage}: depth choices must be non-empty and non-negative")
            if max(choices) > blocks_per_stage.get(stage, 0):
                raise ValueError(
                    f"stage {stage}: depth choice {max(choices)} exceeds "
                    f"{blocks_per_stage.get(stage, 0)} declared blocks"
                )
        return self

    @property
    def n_layers(self) -> int:
        return len(self.layers)


class SubNetPick(BaseModel):
    """One elastic configuration: depth per stage and expand fraction(s).

    A scalar `depth` applies to every stage, a scalar `expand` to every elastic layer.
    """

    id: str
    depth: Union[int, List[int]]
    expand: Union[float, List[float]]
    accuracy: float = Field(ge=0, le=1)


class PicksFile(BaseModel):
    supernet: str
    accuracy_source: Optional[str] = None
    picks: List[SubNetPick] = Field(min_length=1)


class SubGraphDescriptor(BaseModel):
    """A cacheable weight subset of the SuperNet."""

    model_config = ConfigDict(frozen=True)

    id: str
    shape: Shape
    weight_bytes: int = Field(ge=0)

    @field_validator("shape")
    @classmethod
    def _non_negative(cls, value: Shape) -> Shape:
        if any(k < 0 or c < 0 for k, c in value):
            raise ValueError("shape entries must be non-negative")
        return value


class SubNetDescriptor(SubGraphDescriptor):
    """A servable network; every SubNet is also a SubGraph."""

    accuracy: float = Field(ge=0, le=1)


class DescriptorFile(BaseModel):
    supernet: str
    subnets: List[SubNetDescriptor] = []
    subgraphs: List[SubGraphDescriptor] = []
