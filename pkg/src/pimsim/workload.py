"""CNN layer descriptors for VGG A-E, op counting and inter-layer wait rules."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass(frozen=True)
class LayerSpec:
    """One weight layer.

    Convolutions are stride-1 with same padding, so the pre-pool output has
    the input's spatial size.  Fully connected layers are encoded as 1x1
    layers over a 1x1 "image" with ``c`` inputs and ``n`` outputs.
    """

    kind: str  # "conv" | "fc"
    c: int
    h: int
    w: int
    n: int
    l: int
    stride: int = 1
    pooling_after: bool = False
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("conv", "fc"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if min(self.c, self.h, self.w, self.n, self.l) < 1:
            raise ValueError(f"layer {self.name!r}: dimensions must be >= 1")
        if self.stride != 1:
            raise ValueError(f"layer {self.name!r}: only stride 1 is supported")
        if self.kind == "fc":
            if (self.h, self.w, self.l) != (1, 1, 1) or self.pooling_after:
                raise ValueError(f"fc layer {self.name!r} must have h=w=l=1 and no pooling")
        elif self.h < self.l or self.w < self.l:
            raise ValueError(f"layer {self.name!r}: spatial size smaller than kernel")

    @property
    def pixels(self) -> int:
        return self.h * self.w


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network has no layers")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            n, h, w = output_dims(prev)
            if nxt.kind == "fc":
                ok = nxt.c == n * h * w
            else:
                ok = (nxt.c, nxt.h, nxt.w) == (n, h, w)
            if not ok:
                raise ValueError(f"{self.name}: layer {nxt.name!r} input does not chain from {prev.name!r}")

    def __len__(self):
        return len(self.layers)


def output_dims(layer: LayerSpec) -> tuple[int, int, int]:
    if layer.kind == "fc":
        return layer.n, 1, 1
    if layer.pooling_after:
        return layer.n, layer.h // 2, layer.w // 2
    return layer.n, layer.h, layer.w


def cycles_wait(w: int, l: int) -> int:
    """Outputs of the producer a row-major ``l``x``l`` window needs before its
    first convolution: ``l - 1`` full rows plus ``l`` values."""
    if not (w >= l >= 1):
        raise ValueError(f"cycles_wait needs w >= l >= 1, got w={w}, l={l}")
    return w * (l - 1) + l


def values_wait(w: int, l: int, n: int) -> int:
    if n < 1:
        raise ValueError(f"values_wait needs n >= 1, got {n}")
    return cycles_wait(w, l) * n


def layer_macs(layer: LayerSpec) -> int:
    if layer.kind == "fc":
        return layer.c * layer.n
    return layer.n * layer.c * layer.l * layer.l * layer.h * layer.w


def network_ops(net: NetworkSpec) -> int:
    """Operations per image, one MAC counted as two ops."""
    return 2 * sum(layer_macs(layer) for layer in net.layers)


# Per-stage conv plans from the VGG configuration table: (kernel, channels).
# Each stage runs at one spatial size and ends in a 2x2 max pool.
_VGG_STAGES = {
    "A": [[(3, 64)], [(3, 128)], [(3, 256)] * 2, [(3, 512)] * 2, [(3, 512)] * 2],
    "B": [[(3, 64)] * 2, [(3, 128)] * 2, [(3, 256)] * 2, [(3, 512)] * 2, [(3, 512)] * 2],
    "C": [
        [(3, 64)] * 2,
        [(3, 128)] * 2,
        [(3, 256)] * 2 + [(1, 256)],
        [(3, 512)] * 2 + [(1, 512)],
        [(3, 512)] * 2 + [(1, 512)],
    ],
    "D": [[(3, 64)] * 2, [(3, 128)] * 2, [(3, 256)] * 3, [(3, 512)] * 3, [(3, 512)] * 3],
    "E": [[(3, 64)] * 2, [(3, 128)] * 2, [(3, 256)] * 4, [(3, 512)] * 4, [(3, 512)] * 4],
}
VGG_VARIANTS = tuple(_VGG_STAGES)
NETWORK_NAMES = tuple(f"vgg-{v.lower()}" for v in VGG_VARIANTS)


def build_vgg(variant: str, image_size: int = 224, classes: int = 1000) -> NetworkSpec:
    variant = variant.upper().removeprefix("VGG-")
    if variant not in _VGG_STAGES:
        raise ValueError(f"unknown VGG variant {variant!r}")
    layers = []
    c, size = 3, image_size
    for s, stage in enumerate(_VGG_STAGES[variant], start=1):
        for i, (k, n) in enumerate(stage, start=1):
            last = i == len(stage)
            layers.append(LayerSpec("conv", c, size, size, n, k, pooling_after=last, name=f"conv{s}_{i}"))
            c = n
        size //= 2
    width = c * size * size
    for i, n in enumerate((4096, 4096, classes), start=1):
        layers.append(LayerSpec("fc", width, 1, 1, n, 1, name=f"fc{i}"))
        width = n
    return NetworkSpec(f"vgg-{variant.lower()}", tuple(layers))


def get_network(name: str) -> NetworkSpec:
    """Resolve ``vgg-a``..``vgg-e`` or a path to a JSON layer list."""
    key = name.lower()
    if key in NETWORK_NAMES:
        return build_vgg(key[-1])
    return load_network(name)


def load_network(path: str | Path) -> NetworkSpec:
    data = json.loads(Path(path).read_text())
    layers = tuple(LayerSpec(**entry) for entry in data["layers"])
    return NetworkSpec(data.get("name", Path(path).stem), layers)


def network_to_dict(net: NetworkSpec) -> dict:
    return {"name": net.name, "layers": [asdict(layer) for layer in net.layers]}
