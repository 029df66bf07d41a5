"""DNN layer descriptions turned into task populations and packet sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator

BYTES_PER_VALUE = 2          # 16-bit fixed point
FLIT_PAYLOAD_BYTES = 32
MEMORY_CYCLES_PER_VALUE = 0.0625   # 2 B at 64 GB/s, in 2 GHz NoC cycles
MACS_PER_PE = 64


class LayerKind(Enum):
    CONV = "conv"
    POOL = "pool"
    FC = "fc"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            key = value.lower().replace("_", "").replace(" ", "")
            aliases = {"convolution": cls.CONV, "pooling": cls.POOL,
                       "fullyconnected": cls.FC, "linear": cls.FC}
            if key in aliases:
                return aliases[key]
            if key != value:
                return cls.__members__.get(key.upper()) or cls._value2member_map_.get(key)
        return None


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """One DNN layer.

    For fully connected layers the fan-in is ``in_channels * input_h * input_w``
    and ``out_channels`` is the number of output neurons.
    """

    kind: LayerKind
    input_h: int
    input_w: int
    in_channels: int
    out_channels: int
    kernel: int = 1
    padding: int = 0
    stride: int | None = None
    name: str = ""

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", LayerKind(self.kind))
        if self.kernel < 1:
            raise WorkloadError("kernel must be >= 1")
        if min(self.input_h, self.input_w, self.in_channels, self.out_channels) < 1:
            raise WorkloadError("layer dimensions must be positive")

    @property
    def effective_stride(self) -> int:
        if self.stride is not None:
            return self.stride
        return self.kernel if self.kind is LayerKind.POOL else 1

    @property
    def output_hw(self) -> tuple[int, int]:
        if self.kind is LayerKind.FC:
            return 1, 1
        s = self.effective_stride
        oh = (self.input_h + 2 * self.padding - self.kernel) // s + 1
        ow = (self.input_w + 2 * self.padding - self.kernel) // s + 1
        return oh, ow

    @property
    def fan_in(self) -> int:
        if self.kind is LayerKind.FC:
            return self.in_channels * self.input_h * self.input_w
        if self.kind is LayerKind.POOL:
            return self.kernel * self.kernel
        return self.kernel * self.kernel * self.in_channels

    @property
    def data_values(self) -> int:
        """16-bit values one task fetches from memory."""
        if self.kind is LayerKind.POOL:
            return self.fan_in
        return 2 * self.fan_in       # inputs + weights, no reuse between tasks

    @property
    def mac_ops(self) -> int:
        return self.fan_in

    def with_(self, **changes) -> "LayerSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class Task:
    task_id: int
    layer_id: int
    data_values: int
    mac_ops: int


@dataclass(frozen=True)
class PacketSpec:
    response_flits: int
    flit_payload_bytes: int = FLIT_PAYLOAD_BYTES
    request_flits: int = 1
    result_flits: int = 1


def task_count(layer: LayerSpec) -> int:
    oh, ow = layer.output_hw
    if oh < 1 or ow < 1:
        raise WorkloadError(f"layer {layer.name or layer} has non-positive output {oh}x{ow}")
    if layer.kind is LayerKind.FC:
        return layer.out_channels
    return layer.out_channels * oh * ow


def tasks_for_layer(layer: LayerSpec, layer_id: int = 0) -> tuple[int, Iterator[Task]]:
    """Task count and a lazy stream of the layer's tasks."""
    n = task_count(layer)
    dv, macs = layer.data_values, layer.mac_ops

    def stream():
        for i in range(n):
            yield Task(i, layer_id, dv, macs)

    return n, stream()


def flits_for_values(data_values: int, flit_payload_bytes: int = FLIT_PAYLOAD_BYTES) -> int:
    return max(1, math.ceil(data_values * BYTES_PER_VALUE / flit_payload_bytes))


def response_flit_count(kernel: int, in_channels: int = 1,
                        flit_payload_bytes: int = FLIT_PAYLOAD_BYTES) -> int:
    """Flits in a convolution response packet (inputs plus weights)."""
    if kernel < 1:
        raise WorkloadError("kernel must be >= 1")
    return flits_for_values(2 * kernel * kernel * in_channels, flit_payload_bytes)


def packet_spec(layer: LayerSpec, flit_payload_bytes: int = FLIT_PAYLOAD_BYTES) -> PacketSpec:
    return PacketSpec(flits_for_values(layer.data_values, flit_payload_bytes), flit_payload_bytes)


def compute_cycles_for_task(mac_ops: int, macs_per_pe: int = MACS_PER_PE) -> int:
    """PE cycles to run ``mac_ops`` multiply-accumulates."""
    if mac_ops < 1 or macs_per_pe < 1:
        raise WorkloadError("mac_ops and macs_per_pe must be >= 1")
    return -(-mac_ops // macs_per_pe)


def memory_delay_for_task(data_values: int,
                          cycles_per_value: float = MEMORY_CYCLES_PER_VALUE) -> float:
    if data_values < 1:
        raise WorkloadError("data_values must be >= 1")
    return data_values * cycles_per_value


def lenet_preset() -> list[LayerSpec]:
    """LeNet-5 with a fully connected C3."""
    conv, pool, fc = LayerKind.CONV, LayerKind.POOL, LayerKind.FC
    return [
        LayerSpec(conv, 32, 32, 1, 6, kernel=5, name="C1"),
        LayerSpec(pool, 28, 28, 6, 6, kernel=2, name="S2"),
        LayerSpec(conv, 14, 14, 6, 16, kernel=5, name="C3"),
        LayerSpec(pool, 10, 10, 16, 16, kernel=2, name="S4"),
        LayerSpec(conv, 5, 5, 16, 120, kernel=5, name="C5"),
        LayerSpec(fc, 1, 1, 120, 84, name="F6"),
        LayerSpec(fc, 1, 1, 84, 10, name="OUT"),
    ]


PRESETS = {"lenet": lenet_preset}

# Kernel-size sweep: 28x28 input with "same" padding keeps 28x28 outputs.
KERNEL_SWEEP_PADDING = {1: 0, 3: 1, 5: 2, 7: 3, 9: 4, 11: 5, 13: 6}


def kernel_variant(kernel: int, base: LayerSpec | None = None) -> LayerSpec:
    base = base or lenet_preset()[0]
    pad = KERNEL_SWEEP_PADDING.get(kernel, (kernel - 1) // 2)
    return base.with_(input_h=28, input_w=28, kernel=kernel, padding=pad, name=f"C1-k{kernel}")


def channel_variant(out_channels: int, base: LayerSpec | None = None) -> LayerSpec:
    base = base or lenet_preset()[0]
    return base.with_(out_channels=out_channels, name=f"C1-oc{out_channels}")
