# model_trace.py
"""Model traces: per-layer parameter counts and backward times.

Layers are kept in forward order (index 1 is the input side, index L the
output side). Trace files store times in microseconds; everything in memory
is seconds.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_BYTES_PER_ELEMENT = 4


class TraceParseError(ValueError):
    """Trace file does not follow the schema."""


class TraceValidationError(ValueError):
    """Trace parsed but violates a trace invariant."""


@dataclass(frozen=True)
class LayerProfile:
    name: str
    params: int
    backward_time: float
    """Seconds."""

    def __post_init__(self):
        if self.params < 0:
            raise TraceValidationError(f"layer {self.name!r}: params must be >= 0, got {self.params}")
        if not (math.isfinite(self.backward_time) and self.backward_time >= 0):
            raise TraceValidationError(
                f"layer {self.name!r}: backward_time must be >= 0, got {self.backward_time}")


@dataclass(frozen=True)
class ModelTrace:
    layers: Tuple[LayerProfile, ...]
    forward_time: float
    bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT
    warnings: Tuple[str, ...] = field(default_factory=tuple, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'layers', tuple(self.layers))
        if not self.layers:
            raise TraceValidationError("trace must contain at least one layer")
        if not any(layer.params > 0 for layer in self.layers):
            raise TraceValidationError("at least one layer must have params > 0")
        if self.bytes_per_element not in (2, 4):
            raise TraceValidationError(f"bytes_per_element must be 2 or 4, got {self.bytes_per_element}")
        if not (math.isfinite(self.forward_time) and self.forward_time >= 0):
            raise TraceValidationError(f"forward_time must be >= 0, got {self.forward_time}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def total_params(self) -> int:
        return sum(layer.params for layer in self.layers)

    @property
    def total_backward_time(self) -> float:
        return sum(layer.backward_time for layer in self.layers)

    def backward_times(self) -> List[float]:
        """Backward durations in forward order (position 0 is layer 1)."""
        return [layer.backward_time for layer in self.layers]

    def all_layer_bytes(self) -> List[int]:
        return [layer.params * self.bytes_per_element for layer in self.layers]


def layer_bytes(trace: ModelTrace, l: int) -> int:
    """Message size of layer l (1-based) in bytes."""
    if not 1 <= l <= trace.num_layers:
        raise IndexError(f"layer index {l} out of range 1..{trace.num_layers}")
    return trace.layers[l - 1].params * trace.bytes_per_element


def _require_number(value, field_name: str, layer_index: Optional[int] = None) -> float:
    where = f"layer {layer_index}: " if layer_index is not None else ""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TraceParseError(f"{where}field '{field_name}' must be a number, got {value!r}")
    return float(value)


def trace_from_dict(data: Dict[str, Any]) -> ModelTrace:
    """Build a validated ModelTrace from the JSON object of a trace file."""
    if not isinstance(data, dict):
        raise TraceParseError("trace must be a JSON object")

    if 'forward_time_us' not in data:
        raise TraceParseError("missing field 'forward_time_us'")
    forward_us = _require_number(data['forward_time_us'], 'forward_time_us')

    warnings: List[str] = []
    if 'bytes_per_element' in data:
        bpe = data['bytes_per_element']
        if isinstance(bpe, bool) or not isinstance(bpe, int):
            raise TraceParseError(f"field 'bytes_per_element' must be an integer, got {bpe!r}")
    else:
        bpe = DEFAULT_BYTES_PER_ELEMENT
        msg = f"bytes_per_element not given, assuming {DEFAULT_BYTES_PER_ELEMENT} (single precision)"
        logger.warning(msg)
        warnings.append(msg)

    raw_layers = data.get('layers')
    if not isinstance(raw_layers, list):
        raise TraceParseError("field 'layers' must be a list")

    layers = []
    for index, raw in enumerate(raw_layers, start=1):
        if not isinstance(raw, dict):
            raise TraceParseError(f"layer {index}: must be an object")
        for key in ('name', 'params', 'backward_time_us'):
            if key not in raw:
                raise TraceParseError(f"layer {index}: missing field '{key}'")
        name = raw['name']
        if not isinstance(name, str):
            raise TraceParseError(f"layer {index}: field 'name' must be a string, got {name!r}")
        params = raw['params']
        if isinstance(params, bool) or not isinstance(params, int):
            raise TraceParseError(f"layer {index}: field 'params' must be an integer, got {params!r}")
        backward_us = _require_number(raw['backward_time_us'], 'backward_time_us', index)
        try:
            layers.append(LayerProfile(name=name, params=params, backward_time=backward_us * 1e-6))
        except TraceValidationError as e:
            raise TraceValidationError(f"layer {index}: {e}")

    trace = ModelTrace(layers=tuple(layers), forward_time=forward_us * 1e-6,
                       bytes_per_element=bpe, warnings=tuple(warnings))
    logger.debug(f"Trace with {trace.num_layers} layers, {trace.total_params} params")
    return trace


def _us(seconds: float) -> float:
    return round(seconds * 1e6, 6)


def trace_to_dict(trace: ModelTrace) -> Dict[str, Any]:
    return {
        'forward_time_us': _us(trace.forward_time),
        'bytes_per_element': trace.bytes_per_element,
        'layers': [
            {'name': layer.name, 'params': layer.params, 'backward_time_us': _us(layer.backward_time)}
            for layer in trace.layers
        ],
    }


def load_trace(path_or_stream) -> ModelTrace:
    try:
        if hasattr(path_or_stream, 'read'):
            data = json.load(path_or_stream)
        else:
            with open(path_or_stream, 'r', encoding='utf-8') as f:
                data = json.load(f)
    except json.JSONDecodeError as e:
        raise TraceParseError(f"invalid JSON: {e}")
    return trace_from_dict(data)


def dump_trace(trace: ModelTrace) -> str:
    """Canonical text form: fixed key order, 2-space indent, trailing newline."""
    return json.dumps(trace_to_dict(trace), indent=2) + '\n'


def save_trace(trace: ModelTrace, path_or_stream):
    text = dump_trace(trace)
    if hasattr(path_or_stream, 'write'):
        path_or_stream.write(text)
    else:
        with open(path_or_stream, 'w', encoding='utf-8') as f:
            f.write(text)


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters for a synthetic trace."""
    n_layers: int
    total_params: int
    total_backward_time: float
    forward_time: float = 0.0
    size_sigma: float = 1.5
    """Lognormal sigma of layer sizes; larger means a heavier small-tensor majority."""
    widest_last: bool = True
    """Sort sizes ascending in forward order so the output-side layers are widest."""
    bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT
    seed: int = 7
    name_prefix: str = 'layer'


def _largest_remainder(weights: np.ndarray, total: int) -> List[int]:
    """Integer apportionment of `total` proportionally to `weights`, sum preserved exactly."""
    raw = weights / weights.sum() * total
    base = np.floor(raw).astype(np.int64)
    remainder = int(total - base.sum())
    if remainder > 0:
        # stable sort keeps the lowest index first on equal fractions
        order = np.argsort(-(raw - base), kind='stable')
        base[order[:remainder]] += 1
    return [int(x) for x in base]


def synth_trace(spec: SynthSpec) -> ModelTrace:
    """Deterministic skewed trace; params sum exactly, backward times sum within rounding."""
    if spec.n_layers <= 0:
        raise ValueError(f"n_layers must be positive, got {spec.n_layers}")
    if spec.total_params <= 0:
        raise ValueError(f"total_params must be positive, got {spec.total_params}")
    if not spec.total_backward_time > 0:
        raise ValueError(f"total_backward_time must be positive, got {spec.total_backward_time}")
    if spec.forward_time < 0:
        raise ValueError(f"forward_time must be >= 0, got {spec.forward_time}")

    rng = np.random.default_rng(spec.seed)
    size_weights = rng.lognormal(mean=0.0, sigma=spec.size_sigma, size=spec.n_layers)
    if spec.widest_last:
        size_weights = np.sort(size_weights)
    time_weights = rng.gamma(shape=2.0, scale=1.0, size=spec.n_layers)

    params = _largest_remainder(size_weights, spec.total_params)
    backward = time_weights / time_weights.sum() * spec.total_backward_time

    layers = tuple(
        LayerProfile(name=f"{spec.name_prefix}{i + 1}", params=params[i], backward_time=float(backward[i]))
        for i in range(spec.n_layers)
    )
    logger.debug(f"Synthesized {spec.n_layers}-layer trace (seed {spec.seed})")
    return ModelTrace(layers=layers, forward_time=spec.forward_time,
                      bytes_per_element=spec.bytes_per_element)


# Learnable-layer counts and parameter totals of common CNNs: (layers, params)
MODEL_PRESETS: Dict[str, Tuple[int, int]] = {
    'googlenet': (59, 13_000_000),
    'resnet50': (161, 25_500_000),
    'resnet152': (467, 60_100_000),
    'densenet161': (484, 28_600_000),
    'densenet201': (604, 20_000_000),
    'inception_v4': (449, 42_600_000),
}


def preset_trace(name: str, forward_time: float = 0.1, backward_time: float = 0.27,
                 size_sigma: float = 1.5, bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT,
                 seed: int = 7) -> ModelTrace:
    try:
        n_layers, total_params = MODEL_PRESETS[name]
    except KeyError:
        raise ValueError(f"Unknown model preset: {name} (known: {', '.join(MODEL_PRESETS)})")
    return synth_trace(SynthSpec(
        n_layers=n_layers,
        total_params=total_params,
        total_backward_time=backward_time,
        forward_time=forward_time,
        size_sigma=size_sigma,
        bytes_per_element=bytes_per_element,
        seed=seed,
        name_prefix=f"{name}.layer",
    ))


def bundled_trace() -> ModelTrace:
    """ResNet-50-like skewed trace: 161 layers, 25.5M params."""
    return preset_trace('resnet50')
