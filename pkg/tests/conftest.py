import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from comm_model import AllReduceModel  # noqa: E402
from model_trace import LayerProfile, ModelTrace  # noqa: E402


def build_trace(t_b, params, t_f=0.0, bytes_per_element=4):
    """Trace from per-layer lists in forward order (layer 1 first)."""
    layers = tuple(
        LayerProfile(name=f"layer{i + 1}", params=p, backward_time=t)
        for i, (t, p) in enumerate(zip(t_b, params))
    )
    return ModelTrace(layers=layers, forward_time=t_f, bytes_per_element=bytes_per_element)


def random_instance(rng, n_layers):
    """Log-uniform layer sizes over 1e2..1e8 bytes, random t_b, a and b."""
    sizes = np.exp(rng.uniform(np.log(1e2), np.log(1e8), size=n_layers))
    params = [max(1, int(size // 4)) for size in sizes]
    t_b = [float(x) for x in rng.uniform(0.0, 5e-3, size=n_layers)]
    trace = build_trace(t_b, params, t_f=float(rng.uniform(0.0, 1e-2)))
    comm = AllReduceModel(a=float(np.exp(rng.uniform(np.log(1e-5), np.log(1e-2)))),
                          b=float(np.exp(rng.uniform(np.log(1e-10), np.log(1e-8)))))
    return trace, comm


@pytest.fixture
def make_trace():
    return build_trace


@pytest.fixture
def random_instances():
    """random_instances(count, min_layers, max_layers, seed) -> list of (trace, comm)"""
    def _generate(count, min_layers=3, max_layers=12, seed=0):
        rng = np.random.default_rng(seed)
        return [random_instance(rng, int(rng.integers(min_layers, max_layers + 1)))
                for _ in range(count)]
    return _generate
