import io
import json

import pytest

from model_trace import (
    MODEL_PRESETS,
    SynthSpec,
    TraceParseError,
    TraceValidationError,
    bundled_trace,
    dump_trace,
    layer_bytes,
    load_trace,
    preset_trace,
    save_trace,
    synth_trace,
)


def _trace_json(**overrides):
    data = {
        'forward_time_us': 1000.0,
        'bytes_per_element': 4,
        'layers': [
            {'name': 'conv1', 'params': 1000, 'backward_time_us': 200.0},
            {'name': 'conv2', 'params': 0, 'backward_time_us': 50.0},
            {'name': 'fc', 'params': 5000, 'backward_time_us': 300.0},
        ],
    }
    data.update(overrides)
    return io.StringIO(json.dumps(data))


def test_load_valid_trace():
    trace = load_trace(_trace_json())
    assert trace.num_layers == 3
    assert trace.forward_time == pytest.approx(1e-3)
    assert trace.layers[2].backward_time == pytest.approx(3e-4)
    assert trace.layers[0].name == 'conv1'
    assert trace.warnings == ()


def test_load_trace_from_path(tmp_path):
    path = tmp_path / 'trace.json'
    path.write_text(_trace_json().getvalue())
    assert load_trace(str(path)).num_layers == 3


def test_negative_backward_time_is_rejected():
    layers = [{'name': 'a', 'params': 10, 'backward_time_us': -1.0}]
    with pytest.raises(TraceValidationError, match='layer 1'):
        load_trace(_trace_json(layers=layers))


def test_missing_bytes_per_element_defaults_to_fp32():
    stream = io.StringIO(json.dumps({
        'forward_time_us': 10.0,
        'layers': [{'name': 'a', 'params': 10, 'backward_time_us': 1.0}],
    }))
    trace = load_trace(stream)
    assert trace.bytes_per_element == 4
    assert len(trace.warnings) == 1


def test_parse_error_names_field_and_layer():
    layers = [
        {'name': 'a', 'params': 10, 'backward_time_us': 1.0},
        {'name': 'b', 'backward_time_us': 1.0},
    ]
    with pytest.raises(TraceParseError) as excinfo:
        load_trace(_trace_json(layers=layers))
    assert 'layer 2' in str(excinfo.value)
    assert 'params' in str(excinfo.value)


@pytest.mark.parametrize('overrides,error', [
    ({'bytes_per_element': 8}, TraceValidationError),
    ({'layers': []}, TraceValidationError),
    ({'layers': [{'name': 'a', 'params': 0, 'backward_time_us': 1.0}]}, TraceValidationError),
    ({'forward_time_us': 'fast'}, TraceParseError),
    ({'layers': [{'name': 'a', 'params': 1.5, 'backward_time_us': 1.0}]}, TraceParseError),
])
def test_invalid_traces(overrides, error):
    with pytest.raises(error):
        load_trace(_trace_json(**overrides))


def test_invalid_json():
    with pytest.raises(TraceParseError):
        load_trace(io.StringIO('{"layers": ['))


def test_layer_bytes(make_trace):
    resnet = make_trace([1.0], [25_500_000])
    assert layer_bytes(resnet, 1) == 102_000_000

    trace = make_trace([1.0, 1.0], [0, 1000], bytes_per_element=2)
    assert layer_bytes(trace, 1) == 0
    assert layer_bytes(trace, 2) == 2000

    with pytest.raises(IndexError):
        layer_bytes(trace, 3)
    with pytest.raises(IndexError):
        layer_bytes(trace, 0)


def test_bytes_conservation():
    trace = bundled_trace()
    total = sum(layer_bytes(trace, l) for l in range(1, trace.num_layers + 1))
    assert total == trace.bytes_per_element * trace.total_params


def test_canonical_round_trip_is_byte_identical(tmp_path):
    text = dump_trace(synth_trace(SynthSpec(n_layers=20, total_params=1_000_000,
                                            total_backward_time=0.05, forward_time=0.02)))
    path = tmp_path / 'trace.json'
    path.write_text(text)
    out = io.StringIO()
    save_trace(load_trace(str(path)), out)
    assert out.getvalue() == text


def test_synth_conserves_totals():
    trace = synth_trace(SynthSpec(n_layers=161, total_params=25_500_000, total_backward_time=0.27))
    assert trace.num_layers == 161
    assert trace.total_params == 25_500_000
    assert trace.total_backward_time == pytest.approx(0.27, abs=1e-12)


def test_synth_single_layer_holds_everything():
    trace = synth_trace(SynthSpec(n_layers=1, total_params=1234, total_backward_time=0.5))
    assert trace.layers[0].params == 1234
    assert trace.layers[0].backward_time == pytest.approx(0.5)


def test_synth_is_deterministic():
    spec = SynthSpec(n_layers=50, total_params=10_000_000, total_backward_time=0.1, seed=3)
    assert synth_trace(spec) == synth_trace(spec)
    other = SynthSpec(n_layers=50, total_params=10_000_000, total_backward_time=0.1, seed=4)
    assert synth_trace(spec) != synth_trace(other)


@pytest.mark.parametrize('kwargs', [
    dict(n_layers=0, total_params=10, total_backward_time=1.0),
    dict(n_layers=3, total_params=0, total_backward_time=1.0),
    dict(n_layers=3, total_params=10, total_backward_time=0.0),
])
def test_synth_rejects_non_positive(kwargs):
    with pytest.raises(ValueError):
        synth_trace(SynthSpec(**kwargs))


def test_bundled_trace_shape():
    trace = bundled_trace()
    assert trace.num_layers == 161
    assert trace.total_params == 25_500_000
    assert trace.forward_time == pytest.approx(0.1)
    assert trace.total_backward_time == pytest.approx(0.27)
    params = [layer.params for layer in trace.layers]
    # widest layers sit at the output side
    assert params == sorted(params)
    # skewed: most tensors are small
    assert sum(p < trace.total_params / trace.num_layers for p in params) > trace.num_layers / 2


def test_presets():
    for name, (n_layers, total_params) in MODEL_PRESETS.items():
        trace = preset_trace(name)
        assert trace.num_layers == n_layers
        assert trace.total_params == total_params

    half = preset_trace('googlenet', bytes_per_element=2)
    assert sum(half.all_layer_bytes()) == 2 * 13_000_000

    with pytest.raises(ValueError):
        preset_trace('vgg16')
