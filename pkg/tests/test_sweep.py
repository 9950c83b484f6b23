import io

import numpy as np
import pytest

from comm_model import AllReduceAlgorithm, NetworkParams, cluster_network
from model_trace import bundled_trace
from strategies.base_strategy import Strategy
from sweep import (
    CSV_COLUMNS,
    DEFAULT_WORKER_COUNTS,
    SweepRunner,
    group_count,
    merged_layer_count,
    parse_worker_counts,
    run_sweep,
)
from timeline import MergePlan

TOL = 1e-9


@pytest.fixture(scope='module')
def trace():
    return bundled_trace()


@pytest.fixture(scope='module')
def ring_sweep(trace):
    return run_sweep(trace, cluster_network('cluster1'), AllReduceAlgorithm.RING)


def test_parse_worker_counts():
    assert parse_worker_counts('4..2048') == list(DEFAULT_WORKER_COUNTS)
    assert parse_worker_counts('16,4,8,8') == [4, 8, 16]
    for text in ('', '  ', '8..4', 'four'):
        with pytest.raises(ValueError):
            parse_worker_counts(text)


def test_default_worker_counts():
    assert DEFAULT_WORKER_COUNTS[0] == 4
    assert DEFAULT_WORKER_COUNTS[-1] == 2048
    assert len(DEFAULT_WORKER_COUNTS) == 10


def test_merged_layer_count():
    assert merged_layer_count(MergePlan.all_normal(5)) == 0
    assert merged_layer_count(MergePlan.all_merged(5)) == 4
    assert group_count(MergePlan.all_merged(5)) == 1


def test_ring_sweep_shape(ring_sweep, trace):
    assert len(ring_sweep.rows) == 4 * len(DEFAULT_WORKER_COUNTS)
    assert ring_sweep.dominance_violations() == []
    table = ring_sweep.by_workers()

    smallest = table[4]
    assert smallest[Strategy.WFBP].iter_time < smallest[Strategy.SYNCEASGD].iter_time
    assert smallest[Strategy.MGWFBP].n_merged > 0

    crossing = ring_sweep.crossing_point()
    assert crossing is not None and crossing > 4

    threshold = ring_sweep.all_merged_from()
    assert threshold is not None
    for n, rows in table.items():
        if n >= threshold:
            assert rows[Strategy.MGWFBP].n_merged == trace.num_layers - 1
            assert rows[Strategy.MGWFBP].n_groups == 1
            assert abs(rows[Strategy.MGWFBP].iter_time - rows[Strategy.SYNCEASGD].iter_time) <= TOL
    assert table[2048][Strategy.MGWFBP].n_merged == trace.num_layers - 1


def test_ring_sweep_dominance_per_row(ring_sweep):
    for n, rows in ring_sweep.by_workers().items():
        mg = rows[Strategy.MGWFBP].iter_time
        assert mg <= rows[Strategy.WFBP].iter_time + TOL
        assert mg <= rows[Strategy.SYNCEASGD].iter_time + TOL
        assert rows[Strategy.NAIVE].iter_time >= max(r.iter_time for r in rows.values()) - TOL
        for row in rows.values():
            assert row.speedup <= n


def test_double_binary_trees_sweep(trace):
    result = run_sweep(trace, cluster_network('cluster1'), AllReduceAlgorithm.DOUBLE_BINARY_TREES)
    assert result.dominance_violations() == []
    for rows in result.by_workers().values():
        sync = rows[Strategy.SYNCEASGD].iter_time
        assert rows[Strategy.WFBP].iter_time <= sync
        assert rows[Strategy.MGWFBP].iter_time <= sync


def test_nearly_free_network_scales_linearly(make_trace):
    small = make_trace([1e-3] * 8, [1000] * 8, t_f=1e-3)
    result = run_sweep(small, NetworkParams(1e-12, 0.0, 0.0, 2), AllReduceAlgorithm.RING, [4, 16, 64])
    for row in result.rows:
        assert row.speedup == pytest.approx(row.n_workers, rel=1e-6)


def test_failed_rows_are_annotated(trace):
    result = run_sweep(trace, cluster_network('cluster1'), AllReduceAlgorithm.RING, [1, 4])
    failed = [row for row in result.rows if not row.ok]
    assert len(failed) == 4
    assert all(row.n_workers == 1 and 'N=1' in row.error for row in failed)
    assert all(row.ok for row in result.rows if row.n_workers == 4)
    assert not result.failed

    everything_failed = run_sweep(trace, cluster_network('cluster1'), AllReduceAlgorithm.RING, [1])
    assert everything_failed.failed


def test_empty_worker_list(trace):
    with pytest.raises(ValueError):
        run_sweep(trace, cluster_network('cluster1'), AllReduceAlgorithm.RING, [])


def test_csv_is_deterministic(trace):
    net = cluster_network('cluster1')
    outputs = []
    for threads in (1, 4):
        result = SweepRunner(trace, net, AllReduceAlgorithm.RING, max_workers=threads).run([4, 64, 1024])
        out = io.StringIO()
        result.write_csv(out)
        outputs.append(out.getvalue())
    assert outputs[0] == outputs[1]

    lines = outputs[0].splitlines()
    assert lines[0] == ','.join(CSV_COLUMNS)
    assert lines[1].startswith('4,Naive,ring,')
    assert lines[4].startswith('4,MGWFBP,ring,')


def test_failed_rows_in_csv(trace):
    result = run_sweep(trace, cluster_network('cluster1'), AllReduceAlgorithm.RING, [1])
    frame = result.to_frame()
    assert frame['n_merged'].isna().all()
    out = io.StringIO()
    result.write_csv(out)
    first_row = out.getvalue().splitlines()[1].split(',')
    assert first_row[:3] == ['1', 'Naive', 'ring']
    assert first_row[3:8] == ['', '', '', '', '']


def test_json_export(ring_sweep, tmp_path):
    path = tmp_path / 'sweep.json'
    ring_sweep.write_json(str(path))
    text = path.read_text()
    assert '"strategy":"MGWFBP"' in text.replace(' ', '')


def test_numpy_worker_counts(trace):
    result = run_sweep(trace, cluster_network('cluster1'), AllReduceAlgorithm.RING, np.array([4, 8]))
    assert all(row.ok for row in result.rows)
    assert result.worker_counts() == [4, 8]
