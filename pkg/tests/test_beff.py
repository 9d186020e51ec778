from __future__ import annotations

import csv

import pytest

from interfpga.beff import (
    BEFF_COLUMNS,
    MODEL_ERROR_COLUMNS,
    BeffConfig,
    beff_aggregate,
    goodput_bound,
    model_latency,
    run_beff,
    run_size,
    write_beff_csv,
    write_model_error_csv,
)
from interfpga.errors import ConfigurationError
from interfpga.perfmodel import ALL_MODES, TransferMode
from interfpga.presets import PRESETS, get_preset

SIZES = (64, 1024, 65536, 1 << 20)


def test_config_validation():
    with pytest.raises(ConfigurationError, match="at least 2 nodes"):
        BeffConfig(node_count=1)
    with pytest.raises(ConfigurationError):
        BeffConfig(message_sizes=(128, 64))
    with pytest.raises(ConfigurationError):
        BeffConfig(message_sizes=())
    with pytest.raises(ConfigurationError):
        BeffConfig(repetitions=0)


def test_unknown_preset():
    with pytest.raises(ConfigurationError, match="known presets"):
        get_preset("infiniband")


def test_aggregate_is_mean_throughput():
    assert beff_aggregate([1.0, 2.0, 6.0]) == 3.0
    with pytest.raises(ValueError):
        beff_aggregate([])


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_simulation_tracks_model_for_every_preset(preset):
    cluster = get_preset(preset)
    result = run_beff(BeffConfig(message_sizes=SIZES, repetitions=2), cluster)
    for row in result.rows:
        assert row.within_tolerance, (row.size, row.latency, row.model_latency)
        assert row.throughput == pytest.approx(row.size / row.latency)
        assert row.aggregate == pytest.approx(2 * row.throughput)


@pytest.mark.parametrize("mode", ALL_MODES, ids=str)
def test_every_mode_on_a_four_node_ring(mode):
    cluster = get_preset("switch-udp-pl")
    result = run_beff(BeffConfig(node_count=4, message_sizes=(64, 4096), repetitions=1, mode=mode), cluster)
    assert result.mode == mode
    assert all(r.within_tolerance for r in result.rows)


def test_repetitions_do_not_change_a_quiescent_measurement():
    cluster = get_preset("switch-tcp-pl")
    one, _ = run_size(BeffConfig(repetitions=1), cluster, 65536)
    three, _ = run_size(BeffConfig(repetitions=3), cluster, 65536)
    assert one.latency == three.latency


@pytest.mark.parametrize("preset", ["direct-udp-pl", "switch-udp-pl", "switch-tcp-pl", "switch-tcp-pl-optimized"])
def test_large_messages_approach_the_goodput_bound(preset):
    cluster = get_preset(preset)
    row, _ = run_size(BeffConfig(repetitions=1), cluster, 1 << 22)
    bound = goodput_bound(cluster, cluster.mode)
    assert 0.95 * bound <= row.throughput <= bound * (1 + 1e-9)


@pytest.mark.parametrize("preset", ["buffered-host", "mpi-pcie-baseline"])
def test_host_overhead_explains_the_large_message_deficit(preset):
    # tens of microseconds of fixed host cost stay visible at 4 MiB
    cluster = get_preset(preset)
    size = 1 << 22
    row, _ = run_size(BeffConfig(repetitions=1), cluster, size)
    small, _ = run_size(BeffConfig(repetitions=1), cluster, 64)
    bound = goodput_bound(cluster, cluster.mode)
    assert row.throughput < 0.95 * bound
    assert row.throughput == pytest.approx(size / (size / bound + small.latency), rel=1e-3)


def test_model_latency_buffered_exceeds_streamed():
    cluster = get_preset("direct-udp-pl")
    streamed = model_latency(64, cluster, TransferMode.parse("streamed-pl"))
    buffered = model_latency(64, cluster, TransferMode.parse("buffered-pl"))
    assert buffered > streamed


def test_csv_outputs(tmp_path):
    result = run_beff(BeffConfig(message_sizes=(64, 128), repetitions=1), get_preset("direct-udp-pl"))
    write_beff_csv(result, tmp_path / "beff.csv")
    write_model_error_csv(result, tmp_path / "err.csv")
    with open(tmp_path / "beff.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == BEFF_COLUMNS
    assert [int(r[0]) for r in rows[1:]] == [64, 128]
    assert float(rows[1][1]) == result.rows[0].latency
    with open(tmp_path / "err.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == MODEL_ERROR_COLUMNS
    assert [r[-1] for r in rows[1:]] == ["1", "1"]
