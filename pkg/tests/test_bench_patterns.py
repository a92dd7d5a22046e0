"""Data-plane pattern benchmarks produce sane, complete output."""
from __future__ import annotations

import csv

import pytest

from fedfaas.dataplane.bench_patterns import PATTERNS, run_suite, run_trial, write_csv
from fedfaas.dataplane.kvstore import KvClient, KvHandle, KvServer
from fedfaas.dataplane.sharedfs import SharedFsAdapter


@pytest.fixture(scope="module")
def kv_server():
    server = KvServer().start()
    yield server
    server.stop()


@pytest.fixture
def adapters(kv_server, tmp_path):
    host, port = kv_server.address
    return {
        "kv": lambda: KvClient(KvHandle(host, port, "bench")),
        "sharedfs": lambda: SharedFsAdapter(tmp_path, "bench"),
    }


@pytest.mark.parametrize("pattern", PATTERNS)
@pytest.mark.parametrize("adapter_name", ["kv", "sharedfs"])
def test_each_pattern_completes(adapters, pattern, adapter_name):
    row = run_trial(pattern, adapter_name, adapters[adapter_name], 3, 1024, 0)
    assert row.duration_ns > 0
    assert row.pattern == pattern
    assert row.adapter == adapter_name
    assert row.size_bytes == 1024


def test_suite_rows_and_csv(adapters, tmp_path):
    rows = run_suite(adapters, nodes=3, sizes=(1024,), trials=2)
    assert len(rows) == 2 * len(PATTERNS) * 1 * 2
    out = tmp_path / "data_plane.csv"
    write_csv(rows, str(out))
    with out.open() as fh:
        got = list(csv.DictReader(fh))
    assert len(got) == len(rows)
    assert set(got[0]) == {
        "pattern", "adapter", "nodes", "size_bytes", "duration_ns", "trial"
    }
    assert all(int(r["duration_ns"]) > 0 for r in got)


def test_all_to_all_moves_every_pair(adapters):
    nodes = 4
    row = run_trial("all_to_all", "kv", adapters["kv"], nodes, 256, 1)
    assert row.nodes == nodes
