"""Provider behavior and agent config loading (no real processes spawned)."""
from __future__ import annotations

import json
from unittest import mock

import pytest

from fedfaas.agent.config import load_agent_config
from fedfaas.agent.providers import MockBatchProvider
from fedfaas.agent.strategy import ProviderConfig, ProviderKind
from fedfaas.node.containers import NAMED_PROFILES


@pytest.fixture
def cfg():
    return ProviderConfig(
        provider_kind=ProviderKind.MOCK_BATCH,
        nodes_per_block=2,
        workers_per_node=3,
        queue_delay=30.0,
    )


class FakeNow:
    def __init__(self) -> None:
        self.t = 1000.0

    def __call__(self) -> float:
        return self.t


class TestMockBatchProvider:
    def test_submission_waits_out_queue_delay(self, tmp_path, cfg):
        now = FakeNow()
        prov = MockBatchProvider(("127.0.0.1", 1), "s", str(tmp_path), 30.0, now=now)
        with mock.patch("fedfaas.agent.providers._spawn_managers") as spawn:
            block_id = prov.submit_block(cfg)
            prov.poll()
            spawn.assert_not_called()
            now.t += 29.0
            prov.poll()
            spawn.assert_not_called()
            now.t += 1.5
            prov.poll()
            spawn.assert_called_once()
            assert spawn.call_args[0][0].block_id == block_id
            prov.poll()  # a launched block is not launched twice
            spawn.assert_called_once()

    def test_cancel_while_queued_never_launches(self, tmp_path, cfg):
        now = FakeNow()
        prov = MockBatchProvider(("127.0.0.1", 1), "s", str(tmp_path), 30.0, now=now)
        with mock.patch("fedfaas.agent.providers._spawn_managers") as spawn:
            block_id = prov.submit_block(cfg)
            prov.cancel_block(block_id)
            now.t += 100.0
            prov.poll()
            spawn.assert_not_called()
        assert prov.block_count() == 0

    def test_submissions_are_recorded(self, tmp_path, cfg):
        prov = MockBatchProvider(("127.0.0.1", 1), "s", str(tmp_path), 30.0, now=FakeNow())
        with mock.patch("fedfaas.agent.providers._spawn_managers"):
            prov.submit_block(cfg)
            prov.submit_block(cfg)
        rows = [json.loads(line) for line in prov.record_path.read_text().splitlines()]
        assert [r["block_id"] for r in rows] == ["block-0", "block-1"]
        assert rows[0]["nodes"] == 2
        assert rows[0]["workers_per_node"] == 3


class TestAgentConfig:
    def test_full_toml_round_trip(self, tmp_path):
        path = tmp_path / "agent.toml"
        path.write_text(
            """
[endpoint]
service_url = "http://127.0.0.1:9999"
token = "tok"
name = "lab-cluster"
workdir = "/tmp/ep-test"

[provider]
kind = "mock_batch"
min_blocks = 1
max_blocks = 4
nodes_per_block = 2
workers_per_node = 8
queue_delay = 45.0

[routing]
prefetch_count = 10
batching = false
policy = "random"
rng_seed = 42

[data]
kv_enabled = false

[[container]]
type_id = "gpu"
cold_start = "theta-singularity"

[[container]]
type_id = "small"
cold_start = 0.5

[[container]]
type_id = "custom"
cold_start = { min = 1.0, mean = 2.0, max = 4.0 }
warm_idle_timeout = 30.0
"""
        )
        cfg = load_agent_config(path)
        assert cfg.service_url == "http://127.0.0.1:9999"
        assert cfg.provider.provider_kind is ProviderKind.MOCK_BATCH
        assert cfg.provider.workers_per_node == 8
        assert cfg.provider.queue_delay == 45.0
        assert cfg.routing.prefetch_count == 10
        assert cfg.routing.batching is False
        assert cfg.routing.policy == "random"
        assert cfg.kv_enabled is False
        by_id = {c.type_id: c for c in cfg.containers}
        assert by_id["gpu"].cold_start == NAMED_PROFILES["theta-singularity"]
        assert by_id["small"].cold_start.mean_s == 0.5
        assert by_id["custom"].cold_start.max_s == 4.0
        assert by_id["custom"].warm_idle_timeout == 30.0

    def test_defaults(self, tmp_path):
        path = tmp_path / "agent.toml"
        path.write_text(
            """
[endpoint]
service_url = "http://127.0.0.1:9999"
token = "tok"
"""
        )
        cfg = load_agent_config(path)
        assert cfg.routing.prefetch_count == 4
        assert cfg.routing.batching is True
        assert cfg.routing.policy == "warming_aware"
        assert cfg.provider.provider_kind is ProviderKind.LOCAL_PROCESS
        assert cfg.kv_enabled is True
        assert cfg.containers == []
