"""Endpoint agent configuration, loaded from a TOML file.

Example::

    [endpoint]
    service_url = "http://127.0.0.1:8700"
    token = "dev-token"
    name = "laptop"
    workdir = "/tmp/fedfaas-ep"

    [provider]
    kind = "local_process"
    min_blocks = 1
    max_blocks = 4
    nodes_per_block = 1
    workers_per_node = 4
    max_idle = 120.0
    scale_up_threshold = 10
    queue_delay = 0.0

    [routing]
    prefetch_count = 4
    heartbeat_period = 30.0
    rng_seed = 1
    batching = true
    policy = "warming_aware"

    [data]
    kv_enabled = true

    [[container]]
    type_id = "typeA"
    cold_start = "ec2-docker"       # named profile, or min/mean/max keys
    warm_idle_timeout = 600.0
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from fedfaas.agent.strategy import ProviderConfig, ProviderKind
from fedfaas.node.containers import NAMED_PROFILES, ColdStartProfile, ContainerSpec


@dataclass
class RoutingConfig:
    prefetch_count: int = 4
    heartbeat_period: float = 30.0
    manager_heartbeat_period: float = 2.0
    rng_seed: int = 1
    batching: bool = True
    policy: str = "warming_aware"  # or "random"
    # how long a typed task may wait for advertised warm capacity before a
    # fresh cold start elsewhere is judged cheaper (roughly twice a typical
    # container cold start)
    patience: float = 2.0
    ad_coalesce: float = 1.0
    reconcile_interval: float = 0.25
    strategy_interval: float = 1.0


@dataclass
class AgentConfig:
    service_url: str
    token: str
    name: str = "endpoint"
    endpoint_id: Optional[str] = None
    workdir: str = "/tmp/fedfaas-endpoint"
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    containers: list[ContainerSpec] = field(default_factory=list)
    kv_enabled: bool = True
    sharedfs_root: Optional[str] = None


def _container_from_table(raw: dict) -> ContainerSpec:
    cold = raw.get("cold_start", "instant")
    if isinstance(cold, str):
        profile = NAMED_PROFILES[cold]
    elif isinstance(cold, (int, float)):
        profile = ColdStartProfile.fixed(float(cold))
    else:
        profile = ColdStartProfile(cold["min"], cold["mean"], cold["max"])
    return ContainerSpec(
        type_id=raw["type_id"],
        cold_start=profile,
        warm_idle_timeout=float(raw.get("warm_idle_timeout", 600.0)),
        launch_template=raw.get("launch_template"),
    )


def load_agent_config(path: str | Path) -> AgentConfig:
    raw = tomllib.loads(Path(path).read_text())
    ep = raw.get("endpoint", {})
    prov = raw.get("provider", {})
    routing = raw.get("routing", {})
    data = raw.get("data", {})
    return AgentConfig(
        service_url=ep["service_url"],
        token=ep["token"],
        name=ep.get("name", "endpoint"),
        endpoint_id=ep.get("endpoint_id"),
        workdir=ep.get("workdir", "/tmp/fedfaas-endpoint"),
        provider=ProviderConfig(
            provider_kind=ProviderKind(prov.get("kind", "local_process")),
            min_blocks=int(prov.get("min_blocks", 0)),
            max_blocks=int(prov.get("max_blocks", 1)),
            nodes_per_block=int(prov.get("nodes_per_block", 1)),
            workers_per_node=int(prov.get("workers_per_node", 1)),
            max_idle=float(prov.get("max_idle", 120.0)),
            scale_up_threshold=int(prov.get("scale_up_threshold", 10)),
            queue_delay=float(prov.get("queue_delay", 0.0)),
        ),
        routing=RoutingConfig(
            prefetch_count=int(routing.get("prefetch_count", 4)),
            heartbeat_period=float(routing.get("heartbeat_period", 30.0)),
            manager_heartbeat_period=float(routing.get("manager_heartbeat_period", 2.0)),
            rng_seed=int(routing.get("rng_seed", 1)),
            batching=bool(routing.get("batching", True)),
            policy=routing.get("policy", "warming_aware"),
            ad_coalesce=float(routing.get("ad_coalesce", 1.0)),
            reconcile_interval=float(routing.get("reconcile_interval", 0.25)),
            strategy_interval=float(routing.get("strategy_interval", 1.0)),
        ),
        containers=[_container_from_table(c) for c in raw.get("container", [])],
        kv_enabled=bool(data.get("kv_enabled", True)),
        sharedfs_root=data.get("sharedfs_root"),
    )
