"""Single-host cluster: service + REST API + one endpoint agent.

Used by the integration tests, the benchmark experiments, and the
``fedfaas cluster up`` command.  Everything except the node managers runs
in this process; managers are spawned as subprocesses by the agent's
provider.
"""
from __future__ import annotations

import socket
import tempfile
import time
from dataclasses import dataclass, field
from typing import Optional

import requests

from fedfaas.agent.config import AgentConfig, RoutingConfig
from fedfaas.agent.runtime import EndpointAgent
from fedfaas.agent.strategy import ProviderConfig, ProviderKind
from fedfaas.node.containers import ContainerSpec
from fedfaas.service.app import serve
from fedfaas.service.config import ServiceConfig
from fedfaas.service.core import ServiceCore

DEFAULT_TOKEN = "local-dev-token"


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@dataclass
class ClusterOptions:
    nodes_per_block: int = 1
    workers_per_node: int = 2
    min_blocks: int = 1
    max_blocks: int = 1
    batching: bool = True
    prefetch_count: int = 4
    policy: str = "warming_aware"
    rng_seed: int = 7
    containers: list[ContainerSpec] = field(default_factory=list)
    provider_kind: ProviderKind = ProviderKind.LOCAL_PROCESS
    queue_delay: float = 0.0
    kv_enabled: bool = True
    manager_heartbeat_period: float = 2.0
    ad_coalesce: float = 1.0
    reconcile_interval: float = 0.25
    scale_up_threshold: int = 10
    max_idle: float = 120.0
    strategy_interval: float = 1.0
    service_heartbeat_period: float = 30.0


class LocalCluster:
    """Owns a service, its REST front end, and one agent."""

    def __init__(self, workdir: Optional[str] = None, options: Optional[ClusterOptions] = None):
        self.opts = options or ClusterOptions()
        self.workdir = workdir or tempfile.mkdtemp(prefix="fedfaas-cluster-")
        self.http_port = free_port()
        self.core: Optional[ServiceCore] = None
        self.agent: Optional[EndpointAgent] = None
        self._server = None

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.http_port}"

    @property
    def token(self) -> str:
        return DEFAULT_TOKEN

    def start(self, wait_managers: bool = True) -> "LocalCluster":
        cfg = ServiceConfig.single_user(
            DEFAULT_TOKEN,
            host="127.0.0.1",
            port=self.http_port,
            heartbeat_period=self.opts.service_heartbeat_period,
        )
        self.core = ServiceCore(cfg).start()
        self._server = serve(self.core, "127.0.0.1", self.http_port, in_thread=True)
        self._wait_http()
        o = self.opts
        agent_cfg = AgentConfig(
            service_url=self.url,
            token=DEFAULT_TOKEN,
            name="local-endpoint",
            workdir=f"{self.workdir}/agent",
            provider=ProviderConfig(
                provider_kind=o.provider_kind,
                min_blocks=o.min_blocks,
                max_blocks=o.max_blocks,
                nodes_per_block=o.nodes_per_block,
                workers_per_node=o.workers_per_node,
                max_idle=o.max_idle,
                scale_up_threshold=o.scale_up_threshold,
                queue_delay=o.queue_delay,
            ),
            routing=RoutingConfig(
                prefetch_count=o.prefetch_count,
                manager_heartbeat_period=o.manager_heartbeat_period,
                rng_seed=o.rng_seed,
                batching=o.batching,
                policy=o.policy,
                ad_coalesce=o.ad_coalesce,
                reconcile_interval=o.reconcile_interval,
                strategy_interval=o.strategy_interval,
            ),
            containers=list(o.containers),
            kv_enabled=o.kv_enabled,
        )
        self.agent = EndpointAgent(agent_cfg).start()
        if wait_managers:
            self.wait_for_managers(o.min_blocks * o.nodes_per_block)
        return self

    def _wait_http(self, timeout: float = 15.0) -> None:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            try:
                requests.get(f"{self.url}/docs", timeout=1)
                return
            except requests.RequestException:
                time.sleep(0.05)
        raise RuntimeError("REST API did not come up")

    def wait_for_managers(self, count: int, timeout: float = 30.0) -> None:
        assert self.agent is not None
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            stats = self.agent.stats()
            if len(stats["managers"]) >= count:
                return
            time.sleep(0.05)
        raise RuntimeError(
            f"only {len(self.agent.stats()['managers'])}/{count} managers registered"
        )

    @property
    def endpoint_id(self) -> str:
        assert self.agent is not None and self.agent.endpoint_id is not None
        return self.agent.endpoint_id

    def stop(self) -> None:
        if self.agent is not None:
            self.agent.stop(drain=True)
        if self._server is not None:
            self._server.should_exit = True
        if self.core is not None:
            self.core.stop()

    def __enter__(self) -> "LocalCluster":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
