"""Service configuration, loaded from a TOML file.

Example::

    [service]
    host = "127.0.0.1"
    port = 8700
    forwarder_port = 8701
    payload_limit = 10485760
    heartbeat_period = 30.0
    miss_limit = 2
    retention = 86400.0
    purge_interval = 60.0
    container_types = ["cuda11"]

    [tokens.tok-alice]
    user = "alice"
    scopes = ["register_function", "run", "endpoint_register"]
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from fedfaas.service.auth import AuthToken

DEFAULT_PAYLOAD_LIMIT = 10 * 2**20


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8700
    forwarder_host: str = "127.0.0.1"
    forwarder_port: int = 0  # 0 = ephemeral
    payload_limit: int = DEFAULT_PAYLOAD_LIMIT
    heartbeat_period: float = 30.0
    miss_limit: int = 2
    retention: float = 86400.0
    purge_interval: float = 60.0
    container_types: list[str] = field(default_factory=list)
    tokens: dict[str, AuthToken] = field(default_factory=dict)

    @classmethod
    def single_user(cls, token: str = "dev-token", user: str = "dev", **kw) -> "ServiceConfig":
        """All-scopes single-token config for local clusters and tests."""
        from fedfaas.service.auth import ALL_SCOPES

        return cls(
            tokens={token: AuthToken(token, user, frozenset(ALL_SCOPES))}, **kw
        )


def load_service_config(path: str | Path) -> ServiceConfig:
    raw = tomllib.loads(Path(path).read_text())
    svc = raw.get("service", {})
    tokens = {
        tok: AuthToken(tok, spec["user"], frozenset(spec.get("scopes", [])))
        for tok, spec in raw.get("tokens", {}).items()
    }
    return ServiceConfig(
        host=svc.get("host", "127.0.0.1"),
        port=int(svc.get("port", 8700)),
        forwarder_host=svc.get("forwarder_host", svc.get("host", "127.0.0.1")),
        forwarder_port=int(svc.get("forwarder_port", 0)),
        payload_limit=int(svc.get("payload_limit", DEFAULT_PAYLOAD_LIMIT)),
        heartbeat_period=float(svc.get("heartbeat_period", 30.0)),
        miss_limit=int(svc.get("miss_limit", 2)),
        retention=float(svc.get("retention", 86400.0)),
        purge_interval=float(svc.get("purge_interval", 60.0)),
        container_types=list(svc.get("container_types", [])),
        tokens=tokens,
    )
