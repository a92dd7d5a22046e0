"""``agent`` command line: start, status, drain."""
from __future__ import annotations

import json
import logging
import os
import signal
import sys
import time
from pathlib import Path

import click

from fedfaas.agent.config import load_agent_config


def _state_path(config: str) -> Path:
    cfg = load_agent_config(config)
    return Path(cfg.workdir) / "state.json"


@click.group()
def main() -> None:
    """Manage a fedfaas endpoint agent."""


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--verbose", is_flag=True)
def start(config: str, verbose: bool) -> None:
    """Run the endpoint agent in the foreground."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    from fedfaas.agent.runtime import EndpointAgent

    cfg = load_agent_config(config)
    agent = EndpointAgent(cfg)
    try:
        agent.start()
    except Exception as exc:
        click.echo(f"error: failed to start agent: {exc}", err=True)
        sys.exit(1)

    stop = {"flag": False}

    def _terminate(signum, frame):  # noqa: ANN001
        stop["flag"] = True

    signal.signal(signal.SIGTERM, _terminate)
    signal.signal(signal.SIGINT, _terminate)
    click.echo(f"agent running: endpoint_id={agent.endpoint_id}")
    while not stop["flag"]:
        time.sleep(0.2)
    click.echo("draining and shutting down")
    agent.stop(drain=True)


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
def status(config: str) -> None:
    """Print the agent's last published state."""
    path = _state_path(config)
    if not path.exists():
        click.echo("agent state not found (is the agent running?)", err=True)
        sys.exit(1)
    click.echo(path.read_text())


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
def drain(config: str) -> None:
    """Ask a running agent to drain its managers and exit."""
    path = _state_path(config)
    if not path.exists():
        click.echo("agent state not found (is the agent running?)", err=True)
        sys.exit(1)
    state = json.loads(path.read_text())
    pid = state.get("pid")
    if not pid:
        click.echo("state file has no pid", err=True)
        sys.exit(1)
    try:
        os.kill(pid, signal.SIGTERM)
    except ProcessLookupError:
        click.echo(f"no process with pid {pid}", err=True)
        sys.exit(1)
    click.echo(f"sent drain signal to agent pid {pid}")


if __name__ == "__main__":
    main()
