"""``fedfaas`` command line: operator commands and the benchmark harness.

Exit codes: 0 on success, 1 on runtime errors (service unreachable,
task failed, experiment error), 2 on user errors (bad arguments, unknown
ids, authorization failures).
"""
from __future__ import annotations

import json
import signal
import sys
import time
from typing import Any, Optional

import click

from fedfaas.bench.client import TOKEN_ENV, ApiClient, ApiError, decode_payload

BUILTINS = ("noop", "echo", "sleep", "stress", "kvput", "kvget", "stage_read")
URL_ENV = "FEDFAAS_URL"


def _client(ctx: click.Context) -> ApiClient:
    url = ctx.obj["url"]
    token = ctx.obj["token"]
    return ApiClient(url, token)


def _fail(exc: Exception) -> None:
    if isinstance(exc, ApiError):
        click.echo(f"error: {exc}", err=True)
        sys.exit(2 if exc.status < 500 else 1)
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _parse_input(raw: Optional[str]) -> Any:
    if raw is None:
        return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # plain text argument (e.g. sleep seconds as decimal text)


def _resolve_function(
    api: ApiClient,
    function: Optional[str],
    function_id: Optional[str],
    container_type: Optional[str],
) -> str:
    """`--function` names a builtin to register on the fly; `--function-id`
    references an already registered function."""
    if function_id:
        return function_id
    if not function:
        raise click.UsageError("one of --function or --function-id is required")
    if function not in BUILTINS:
        raise click.UsageError(
            f"--function expects a builtin ({', '.join(BUILTINS)}); "
            "use --function-id for registered functions"
        )
    return api.register_function(
        function, {"kind": "builtin", "name": function}, container_type=container_type
    )


@click.group()
@click.option("--url", envvar=URL_ENV, default="http://127.0.0.1:8000", show_default=True)
@click.option("--token", envvar=TOKEN_ENV, default=None, help=f"auth token (or ${TOKEN_ENV})")
@click.pass_context
def main(ctx: click.Context, url: str, token: Optional[str]) -> None:
    """Submit and monitor tasks, inspect endpoints, run benchmarks."""
    ctx.ensure_object(dict)
    ctx.obj["url"] = url
    ctx.obj["token"] = token


@main.command("register-function")
@click.option("--name", required=True)
@click.option("--builtin", type=click.Choice(BUILTINS), default=None)
@click.option("--process", "process_cmd", default=None, help="command template to execute")
@click.option("--container-type", default=None)
@click.option("--no-reexecution", is_flag=True, help="forbid re-execution after manager loss")
@click.pass_context
def register_function(
    ctx: click.Context,
    name: str,
    builtin: Optional[str],
    process_cmd: Optional[str],
    container_type: Optional[str],
    no_reexecution: bool,
) -> None:
    """Register a function body; prints the function id."""
    if (builtin is None) == (process_cmd is None):
        raise click.UsageError("exactly one of --builtin or --process is required")
    if builtin:
        body: dict = {"kind": "builtin", "name": builtin}
    else:
        body = {"kind": "process", "command": process_cmd}
    try:
        fid = _client(ctx).register_function(
            name,
            body,
            allow_reexecution=not no_reexecution,
            container_type=container_type,
        )
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    click.echo(fid)


@main.command()
@click.option("--function", default=None, help="builtin name (registered on the fly)")
@click.option("--function-id", default=None)
@click.option("--endpoint", required=True)
@click.option("--input", "input_raw", default=None, help="JSON or plain-text task input")
@click.option("--container-type", default=None)
@click.pass_context
def run(
    ctx: click.Context,
    function: Optional[str],
    function_id: Optional[str],
    endpoint: str,
    input_raw: Optional[str],
    container_type: Optional[str],
) -> None:
    """Submit one task; prints the task id."""
    api = _client(ctx)
    try:
        fid = _resolve_function(api, function, function_id, container_type)
        task_id = api.run(fid, endpoint, _parse_input(input_raw))
    except click.UsageError:
        raise
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    click.echo(task_id)


@main.command()
@click.argument("task_id")
@click.pass_context
def status(ctx: click.Context, task_id: str) -> None:
    """Print the task's current state."""
    try:
        st = _client(ctx).status(task_id)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    click.echo(json.dumps(st, indent=2))


@main.command()
@click.argument("task_id")
@click.option("--timeout", type=float, default=60.0, show_default=True)
@click.pass_context
def result(ctx: click.Context, task_id: str, timeout: float) -> None:
    """Poll until the task finishes; prints the decoded result value."""
    api = _client(ctx)
    try:
        res = api.wait_result(task_id, timeout=timeout)
    except TimeoutError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    if res["status"] != "success":
        click.echo(f"task failed: {res.get('error')}", err=True)
        sys.exit(1)
    click.echo(json.dumps(decode_payload(res["result_b64"]), default=repr))


@main.command("batch-run")
@click.option("--function", default=None)
@click.option("--function-id", default=None)
@click.option("--endpoint", required=True)
@click.option("--args", "input_raw", default=None, help="input for every task")
@click.option("--count", type=int, required=True)
@click.option("--container-type", default=None)
@click.option("--timeout", type=float, default=300.0, show_default=True)
@click.pass_context
def batch_run(
    ctx: click.Context,
    function: Optional[str],
    function_id: Optional[str],
    endpoint: str,
    input_raw: Optional[str],
    count: int,
    container_type: Optional[str],
    timeout: float,
) -> None:
    """Submit a batch, print its task ids, and wait for completion."""
    if count < 1:
        raise click.UsageError("--count must be >= 1")
    api = _client(ctx)
    try:
        fid = _resolve_function(api, function, function_id, container_type)
        value = _parse_input(input_raw)
        rows = api.run_batch(fid, endpoint, [value] * count)
        ids = []
        for row in rows:
            if "task_id" not in row:
                click.echo(f"submission rejected: {row}", err=True)
                sys.exit(1)
            ids.append(row["task_id"])
        for tid in ids:
            click.echo(tid)
        states = api.wait_all(ids, timeout=timeout)
    except click.UsageError:
        raise
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    failed = sum(1 for s in states.values() if s != "success")
    click.echo(f"{len(states) - failed}/{len(states)} succeeded")
    if failed:
        sys.exit(1)


@main.command("endpoint-list")
@click.pass_context
def endpoint_list(ctx: click.Context) -> None:
    """List registered endpoints and their status."""
    try:
        eps = _client(ctx).list_endpoints()
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    for ep in eps:
        click.echo(f"{ep['endpoint_id']}  {ep['status']:<8}  {ep['name']}")


# ---------------------------------------------------------------------------
# cluster


@main.group()
def cluster() -> None:
    """Local single-host clusters for development and CI."""


@cluster.command()
@click.option("--nodes", type=int, default=2, show_default=True)
@click.option("--workers", type=int, default=4, show_default=True, help="workers per node")
@click.option("--port", type=int, default=None, help="REST port (default: random free port)")
@click.option("--batching/--no-batching", default=True, show_default=True)
def up(nodes: int, workers: int, port: Optional[int], batching: bool) -> None:
    """Bootstrap service + one endpoint + managers in this process."""
    from fedfaas.bench.cluster import ClusterOptions, LocalCluster

    opts = ClusterOptions(
        nodes_per_block=nodes, workers_per_node=workers, batching=batching
    )
    cluster = LocalCluster(options=opts)
    if port is not None:
        cluster.http_port = port
    try:
        cluster.start()
    except Exception as exc:  # noqa: BLE001
        click.echo(f"error: cluster failed to start: {exc}", err=True)
        sys.exit(1)
    click.echo(f"service:  {cluster.url}")
    click.echo(f"token:    {cluster.token}")
    click.echo(f"endpoint: {cluster.endpoint_id}")
    click.echo("press Ctrl-C to shut down")
    stop = {"flag": False}

    def _terminate(signum, frame):  # noqa: ANN001
        stop["flag"] = True

    signal.signal(signal.SIGTERM, _terminate)
    signal.signal(signal.SIGINT, _terminate)
    while not stop["flag"]:
        time.sleep(0.2)
    cluster.stop()


# ---------------------------------------------------------------------------
# bench


@main.command()
@click.argument(
    "experiment",
    type=click.Choice(
        ("strong_scaling", "weak_scaling", "routing", "batching", "data_plane", "latency")
    ),
)
@click.option("--m", "m_tasks", type=int, default=None, help="total tasks (or samples)")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--workers", default=None, help="comma-separated worker counts")
@click.option("--per-worker", type=int, default=10, show_default=True)
@click.option("--types", type=int, default=10, show_default=True)
@click.option("--duration", type=float, default=0.0, show_default=True,
              help="task duration in seconds (routing)")
@click.option("--trials", type=int, default=1, show_default=True)
@click.option("--kill-manager-at", type=float, default=None,
              help="chaos: kill one manager N seconds into the run")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV output path")
def bench(
    experiment: str,
    m_tasks: Optional[int],
    seed: int,
    workers: Optional[str],
    per_worker: int,
    types: int,
    duration: float,
    trials: int,
    kill_manager_at: Optional[float],
    out: Optional[str],
) -> None:
    """Run one benchmark experiment and print its summary."""
    from fedfaas.bench import experiments

    defaults = {
        "strong_scaling": 10_000,
        "weak_scaling": 0,  # derived from per_worker × workers
        "routing": 3000,
        "batching": 10_000,
        "latency": 1000,
        "data_plane": 0,
    }
    cfg_kw: dict = {
        "experiment": experiment,
        "M": m_tasks if m_tasks is not None else max(1, defaults[experiment]),
        "per_worker": per_worker,
        "types": types,
        "seed": seed,
        "trials": trials,
        "kill_manager_at": kill_manager_at,
    }
    if workers:
        cfg_kw["workers"] = [int(w) for w in workers.split(",")]
    if duration:
        cfg_kw["args"] = [duration]
    try:
        cfg = experiments.BenchConfig(**cfg_kw)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    try:
        report = experiments.run_experiment(cfg)
    except Exception as exc:  # noqa: BLE001
        click.echo(f"error: experiment failed: {exc}", err=True)
        sys.exit(1)
    if out:
        report.write_csv(out)
        click.echo(f"wrote {len(report.rows)} rows to {out}")
    click.echo(json.dumps(report.summary, indent=2, default=str))


if __name__ == "__main__":
    main()
