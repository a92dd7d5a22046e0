"""node-runtime entry point: launch one manager against an agent."""
from __future__ import annotations

import argparse
import logging
import sys


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="node-runtime", description="per-node manager process"
    )
    parser.add_argument("--agent", required=True, help="agent address host:port")
    parser.add_argument("--node-id", required=True)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--secret", required=True)
    parser.add_argument("--manager-id", default=None)
    parser.add_argument("--block-id", default="block-0")
    parser.add_argument("--workdir", default=None)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    host, _, port = args.agent.rpartition(":")
    from fedfaas.node.manager import ManagerRuntime

    runtime = ManagerRuntime(
        agent_host=host or "127.0.0.1",
        agent_port=int(port),
        node_id=args.node_id,
        workers=args.workers,
        secret=args.secret,
        manager_id=args.manager_id,
        block_id=args.block_id,
        workdir=args.workdir,
    )
    try:
        runtime.run()
    except ConnectionError as exc:
        print(f"node-runtime: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
