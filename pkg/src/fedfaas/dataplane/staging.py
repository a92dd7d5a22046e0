"""Inter-endpoint data transfer by reference with pre/post staging.

Only references (never payload bytes) traverse the control service.  The
worker materializes stage_in references into its working directory before
execution and publishes stage_out references afterwards.  Two adapters
are in scope: local-filesystem copy and HTTP fetch.
"""
from __future__ import annotations

import enum
import shutil
import time
import urllib.request
from dataclasses import dataclass
from pathlib import Path


class StageFailure(Exception):
    pass


class Direction(str, enum.Enum):
    STAGE_IN = "stage_in"
    STAGE_OUT = "stage_out"


@dataclass(frozen=True)
class TransferReference:
    """Opaque pointer to data at some store endpoint.

    ``store_endpoint`` is either a local filesystem root, an http(s) URL
    prefix, or an endpoint UUID resolved by deployment config.
    """

    store_endpoint: str
    path: str
    direction: Direction = Direction.STAGE_IN

    def __post_init__(self) -> None:
        if not self.path:
            raise ValueError("path must be nonempty")

    @property
    def is_http(self) -> bool:
        return self.store_endpoint.startswith(("http://", "https://"))

    def to_json(self) -> dict:
        return {
            "store_endpoint": self.store_endpoint,
            "path": self.path,
            "direction": self.direction.value,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "TransferReference":
        return cls(raw["store_endpoint"], raw["path"], Direction(raw["direction"]))


def _fetch(ref: TransferReference, dest: Path) -> None:
    if ref.is_http:
        url = ref.store_endpoint.rstrip("/") + "/" + ref.path.lstrip("/")
        try:
            with urllib.request.urlopen(url, timeout=60) as resp:
                dest.write_bytes(resp.read())
        except OSError as exc:
            raise StageFailure(f"http fetch {url}: {exc}") from exc
    else:
        src = Path(ref.store_endpoint) / ref.path
        try:
            shutil.copyfile(src, dest)
        except OSError as exc:
            raise StageFailure(f"copy {src}: {exc}") from exc


def stage_in(refs: list[TransferReference], workdir: str | Path) -> float:
    """Materialize stage_in references in the workdir. Returns seconds spent."""
    start = time.monotonic()
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    for ref in refs:
        if ref.direction is not Direction.STAGE_IN:
            continue
        _fetch(ref, workdir / Path(ref.path).name)
    return time.monotonic() - start


def stage_out(refs: list[TransferReference], workdir: str | Path) -> float:
    """Publish stage_out references from the workdir. Returns seconds spent."""
    start = time.monotonic()
    workdir = Path(workdir)
    for ref in refs:
        if ref.direction is not Direction.STAGE_OUT:
            continue
        if ref.is_http:
            raise StageFailure("http adapter is fetch-only")
        src = workdir / Path(ref.path).name
        dest = Path(ref.store_endpoint) / ref.path
        try:
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src, dest)
        except OSError as exc:
            raise StageFailure(f"publish {dest}: {exc}") from exc
    return time.monotonic() - start
