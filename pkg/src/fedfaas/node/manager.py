"""Per-node manager: owns worker slots, talks to the agent on one socket.

The manager keeps a small backlog of dispatched tasks, partitions its
slots among container types proportionally to the backlog mix on a
periodic reconcile tick, simulates container cold starts with sampled
delays, and advertises capacity/warm inventory to the agent.  Credit
accounting (``want`` plus the running count of received tasks) lets the
agent keep the pipe full without overrunning idle_workers + prefetch.

Tasks without a container type run directly in a worker with no sandbox
and no cold start.
"""
from __future__ import annotations

import logging
import queue
import random
import socket
import subprocess
import threading
import time
import traceback
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fedfaas.dataplane.kvstore import KvClient, KvHandle
from fedfaas.node.containers import (
    ColdStartProfile,
    ContainerSpec,
    SlotState,
    WorkerSlot,
    allocate_containers,
    expire_idle,
    reconcile_slots,
)
from fedfaas.node.executor import ExecutionContext, execute
from fedfaas.protocol import messages
from fedfaas.protocol.codecs import Envelope, deserialize, serialize
from fedfaas.protocol.framing import FrameDecoder, FramingError, MessageType, WireMessage, frame_encode

log = logging.getLogger("fedfaas.node")


@dataclass
class TaskInHand:
    task_id: str
    container_type: Optional[str]
    body_env: bytes
    input_env: bytes
    received_ns: int


@dataclass
class SlotRuntime:
    slot: WorkerSlot
    inbox: "queue.Queue[tuple[str, object]]" = field(default_factory=queue.Queue)
    ready_at: float = 0.0  # monotonic seconds; cold start completes then
    sandbox: Optional[subprocess.Popen] = None
    workdir: Optional[Path] = None


class ManagerRuntime:
    def __init__(
        self,
        agent_host: str,
        agent_port: int,
        node_id: str,
        workers: int,
        secret: str,
        manager_id: Optional[str] = None,
        block_id: str = "block-0",
        workdir: Optional[str] = None,
    ) -> None:
        import uuid

        self.agent_addr = (agent_host, agent_port)
        self.node_id = node_id
        self.manager_id = manager_id or str(uuid.uuid4())
        self.block_id = block_id
        self.capacity = workers
        self.secret = secret
        self.base_dir = Path(workdir or f"/tmp/fedfaas-node/{self.node_id}")

        self.lock = threading.RLock()
        self.slots = [SlotRuntime(WorkerSlot(i)) for i in range(workers)]
        self.backlog: deque[TaskInHand] = deque()
        self.specs: dict[str, ContainerSpec] = {}
        self.kv_handle: Optional[KvHandle] = None
        self.batching = True
        self.prefetch = 0
        self.heartbeat_period = 2.0
        self.reconcile_interval = 0.25
        self.ad_coalesce = 1.0
        self.rng = random.Random()

        self.received_total = 0
        self.cold_starts = 0
        self._last_ad_sent = 0.0
        self._last_want = -1
        self._draining = False
        self._stop = threading.Event()
        self._sock: Optional[socket.socket] = None
        self._send_lock = threading.Lock()
        self._unacked_results: dict[str, WireMessage] = {}

    # -- wire ----------------------------------------------------------
    def _send(self, msg: WireMessage) -> None:
        with self._send_lock:
            if self._sock is None:
                raise ConnectionError("not connected")
            self._sock.sendall(frame_encode(msg))

    def connect(self) -> None:
        sock = socket.create_connection(self.agent_addr, timeout=10.0)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        self._send(
            WireMessage.build(
                MessageType.REGISTER_MANAGER,
                {
                    "manager_id": self.manager_id,
                    "node_id": self.node_id,
                    "block_id": self.block_id,
                    "capacity": self.capacity,
                    "secret": self.secret,
                },
            )
        )
        decoder = FrameDecoder()
        sock.settimeout(10.0)
        header = None
        self._pending_msgs: list[WireMessage] = []
        while header is None:
            data = sock.recv(65536)
            if not data:
                raise ConnectionError("agent closed during registration")
            for msg in decoder.feed(data):
                if header is None and msg.type is MessageType.ACK:
                    header, _ = msg.unpack()
                else:
                    self._pending_msgs.append(msg)
        if not header.get("ok"):
            raise ConnectionError(f"agent rejected registration: {header.get('error')}")
        sock.settimeout(None)
        self._decoder = decoder
        self._apply_registration(header)

    def _apply_registration(self, header: dict) -> None:
        self.batching = bool(header.get("batching", True))
        self.prefetch = int(header.get("prefetch", 0))
        self.heartbeat_period = float(header.get("heartbeat_period", 2.0))
        self.reconcile_interval = float(header.get("reconcile_interval", 0.25))
        self.ad_coalesce = float(header.get("ad_coalesce", 1.0))
        self.rng = random.Random(int(header.get("rng_seed", 0)))
        kv = header.get("kv")
        if kv:
            self.kv_handle = KvHandle(kv["host"], kv["port"], kv.get("namespace", ""))
        for spec in header.get("containers", []):
            profile = ColdStartProfile(
                spec.get("cold_start_min", 0.0),
                spec.get("cold_start_mean", 0.0),
                spec.get("cold_start_max", 0.0),
            )
            self.specs[spec["type_id"]] = ContainerSpec(
                type_id=spec["type_id"],
                cold_start=profile,
                warm_idle_timeout=spec.get("warm_idle_timeout", 600.0),
                launch_template=spec.get("launch_template"),
            )

    # -- main loops ----------------------------------------------------
    def run(self) -> None:
        self.connect()
        self.base_dir.mkdir(parents=True, exist_ok=True)
        for sr in self.slots:
            sr.workdir = self.base_dir / f"slot-{sr.slot.slot_id}"
            sr.workdir.mkdir(parents=True, exist_ok=True)
            threading.Thread(
                target=self._worker_loop, args=(sr,), daemon=True,
                name=f"worker-{sr.slot.slot_id}",
            ).start()
        threading.Thread(target=self._heartbeat_loop, daemon=True, name="mgr-hb").start()
        threading.Thread(target=self._reconcile_loop, daemon=True, name="mgr-reconcile").start()
        self._advertise(force=True)
        self._read_loop()

    def _read_loop(self) -> None:
        sock = self._sock
        assert sock is not None
        try:
            for msg in self._pending_msgs:
                self._handle(msg)
            self._pending_msgs = []
            while not self._stop.is_set():
                data = sock.recv(1 << 20)
                if not data:
                    break
                for msg in self._decoder.feed(data):
                    self._handle(msg)
        except (OSError, FramingError):
            pass
        self._stop.set()

    def _handle(self, msg: WireMessage) -> None:
        if msg.type is MessageType.TASK_DISPATCH:
            header, body_env, input_env = messages.parse_task_dispatch(msg)
            task = TaskInHand(
                task_id=header["task_id"],
                container_type=header.get("container_type"),
                body_env=body_env,
                input_env=input_env,
                received_ns=time.monotonic_ns(),
            )
            with self.lock:
                self.received_total += 1
                self.backlog.append(task)
            self._send(messages.ack(task.task_id))
            self._assign_ready()
        elif msg.type is MessageType.ACK:
            header, _ = msg.unpack()
            self._unacked_results.pop(header.get("task_id", ""), None)
        elif msg.type is MessageType.HEARTBEAT:
            pass
        elif msg.type is MessageType.DRAIN:
            threading.Thread(target=self._drain, daemon=True, name="mgr-drain").start()

    def _drain(self) -> None:
        self._draining = True
        while True:
            with self.lock:
                busy = any(sr.slot.state is SlotState.BUSY for sr in self.slots)
                if not self.backlog and not busy and not self._unacked_results:
                    break
            self._assign_ready()
            time.sleep(0.05)
        log.info("manager %s drained; exiting", self.manager_id)
        self._stop.set()
        if self._sock is not None:
            try:
                # shutdown (not just close) so the blocked read loop wakes
                # and the agent sees the FIN immediately
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._sock.close()
            except OSError:
                pass

    def _heartbeat_loop(self) -> None:
        while not self._stop.wait(self.heartbeat_period):
            try:
                self._send(messages.heartbeat(self.manager_id))
            except (ConnectionError, OSError):
                return

    def _reconcile_loop(self) -> None:
        while not self._stop.wait(self.reconcile_interval):
            try:
                self._reconcile()
                self._assign_ready()
                self._advertise()
            except (ConnectionError, OSError):
                return

    # -- container management -----------------------------------------
    def _effective_state(self, sr: SlotRuntime, now: float) -> SlotState:
        if sr.slot.state is SlotState.COLD_STARTING and now >= sr.ready_at:
            sr.slot.state = SlotState.WARM_IDLE
            sr.slot.last_used = time.monotonic_ns()
        return sr.slot.state

    def _reconcile(self) -> None:
        now = time.monotonic()
        with self.lock:
            mix: dict[str, int] = {}
            for task in self.backlog:
                if task.container_type is not None:
                    mix[task.container_type] = mix.get(task.container_type, 0) + 1
            for sr in self.slots:
                self._effective_state(sr, now)
            now_ns = time.monotonic_ns()
            for action in expire_idle(
                [sr.slot for sr in self.slots], self.specs, now_ns
            ):
                self._stop_container(self.slots[action.slot_id])
            if not mix:
                return
            target = allocate_containers(mix, self.capacity)
            actions = reconcile_slots(target, [sr.slot for sr in self.slots])
            for action in actions:
                sr = self.slots[action.slot_id]
                if action.op == "stop":
                    self._stop_container(sr)
                else:
                    self._start_container(sr, action.container_type)

    def _start_container(self, sr: SlotRuntime, type_id: str) -> None:
        spec = self.specs.get(type_id)
        delay = spec.cold_start.sample(self.rng) if spec else 0.0
        sr.slot.state = SlotState.COLD_STARTING
        sr.slot.container_type = type_id
        sr.ready_at = time.monotonic() + delay
        self.cold_starts += 1
        if spec and spec.launch_template:
            try:
                sr.sandbox = subprocess.Popen(
                    spec.launch_template.split(), cwd=sr.workdir,
                    stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
                )
            except OSError as exc:
                log.error("sandbox launch failed for %s: %s", type_id, exc)
                sr.slot.state = SlotState.EMPTY
                sr.slot.container_type = None
                self.cold_starts -= 1

    def _stop_container(self, sr: SlotRuntime) -> None:
        if sr.sandbox is not None:
            sr.sandbox.terminate()
            sr.sandbox = None
        sr.slot.state = SlotState.EMPTY
        sr.slot.container_type = None

    # -- task assignment ----------------------------------------------
    def _assign_ready(self) -> None:
        with self.lock:
            now = time.monotonic()
            leftover: deque[TaskInHand] = deque()
            while self.backlog:
                task = self.backlog.popleft()
                sr = self._pick_slot(task, now)
                if sr is None:
                    leftover.append(task)
                    continue
                sr.slot.state = SlotState.BUSY
                sr.slot.current_task = task.task_id
                sr.inbox.put(("task", task))
            self.backlog = leftover + self.backlog

    def _pick_slot(self, task: TaskInHand, now: float) -> Optional[SlotRuntime]:
        if task.container_type is None:
            # sandbox-less execution; prefer slots with no container so warm
            # containers stay available for typed tasks
            best = None
            for sr in self.slots:
                state = self._effective_state(sr, now)
                if state is SlotState.EMPTY:
                    return sr
                if state is SlotState.WARM_IDLE and best is None:
                    best = sr
            return best
        warm = None
        starting = None
        for sr in self.slots:
            if sr.slot.container_type != task.container_type:
                continue
            state = self._effective_state(sr, now)
            if state is SlotState.WARM_IDLE:
                warm = sr
                break
            if state is SlotState.COLD_STARTING and starting is None:
                starting = sr
        # a task may ride a cold-starting container; otherwise it waits for
        # the next reconcile to start one
        return warm or starting

    # -- worker --------------------------------------------------------
    def _worker_loop(self, sr: SlotRuntime) -> None:
        kv = KvClient(self.kv_handle) if self.kv_handle else None
        ctx = ExecutionContext(workdir=sr.workdir, kv=kv)
        had_container = False
        while not self._stop.is_set():
            try:
                kind, payload = sr.inbox.get(timeout=0.5)
            except queue.Empty:
                continue
            if kind != "task":
                continue
            task: TaskInHand = payload
            wait = sr.ready_at - time.monotonic()
            if wait > 0 and task.container_type is not None:
                time.sleep(wait)  # cold start completes
            t0 = time.monotonic_ns()
            success, error, result_env, staging_ns = self._execute(task, ctx)
            t_w = time.monotonic_ns() - t0 - staging_ns
            msg = messages.task_result(
                task_id=task.task_id,
                success=success,
                error=error,
                t_w_ns=max(0, t_w),
                staging_ns=staging_ns,
                result_env=result_env,
            )
            with self.lock:
                sr.slot.current_task = None
                sr.slot.last_used = time.monotonic_ns()
                if task.container_type is not None:
                    sr.slot.state = SlotState.WARM_IDLE
                else:
                    sr.slot.state = SlotState.EMPTY
                self._unacked_results[task.task_id] = msg
            try:
                self._send(msg)
            except (ConnectionError, OSError):
                return
            self._advertise()

    def _execute(self, task: TaskInHand, ctx: ExecutionContext):
        staging_ns = 0
        try:
            body = deserialize(Envelope.from_bytes(task.body_env))
            value = deserialize(Envelope.from_bytes(task.input_env))
            outcome = execute(body, value, ctx)
            staging_ns = int(outcome.staging_s * 1e9)
            result_env = serialize(outcome.value, routing_tag=task.task_id.encode())
            return True, None, result_env.to_bytes(), staging_ns
        except Exception:  # noqa: BLE001 - any task failure becomes a result
            return False, traceback.format_exc(limit=8), b"", staging_ns

    # -- advertising ---------------------------------------------------
    def _compute_ad(self) -> dict:
        now = time.monotonic()
        with self.lock:
            idle = 0
            inventory: dict[str, list[int]] = {}
            for sr in self.slots:
                state = self._effective_state(sr, now)
                if state is not SlotState.BUSY:
                    idle += 1
                ctype = sr.slot.container_type
                if ctype is not None and state is not SlotState.EMPTY:
                    warm, idle_warm = inventory.get(ctype, [0, 0])
                    warm += 1
                    if state is SlotState.WARM_IDLE:
                        idle_warm += 1
                    inventory[ctype] = [warm, idle_warm]
            backlog = len(self.backlog)
            if self._draining:
                want = 0
            elif self.batching:
                want = max(0, idle + self.prefetch - backlog)
            else:
                busy = self.capacity - idle
                want = 1 if (backlog == 0 and busy == 0) else 0
            return {
                "manager_id": self.manager_id,
                "idle_workers": idle,
                "warm_inventory": inventory,
                "want": want,
                "received_total": self.received_total,
                "cold_starts": self.cold_starts,
            }

    def _advertise(self, force: bool = False) -> None:
        header = self._compute_ad()
        now = time.monotonic()
        # immediate budget-opening sends are part of the batching
        # optimization; without it the manager requests work strictly at
        # the coalescing cadence, one task per request
        opening = self.batching and header["want"] > self._last_want
        if not (force or opening or now - self._last_ad_sent >= self.ad_coalesce):
            return
        self._last_ad_sent = now
        self._last_want = header["want"]
        try:
            self._send(WireMessage.build(MessageType.ADVERTISEMENT, header))
        except (ConnectionError, OSError):
            pass
