"""Endpoint agent runtime.

Registers with the control service, keeps the forwarder channel alive,
accepts manager connections, routes tasks with warming-aware scheduling
under credit-based flow control, detects lost managers, and scales blocks
through the provider interface on a periodic strategy tick.

Flow control: a manager's advertisement carries ``want`` (how many more
tasks it can absorb, honoring idle + prefetch and batching mode) plus the
count of dispatches it has seen.  Because the socket preserves order, the
agent can charge every dispatch sent since that advertisement against the
credit and refund one credit per completed task, keeping managers full
without ever exceeding idle_workers + prefetch at dispatch time.
"""
from __future__ import annotations

import json
import logging
import random
import secrets as pysecrets
import socket
import threading
import time
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests

from fedfaas.agent.config import AgentConfig
from fedfaas.agent.providers import ProviderFailure, make_provider
from fedfaas.agent.routing import ManagerAdvertisement, NoManagers, RouteReason, route_task
from fedfaas.agent.strategy import ScaleAction, StrategySnapshot, strategy_tick
from fedfaas.dataplane.kvstore import KvServer
from fedfaas.protocol import messages
from fedfaas.protocol.framing import FrameDecoder, FramingError, MessageType, WireMessage, frame_encode

log = logging.getLogger("fedfaas.agent")

_ANY = "__any__"


@dataclass
class TaskEntry:
    task_id: str
    function_id: str
    container_type: Optional[str]
    allow_reexecution: bool
    attempts: int
    body_env: bytes
    input_env: bytes
    received_ns: int
    # set when the task is first held back waiting for warm capacity; the
    # wait is abandoned once it has cost more than a cold start would
    held_since_ns: Optional[int] = None


class ManagerLink:
    def __init__(self, sock: socket.socket, header: dict) -> None:
        self.sock = sock
        self.send_lock = threading.Lock()
        self.manager_id: str = header["manager_id"]
        self.node_id: str = header.get("node_id", "")
        self.block_id: str = header.get("block_id", "block-0")
        self.capacity: int = int(header.get("capacity", 1))
        self.last_heartbeat_ns = time.monotonic_ns()
        self.idle_workers = 0
        self.warm_inventory: dict[str, tuple[int, int]] = {}
        self.cold_starts = 0
        self.want_ad = 0
        self.received_ad = 0
        self.sent_total = 0
        self.results_total = 0
        self.results_at_ad = 0
        self.outstanding: "OrderedDict[str, TaskEntry]" = OrderedDict()
        self.draining = False
        self.closed = False
        self.refund_credits = True  # batching: completed tasks free credit

    def budget(self) -> int:
        unseen = self.sent_total - self.received_ad
        freed = (self.results_total - self.results_at_ad) if self.refund_credits else 0
        return max(0, self.want_ad + freed - unseen)

    def advertisement(self) -> ManagerAdvertisement:
        return ManagerAdvertisement(
            manager_id=self.manager_id,
            node_id=self.node_id,
            capacity=self.capacity,
            idle_workers=self.idle_workers,
            warm_inventory=dict(self.warm_inventory),
        )

    def send(self, msg: WireMessage) -> bool:
        with self.send_lock:
            try:
                self.sock.sendall(frame_encode(msg))
                return True
            except OSError:
                return False


class EndpointAgent:
    def __init__(self, cfg: AgentConfig) -> None:
        self.cfg = cfg
        self.workdir = Path(cfg.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.rng = random.Random(cfg.routing.rng_seed)

        self.lock = threading.RLock()
        self.queues: dict[str, deque[TaskEntry]] = {}
        self.entries: dict[str, TaskEntry] = {}
        self.managers: dict[str, ManagerLink] = {}
        self.pending_results: "OrderedDict[str, WireMessage]" = OrderedDict()
        self.block_last_active: dict[str, int] = {}
        self.block_managers: dict[str, set[str]] = {}

        self.endpoint_id: Optional[str] = cfg.endpoint_id
        self.manager_secret = pysecrets.token_hex(16)
        self.kv_server: Optional[KvServer] = None
        self.provider = None
        self.warm_hits = 0
        self.random_fallbacks = 0
        self.completed = 0
        self.requeued_after_loss = 0
        self.service_heartbeat_period = cfg.routing.heartbeat_period

        self._fwd_sock: Optional[socket.socket] = None
        self._fwd_lock = threading.Lock()
        self._fwd_connected = threading.Event()
        self._listener: Optional[socket.socket] = None
        self.manager_listen_addr: Optional[tuple[str, int]] = None
        self._stop = threading.Event()
        self._manager_counter = 0

    # -- lifecycle -----------------------------------------------------
    def start(self) -> "EndpointAgent":
        if self.cfg.kv_enabled:
            self.kv_server = KvServer().start()
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(("127.0.0.1", 0))
        listener.listen(128)
        self._listener = listener
        self.manager_listen_addr = listener.getsockname()[:2]
        self._register_with_service()
        self.provider = make_provider(
            self.cfg.provider, self.manager_listen_addr, self.manager_secret,
            str(self.workdir / "blocks"),
        )
        for _ in range(self.cfg.provider.min_blocks):
            self.provider.submit_block(self.cfg.provider)
        threading.Thread(target=self._accept_managers, daemon=True, name="agent-accept").start()
        threading.Thread(target=self._forwarder_channel, daemon=True, name="agent-fwd").start()
        threading.Thread(target=self._loss_detector, daemon=True, name="agent-loss").start()
        threading.Thread(target=self._strategy_loop, daemon=True, name="agent-strategy").start()
        return self

    def stop(self, drain: bool = True) -> None:
        if drain:
            self.drain_managers()
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._fwd_lock:
            if self._fwd_sock is not None:
                try:
                    self._fwd_sock.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
        if self.provider is not None:
            self.provider.shutdown()
        if self.kv_server is not None:
            self.kv_server.stop()

    def drain_managers(self, timeout: float = 30.0) -> None:
        with self.lock:
            links = list(self.managers.values())
            for link in links:
                link.draining = True
        for link in links:
            link.send(WireMessage.build(MessageType.DRAIN, {}))
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self.lock:
                if not self.managers:
                    return
            time.sleep(0.05)

    # -- service side --------------------------------------------------
    def _register_with_service(self) -> None:
        resp = requests.post(
            f"{self.cfg.service_url}/endpoints",
            json={
                "name": self.cfg.name,
                "endpoint_id": self.endpoint_id,
                "container_types": [c.type_id for c in self.cfg.containers],
            },
            headers={"Authorization": f"Bearer {self.cfg.token}"},
            timeout=30,
        )
        resp.raise_for_status()
        data = resp.json()
        self.endpoint_id = data["endpoint_id"]
        self._fwd_addr = (data["forwarder_host"], data["forwarder_port"])
        self._fwd_secret = data["connection_secret"]

    def _forwarder_channel(self) -> None:
        while not self._stop.is_set():
            try:
                self._run_forwarder_connection()
            except (OSError, FramingError, requests.RequestException) as exc:
                log.debug("forwarder channel error: %s", exc)
            self._fwd_connected.clear()
            if self._stop.wait(0.5):
                return
            try:
                self._register_with_service()  # fresh secret after a crash
            except requests.RequestException:
                continue

    def _run_forwarder_connection(self) -> None:
        sock = socket.create_connection(self._fwd_addr, timeout=10.0)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.sendall(frame_encode(WireMessage.build(
            MessageType.REGISTER_ENDPOINT,
            {"endpoint_id": self.endpoint_id, "secret": self._fwd_secret},
        )))
        decoder = FrameDecoder()
        sock.settimeout(10.0)
        header = None
        leftovers: list[WireMessage] = []
        while header is None:
            data = sock.recv(65536)
            if not data:
                raise ConnectionError("forwarder closed during handshake")
            for msg in decoder.feed(data):
                if header is None and msg.type is MessageType.ACK:
                    header, _ = msg.unpack()
                else:
                    # dispatches may ride the same read as the handshake ack
                    leftovers.append(msg)
        if not header.get("ok"):
            raise ConnectionError(f"forwarder rejected: {header.get('error')}")
        self.service_heartbeat_period = float(
            header.get("heartbeat_period", self.cfg.routing.heartbeat_period)
        )
        sock.settimeout(None)
        with self._fwd_lock:
            self._fwd_sock = sock
        self._fwd_connected.set()
        log.info("connected to forwarder at %s:%s", *self._fwd_addr)
        threading.Thread(
            target=self._service_heartbeats, args=(sock,), daemon=True, name="agent-hb"
        ).start()
        self._resend_pending_results()
        try:
            for msg in leftovers:
                self._handle_service_msg(msg)
            while not self._stop.is_set():
                data = sock.recv(1 << 20)
                if not data:
                    break
                for msg in decoder.feed(data):
                    self._handle_service_msg(msg)
        finally:
            with self._fwd_lock:
                if self._fwd_sock is sock:
                    self._fwd_sock = None
            try:
                sock.close()
            except OSError:
                pass

    def _service_heartbeats(self, sock: socket.socket) -> None:
        # one heartbeat right away so the endpoint shows online on connect
        while True:
            try:
                with self._fwd_lock:
                    if self._fwd_sock is not sock:
                        return
                    sock.sendall(frame_encode(messages.heartbeat(self.endpoint_id or "")))
            except OSError:
                return
            if self._stop.wait(self.service_heartbeat_period):
                return

    def _send_to_forwarder(self, msg: WireMessage) -> bool:
        with self._fwd_lock:
            if self._fwd_sock is None:
                return False
            try:
                self._fwd_sock.sendall(frame_encode(msg))
                return True
            except OSError:
                return False

    def _resend_pending_results(self) -> None:
        with self.lock:
            cached = list(self.pending_results.values())
        for msg in cached:
            if not self._send_to_forwarder(msg):
                return

    def _handle_service_msg(self, msg: WireMessage) -> None:
        if msg.type is MessageType.TASK_DISPATCH:
            header, body_env, input_env = messages.parse_task_dispatch(msg)
            entry = TaskEntry(
                task_id=header["task_id"],
                function_id=header["function_id"],
                container_type=header.get("container_type"),
                allow_reexecution=bool(header.get("allow_reexecution", True)),
                attempts=int(header.get("attempts", 1)),
                body_env=body_env,
                input_env=input_env,
                received_ns=time.monotonic_ns(),
            )
            self._send_to_forwarder(messages.ack(entry.task_id))
            with self.lock:
                if entry.task_id in self.entries:
                    return  # duplicate dispatch (reconnect race)
                self.entries[entry.task_id] = entry
                key = entry.container_type or _ANY
                self.queues.setdefault(key, deque()).append(entry)
            self._pump()
        elif msg.type is MessageType.ACK:
            header, _ = msg.unpack()
            with self.lock:
                self.pending_results.pop(header.get("task_id", ""), None)
        elif msg.type is MessageType.HEARTBEAT:
            pass

    # -- manager side --------------------------------------------------
    def _accept_managers(self) -> None:
        assert self._listener is not None
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._manager_session, args=(conn,), daemon=True, name="agent-mgr"
            ).start()

    def _manager_session(self, conn: socket.socket) -> None:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        conn.settimeout(10.0)
        decoder = FrameDecoder()
        header = None
        leftovers: list[WireMessage] = []
        try:
            while header is None:
                data = conn.recv(65536)
                if not data:
                    conn.close()
                    return
                for msg in decoder.feed(data):
                    if header is None and msg.type is MessageType.REGISTER_MANAGER:
                        header, _ = msg.unpack()
                    else:
                        leftovers.append(msg)
            if header.get("secret") != self.manager_secret:
                conn.sendall(frame_encode(WireMessage.build(
                    MessageType.ACK, {"ok": False, "error": "bad secret"})))
                conn.close()
                return
            link = ManagerLink(conn, header)
            link.refund_credits = self.cfg.routing.batching
            with self.lock:
                self._manager_counter += 1
                index = self._manager_counter
                self.managers[link.manager_id] = link
                self.block_managers.setdefault(link.block_id, set()).add(link.manager_id)
                self.block_last_active[link.block_id] = time.monotonic_ns()
            conn.sendall(frame_encode(WireMessage.build(MessageType.ACK, {
                "ok": True,
                "batching": self.cfg.routing.batching,
                "prefetch": self.cfg.routing.prefetch_count,
                "heartbeat_period": self.cfg.routing.manager_heartbeat_period,
                "reconcile_interval": self.cfg.routing.reconcile_interval,
                "ad_coalesce": self.cfg.routing.ad_coalesce,
                "rng_seed": self.cfg.routing.rng_seed + index,
                "kv": (
                    {
                        "host": self.kv_server.address[0],
                        "port": self.kv_server.address[1],
                        "namespace": self.endpoint_id or "",
                    }
                    if self.kv_server
                    else None
                ),
                "containers": [
                    {
                        "type_id": c.type_id,
                        "cold_start_min": c.cold_start.min_s,
                        "cold_start_mean": c.cold_start.mean_s,
                        "cold_start_max": c.cold_start.max_s,
                        "warm_idle_timeout": c.warm_idle_timeout,
                        "launch_template": c.launch_template,
                    }
                    for c in self.cfg.containers
                ],
            })))
            conn.settimeout(None)
            log.info("manager %s registered (capacity %d)", link.manager_id, link.capacity)
            for msg in leftovers:
                self._handle_manager_msg(link, msg)
            while not self._stop.is_set():
                data = conn.recv(1 << 20)
                if not data:
                    break
                for msg in decoder.feed(data):
                    self._handle_manager_msg(link, msg)
        except (OSError, FramingError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass
        if header is not None:
            self._manager_gone(header["manager_id"])

    def _handle_manager_msg(self, link: ManagerLink, msg: WireMessage) -> None:
        link.last_heartbeat_ns = time.monotonic_ns()
        if msg.type is MessageType.ADVERTISEMENT:
            header, _ = msg.unpack()
            with self.lock:
                link.idle_workers = int(header.get("idle_workers", 0))
                link.warm_inventory = {
                    t: (v[0], v[1]) for t, v in header.get("warm_inventory", {}).items()
                }
                link.want_ad = int(header.get("want", 0))
                link.received_ad = int(header.get("received_total", 0))
                link.results_at_ad = link.results_total
                link.cold_starts = int(header.get("cold_starts", 0))
            self._pump()
        elif msg.type is MessageType.TASK_RESULT:
            header, env_bytes = messages.parse_task_result(msg)
            task_id = header["task_id"]
            link.send(messages.ack(task_id))
            with self.lock:
                link.results_total += 1
                link.outstanding.pop(task_id, None)
                entry = self.entries.pop(task_id, None)
                self.block_last_active[link.block_id] = time.monotonic_ns()
                if entry is None:
                    return  # duplicate completion
                self.completed += 1
                t_e = (
                    time.monotonic_ns()
                    - entry.received_ns
                    - int(header.get("t_w_ns", 0))
                    - int(header.get("staging_ns", 0))
                )
                out = messages.task_result(
                    task_id=task_id,
                    success=bool(header.get("success")),
                    error=header.get("error"),
                    t_e_ns=max(0, t_e),
                    t_w_ns=int(header.get("t_w_ns", 0)),
                    staging_ns=int(header.get("staging_ns", 0)),
                    result_env=env_bytes,
                    attempts=entry.attempts,
                )
                self.pending_results[task_id] = out
            self._send_to_forwarder(out)
            self._pump()
        elif msg.type is MessageType.HEARTBEAT:
            pass

    def _manager_gone(self, manager_id: str) -> None:
        with self.lock:
            link = self.managers.pop(manager_id, None)
            if link is None:
                return
            link.closed = True
            self.block_managers.get(link.block_id, set()).discard(manager_id)
            lost = list(link.outstanding.values())
            link.outstanding.clear()
        if link.draining:
            if lost:
                log.warning("draining manager %s dropped %d tasks", manager_id, len(lost))
            self._requeue(lost)
            return
        if lost:
            log.info("manager %s lost with %d tasks in flight", manager_id, len(lost))
        self._requeue(lost)

    def _requeue(self, lost: list[TaskEntry]) -> None:
        failed: list[TaskEntry] = []
        with self.lock:
            requeue: dict[str, list[TaskEntry]] = {}
            for entry in lost:
                if not entry.allow_reexecution:
                    failed.append(entry)
                    continue
                entry.attempts += 1
                entry.held_since_ns = None  # fresh patience window on retry
                # restart residency so the reported t_e covers only the
                # attempt that actually completes
                entry.received_ns = time.monotonic_ns()
                self.requeued_after_loss += 1
                requeue.setdefault(entry.container_type or _ANY, []).append(entry)
            for key, items in requeue.items():
                q = self.queues.setdefault(key, deque())
                for entry in reversed(items):
                    q.appendleft(entry)
        for entry in failed:
            msg = messages.task_result(
                task_id=entry.task_id,
                success=False,
                error="ManagerLost: executing manager disappeared and "
                "re-execution is disabled for this function",
            )
            with self.lock:
                self.entries.pop(entry.task_id, None)
                self.pending_results[entry.task_id] = msg
            self._send_to_forwarder(msg)
        if lost:
            self._pump()

    def _loss_detector(self) -> None:
        period = self.cfg.routing.manager_heartbeat_period
        while not self._stop.wait(period / 2):
            cutoff = time.monotonic_ns() - int(2 * period * 1e9)
            stale = []
            with self.lock:
                for link in self.managers.values():
                    if not link.draining and link.last_heartbeat_ns < cutoff:
                        stale.append(link)
            for link in stale:
                log.info("manager %s missed 2 heartbeat intervals", link.manager_id)
                try:
                    link.sock.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                self._manager_gone(link.manager_id)

    # -- routing -------------------------------------------------------
    def _warm_anywhere(self, ctype: str) -> bool:
        """True if any connected manager advertises a container of `ctype`
        in any non-empty state — warm, busy, or still cold-starting.  Such a
        container will take this task sooner than a fresh cold start would,
        so falling back to an unwarmed manager only multiplies cold starts
        and churns that manager's container mix (caller holds the lock)."""
        for link in self.managers.values():
            if link.draining or link.closed:
                continue
            if link.warm_inventory.get(ctype, (0, 0))[0] >= 1:
                return True
        return False

    def _pump(self) -> None:
        with self.lock:
            progress = True
            while progress:
                progress = False
                for key in list(self.queues):
                    q = self.queues[key]
                    if not q:
                        continue
                    candidates = {
                        link.manager_id: link
                        for link in self.managers.values()
                        if not link.draining and not link.closed and link.budget() > 0
                    }
                    if not candidates:
                        return
                    # A positive credit balance means the manager asked for
                    # more work even if its last ad showed no idle worker
                    # (prefetch under batching), so floor idle at 1 here.
                    ads = [
                        ManagerAdvertisement(
                            manager_id=link.manager_id,
                            node_id=link.node_id,
                            capacity=link.capacity,
                            idle_workers=max(1, link.idle_workers),
                            warm_inventory=dict(link.warm_inventory),
                        )
                        for link in candidates.values()
                    ]
                    entry = q[0]
                    ctype = None if key == _ANY else entry.container_type
                    if self.cfg.routing.policy == "random":
                        ctype = None
                    try:
                        decision = route_task(entry.task_id, ctype, ads, self.rng)
                    except NoManagers:
                        continue
                    if (
                        decision.reason is RouteReason.RANDOM_FALLBACK
                        and ctype is not None
                        and self._warm_anywhere(ctype)
                    ):
                        # A container of this type exists somewhere (idle,
                        # busy, or starting) but is not dispatchable right
                        # now.  The task waits for it rather than seeding a
                        # redundant cold start on another manager — but only
                        # while the wait is still cheaper than a cold start;
                        # past that, holding out just serializes the queue
                        # behind too little warm capacity.
                        now = time.monotonic_ns()
                        if entry.held_since_ns is None:
                            entry.held_since_ns = now
                        if now - entry.held_since_ns < self.cfg.routing.patience * 1e9:
                            continue
                    link = candidates[decision.chosen_manager]
                    q.popleft()
                    if decision.reason is RouteReason.WARM_HIT:
                        self.warm_hits += 1
                    else:
                        self.random_fallbacks += 1
                        if ctype is not None:
                            # The chosen manager will cold-start a container
                            # of this type; note it locally so same-type
                            # tasks wait for it rather than triggering more
                            # cold starts.  The next advertisement replaces
                            # this prediction with the manager's true state.
                            warm, idle_warm = link.warm_inventory.get(ctype, (0, 0))
                            link.warm_inventory[ctype] = (warm + 1, idle_warm)
                    link.sent_total += 1
                    link.outstanding[entry.task_id] = entry
                    self.block_last_active[link.block_id] = time.monotonic_ns()
                    dispatch = messages.task_dispatch(
                        task_id=entry.task_id,
                        function_id=entry.function_id,
                        container_type=entry.container_type,
                        attempts=entry.attempts,
                        allow_reexecution=entry.allow_reexecution,
                        body_env=entry.body_env,
                        input_env=entry.input_env,
                    )
                    if not link.send(dispatch):
                        link.closed = True
                        continue
                    progress = True

    # -- elastic scaling -----------------------------------------------
    def _strategy_loop(self) -> None:
        interval = self.cfg.routing.strategy_interval
        while not self._stop.wait(interval):
            try:
                self.provider.poll()
                actions = self._strategy_actions()
                for action in actions:
                    self._apply_scale_action(action)
                self._write_state_file()
            except ProviderFailure as exc:
                log.warning("provider failure (will retry): %s", exc)
            except Exception:  # pragma: no cover - keep the loop alive
                log.exception("strategy tick failed")

    def _strategy_actions(self) -> list[ScaleAction]:
        with self.lock:
            pending = sum(len(q) for q in self.queues.values())
            idle = sum(
                max(0, link.capacity - len(link.outstanding))
                for link in self.managers.values()
                if not link.draining
            )
            active = sum(len(link.outstanding) for link in self.managers.values())
            blocks = self.provider.block_count()
            now = time.monotonic_ns()
            block_idle: dict[str, float] = {}
            for block_id in list(self.provider.blocks):
                mids = self.block_managers.get(block_id, set())
                if not mids:
                    continue  # managers not up yet; not releasable
                links = [self.managers[m] for m in mids if m in self.managers]
                if len(links) < len(mids) or any(l.outstanding for l in links):
                    continue
                idle_since = self.block_last_active.get(block_id, now)
                block_idle[block_id] = (now - idle_since) / 1e9
        snapshot = StrategySnapshot(pending, idle, active, blocks)
        return strategy_tick(snapshot, self.cfg.provider, block_idle)

    def _apply_scale_action(self, action: ScaleAction) -> None:
        if action.op == "request_block":
            self.provider.submit_block(self.cfg.provider)
        else:
            block_id = action.block_id
            with self.lock:
                links = [
                    self.managers[m]
                    for m in self.block_managers.get(block_id, set())
                    if m in self.managers
                ]
                for link in links:
                    link.draining = True
            for link in links:
                link.send(WireMessage.build(MessageType.DRAIN, {}))
            threading.Thread(
                target=self._finish_release, args=(block_id,), daemon=True,
                name=f"release-{block_id}",
            ).start()

    def _finish_release(self, block_id: str) -> None:
        try:
            self.provider.cancel_block(block_id, grace=30.0)
        except ProviderFailure:
            pass
        with self.lock:
            self.block_managers.pop(block_id, None)
            self.block_last_active.pop(block_id, None)

    # -- observability -------------------------------------------------
    def stats(self) -> dict:
        with self.lock:
            return {
                "endpoint_id": self.endpoint_id,
                "queued": sum(len(q) for q in self.queues.values()),
                "outstanding": sum(len(l.outstanding) for l in self.managers.values()),
                "completed": self.completed,
                "warm_hits": self.warm_hits,
                "random_fallbacks": self.random_fallbacks,
                "requeued_after_loss": self.requeued_after_loss,
                "cold_starts": sum(l.cold_starts for l in self.managers.values()),
                "blocks": self.provider.block_count() if self.provider else 0,
                "managers": [
                    {
                        "manager_id": l.manager_id,
                        "node_id": l.node_id,
                        "block_id": l.block_id,
                        "capacity": l.capacity,
                        "idle_workers": l.idle_workers,
                        "outstanding": len(l.outstanding),
                        "cold_starts": l.cold_starts,
                    }
                    for l in self.managers.values()
                ],
            }

    def _write_state_file(self) -> None:
        state = self.stats()
        state["pid"] = __import__("os").getpid()
        path = self.workdir / "state.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(state, indent=2))
        tmp.replace(path)
