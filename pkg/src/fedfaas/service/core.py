"""Control-plane core: registries, queues, forwarders, purging.

One ServiceCore instance backs the REST app.  Each registered endpoint
gets its own queues and its own forwarder loop; agents connect to a
single forwarder listen port and attach to their loop with a registration
handshake carrying the endpoint id and connection secret.
"""
from __future__ import annotations

import logging
import secrets
import socket
import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

from fedfaas.protocol import messages
from fedfaas.protocol.clock import Clock
from fedfaas.protocol.codecs import CodecError, Envelope, deserialize
from fedfaas.protocol.framing import FrameDecoder, FramingError, MessageType, WireMessage, frame_encode
from fedfaas.protocol.records import (
    EndpointRecord,
    EndpointStatus,
    FunctionRecord,
    LatencyBreakdown,
    TaskRecord,
    TaskState,
)
from fedfaas.service.auth import (
    SCOPE_ENDPOINT_REGISTER,
    SCOPE_REGISTER_FUNCTION,
    SCOPE_RUN,
    Authenticator,
    AuthToken,
)
from fedfaas.service.config import ServiceConfig
from fedfaas.service.errors import (
    MalformedBody,
    PayloadTooLarge,
    ResultPurged,
    Unauthorized,
    UnknownEndpoint,
    UnknownFunction,
    UnknownTask,
)
from fedfaas.service.queues import EndpointQueues
from fedfaas.service.store import InMemoryStore

log = logging.getLogger("fedfaas.service")


@dataclass
class StoredResult:
    success: bool
    envelope: Optional[Envelope]
    error: Optional[str]
    retrieved_at_ns: Optional[int] = None


class ForwarderLoop:
    """Service-side loop dedicated to one endpoint.

    While connected: dequeue FIFO, send TaskDispatch, track inflight; on
    TaskResult store the result and ack back.  On disconnect all inflight
    task ids return to the front of the task queue in dispatch order.
    """

    def __init__(self, core: "ServiceCore", endpoint_id: str) -> None:
        self.core = core
        self.endpoint_id = endpoint_id
        self.queues = EndpointQueues(core.store, endpoint_id)
        self._conn: Optional[socket.socket] = None
        self._send_lock = threading.Lock()
        self._conn_gen = 0
        self.connected = threading.Event()
        self.last_heartbeat_ns: Optional[int] = None
        self._stop = False
        self._dispatcher = threading.Thread(
            target=self._dispatch_loop, daemon=True, name=f"fwd-{endpoint_id[:8]}"
        )
        self._dispatcher.start()

    # -- connection management ----------------------------------------
    def attach(self, conn: socket.socket) -> None:
        with self.queues.cond:
            old = self._conn
            self._conn = conn
            self._conn_gen += 1
            gen = self._conn_gen
            self.last_heartbeat_ns = None
            self.connected.set()
            self.queues.cond.notify_all()
        if old is not None:
            try:
                old.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                old.close()
            except OSError:
                pass
        # anything dispatched on a previous connection may have been lost in
        # its socket buffer; put it back in front so it rides this connection
        # (the endpoint ignores duplicate dispatches by task id)
        requeued = self.queues.requeue_inflight()
        if requeued:
            log.info(
                "endpoint %s reattached; %d inflight tasks requeued",
                self.endpoint_id, len(requeued),
            )
            self.core._mark_requeued(requeued)
        threading.Thread(
            target=self._read_loop, args=(conn, gen), daemon=True,
            name=f"fwd-read-{self.endpoint_id[:8]}",
        ).start()

    def disconnect(self, gen: Optional[int] = None) -> None:
        with self.queues.cond:
            if gen is not None and gen != self._conn_gen:
                return  # stale
            conn, self._conn = self._conn, None
            self.connected.clear()
        if conn is not None:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        requeued = self.queues.requeue_inflight()
        if requeued:
            log.info(
                "endpoint %s disconnected; %d inflight tasks requeued",
                self.endpoint_id, len(requeued),
            )
        self.core._mark_requeued(requeued)
        self.core._set_endpoint_status(self.endpoint_id, EndpointStatus.OFFLINE)

    def stop(self) -> None:
        self._stop = True
        with self.queues.cond:
            self.queues.cond.notify_all()
        self.disconnect()

    def _send(self, msg: WireMessage) -> bool:
        with self._send_lock:
            conn = self._conn
            if conn is None:
                return False
            try:
                conn.sendall(frame_encode(msg))
                return True
            except OSError:
                return False

    # -- dispatch ------------------------------------------------------
    def _dispatch_loop(self) -> None:
        while not self._stop:
            with self.queues.cond:
                while not self._stop and not (
                    self.connected.is_set() and self.queues.queued_count() > 0
                ):
                    self.queues.cond.wait(timeout=0.5)
                if self._stop:
                    return
            t0 = self.core.clock.now_ns()
            task_id = self.queues.pop_for_dispatch(t0)
            if task_id is None:
                continue
            msg = self.core._build_dispatch(task_id)
            if msg is None:
                continue  # task vanished (purged/terminal); drop
            ok = self._send(msg)
            self.core._note_tf(task_id, self.core.clock.now_ns() - t0)
            if not ok:
                self.disconnect()

    # -- inbound -------------------------------------------------------
    def _read_loop(self, conn: socket.socket, gen: int) -> None:
        decoder = FrameDecoder()
        try:
            while True:
                data = conn.recv(1 << 20)
                if not data:
                    break
                for msg in decoder.feed(data):
                    self._handle(msg)
        except (OSError, FramingError):
            pass
        self.disconnect(gen)

    def _handle(self, msg: WireMessage) -> None:
        if msg.type is MessageType.HEARTBEAT:
            self.last_heartbeat_ns = self.core.clock.now_ns()
            self.core._set_endpoint_status(self.endpoint_id, EndpointStatus.ONLINE)
            self._send(messages.heartbeat("service"))
        elif msg.type is MessageType.ACK:
            pass  # dispatch receipt confirmed; task stays inflight until result
        elif msg.type is MessageType.TASK_RESULT:
            t0 = self.core.clock.now_ns()
            header, env_bytes = messages.parse_task_result(msg)
            task_id = header["task_id"]
            self.core._store_result(self.endpoint_id, self.queues, header, env_bytes)
            self.core._note_tf(task_id, self.core.clock.now_ns() - t0)
            self._send(messages.ack(task_id))

    def check_heartbeat(self) -> None:
        """Disconnect after miss_limit consecutive missed heartbeat periods."""
        if not self.connected.is_set():
            return
        last = self.last_heartbeat_ns
        if last is None:
            return  # no heartbeat yet on a fresh connection
        allowed = self.core.config.heartbeat_period * self.core.config.miss_limit
        if self.core.clock.now_ns() - last > allowed * 1e9:
            log.info("endpoint %s missed %d heartbeats", self.endpoint_id,
                     self.core.config.miss_limit)
            self.disconnect()


@dataclass
class EndpointRuntime:
    record: EndpointRecord
    secret: str
    forwarder: ForwarderLoop


class ServiceCore:
    def __init__(self, config: ServiceConfig, clock: Optional[Clock] = None) -> None:
        self.config = config
        self.clock = clock or Clock()
        self.store = InMemoryStore()
        self.auth = Authenticator(config.tokens)
        self.functions: dict[str, FunctionRecord] = {}
        self.endpoints: dict[str, EndpointRuntime] = {}
        self.tasks: dict[str, TaskRecord] = {}
        self.container_types: set[str] = set(config.container_types)
        self.purged: set[str] = set()
        self._tf_ns: dict[str, int] = {}
        self._staging_ns: dict[str, int] = {}
        self._lock = threading.RLock()
        self._listener: Optional[socket.socket] = None
        self.forwarder_address: Optional[tuple[str, int]] = None
        self._stop = False

    # -- lifecycle -----------------------------------------------------
    def start(self) -> "ServiceCore":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.config.forwarder_host, self.config.forwarder_port))
        listener.listen(64)
        self._listener = listener
        self.forwarder_address = listener.getsockname()[:2]
        threading.Thread(target=self._accept_loop, daemon=True, name="fwd-accept").start()
        threading.Thread(target=self._sweep_loop, daemon=True, name="svc-sweep").start()
        return self

    def stop(self) -> None:
        self._stop = True
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for rt in list(self.endpoints.values()):
            rt.forwarder.stop()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stop:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._handshake, args=(conn,), daemon=True, name="fwd-hs"
            ).start()

    def _handshake(self, conn: socket.socket) -> None:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        conn.settimeout(10.0)
        decoder = FrameDecoder()
        try:
            while True:
                data = conn.recv(65536)
                if not data:
                    conn.close()
                    return
                msgs = decoder.feed(data)
                if msgs:
                    msg = msgs[0]
                    break
            if msg.type is not MessageType.REGISTER_ENDPOINT:
                conn.close()
                return
            header, _ = msg.unpack()
            endpoint_id = header.get("endpoint_id", "")
            rt = self.endpoints.get(endpoint_id)
            if rt is None or header.get("secret") != rt.secret:
                conn.sendall(frame_encode(WireMessage.build(
                    MessageType.ACK, {"ok": False, "error": "bad endpoint or secret"})))
                conn.close()
                return
            conn.settimeout(None)
            conn.sendall(frame_encode(WireMessage.build(
                MessageType.ACK,
                {"ok": True, "heartbeat_period": self.config.heartbeat_period})))
            rt.forwarder.attach(conn)
        except (OSError, FramingError):
            try:
                conn.close()
            except OSError:
                pass

    def _sweep_loop(self) -> None:
        import time as _time

        hb_step = max(0.05, min(self.config.heartbeat_period / 2, 1.0))
        next_purge = self.clock.now_ns() + self.config.purge_interval * 1e9
        while not self._stop:
            _time.sleep(hb_step)
            for rt in list(self.endpoints.values()):
                rt.forwarder.check_heartbeat()
            if self.clock.now_ns() >= next_purge:
                self.purge_sweep()
                next_purge = self.clock.now_ns() + self.config.purge_interval * 1e9

    # -- registration --------------------------------------------------
    def register_function(
        self,
        auth: AuthToken,
        name: str,
        body: Envelope,
        container_type: Optional[str] = None,
        authorized_users: Optional[set[str]] = None,
        allow_reexecution: bool = True,
    ) -> str:
        try:
            deserialize(body)
        except CodecError as exc:
            raise MalformedBody(f"function body does not decode: {exc}") from exc
        if container_type is not None and container_type not in self.container_types:
            raise MalformedBody(
                f"container type {container_type!r} has no registered ContainerSpec"
            )
        function_id = str(uuid.uuid4())
        with self._lock:
            self.functions[function_id] = FunctionRecord(
                function_id=function_id,
                name=name,
                body=body,
                owner=auth.user,
                container_type=container_type,
                authorized_users=set(authorized_users or ()),
                registered_at=self.clock.now_ns(),
                allow_reexecution=allow_reexecution,
            )
        return function_id

    def register_endpoint(
        self,
        auth: AuthToken,
        name: str,
        endpoint_id: Optional[str] = None,
        container_types: Optional[list[str]] = None,
    ) -> tuple[str, tuple[str, int], str]:
        with self._lock:
            if container_types:
                self.container_types.update(container_types)
            if endpoint_id and endpoint_id in self.endpoints:
                # recovery: same id re-attaches to a fresh forwarder channel
                rt = self.endpoints[endpoint_id]
                if rt.record.owner != auth.user:
                    raise Unauthorized("endpoint belongs to another user")
                rt.secret = secrets.token_hex(16)
                assert self.forwarder_address is not None
                return endpoint_id, self.forwarder_address, rt.secret
            endpoint_id = endpoint_id or str(uuid.uuid4())
            secret = secrets.token_hex(16)
            record = EndpointRecord(
                endpoint_id=endpoint_id,
                name=name,
                owner=auth.user,
                status=EndpointStatus.OFFLINE,
                forwarder_address=self.forwarder_address,
            )
            self.endpoints[endpoint_id] = EndpointRuntime(
                record=record,
                secret=secret,
                forwarder=ForwarderLoop(self, endpoint_id),
            )
        assert self.forwarder_address is not None
        return endpoint_id, self.forwarder_address, secret

    # -- submission ----------------------------------------------------
    def submit(
        self,
        auth: AuthToken,
        function_id: str,
        endpoint_id: str,
        input_env: Envelope,
        arrival_ns: Optional[int] = None,
    ) -> str:
        t0 = arrival_ns if arrival_ns is not None else self.clock.now_ns()
        fn = self.functions.get(function_id)
        if fn is None:
            raise UnknownFunction(function_id)
        if not fn.invocable_by(auth.user):
            raise Unauthorized(f"user {auth.user} may not invoke {function_id}")
        rt = self.endpoints.get(endpoint_id)
        if rt is None:
            raise UnknownEndpoint(endpoint_id)
        if len(input_env.payload) > self.config.payload_limit:
            raise PayloadTooLarge(
                f"payload of {len(input_env.payload)} bytes exceeds the "
                f"{self.config.payload_limit}-byte service limit"
            )
        task_id = str(uuid.uuid4())
        record = TaskRecord(
            task_id=task_id,
            function_id=function_id,
            endpoint_id=endpoint_id,
            input=Envelope(input_env.codec_id, input_env.payload, task_id.encode()),
            submitter=auth.user,
        )
        record.timestamps[TaskState.RECEIVED] = t0
        record.advance(TaskState.QUEUED, self.clock.now_ns())
        with self._lock:
            self.tasks[task_id] = record
        rt.forwarder.queues.enqueue(task_id)
        enqueue_done = self.clock.now_ns()
        record.latency = LatencyBreakdown(t_s=enqueue_done - t0)
        return task_id

    def submit_batch(
        self,
        auth: AuthToken,
        items: list[tuple[str, str, Envelope]],
        arrival_ns: Optional[int] = None,
    ) -> list[dict]:
        out = []
        for function_id, endpoint_id, env in items:
            try:
                out.append(
                    {"task_id": self.submit(auth, function_id, endpoint_id, env, arrival_ns)}
                )
            except (UnknownFunction, UnknownEndpoint, PayloadTooLarge, Unauthorized) as exc:
                out.append({"error": {"code": exc.code, "message": exc.message}})
        return out

    # -- status / results ---------------------------------------------
    def _get_task(self, auth: AuthToken, task_id: str) -> TaskRecord:
        task = self.tasks.get(task_id)
        if task is None:
            raise UnknownTask(task_id)
        if task.submitter != auth.user:
            raise Unauthorized("only the submitter may observe a task")
        return task

    def get_status(self, auth: AuthToken, task_id: str) -> TaskRecord:
        return self._get_task(auth, task_id)

    def get_result(self, auth: AuthToken, task_id: str) -> Optional[StoredResult]:
        """None while pending; raises ResultPurged after the retention window."""
        task = self._get_task(auth, task_id)
        if task_id in self.purged:
            raise ResultPurged(task_id)
        rt = self.endpoints.get(task.endpoint_id)
        stored = rt.forwarder.queues.get_result(task_id) if rt else None
        if stored is None:
            return None
        if stored.retrieved_at_ns is None:
            stored.retrieved_at_ns = self.clock.now_ns()
        return stored

    def purge_sweep(self) -> int:
        """Drop results retrieved longer than the retention window ago."""
        horizon = self.clock.now_ns() - self.config.retention * 1e9
        purged = 0
        for rt in list(self.endpoints.values()):
            queues = rt.forwarder.queues
            for task_id in queues.snapshot()["results"]:
                stored = queues.get_result(task_id)
                if (
                    stored is not None
                    and stored.retrieved_at_ns is not None
                    and stored.retrieved_at_ns < horizon
                ):
                    queues.purge_result(task_id)
                    self.purged.add(task_id)
                    purged += 1
        return purged

    # -- forwarder callbacks ------------------------------------------
    def _build_dispatch(self, task_id: str) -> Optional[WireMessage]:
        task = self.tasks.get(task_id)
        if task is None or task.state in (TaskState.SUCCESS, TaskState.FAILED):
            return None
        fn = self.functions.get(task.function_id)
        if fn is None:
            return None
        with self._lock:
            task.advance(TaskState.DISPATCHED_TO_ENDPOINT, self.clock.now_ns())
        return messages.task_dispatch(
            task_id=task_id,
            function_id=task.function_id,
            container_type=fn.container_type,
            attempts=task.attempts,
            allow_reexecution=fn.allow_reexecution,
            body_env=fn.body.to_bytes(),
            input_env=task.input.to_bytes(),
        )

    def _store_result(
        self, endpoint_id: str, queues: EndpointQueues, header: dict, env_bytes: bytes
    ) -> None:
        task_id = header["task_id"]
        task = self.tasks.get(task_id)
        if task is None:
            return
        success = bool(header.get("success"))
        stored = StoredResult(
            success=success,
            envelope=Envelope.from_bytes(env_bytes) if success else None,
            error=header.get("error"),
        )
        if not queues.complete(task_id, stored):
            log.debug("duplicate result for %s discarded", task_id)
            return
        now = self.clock.now_ns()
        with self._lock:
            if task.state in (TaskState.SUCCESS, TaskState.FAILED):
                return
            if success:
                task.set_success(stored.envelope, now)
            else:
                task.set_failed(stored.error or "failed", now)
            lb = task.latency or LatencyBreakdown()
            lb.t_f = self._tf_ns.pop(task_id, 0)
            lb.t_e = int(header.get("t_e_ns", 0))
            lb.t_w = int(header.get("t_w_ns", 0))
            task.latency = lb
            # endpoint-side retries (manager loss) raise the attempt count
            task.attempts = max(task.attempts, int(header.get("attempts", 0)))
            self._staging_ns[task_id] = int(header.get("staging_ns", 0))

    def _note_tf(self, task_id: str, delta_ns: int) -> None:
        with self._lock:
            self._tf_ns[task_id] = self._tf_ns.get(task_id, 0) + delta_ns

    def _mark_requeued(self, task_ids: list[str]) -> None:
        now = self.clock.now_ns()
        with self._lock:
            for task_id in task_ids:
                # forget forwarding time spent on the lost connection so the
                # reported breakdown covers only the attempt that completes
                self._tf_ns.pop(task_id, None)
                task = self.tasks.get(task_id)
                if task is not None and task.state is TaskState.DISPATCHED_TO_ENDPOINT:
                    task.advance(TaskState.QUEUED, now)

    def _set_endpoint_status(self, endpoint_id: str, status: EndpointStatus) -> None:
        rt = self.endpoints.get(endpoint_id)
        if rt is None:
            return
        rt.record.status = status
        if status is EndpointStatus.ONLINE:
            rt.record.last_heartbeat = self.clock.now_ns()

    def endpoint_status(self, endpoint_id: str) -> EndpointRecord:
        rt = self.endpoints.get(endpoint_id)
        if rt is None:
            raise UnknownEndpoint(endpoint_id)
        # online iff a heartbeat arrived within heartbeat_period * miss_limit
        allowed_ns = self.config.heartbeat_period * self.config.miss_limit * 1e9
        if (
            rt.record.status is EndpointStatus.ONLINE
            and self.clock.now_ns() - rt.record.last_heartbeat > allowed_ns
        ):
            rt.record.status = EndpointStatus.OFFLINE
        return rt.record

    def list_endpoints(self) -> list[EndpointRecord]:
        with self._lock:
            ids = list(self.endpoints)
        return [self.endpoint_status(eid) for eid in ids]

    def staging_ns(self, task_id: str) -> int:
        return self._staging_ns.get(task_id, 0)
