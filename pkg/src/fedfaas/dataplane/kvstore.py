"""Endpoint-local in-memory key-value store.

A purpose-built single-process TCP server speaking a minimal
length-prefixed protocol, deployed alongside an endpoint so that tasks on
the same endpoint can exchange intermediate data without moving bytes
through the control service.

Wire protocol (all integers big-endian):

    request:  1-byte op (0=put, 1=get), 2-byte key length, key,
              8-byte value length, value (zero-length for get)
    response: 1-byte status (0=ok, 1=key not found, 2=error),
              8-byte value length, value (empty except for a get hit)
"""
from __future__ import annotations

import socket
import socketserver
import struct
import threading
from dataclasses import dataclass

OP_PUT = 0
OP_GET = 1

ST_OK = 0
ST_NOT_FOUND = 1
ST_ERROR = 2

MAX_KEY = 1024
MAX_VALUE = 1 << 30


class KvError(Exception):
    pass


class KeyNotFound(KvError):
    pass


class StoreUnavailable(KvError):
    pass


@dataclass(frozen=True)
class KvHandle:
    """Where workers find the endpoint-local store."""

    host: str
    port: int
    namespace: str = ""


_BUF_SIZE = 4 << 20


def _tune(sock: socket.socket) -> None:
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, _BUF_SIZE)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, _BUF_SIZE)


def _recvall(sock: socket.socket, n: int) -> bytearray:
    buf = bytearray(n)
    view = memoryview(buf)
    got = 0
    while got < n:
        read = sock.recv_into(view[got:], n - got)
        if read == 0:
            raise ConnectionError("peer closed in mid-message")
        got += read
    return buf


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        sock = self.request
        _tune(sock)
        data: dict[bytes, bytes] = self.server.data  # type: ignore[attr-defined]
        lock: threading.Lock = self.server.lock  # type: ignore[attr-defined]
        try:
            while True:
                head = sock.recv(1)
                if not head:
                    return
                op = head[0]
                (klen,) = struct.unpack(">H", _recvall(sock, 2))
                key = bytes(_recvall(sock, klen))
                (vlen,) = struct.unpack(">Q", _recvall(sock, 8))
                if klen > MAX_KEY or vlen > MAX_VALUE:
                    _recvall(sock, min(vlen, MAX_VALUE))
                    sock.sendall(struct.pack(">BQ", ST_ERROR, 0))
                    continue
                value = _recvall(sock, vlen)
                if op == OP_PUT:
                    with lock:
                        data[key] = value
                    sock.sendall(struct.pack(">BQ", ST_OK, 0))
                elif op == OP_GET:
                    with lock:
                        stored = data.get(key)
                    if stored is None:
                        sock.sendall(struct.pack(">BQ", ST_NOT_FOUND, 0))
                    else:
                        sock.sendall(struct.pack(">BQ", ST_OK, len(stored)))
                        sock.sendall(stored)
                else:
                    sock.sendall(struct.pack(">BQ", ST_ERROR, 0))
        except (ConnectionError, OSError):
            return


class _Server(socketserver.ThreadingTCPServer):
    # enough listen backlog for a node's worth of workers connecting at once
    request_queue_size = 128
    daemon_threads = True


class KvServer:
    """Threaded store server; one handler thread per client connection."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._srv = _Server((host, port), _Handler, bind_and_activate=True)
        self._srv.daemon_threads = True
        self._srv.data = {}  # type: ignore[attr-defined]
        self._srv.lock = threading.Lock()  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._srv.server_address[:2]

    def start(self) -> "KvServer":
        self._thread = threading.Thread(target=self._srv.serve_forever, daemon=True, name="kv-server")
        self._thread.start()
        return self

    def stop(self) -> None:
        self._srv.shutdown()
        self._srv.server_close()


class KvClient:
    """Blocking client. Not shareable across threads; one per worker."""

    def __init__(self, handle: KvHandle, timeout: float = 30.0) -> None:
        self.handle = handle
        self._timeout = timeout
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                sock = socket.create_connection(
                    (self.handle.host, self.handle.port), timeout=self._timeout
                )
            except OSError as exc:
                raise StoreUnavailable(str(exc)) from exc
            _tune(sock)
            self._sock = sock
        return self._sock

    def _key(self, key: str) -> bytes:
        raw = f"{self.handle.namespace}/{key}".encode("utf-8")
        if len(raw) > MAX_KEY:
            raise KvError(f"key longer than {MAX_KEY} bytes")
        return raw

    def _roundtrip(self, op: int, key: bytes, value: bytes) -> bytes:
        sock = self._connect()
        try:
            sock.sendall(
                struct.pack(">BH", op, len(key)) + key + struct.pack(">Q", len(value))
            )
            if value:
                sock.sendall(value)
            status, vlen = struct.unpack(">BQ", _recvall(sock, 9))
            payload = _recvall(sock, vlen)
        except (ConnectionError, OSError) as exc:
            self.close()
            raise StoreUnavailable(str(exc)) from exc
        if status == ST_NOT_FOUND:
            raise KeyNotFound(key.decode("utf-8", "replace"))
        if status != ST_OK:
            raise KvError("store rejected the request")
        return bytes(payload)

    def put(self, key: str, value: bytes) -> None:
        if len(value) > MAX_VALUE:
            raise KvError(f"value longer than {MAX_VALUE} bytes")
        self._roundtrip(OP_PUT, self._key(key), value)

    def get(self, key: str) -> bytes:
        return self._roundtrip(OP_GET, self._key(key), b"")

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None


def main() -> None:
    """Run a standalone store server (used by endpoint deployments)."""
    import argparse

    parser = argparse.ArgumentParser(description="in-memory key-value store server")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    args = parser.parse_args()
    server = KvServer(args.host, args.port)
    print(f"kv store listening on {server.address[0]}:{server.address[1]}", flush=True)
    server._srv.serve_forever()


if __name__ == "__main__":
    main()
