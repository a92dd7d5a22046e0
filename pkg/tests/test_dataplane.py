import threading

import pytest

from fedfaas.dataplane import (
    KeyNotFound,
    KvClient,
    KvHandle,
    KvServer,
    SharedFsAdapter,
    StageFailure,
    TransferReference,
    stage_in,
    stage_out,
)
from fedfaas.dataplane.kvstore import KvError
from fedfaas.dataplane.staging import Direction


@pytest.fixture(scope="module")
def kv_server():
    server = KvServer().start()
    yield server
    server.stop()


def kv_client(server, namespace="ep1"):
    host, port = server.address
    return KvClient(KvHandle(host, port, namespace))


@pytest.fixture
def adapters(kv_server, tmp_path):
    kv = kv_client(kv_server)
    fs = SharedFsAdapter(tmp_path, "ep1")
    yield {"kv": kv, "sharedfs": fs}
    kv.close()


@pytest.mark.parametrize("name", ["kv", "sharedfs"])
def test_roundtrip(adapters, name):
    adapter = adapters[name]
    adapter.put("k", b"value-bytes")
    assert adapter.get("k") == b"value-bytes"
    adapter.put("k", b"second")
    assert adapter.get("k") == b"second"


@pytest.mark.parametrize("name", ["kv", "sharedfs"])
def test_get_absent(adapters, name):
    with pytest.raises(KeyNotFound):
        adapters[name].get("definitely-absent")


def test_kv_namespacing(kv_server):
    a = kv_client(kv_server, "ep-a")
    b = kv_client(kv_server, "ep-b")
    a.put("shared-key", b"A")
    with pytest.raises(KeyNotFound):
        b.get("shared-key")
    a.close()
    b.close()


def test_kv_key_limit(kv_server):
    c = kv_client(kv_server)
    with pytest.raises(KvError):
        c.put("x" * 2000, b"v")
    c.close()


def test_kv_large_value(kv_server):
    c = kv_client(kv_server)
    blob = b"z" * (4 * 2**20)
    c.put("big", blob)
    assert c.get("big") == blob
    c.close()


@pytest.mark.parametrize("name", ["kv", "sharedfs"])
def test_concurrent_distinct_keys(adapters, name, kv_server, tmp_path):
    # Concurrent writers to distinct keys never interleave corruptly.
    def make_adapter():
        if name == "kv":
            return kv_client(kv_server)
        return SharedFsAdapter(tmp_path, "ep1")

    errors = []

    def writer(i):
        try:
            adapter = make_adapter()
            payload = bytes([i]) * 4096
            for _ in range(20):
                adapter.put(f"key-{i}", payload)
                assert adapter.get(f"key-{i}") == payload
            adapter.close()
        except Exception as exc:  # noqa: BLE001 - collected for the assert
            errors.append(exc)

    threads = [threading.Thread(target=writer, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors


def test_stage_in_local(tmp_path):
    src_root = tmp_path / "src"
    src_root.mkdir()
    (src_root / "input.dat").write_bytes(b"staged-input")
    workdir = tmp_path / "work"
    stage_in([TransferReference(str(src_root), "input.dat")], workdir)
    assert (workdir / "input.dat").read_bytes() == b"staged-input"


def test_stage_out_local(tmp_path):
    workdir = tmp_path / "work"
    workdir.mkdir()
    (workdir / "result.dat").write_bytes(b"produced")
    dest_root = tmp_path / "dest"
    ref = TransferReference(str(dest_root), "result.dat", Direction.STAGE_OUT)
    stage_out([ref], workdir)
    assert (dest_root / "result.dat").read_bytes() == b"produced"


def test_stage_missing_source_fails(tmp_path):
    ref = TransferReference(str(tmp_path), "nope.dat")
    with pytest.raises(StageFailure):
        stage_in([ref], tmp_path / "work")


def test_reference_json_roundtrip():
    ref = TransferReference("http://example", "a/b.dat", Direction.STAGE_IN)
    assert TransferReference.from_json(ref.to_json()) == ref
    with pytest.raises(ValueError):
        TransferReference("root", "")
