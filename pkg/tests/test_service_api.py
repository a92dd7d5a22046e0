import base64

import pytest
from fastapi.testclient import TestClient

from fedfaas.protocol.clock import FakeClock
from fedfaas.protocol.codecs import serialize
from fedfaas.service.app import create_app
from fedfaas.service.auth import ALL_SCOPES, AuthToken
from fedfaas.service.config import ServiceConfig
from fedfaas.service.core import ServiceCore, StoredResult
from fedfaas.protocol.codecs import Envelope


def env_b64(value) -> str:
    return base64.b64encode(serialize(value).to_bytes()).decode()


NOOP = {"kind": "builtin", "name": "noop"}


@pytest.fixture
def setup():
    config = ServiceConfig(
        tokens={
            "tok-alice": AuthToken("tok-alice", "alice", frozenset(ALL_SCOPES)),
            "tok-bob": AuthToken("tok-bob", "bob", frozenset({"run"})),
        },
        container_types=["typeA"],
        retention=100.0,
    )
    clock = FakeClock()
    core = ServiceCore(config, clock).start()
    client = TestClient(create_app(core))
    yield core, client, clock
    core.stop()


def alice(client, method, path, **kw):
    kw.setdefault("headers", {})["Authorization"] = "Bearer tok-alice"
    return getattr(client, method)(path, **kw)


def register_pair(client):
    fn = alice(client, "post", "/functions", json={"name": "noop", "body_b64": env_b64(NOOP)})
    ep = alice(client, "post", "/endpoints", json={"name": "ep1"})
    return fn.json()["function_id"], ep.json()["endpoint_id"]


def test_register_function_fresh_uuid_per_registration(setup):
    _, client, _ = setup
    body = {"name": "noop", "body_b64": env_b64(NOOP)}
    r1 = alice(client, "post", "/functions", json=body)
    r2 = alice(client, "post", "/functions", json=body)
    assert r1.status_code == 200 and r2.status_code == 200
    assert r1.json()["function_id"] != r2.json()["function_id"]


def test_unknown_container_type_named_in_error(setup):
    _, client, _ = setup
    r = alice(
        client,
        "post",
        "/functions",
        json={"name": "f", "body_b64": env_b64(NOOP), "container_type": "missing-type"},
    )
    assert r.status_code == 400
    err = r.json()["error"]
    assert err["code"] == "MalformedBody" and "missing-type" in err["message"]


def test_known_container_type_accepted(setup):
    _, client, _ = setup
    r = alice(
        client,
        "post",
        "/functions",
        json={"name": "f", "body_b64": env_b64(NOOP), "container_type": "typeA"},
    )
    assert r.status_code == 200


def test_auth_required_and_scoped(setup):
    _, client, _ = setup
    assert client.post("/functions", json={"name": "x", "body_b64": env_b64(NOOP)}).status_code == 401
    # bob has only "run"
    r = client.post(
        "/functions",
        json={"name": "x", "body_b64": env_b64(NOOP)},
        headers={"Authorization": "Bearer tok-bob"},
    )
    assert r.status_code == 401
    r = client.post("/endpoints", json={"name": "e"}, headers={"Authorization": "Bearer tok-bob"})
    assert r.status_code == 401


def test_authorized_users_enforced(setup):
    _, client, _ = setup
    fn = alice(
        client,
        "post",
        "/functions",
        json={"name": "f", "body_b64": env_b64(NOOP), "authorized_users": []},
    ).json()["function_id"]
    ep = alice(client, "post", "/endpoints", json={"name": "e"}).json()["endpoint_id"]
    r = client.post(
        "/tasks",
        json={"function_id": fn, "endpoint_id": ep, "input_b64": env_b64(None)},
        headers={"Authorization": "Bearer tok-bob"},
    )
    assert r.status_code == 401


def test_submit_queues_fifo(setup):
    core, client, _ = setup
    fn, ep = register_pair(client)
    ids = [
        alice(
            client,
            "post",
            "/tasks",
            json={"function_id": fn, "endpoint_id": ep, "input_b64": env_b64(i)},
        ).json()["task_id"]
        for i in range(20)
    ]
    snap = core.endpoints[ep].forwarder.queues.snapshot()
    assert snap["queued"] == ids


def test_payload_too_large(setup):
    _, client, _ = setup
    fn, ep = register_pair(client)
    big = b"x" * (10 * 2**20 + 1)
    env = serialize(big)
    b64 = base64.b64encode(env.to_bytes()).decode()
    r = alice(
        client, "post", "/tasks", json={"function_id": fn, "endpoint_id": ep, "input_b64": b64}
    )
    assert r.status_code == 413
    assert "10485760" in r.json()["error"]["message"]


def test_batch_partial_acceptance(setup):
    _, client, _ = setup
    fn, ep = register_pair(client)
    big = base64.b64encode(serialize(b"y" * (10 * 2**20 + 1)).to_bytes()).decode()
    r = alice(
        client,
        "post",
        "/batch",
        json={
            "tasks": [
                {"function_id": fn, "endpoint_id": ep, "input_b64": env_b64(1)},
                {"function_id": fn, "endpoint_id": ep, "input_b64": big},
                {"function_id": fn, "endpoint_id": ep, "input_b64": env_b64(2)},
            ]
        },
    )
    results = r.json()["results"]
    assert "task_id" in results[0] and "task_id" in results[2]
    assert results[1]["error"]["code"] == "PayloadTooLarge"


def test_unknown_function_and_endpoint(setup):
    _, client, _ = setup
    fn, ep = register_pair(client)
    r = alice(
        client, "post", "/tasks", json={"function_id": "nope", "endpoint_id": ep, "input_b64": env_b64(0)}
    )
    assert r.status_code == 404 and r.json()["error"]["code"] == "UnknownFunction"
    r = alice(
        client, "post", "/tasks", json={"function_id": fn, "endpoint_id": "nope", "input_b64": env_b64(0)}
    )
    assert r.status_code == 404 and r.json()["error"]["code"] == "UnknownEndpoint"


def test_status_pending_then_result_lifecycle(setup):
    core, client, clock = setup
    fn, ep = register_pair(client)
    task_id = alice(
        client, "post", "/tasks", json={"function_id": fn, "endpoint_id": ep, "input_b64": env_b64(0)}
    ).json()["task_id"]
    r = alice(client, "get", f"/tasks/{task_id}/status")
    assert r.json()["state"] == "queued"
    r = alice(client, "get", f"/tasks/{task_id}/result")
    assert r.json()["status"] == "pending"

    # complete it through the queue layer, as the forwarder would
    queues = core.endpoints[ep].forwarder.queues
    queues.pop_for_dispatch(clock.now_ns())
    core.tasks[task_id].advance(
        __import__("fedfaas.protocol.records", fromlist=["TaskState"]).TaskState.DISPATCHED_TO_ENDPOINT,
        clock.now_ns(),
    )
    core._store_result(
        ep, queues, {"task_id": task_id, "success": True, "t_e_ns": 5, "t_w_ns": 3},
        serialize(None).to_bytes(),
    )

    r1 = alice(client, "get", f"/tasks/{task_id}/result").json()
    assert r1["status"] == "success"
    # second retrieval inside retention returns the same bytes
    r2 = alice(client, "get", f"/tasks/{task_id}/result").json()
    assert r2["result_b64"] == r1["result_b64"]
    # only the submitter may observe
    r = client.get(f"/tasks/{task_id}/result", headers={"Authorization": "Bearer tok-bob"})
    assert r.status_code == 401

    # after the retention window the result is purged
    clock.advance(101.0)
    core.purge_sweep()
    r = alice(client, "get", f"/tasks/{task_id}/result")
    assert r.status_code == 410 and r.json()["error"]["code"] == "ResultPurged"


def test_duplicate_result_first_write_wins(setup):
    core, client, clock = setup
    fn, ep = register_pair(client)
    task_id = alice(
        client, "post", "/tasks", json={"function_id": fn, "endpoint_id": ep, "input_b64": env_b64(0)}
    ).json()["task_id"]
    queues = core.endpoints[ep].forwarder.queues
    queues.pop_for_dispatch(clock.now_ns())
    from fedfaas.protocol.records import TaskState

    core.tasks[task_id].advance(TaskState.DISPATCHED_TO_ENDPOINT, clock.now_ns())
    core._store_result(ep, queues, {"task_id": task_id, "success": True}, serialize("first").to_bytes())
    core._store_result(ep, queues, {"task_id": task_id, "success": True}, serialize("second").to_bytes())
    stored = queues.get_result(task_id)
    from fedfaas.protocol.codecs import deserialize

    assert deserialize(stored.envelope) == "first"


def test_endpoint_status_route(setup):
    _, client, _ = setup
    _, ep = register_pair(client)
    r = alice(client, "get", f"/endpoints/{ep}/status")
    assert r.json()["status"] == "offline"


def test_two_endpoints_have_independent_queues(setup):
    core, client, _ = setup
    fn, ep1 = register_pair(client)
    ep2 = alice(client, "post", "/endpoints", json={"name": "e2"}).json()["endpoint_id"]
    alice(client, "post", "/tasks", json={"function_id": fn, "endpoint_id": ep1, "input_b64": env_b64(1)})
    assert core.endpoints[ep1].forwarder.queues.queued_count() == 1
    assert core.endpoints[ep2].forwarder.queues.queued_count() == 0
    assert core.endpoints[ep1].forwarder is not core.endpoints[ep2].forwarder


def test_reregistration_preserves_queues(setup):
    core, client, _ = setup
    fn, ep = register_pair(client)
    alice(client, "post", "/tasks", json={"function_id": fn, "endpoint_id": ep, "input_b64": env_b64(1)})
    old_secret = core.endpoints[ep].secret
    r = alice(client, "post", "/endpoints", json={"name": "ep1", "endpoint_id": ep})
    assert r.json()["endpoint_id"] == ep
    assert r.json()["connection_secret"] != old_secret
    assert core.endpoints[ep].forwarder.queues.queued_count() == 1
