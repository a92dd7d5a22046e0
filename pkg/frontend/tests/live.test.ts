/**
 * Round trips against a live local cluster.
 *
 * Spawns `fedfaas cluster up` (the service's own CLI must be on PATH,
 * e.g. via `pip install -e ..`) and drives it purely through REST.
 */
import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { decodePayload, encodePayload } from "../src/envelope.js";
import { UnauthorizedError, UnknownTaskError } from "../src/errors.js";
import { ClientSession } from "../src/session.js";

let child: ChildProcess;
let baseUrl = "";
let token = "";
let endpointId = "";
let session: ClientSession;
let echoFn = "";

beforeAll(async () => {
  child = spawn("fedfaas", ["cluster", "up", "--nodes", "1", "--workers", "2"], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  let buffer = "";
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error(`cluster did not start:\n${buffer}`)), 60_000);
    child.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const service = /service:\s+(\S+)/.exec(buffer);
      const tok = /token:\s+(\S+)/.exec(buffer);
      const ep = /endpoint:\s+(\S+)/.exec(buffer);
      if (service && tok && ep) {
        baseUrl = service[1]!;
        token = tok[1]!;
        endpointId = ep[1]!;
        clearTimeout(timer);
        resolve();
      }
    });
    child.on("exit", (code) => reject(new Error(`cluster exited early (${code}):\n${buffer}`)));
  });
  session = new ClientSession({ baseUrl, token });
  echoFn = await session.registerFunction("echo", { kind: "builtin", name: "echo" });
}, 90_000);

afterAll(() => {
  child?.kill("SIGTERM");
});

describe("SDK round trips", () => {
  it("runs a task and returns the echoed value", async () => {
    const input = { xs: [1, 2, 3], label: "hello" };
    const taskId = await session.run(echoFn, endpointId, input);
    const result = await session.getResult(taskId, { timeoutMs: 30_000 });
    expect(result.status).toBe("success");
    expect(result.value).toEqual(input);
    expect(result.latency).toBeTruthy();
    const status = await session.getStatus(taskId);
    expect(status.state).toBe("success");
    expect(status.attempts).toBe(1);
  });

  it("matches raw REST calls byte for byte", async () => {
    // the same submission made with plain fetch must register, run, and
    // resolve identically to the SDK path — the SDK adds no behavior
    const headers = { Authorization: `Bearer ${token}`, "Content-Type": "application/json" };
    const input = ["raw", { n: 7 }];

    const sdkTask = await session.run(echoFn, endpointId, input);
    const rawSubmit = await fetch(`${baseUrl}/tasks`, {
      method: "POST",
      headers,
      body: JSON.stringify({
        function_id: echoFn,
        endpoint_id: endpointId,
        input_b64: encodePayload(input),
      }),
    });
    expect(rawSubmit.status).toBe(200);
    const rawTask = ((await rawSubmit.json()) as { task_id: string }).task_id;

    const viaSdk = await session.getResult(sdkTask, { timeoutMs: 30_000 });
    let rawBody: { status: string; result_b64: string | null } = { status: "pending", result_b64: null };
    const deadline = Date.now() + 30_000;
    while (rawBody.status === "pending" && Date.now() < deadline) {
      const resp = await fetch(`${baseUrl}/tasks/${rawTask}/result`, { headers });
      expect(resp.status).toBe(200);
      rawBody = (await resp.json()) as typeof rawBody;
      if (rawBody.status === "pending") await new Promise((r) => setTimeout(r, 50));
    }
    expect(rawBody.status).toBe("success");
    expect(decodePayload(rawBody.result_b64!)).toEqual(viaSdk.value);
  });

  it("submits a batch in one request and collects results in order", async () => {
    const batch = session.batch();
    for (let i = 0; i < 5; i++) batch.add(echoFn, endpointId, { i });
    const ids = await batch.submit();
    expect(ids).toHaveLength(5);
    for (const id of ids) expect(typeof id).toBe("string");
    const results = await batch.getBatchResult({ timeoutMs: 60_000 });
    expect(results.map((r) => r.value)).toEqual([{ i: 0 }, { i: 1 }, { i: 2 }, { i: 3 }, { i: 4 }]);
  });

  it("lists the endpoint as online", async () => {
    const endpoints = await session.listEndpoints();
    const ep = endpoints.find((e) => e.endpoint_id === endpointId);
    expect(ep?.status).toBe("online");
    const direct = await session.endpointStatus(endpointId);
    expect(direct.status).toBe("online");
  });
});

describe("exception mapping", () => {
  it("maps unknown task ids to UnknownTaskError", async () => {
    await expect(session.getStatus("no-such-task")).rejects.toBeInstanceOf(UnknownTaskError);
  });

  it("maps bad tokens to UnauthorizedError", async () => {
    const bad = new ClientSession({ baseUrl, token: "wrong-token" });
    await expect(bad.listEndpoints()).rejects.toBeInstanceOf(UnauthorizedError);
  });

  it("surfaces failed tasks as TaskFailedError with the remote message", async () => {
    const badFn = await session.registerFunction("broken", {
      kind: "builtin",
      name: "no-such-builtin",
    });
    const taskId = await session.run(badFn, endpointId, null);
    await expect(session.getResult(taskId, { timeoutMs: 30_000 })).rejects.toThrow(
      /no-such-builtin/,
    );
    const result = await session.getResult(taskId, { timeoutMs: 1000, throwOnFailure: false });
    expect(result.status).toBe("failed");
  });

  it("idempotent polling: repeated result reads return the same value", async () => {
    const taskId = await session.run(echoFn, endpointId, "again");
    const first = await session.getResult(taskId, { timeoutMs: 30_000 });
    const second = await session.getResult(taskId, { timeoutMs: 5_000 });
    expect(first.value).toBe("again");
    expect(second.value).toBe("again");
  });
});
