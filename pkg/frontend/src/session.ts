/**
 * REST client session.
 *
 * A session holds a base URL, a bearer token, and a retry policy.  It is
 * a pure protocol client: every method maps onto exactly one REST route,
 * with payloads auto-wrapped into base64 text-codec envelopes.
 *
 * Retry policy: transport errors and HTTP 5xx are retried with
 * exponential backoff; HTTP 4xx are never retried — they are mapped to
 * typed exceptions immediately.
 *
 * Sessions are not meant to be shared across concurrent contexts that
 * mutate them; create one session per logical thread of work.  Batch
 * submission is a single request.
 */

import { decodePayload, encodePayload } from "./envelope.js";
import {
  FedfaasError,
  PollTimeoutError,
  TaskFailedError,
  TransportError,
  errorFromResponse,
} from "./errors.js";

export interface RetryPolicy {
  /** Attempts beyond the first request. */
  retries: number;
  /** First backoff delay in milliseconds; doubles per retry. */
  baseDelayMs: number;
  /** Backoff ceiling in milliseconds. */
  maxDelayMs: number;
}

export const DEFAULT_RETRY: RetryPolicy = { retries: 3, baseDelayMs: 100, maxDelayMs: 2000 };

export interface SessionOptions {
  baseUrl: string;
  token: string;
  retry?: Partial<RetryPolicy>;
  /** Injectable for tests; defaults to global fetch. */
  fetchFn?: typeof fetch;
}

export interface TaskStatus {
  task_id: string;
  state: string;
  attempts: number;
  error: string | null;
}

export interface LatencyBreakdown {
  t_s_ns: number;
  t_f_ns: number;
  t_e_ns: number;
  t_w_ns: number;
  staging_ns: number;
}

export interface TaskResult {
  taskId: string;
  status: "pending" | "success" | "failed";
  value?: unknown;
  error?: string | null;
  latency?: LatencyBreakdown | null;
}

export interface EndpointStatus {
  endpoint_id: string;
  name: string;
  status: string;
  last_heartbeat_ns: number;
}

export interface RegisterFunctionOptions {
  containerType?: string;
  authorizedUsers?: string[];
  allowReexecution?: boolean;
}

export interface GetResultOptions {
  /** Wait this long for a terminal state; 0 = single poll. */
  timeoutMs?: number;
  /** Throw TaskFailedError on failed tasks (default true). */
  throwOnFailure?: boolean;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export class ClientSession {
  readonly baseUrl: string;
  readonly retry: RetryPolicy;
  private readonly token: string;
  private readonly fetchFn: typeof fetch;

  constructor(opts: SessionOptions) {
    this.baseUrl = opts.baseUrl.replace(/\/+$/, "");
    this.token = opts.token;
    this.retry = { ...DEFAULT_RETRY, ...opts.retry };
    this.fetchFn = opts.fetchFn ?? fetch;
  }

  async request(method: string, path: string, body?: unknown): Promise<unknown> {
    let lastFailure = "";
    for (let attempt = 0; ; attempt++) {
      let response: Response | undefined;
      try {
        response = await this.fetchFn(this.baseUrl + path, {
          method,
          headers: {
            Authorization: `Bearer ${this.token}`,
            ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
          },
          body: body !== undefined ? JSON.stringify(body) : undefined,
        });
      } catch (exc) {
        lastFailure = String(exc);
      }
      if (response !== undefined) {
        if (response.ok) return response.json();
        const errBody = await response.json().catch(() => undefined);
        if (response.status < 500) throw errorFromResponse(response.status, errBody);
        lastFailure = `HTTP ${response.status}`;
        if (attempt >= this.retry.retries) throw errorFromResponse(response.status, errBody);
      } else if (attempt >= this.retry.retries) {
        throw new TransportError(`${method} ${path} failed after ${attempt + 1} attempts: ${lastFailure}`);
      }
      await sleep(Math.min(this.retry.baseDelayMs * 2 ** attempt, this.retry.maxDelayMs));
    }
  }

  /** Register a function body (e.g. `{kind: "builtin", name: "echo"}`). */
  async registerFunction(
    name: string,
    body: unknown,
    opts: RegisterFunctionOptions = {},
  ): Promise<string> {
    const resp = (await this.request("POST", "/functions", {
      name,
      body_b64: encodePayload(body),
      container_type: opts.containerType ?? null,
      authorized_users: opts.authorizedUsers ?? [],
      allow_reexecution: opts.allowReexecution ?? true,
    })) as { function_id: string };
    return resp.function_id;
  }

  /** Submit one task; resolves to its task id. */
  async run(functionId: string, endpointId: string, input: unknown): Promise<string> {
    const resp = (await this.request("POST", "/tasks", {
      function_id: functionId,
      endpoint_id: endpointId,
      input_b64: encodePayload(input),
    })) as { task_id: string };
    return resp.task_id;
  }

  async getStatus(taskId: string): Promise<TaskStatus> {
    return (await this.request("GET", `/tasks/${taskId}/status`)) as TaskStatus;
  }

  /** One raw result poll, envelope decoded but failure not thrown. */
  async getResultOnce(taskId: string): Promise<TaskResult> {
    const raw = (await this.request("GET", `/tasks/${taskId}/result`)) as {
      task_id: string;
      status: "pending" | "success" | "failed";
      result_b64: string | null;
      error: string | null;
      latency: LatencyBreakdown | null;
    };
    return {
      taskId: raw.task_id,
      status: raw.status,
      value: raw.result_b64 != null ? decodePayload(raw.result_b64) : undefined,
      error: raw.error,
      latency: raw.latency,
    };
  }

  /** Poll until the task reaches a terminal state, with backoff. */
  async getResult(taskId: string, opts: GetResultOptions = {}): Promise<TaskResult> {
    const timeoutMs = opts.timeoutMs ?? 30_000;
    const deadline = Date.now() + timeoutMs;
    let delay = 20;
    for (;;) {
      const result = await this.getResultOnce(taskId);
      if (result.status !== "pending") {
        if (result.status === "failed" && (opts.throwOnFailure ?? true)) {
          throw new TaskFailedError(taskId, result.error ?? "task failed");
        }
        return result;
      }
      if (Date.now() >= deadline) {
        throw new PollTimeoutError(taskId, `no terminal state within ${timeoutMs}ms`);
      }
      await sleep(delay);
      delay = Math.min(delay * 2, 500);
    }
  }

  /** Start a batch; add tasks, then submit them as one request. */
  batch(): Batch {
    return new Batch(this);
  }

  async listEndpoints(): Promise<EndpointStatus[]> {
    const resp = (await this.request("GET", "/endpoints")) as { endpoints: EndpointStatus[] };
    return resp.endpoints;
  }

  async endpointStatus(endpointId: string): Promise<EndpointStatus> {
    return (await this.request("GET", `/endpoints/${endpointId}/status`)) as EndpointStatus;
  }
}

export interface BatchEntry {
  functionId: string;
  endpointId: string;
  input: unknown;
}

export class Batch {
  private readonly entries: BatchEntry[] = [];
  private taskIds: (string | FedfaasError)[] | null = null;

  constructor(private readonly session: ClientSession) {}

  add(functionId: string, endpointId: string, input: unknown): this {
    if (this.taskIds !== null) throw new FedfaasError("batch already submitted");
    this.entries.push({ functionId, endpointId, input });
    return this;
  }

  get size(): number {
    return this.entries.length;
  }

  /** Submit all entries in one request; per-entry errors stay in place. */
  async submit(): Promise<(string | FedfaasError)[]> {
    if (this.taskIds !== null) throw new FedfaasError("batch already submitted");
    const resp = (await this.session.request("POST", "/batch", {
      tasks: this.entries.map((e) => ({
        function_id: e.functionId,
        endpoint_id: e.endpointId,
        input_b64: encodePayload(e.input),
      })),
    })) as { results: { task_id?: string; error?: { code: string; message: string } }[] };
    this.taskIds = resp.results.map((r) =>
      r.task_id !== undefined ? r.task_id : errorFromResponse(400, r),
    );
    return this.taskIds;
  }

  /** Wait for every submitted task; resolves in submission order. */
  async getBatchResult(opts: GetResultOptions = {}): Promise<TaskResult[]> {
    if (this.taskIds === null) throw new FedfaasError("batch not submitted yet");
    const out: TaskResult[] = [];
    for (const id of this.taskIds) {
      if (id instanceof FedfaasError) throw id;
      out.push(await this.session.getResult(id, opts));
    }
    return out;
  }
}
