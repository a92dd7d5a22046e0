/**
 * Typed exceptions mirroring the service's REST error codes.
 *
 * Every REST error body is `{"error": {"code", "message"}}`; `code` maps
 * one-to-one onto a class here so callers can catch specific failures.
 */

export class FedfaasError extends Error {
  constructor(
    message: string,
    public readonly code: string = "FedfaasError",
    public readonly status: number = 0,
  ) {
    super(message);
    this.name = new.target.name;
  }
}

/** Transport failure or exhausted retries; no HTTP response to map. */
export class TransportError extends FedfaasError {
  constructor(message: string) {
    super(message, "TransportError", 0);
  }
}

export class UnauthorizedError extends FedfaasError {}
export class MalformedBodyError extends FedfaasError {}
export class PayloadTooLargeError extends FedfaasError {}
export class UnknownFunctionError extends FedfaasError {}
export class UnknownEndpointError extends FedfaasError {}
export class UnknownTaskError extends FedfaasError {}
export class ResultPurgedError extends FedfaasError {}
export class ServerError extends FedfaasError {}

/** The task finished with status "failed"; carries the remote error text. */
export class TaskFailedError extends FedfaasError {
  constructor(
    public readonly taskId: string,
    message: string,
  ) {
    super(message, "TaskFailed", 0);
  }
}

/** getResult gave up waiting for a terminal state. */
export class PollTimeoutError extends FedfaasError {
  constructor(
    public readonly taskId: string,
    message: string,
  ) {
    super(message, "PollTimeout", 0);
  }
}

const BY_CODE: Record<string, new (message: string, code: string, status: number) => FedfaasError> =
  {
    Unauthorized: UnauthorizedError,
    MalformedBody: MalformedBodyError,
    PayloadTooLarge: PayloadTooLargeError,
    UnknownFunction: UnknownFunctionError,
    UnknownEndpoint: UnknownEndpointError,
    UnknownTask: UnknownTaskError,
    ResultPurged: ResultPurgedError,
    ServiceError: ServerError,
  };

export function errorFromResponse(status: number, body: unknown): FedfaasError {
  let code = "ServiceError";
  let message = `HTTP ${status}`;
  if (body && typeof body === "object" && "error" in body) {
    const err = (body as { error?: { code?: string; message?: string } }).error;
    if (err?.code) code = err.code;
    if (err?.message) message = err.message;
  }
  const cls = BY_CODE[code] ?? (status >= 500 ? ServerError : FedfaasError);
  return new cls(message, code, status);
}
