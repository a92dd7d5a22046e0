export {
  encodePayload,
  decodePayload,
  envelopeToBytes,
  envelopeFromBytes,
  EnvelopeError,
  TEXT_CODEC,
  BINARY_CODEC,
} from "./envelope.js";
export {
  FedfaasError,
  TransportError,
  UnauthorizedError,
  MalformedBodyError,
  PayloadTooLargeError,
  UnknownFunctionError,
  UnknownEndpointError,
  UnknownTaskError,
  ResultPurgedError,
  ServerError,
  TaskFailedError,
  PollTimeoutError,
  errorFromResponse,
} from "./errors.js";
export {
  ClientSession,
  Batch,
  DEFAULT_RETRY,
} from "./session.js";
export type {
  RetryPolicy,
  SessionOptions,
  TaskStatus,
  TaskResult,
  LatencyBreakdown,
  EndpointStatus,
  RegisterFunctionOptions,
  GetResultOptions,
  BatchEntry,
} from "./session.js";
