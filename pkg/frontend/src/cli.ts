#!/usr/bin/env node
/**
 * Console entry mirroring the service CLI's run/status/result verbs.
 *
 *   fedfaas-ts run --function-id <id> --endpoint <id> [--input JSON]
 *   fedfaas-ts status <task-id>
 *   fedfaas-ts result <task-id> [--timeout seconds]
 *
 * Connection settings come from --url/--token or FEDFAAS_URL/FEDFAAS_TOKEN.
 * Exit codes: 0 success, 1 runtime error (task failed, service down),
 * 2 user error (bad arguments, unknown ids).
 */

import { FedfaasError, TaskFailedError, TransportError } from "./errors.js";
import { ClientSession } from "./session.js";

interface ParsedArgs {
  positional: string[];
  flags: Record<string, string>;
}

function parseArgs(argv: string[]): ParsedArgs {
  const positional: string[] = [];
  const flags: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]!;
    if (arg.startsWith("--")) {
      const eq = arg.indexOf("=");
      if (eq >= 0) {
        flags[arg.slice(2, eq)] = arg.slice(eq + 1);
      } else {
        const next = argv[i + 1];
        if (next !== undefined && !next.startsWith("--")) {
          flags[arg.slice(2)] = next;
          i++;
        } else {
          flags[arg.slice(2)] = "true";
        }
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, flags };
}

function usageError(message: string): never {
  process.stderr.write(`error: ${message}\n`);
  process.exit(2);
}

function parseInput(raw: string | undefined): unknown {
  if (raw === undefined) return null;
  try {
    return JSON.parse(raw);
  } catch {
    return raw; // plain string input
  }
}

async function main(): Promise<void> {
  const { positional, flags } = parseArgs(process.argv.slice(2));
  const command = positional[0];
  const baseUrl = flags["url"] ?? process.env["FEDFAAS_URL"] ?? "http://127.0.0.1:8000";
  const token = flags["token"] ?? process.env["FEDFAAS_TOKEN"];
  if (!token) usageError("no token: pass --token or set FEDFAAS_TOKEN");
  const session = new ClientSession({ baseUrl, token });

  switch (command) {
    case "run": {
      const functionId = flags["function-id"] ?? usageError("--function-id is required");
      const endpointId = flags["endpoint"] ?? usageError("--endpoint is required");
      const taskId = await session.run(functionId, endpointId, parseInput(flags["input"]));
      process.stdout.write(`${taskId}\n`);
      return;
    }
    case "status": {
      const taskId = positional[1] ?? usageError("usage: status <task-id>");
      const status = await session.getStatus(taskId);
      process.stdout.write(`${JSON.stringify(status, null, 2)}\n`);
      return;
    }
    case "result": {
      const taskId = positional[1] ?? usageError("usage: result <task-id>");
      const timeoutMs = 1000 * Number(flags["timeout"] ?? "30");
      if (Number.isNaN(timeoutMs)) usageError("--timeout must be a number of seconds");
      const result = await session.getResult(taskId, { timeoutMs });
      process.stdout.write(`${JSON.stringify(result.value ?? null, null, 2)}\n`);
      return;
    }
    default:
      usageError(`unknown command ${command ?? "(none)"}; expected run, status, or result`);
  }
}

main().catch((exc: unknown) => {
  if (exc instanceof TaskFailedError || exc instanceof TransportError) {
    process.stderr.write(`error: ${exc.message}\n`);
    process.exit(1);
  }
  if (exc instanceof FedfaasError) {
    process.stderr.write(`error: ${exc.code}: ${exc.message}\n`);
    process.exit(exc.status >= 500 ? 1 : 2);
  }
  process.stderr.write(`error: ${String(exc)}\n`);
  process.exit(1);
});
