/**
 * Enroll one student in one course over the wire protocol.
 *
 * The enrollment dance mirrors the Python load generator: decrement
 * the course capacity under its CHECK constraint, and only on success
 * record the enrollment row. A CONSTRAINT rejection means the course
 * is full, which is an expected outcome, not a failure.
 *
 * Usage: node dist/enroll.js --port 5432 [--host H] [--course 1] [--student 7]
 */

import { pathToFileURL } from "node:url";
import { Connection } from "./client.js";

export interface EnrollOptions {
  host: string;
  port: number;
  course: number;
  student: number;
}

export function parseArgs(argv: string[]): EnrollOptions {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new Error("usage: enroll --port PORT [--host HOST] [--course ID] [--student ID]");
    }
    values.set(flag.slice(2), value);
  }
  const port = values.get("port");
  if (port === undefined) {
    throw new Error("--port is required");
  }
  const numeric = (name: string, fallback: number): number => {
    const raw = values.get(name);
    const parsed = raw === undefined ? fallback : Number(raw);
    if (!Number.isInteger(parsed)) {
      throw new Error(`--${name} must be an integer`);
    }
    return parsed;
  };
  return {
    host: values.get("host") ?? "127.0.0.1",
    port: numeric("port", 0),
    course: numeric("course", 1),
    student: numeric("student", 1),
  };
}

export type EnrollOutcome = "enrolled" | "full";

/** Attempt the enrollment; throws on anything other than the two expected outcomes. */
export async function enroll(options: EnrollOptions): Promise<EnrollOutcome> {
  const conn = await Connection.connect(options.host, options.port);
  try {
    const decrement = await conn.execute(
      `update course set capacity = capacity - 1 where id = ${options.course}`,
    );
    if (decrement.kind === "error") {
      if (decrement.code === "CONSTRAINT") {
        return "full";
      }
      throw new Error(`${decrement.code}: ${decrement.message}`);
    }
    if (decrement.kind !== "count" || decrement.count !== 1) {
      throw new Error(`course ${options.course} not found`);
    }
    const insert = await conn.execute(
      `insert into enrollment values (${options.student}, ${options.course})`,
    );
    if (insert.kind === "error") {
      throw new Error(`${insert.code}: ${insert.message}`);
    }
    return "enrolled";
  } finally {
    conn.close();
  }
}

export async function main(argv: string[]): Promise<number> {
  let options: EnrollOptions;
  try {
    options = parseArgs(argv);
  } catch (error) {
    process.stderr.write(`${(error as Error).message}\n`);
    return 2;
  }
  try {
    const outcome = await enroll(options);
    if (outcome === "enrolled") {
      process.stdout.write(`enrolled student ${options.student} in course ${options.course}\n`);
    } else {
      process.stdout.write(`rejected: course ${options.course} is full\n`);
    }
    return 0;
  } catch (error) {
    process.stderr.write(`enrollment failed: ${(error as Error).message}\n`);
    return 1;
  }
}

if (import.meta.url === pathToFileURL(process.argv[1]).href) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
