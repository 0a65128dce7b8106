/**
 * Client for the minirel wire protocol.
 *
 * Every request and response travels as a frame: a 4-byte big-endian
 * payload length followed by that many bytes of UTF-8 text. Requests
 * carry one SQL statement; responses carry one of three shapes:
 *
 *   OK rows=N\n<header>\n<row>...   tab-separated, cells escaped
 *   OK count=N
 *   ERR <CODE> <message>
 *
 * The parser here mirrors the server's grammar exactly, including the
 * strict line counts and the cell escape table, so that a frame built
 * by this client is byte-identical to one built by the Python client
 * for the same statement.
 */

import * as net from "node:net";

/** Largest payload either side will accept, in bytes. */
export const MAX_PAYLOAD = 2 ** 20 - 1;

const HEADER_SIZE = 4;

const utf8Strict = new TextDecoder("utf-8", { fatal: true });

/** Raised when a peer violates the framing or response grammar. */
export class ProtocolViolation extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolViolation";
  }
}

/** Prefix a payload with its 4-byte big-endian length. */
export function encodeFrame(payload: Buffer): Buffer {
  if (payload.length > MAX_PAYLOAD) {
    throw new ProtocolViolation(`payload of ${payload.length} bytes exceeds ${MAX_PAYLOAD}`);
  }
  const frame = Buffer.allocUnsafe(HEADER_SIZE + payload.length);
  frame.writeUInt32BE(payload.length, 0);
  payload.copy(frame, HEADER_SIZE);
  return frame;
}

/**
 * Incremental frame reassembler for a byte stream.
 *
 * Feed it chunks as they arrive; it returns the payloads of every
 * frame completed so far. Partial frames stay buffered between calls.
 */
export class FrameDecoder {
  private buffered: Buffer = Buffer.alloc(0);

  feed(chunk: Buffer): Buffer[] {
    this.buffered = this.buffered.length === 0 ? chunk : Buffer.concat([this.buffered, chunk]);
    const frames: Buffer[] = [];
    while (this.buffered.length >= HEADER_SIZE) {
      const length = this.buffered.readUInt32BE(0);
      if (length > MAX_PAYLOAD) {
        throw new ProtocolViolation(`declared payload of ${length} bytes exceeds ${MAX_PAYLOAD}`);
      }
      if (this.buffered.length < HEADER_SIZE + length) {
        break;
      }
      frames.push(this.buffered.subarray(HEADER_SIZE, HEADER_SIZE + length));
      this.buffered = this.buffered.subarray(HEADER_SIZE + length);
    }
    return frames;
  }
}

/** A statement that produced rows. */
export interface RowsResult {
  kind: "rows";
  columns: string[];
  rows: string[][];
}

/** A statement that produced a row count. */
export interface CountResult {
  kind: "count";
  count: number;
}

/** A statement the server rejected. */
export interface ErrorResult {
  kind: "error";
  code: string;
  message: string;
}

export type Response = RowsResult | CountResult | ErrorResult;

/** Undo the cell escapes: \n, \t and backslash itself. */
export function unescapeCell(cell: string): string {
  if (!cell.includes("\\")) {
    return cell;
  }
  let out = "";
  let i = 0;
  while (i < cell.length) {
    const ch = cell[i];
    if (ch !== "\\") {
      out += ch;
      i += 1;
      continue;
    }
    const next = cell[i + 1];
    if (next === "n") {
      out += "\n";
    } else if (next === "t") {
      out += "\t";
    } else if (next === "\\") {
      out += "\\";
    } else if (next === undefined) {
      throw new ProtocolViolation("dangling backslash in cell");
    } else {
      throw new ProtocolViolation(`bad escape \\${next} in cell`);
    }
    i += 2;
  }
  return out;
}

// Python's str.split(sep, maxsplit): at most maxsplit cuts, remainder intact.
function splitLimit(text: string, sep: string, maxSplits: number): string[] {
  const parts: string[] = [];
  let start = 0;
  while (parts.length < maxSplits) {
    const at = text.indexOf(sep, start);
    if (at < 0) {
      break;
    }
    parts.push(text.slice(start, at));
    start = at + sep.length;
  }
  parts.push(text.slice(start));
  return parts;
}

// Counts on the wire are plain digits with no leading zeros.
function parseCount(text: string): number {
  if (!/^[0-9]+$/.test(text) || (text.length > 1 && text.startsWith("0"))) {
    throw new ProtocolViolation(`malformed count ${JSON.stringify(text)}`);
  }
  return Number(text);
}

/** Parse one response payload into a result object. */
export function parseResponse(payload: Buffer): Response {
  let text: string;
  try {
    text = utf8Strict.decode(payload);
  } catch {
    throw new ProtocolViolation("response is not valid UTF-8");
  }
  const lines = text.split("\n");
  const status = lines[0];

  if (status.startsWith("OK rows=")) {
    const expected = parseCount(status.slice("OK rows=".length));
    if (lines.length !== expected + 2) {
      throw new ProtocolViolation(`rows response has ${lines.length} lines, wanted ${expected + 2}`);
    }
    const columns = lines[1].split("\t").map(unescapeCell);
    const rows: string[][] = [];
    for (const line of lines.slice(2)) {
      const cells = line.split("\t");
      if (cells.length !== columns.length) {
        throw new ProtocolViolation(`row has ${cells.length} cells, header has ${columns.length}`);
      }
      rows.push(cells.map(unescapeCell));
    }
    return { kind: "rows", columns, rows };
  }

  if (status.startsWith("OK count=")) {
    if (lines.length !== 1) {
      throw new ProtocolViolation("count response must be a single line");
    }
    return { kind: "count", count: parseCount(status.slice("OK count=".length)) };
  }

  if (status.startsWith("ERR")) {
    if (lines.length !== 1) {
      throw new ProtocolViolation("error response must be a single line");
    }
    const parts = splitLimit(status, " ", 2);
    if (parts[0] !== "ERR" || parts.length < 2 || parts[1] === "") {
      throw new ProtocolViolation(`malformed error response ${JSON.stringify(status)}`);
    }
    const message = parts.length === 3 ? unescapeCell(parts[2]) : "";
    return { kind: "error", code: parts[1], message };
  }

  throw new ProtocolViolation(`unrecognized response ${JSON.stringify(status)}`);
}

interface Waiter {
  resolve: (response: Response) => void;
  reject: (error: Error) => void;
}

/**
 * One TCP connection to a minirel server.
 *
 * Statements are written as frames and responses matched to callers
 * in FIFO order, which is exactly the order the server produces them.
 */
export class Connection {
  private readonly socket: net.Socket;
  private readonly decoder = new FrameDecoder();
  private readonly waiters: Waiter[] = [];
  private closed = false;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on("data", (chunk: Buffer) => this.onData(chunk));
    socket.on("error", (error: Error) => this.failAll(error));
    socket.on("close", () => this.failAll(new Error("connection closed")));
  }

  /** Open a connection, resolving once the TCP handshake completes. */
  static connect(host: string, port: number): Promise<Connection> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port });
      const onError = (error: Error) => reject(error);
      socket.once("error", onError);
      socket.once("connect", () => {
        socket.off("error", onError);
        resolve(new Connection(socket));
      });
    });
  }

  /** Send one SQL statement and resolve with its parsed response. */
  execute(sql: string): Promise<Response> {
    if (this.closed) {
      return Promise.reject(new Error("connection is closed"));
    }
    let frame: Buffer;
    try {
      frame = encodeFrame(Buffer.from(sql, "utf8"));
    } catch (error) {
      return Promise.reject(error as Error);
    }
    return new Promise((resolve, reject) => {
      this.waiters.push({ resolve, reject });
      this.socket.write(frame);
    });
  }

  close(): void {
    this.closed = true;
    this.socket.destroy();
  }

  private onData(chunk: Buffer): void {
    let frames: Buffer[];
    try {
      frames = this.decoder.feed(chunk);
    } catch (error) {
      this.failAll(error as Error);
      this.socket.destroy();
      return;
    }
    for (const frame of frames) {
      const waiter = this.waiters.shift();
      if (waiter === undefined) {
        this.failAll(new ProtocolViolation("unsolicited response frame"));
        this.socket.destroy();
        return;
      }
      try {
        waiter.resolve(parseResponse(frame));
      } catch (error) {
        waiter.reject(error as Error);
      }
    }
  }

  private failAll(error: Error): void {
    this.closed = true;
    while (this.waiters.length > 0) {
      this.waiters.shift()!.reject(error);
    }
  }
}
