"""TCP front door: framing, a bounded pre-created worker pool, shutdown.

One acceptor thread feeds connections to a fixed pool of workers created at
startup; each connection is owned by exactly one worker at a time, and the
worker loops decode, parse, execute, encode until the client closes. The
pool size therefore bounds how many statements ever execute concurrently.
"""

from __future__ import annotations

import argparse
import os
import queue
import socket
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .automaton import DEFAULT_STEP_LIMIT
from .cache import CacheConfig, POLICIES
from .engine import LOG_FILENAME, Engine, View
from .errors import AdminDisabledError, MinirelError
from .protocol import (
    ConnectionClosed,
    CountResult,
    ErrorResult,
    ProtocolError,
    Response,
    RowsResult,
    decode_frame,
    encode_frame,
    render_response,
)

DATA_DIR_ENV = "MINIREL_DATA_DIR"


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 0
    worker_count: int = 8
    accept_backlog: int = 256
    page_size: int = 64
    capacity: int = 128
    policy: str = "lru"
    step_limit: int = DEFAULT_STEP_LIMIT
    data_dir: str = "."
    log_path: Optional[str] = None
    admin_enabled: bool = False

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")

    def resolved_log_path(self) -> Path:
        if self.log_path is not None:
            return Path(self.log_path)
        return Path(self.data_dir) / LOG_FILENAME


_FIELD_PARSERS = {
    "host": str,
    "port": int,
    "worker_count": int,
    "accept_backlog": int,
    "page_size": int,
    "capacity": int,
    "policy": str,
    "step_limit": int,
    "data_dir": str,
    "log_path": str,
    "admin_enabled": _parse_bool,
}


def parse_config_file(path) -> dict:
    """Read `key=value` lines; blank lines and `#` comments are ignored."""
    values: dict = {}
    for lineno, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in _FIELD_PARSERS:
            raise ValueError(f"{path}:{lineno}: expected <known key>=<value>, "
                             f"got {raw!r}")
        values[key] = _FIELD_PARSERS[key](value)
    return values


def load_config(config_file=None, env=None, **overrides) -> ServerConfig:
    """Defaults, then config file, then MINIREL_DATA_DIR, then overrides."""
    environment = os.environ if env is None else env
    values: dict = {}
    if config_file is not None:
        values.update(parse_config_file(config_file))
    if DATA_DIR_ENV in environment:
        values["data_dir"] = environment[DATA_DIR_ENV]
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ServerConfig(**values)


def view_result(view: View) -> RowsResult:
    """Stringify a view for the wire; INT cells become decimal text."""
    rows = tuple(
        tuple(str(cell) if isinstance(cell, int) else cell for cell in row)
        for row in view.rows)
    return RowsResult(tuple(view.column_names()), rows)


class Server:
    """A listening socket plus `worker_count` pre-created worker threads."""

    def __init__(self, config: ServerConfig) -> None:
        self.config = config
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        self.engine = Engine(
            data_dir,
            cache_config=CacheConfig(config.page_size, config.capacity,
                                     config.policy),
            log_path=config.resolved_log_path(),
            step_limit=config.step_limit)
        self._listener = socket.create_server(
            (config.host, config.port), backlog=config.accept_backlog)
        self.host, self.port = self._listener.getsockname()[:2]
        self._queue: "queue.Queue[Optional[socket.socket]]" = queue.Queue()
        self._stopping = threading.Event()
        self._done = threading.Event()
        self._shutdown_lock = threading.Lock()
        self._shutting_down = False
        self._conn_lock = threading.Lock()
        self._connections: set[socket.socket] = set()
        self._workers = [
            threading.Thread(target=self._worker_loop,
                             name=f"minirel-worker-{i}", daemon=True)
            for i in range(config.worker_count)]
        self._acceptor = threading.Thread(
            target=self._accept_loop, name="minirel-acceptor", daemon=True)

    def start(self) -> "Server":
        for worker in self._workers:
            worker.start()
        self._acceptor.start()
        return self

    def wait(self, timeout: Optional[float] = None) -> bool:
        """Block until a SHUTDOWN statement or another thread stops us."""
        return self._done.wait(timeout)

    def shutdown(self) -> None:
        """Stop accepting, drain in-flight statements, persist, close."""
        with self._shutdown_lock:
            if self._shutting_down:
                self._done.wait()
                return
            self._shutting_down = True
        self._stopping.set()
        # closing the listener does not wake a blocked accept(); connect
        # to ourselves so the acceptor re-checks the stopping flag
        try:
            with socket.create_connection((self.host, self.port), timeout=1):
                pass
        except OSError:
            pass
        self._acceptor.join()
        try:
            self._listener.close()
        except OSError:
            pass
        # Half-close every connection's read side: workers blocked waiting
        # for a next request see EOF, while a response in flight still goes
        # out on the intact write side.
        with self._conn_lock:
            for conn in list(self._connections):
                try:
                    conn.shutdown(socket.SHUT_RD)
                except OSError:
                    pass
        for _ in self._workers:
            self._queue.put(None)
        for worker in self._workers:
            worker.join()
        self.engine.close()
        self._done.set()

    # -- internal ------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                break
            self._queue.put(conn)

    def _worker_loop(self) -> None:
        while True:
            conn = self._queue.get()
            if conn is None:
                return
            self._serve_connection(conn)

    def _serve_connection(self, conn: socket.socket) -> None:
        with self._conn_lock:
            self._connections.add(conn)
        stream = conn.makefile("rb")
        try:
            while not self._stopping.is_set():
                try:
                    payload = decode_frame(stream)
                except ConnectionClosed:
                    return
                except ProtocolError as exc:
                    try:
                        self._send(conn, ErrorResult(exc.wire_code, str(exc)))
                    except OSError:
                        pass
                    return
                except OSError:
                    return
                response, action = self._handle(payload)
                try:
                    self._send(conn, response)
                except OSError:
                    return
                if action == "close":
                    return
                if action == "shutdown":
                    self._request_stop()
                    return
        finally:
            with self._conn_lock:
                self._connections.discard(conn)
            stream.close()
            try:
                conn.close()
            except OSError:
                pass

    def _handle(self, payload: bytes) -> tuple[Response, Optional[str]]:
        try:
            text = payload.decode("utf-8")
        except UnicodeDecodeError as exc:
            return ErrorResult("PROTOCOL", f"payload is not UTF-8: {exc}"), "close"
        admin = text.strip().rstrip(";").strip().lower()
        if admin in ("checkpoint", "shutdown"):
            if not self.config.admin_enabled:
                exc = AdminDisabledError("administrative statements are disabled")
                return ErrorResult(exc.wire_code, str(exc)), None
            if admin == "checkpoint":
                self.engine.checkpoint()
                return CountResult(0), None
            return CountResult(0), "shutdown"
        try:
            result = self.engine.execute_text(text)
        except MinirelError as exc:
            return ErrorResult(exc.wire_code, str(exc)), None
        except Exception as exc:  # a bug must not take the worker down
            return ErrorResult("INTERNAL",
                               f"{type(exc).__name__}: {exc}"), None
        if isinstance(result, View):
            return view_result(result), None
        return CountResult(result.count), None

    @staticmethod
    def _send(conn: socket.socket, response: Response) -> None:
        conn.sendall(encode_frame(render_response(response).encode("utf-8")))

    def _request_stop(self) -> None:
        # shutdown joins the workers, so it must not run on a worker thread
        threading.Thread(target=self.shutdown, daemon=True).start()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="minirel database server")
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--worker-count", type=int, dest="worker_count")
    parser.add_argument("--backlog", type=int, dest="accept_backlog")
    parser.add_argument("--page-size", type=int, dest="page_size")
    parser.add_argument("--capacity", type=int)
    parser.add_argument("--policy", choices=POLICIES)
    parser.add_argument("--step-limit", type=int, dest="step_limit")
    parser.add_argument("--data-dir", dest="data_dir")
    parser.add_argument("--log-path", dest="log_path")
    parser.add_argument("--admin", action="store_const", const=True,
                        dest="admin_enabled",
                        help="enable CHECKPOINT and SHUTDOWN statements")
    args = vars(parser.parse_args(argv))
    config = load_config(args.pop("config"), **args)
    server = Server(config).start()
    print(f"listening on {server.host}:{server.port}", flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
