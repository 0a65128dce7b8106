"""Client-side tools: session object, REPL, script runner, load generator.

The load generator drives the course-selection workload: every simulated
student tries to decrement the course capacity and, on success, records an
enrollment row. The capacity check on the server makes over-enrollment a
constraint rejection rather than a lost update.
"""

from __future__ import annotations

import argparse
import random
import socket
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO

from .protocol import (
    CountResult,
    ErrorResult,
    ProtocolError,
    Response,
    decode_frame,
    encode_frame,
    parse_response,
)

PROMPT = "minirel> "

COURSE_TABLE_DDL = ("create table course (id int primary key, name str(32), "
                    "capacity int, check (capacity >= 0))")
ENROLLMENT_TABLE_DDL = ("create table enrollment "
                        "(student int primary key, course int)")


class ClientSession:
    """One TCP connection carrying length-prefixed statements."""

    def __init__(self, host: str, port: int) -> None:
        self._sock = socket.create_connection((host, port))
        self._stream = self._sock.makefile("rb")

    def execute(self, statement: str) -> Response:
        self._sock.sendall(encode_frame(statement.encode("utf-8")))
        payload = decode_frame(self._stream)
        return parse_response(payload.decode("utf-8"))

    def close(self) -> None:
        try:
            self._stream.close()
        finally:
            try:
                self._sock.close()
            except OSError:
                pass

    def __enter__(self) -> "ClientSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def format_response(response: Response) -> str:
    """Render a response for humans; row results become an aligned table."""
    if isinstance(response, CountResult):
        return f"count: {response.count}"
    if isinstance(response, ErrorResult):
        if response.message:
            return f"ERR {response.code} {response.message}"
        return f"ERR {response.code}"
    table = [response.columns, *response.rows]
    widths = [max(len(row[i]) for row in table)
              for i in range(len(response.columns))]
    lines = ["  ".join(cell.ljust(width)
                       for cell, width in zip(row, widths)).rstrip()
             for row in table]
    lines.insert(1, "  ".join("-" * width for width in widths))
    lines.append(f"({len(response.rows)} rows)")
    return "\n".join(lines)


def repl(host: str, port: int, input_stream: Optional[TextIO] = None,
         output_stream: Optional[TextIO] = None) -> int:
    r"""Read one statement per line and print responses until EOF or \q."""
    stdin = sys.stdin if input_stream is None else input_stream
    stdout = sys.stdout if output_stream is None else output_stream
    with ClientSession(host, port) as session:
        while True:
            stdout.write(PROMPT)
            stdout.flush()
            raw = stdin.readline()
            if not raw:
                stdout.write("\n")
                return 0
            line = raw.strip()
            if not line:
                continue
            if line == "\\q":
                return 0
            try:
                response = session.execute(line)
            except (ProtocolError, OSError) as exc:
                stdout.write(f"connection error: {exc}\n")
                return 1
            stdout.write(format_response(response) + "\n")


@dataclass(frozen=True)
class ScriptReport:
    executed: int
    errors: int
    first_error_line: Optional[int]


def run_script(path, host: str, port: int, keep_going: bool = False,
               output_stream: Optional[TextIO] = None) -> ScriptReport:
    """Execute a statement-per-line file, stopping at the first error.

    Blank lines and `--` comment lines are skipped but still counted for
    the reported line numbers. With `keep_going` errors are reported and
    execution continues.
    """
    stdout = sys.stdout if output_stream is None else output_stream
    executed = 0
    errors = 0
    first_error_line: Optional[int] = None
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    with ClientSession(host, port) as session:
        for lineno, raw in enumerate(lines, start=1):
            statement = raw.strip()
            if not statement or statement.startswith("--"):
                continue
            response = session.execute(statement)
            executed += 1
            if isinstance(response, ErrorResult):
                errors += 1
                if first_error_line is None:
                    first_error_line = lineno
                stdout.write(
                    f"{path}:{lineno}: {format_response(response)}\n")
                if not keep_going:
                    break
            else:
                stdout.write(format_response(response) + "\n")
    return ScriptReport(executed, errors, first_error_line)


@dataclass(frozen=True)
class LoadScenario:
    host: str
    port: int
    capacity: int = 50
    clients: int = 200
    course_id: int = 1
    seed: int = 0


@dataclass(frozen=True)
class LoadReport:
    attempts: int
    successes: int
    constraint_rejections: int
    errors: int
    elapsed: float

    @property
    def throughput(self) -> float:
        return self.attempts / self.elapsed if self.elapsed > 0 else 0.0


def prepare_course(host: str, port: int, capacity: int,
                   course_id: int = 1) -> None:
    """Create the course and enrollment tables and seed one course row."""
    with ClientSession(host, port) as session:
        for statement in (
                COURSE_TABLE_DDL,
                ENROLLMENT_TABLE_DDL,
                f"insert into course values ({course_id}, 'intro', {capacity})"):
            response = session.execute(statement)
            if isinstance(response, ErrorResult):
                raise RuntimeError(
                    f"setup failed: {response.code} {response.message}")


def run_load(scenario: LoadScenario) -> LoadReport:
    """Run one enrollment attempt per simulated student, concurrently."""
    outcomes: list[str] = []
    outcome_lock = threading.Lock()
    barrier = threading.Barrier(scenario.clients)
    decrement = (f"update course set capacity = capacity - 1 "
                 f"where id = {scenario.course_id}")

    def attempt(student: int) -> None:
        rng = random.Random(f"{scenario.seed}:{student}")
        outcome = "error"
        try:
            with ClientSession(scenario.host, scenario.port) as session:
                barrier.wait()
                time.sleep(rng.random() * 0.002)
                response = session.execute(decrement)
                if isinstance(response, CountResult) and response.count == 1:
                    enroll = session.execute(
                        f"insert into enrollment values "
                        f"({student}, {scenario.course_id})")
                    if isinstance(enroll, CountResult) and enroll.count == 1:
                        outcome = "success"
                elif (isinstance(response, ErrorResult)
                      and response.code == "CONSTRAINT"):
                    outcome = "rejection"
        except Exception:
            outcome = "error"
        with outcome_lock:
            outcomes.append(outcome)

    threads = [threading.Thread(target=attempt, args=(student,))
               for student in range(1, scenario.clients + 1)]
    started = time.perf_counter()
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    elapsed = time.perf_counter() - started
    return LoadReport(
        attempts=len(outcomes),
        successes=outcomes.count("success"),
        constraint_rejections=outcomes.count("rejection"),
        errors=outcomes.count("error"),
        elapsed=elapsed,
    )


def _print_report(report: LoadReport, stdout: TextIO) -> None:
    stdout.write(f"attempts: {report.attempts}\n")
    stdout.write(f"successes: {report.successes}\n")
    stdout.write(f"constraint_rejections: {report.constraint_rejections}\n")
    stdout.write(f"errors: {report.errors}\n")
    stdout.write(f"elapsed: {report.elapsed:.3f}s\n")
    stdout.write(f"throughput: {report.throughput:.1f} attempts/s\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="minirel client")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--script", help="run a statement-per-line file")
    parser.add_argument("--keep-going", action="store_true",
                        help="continue a script past errors")
    parser.add_argument("--loadgen", action="store_true",
                        help="run the course-selection load generator")
    parser.add_argument("--capacity", type=int, default=50)
    parser.add_argument("--clients", type=int, default=200)
    parser.add_argument("--course-id", type=int, default=1,
                        dest="course_id")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if args.script and args.loadgen:
        parser.error("--script and --loadgen are mutually exclusive")
    if args.script:
        report = run_script(args.script, args.host, args.port,
                            keep_going=args.keep_going)
        return 1 if report.errors else 0
    if args.loadgen:
        prepare_course(args.host, args.port, args.capacity, args.course_id)
        load = run_load(LoadScenario(
            host=args.host, port=args.port, capacity=args.capacity,
            clients=args.clients, course_id=args.course_id, seed=args.seed))
        _print_report(load, sys.stdout)
        conserved = (load.successes + load.constraint_rejections
                     + load.errors == load.attempts)
        return 0 if conserved and load.errors == 0 else 1
    return repl(args.host, args.port)


if __name__ == "__main__":
    raise SystemExit(main())
