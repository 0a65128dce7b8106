#!/usr/bin/env python3
"""Start a throwaway server and run the course-selection scenario on it."""

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from minirel.client import LoadScenario, prepare_course, run_load
from minirel.server import Server, ServerConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="course-selection demo")
    parser.add_argument("--capacity", type=int, default=50)
    parser.add_argument("--clients", type=int, default=200)
    parser.add_argument("--workers", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    data_dir = tempfile.mkdtemp(prefix="minirel-demo-")
    server = Server(ServerConfig(port=0, data_dir=data_dir,
                                 worker_count=args.workers)).start()
    print(f"server on {server.host}:{server.port}, data in {data_dir}")
    try:
        prepare_course(server.host, server.port, args.capacity)
        report = run_load(LoadScenario(
            host=server.host, port=server.port, capacity=args.capacity,
            clients=args.clients, seed=args.seed))
    finally:
        server.shutdown()

    print(f"attempts: {report.attempts}")
    print(f"successes: {report.successes}")
    print(f"constraint_rejections: {report.constraint_rejections}")
    print(f"errors: {report.errors}")
    print(f"elapsed: {report.elapsed:.3f}s")
    print(f"throughput: {report.throughput:.1f} attempts/s")
    expected = min(args.capacity, args.clients)
    consistent = report.successes == expected and report.errors == 0
    print("consistent" if consistent else "INCONSISTENT")
    return 0 if consistent else 1


if __name__ == "__main__":
    raise SystemExit(main())
