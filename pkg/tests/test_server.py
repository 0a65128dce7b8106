"""Server tests: real sockets, pool bounds, admin statements, shutdown."""

import socket
import struct
import threading
import time

import pytest

from minirel.protocol import encode_frame
from minirel.server import (
    DATA_DIR_ENV,
    ServerConfig,
    load_config,
    parse_config_file,
)
from testutil import RawClient


class TestWire:
    def test_empty_table_select(self, start_server, client_factory):
        server = start_server()
        client = client_factory(server)
        assert client.roundtrip("create table t (a int primary key)") == "OK count=0"
        assert client.roundtrip("select a from t") == "OK rows=0\na"

    def test_rows_and_counts(self, start_server, client_factory):
        server = start_server()
        client = client_factory(server)
        client.roundtrip("create table t (a int primary key, b str(6))")
        assert client.roundtrip("insert into t values (1, 'x')") == "OK count=1"
        assert client.roundtrip("insert into t values (2, 'y')") == "OK count=1"
        assert client.roundtrip("select a, b from t") == \
            "OK rows=2\na\tb\n1\tx\n2\ty"
        assert client.roundtrip("delete from t where a = 1") == "OK count=1"
        assert client.roundtrip("select * from t") == "OK rows=1\na\tb\n2\ty"

    def test_error_keeps_connection_open(self, start_server, client_factory):
        server = start_server()
        client = client_factory(server)
        response = client.roundtrip("bogus sql")
        assert response.startswith("ERR SYNTAX ")
        client.roundtrip("create table t (a int primary key)")
        assert client.roundtrip("select a from t") == "OK rows=0\na"

    def test_error_codes(self, start_server, client_factory):
        server = start_server()
        client = client_factory(server)
        assert client.roundtrip("select * from ghost").startswith(
            "ERR UNKNOWN_TABLE ")
        client.roundtrip("create table t (a int primary key, "
                         "check (a >= 0))")
        assert client.roundtrip("insert into t values (-1)").startswith(
            "ERR CONSTRAINT ")
        assert client.roundtrip("insert into t values ('x')").startswith(
            "ERR TYPE_MISMATCH ")
        assert client.roundtrip("select b from t").startswith(
            "ERR UNKNOWN_COLUMN ")
        assert client.roundtrip("create table t (a int)").startswith(
            "ERR TABLE_EXISTS ")

    def test_pipelined_requests(self, start_server, client_factory):
        server = start_server()
        client = client_factory(server)
        client.roundtrip("create table t (a int primary key)")
        batch = (encode_frame(b"insert into t values (7)")
                 + encode_frame(b"select a from t"))
        client.sock.sendall(batch)
        assert client.recv() == "OK count=1"
        assert client.recv() == "OK rows=1\na\n7"

    def test_escaped_cells_on_wire(self, start_server, client_factory):
        server = start_server()
        client = client_factory(server)
        client.roundtrip("create table t (a int primary key, b str(12))")
        client.roundtrip("insert into t values (1, 'a\tb')")
        assert client.roundtrip("select b from t") == "OK rows=1\nb\na\\tb"

    def test_oversized_frame_errors_and_closes(self, start_server,
                                               client_factory):
        server = start_server()
        client = client_factory(server)
        client.sock.sendall(struct.pack(">I", 2**20) + b"x" * 16)
        assert client.recv().startswith("ERR PROTOCOL ")
        assert client.stream.read(1) == b""

    def test_non_utf8_payload_errors_and_closes(self, start_server,
                                                client_factory):
        server = start_server()
        client = client_factory(server)
        client.sock.sendall(encode_frame(b"\xff\xfe select"))
        assert client.recv().startswith("ERR PROTOCOL ")
        assert client.stream.read(1) == b""

    def test_connections_are_independent(self, start_server, client_factory):
        server = start_server()
        first = client_factory(server)
        second = client_factory(server)
        first.roundtrip("create table t (a int primary key)")
        first.send("insert into t values (1)")
        assert second.roundtrip("select a from t") in (
            "OK rows=0\na", "OK rows=1\na\n1")
        assert first.recv() == "OK count=1"
        assert second.roundtrip("select a from t") == "OK rows=1\na\n1"


class TestPool:
    def test_worker_count_bounds_concurrency(self, start_server):
        server = start_server(worker_count=4)
        setup = RawClient(server.host, server.port)
        setup.roundtrip("create table t (a int primary key)")
        setup.roundtrip("insert into t values (1)")
        setup.close()

        failures = []

        def hammer(k):
            try:
                client = RawClient(server.host, server.port)
                try:
                    for _ in range(3):
                        response = client.roundtrip("select a from t")
                        if response != "OK rows=1\na\n1":
                            failures.append(response)
                finally:
                    client.close()
            except OSError as exc:
                failures.append(repr(exc))

        threads = [threading.Thread(target=hammer, args=(k,))
                   for k in range(64)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert failures == []
        assert 1 <= server.engine.gauge.peak <= 4


class TestAdmin:
    def test_disabled_by_default(self, start_server, client_factory):
        server = start_server()
        client = client_factory(server)
        assert client.roundtrip("checkpoint").startswith("ERR ADMIN_DISABLED ")
        assert client.roundtrip("shutdown").startswith("ERR ADMIN_DISABLED ")
        assert client.roundtrip("select a from t").startswith(
            "ERR UNKNOWN_TABLE ")

    def test_checkpoint_persists_indexes(self, start_server, client_factory,
                                         tmp_path):
        server = start_server(admin_enabled=True)
        client = client_factory(server)
        client.roundtrip("create table t (a int primary key)")
        client.roundtrip("create index on t (a)")
        client.roundtrip("insert into t values (1)")
        index_path = tmp_path / "data" / "t.a.idx"
        assert client.roundtrip("CHECKPOINT;") == "OK count=0"
        assert index_path.read_text(encoding="utf-8") == "1\t0\n"

    def test_shutdown_statement_stops_server(self, start_server,
                                             client_factory):
        server = start_server(admin_enabled=True)
        client = client_factory(server)
        assert client.roundtrip(" Shutdown ; ") == "OK count=0"
        assert server.wait(timeout=10)
        with pytest.raises(OSError):
            socket.create_connection((server.host, server.port), timeout=2)


class TestShutdownDrain:
    def test_in_flight_statements_get_responses(self, start_server):
        server = start_server(worker_count=10)
        setup = RawClient(server.host, server.port)
        setup.roundtrip("create table t (a int primary key)")
        setup.close()

        active = [0]
        active_lock = threading.Lock()
        real_execute = server.engine.execute_text

        def slow_execute(text):
            with active_lock:
                active[0] += 1
            time.sleep(0.3)
            return real_execute(text)

        server.engine.execute_text = slow_execute

        responses = {}

        def one_insert(k):
            client = RawClient(server.host, server.port)
            try:
                responses[k] = client.roundtrip(f"insert into t values ({k})")
            except Exception as exc:
                responses[k] = repr(exc)
            finally:
                client.close()

        threads = [threading.Thread(target=one_insert, args=(k,))
                   for k in range(10)]
        for thread in threads:
            thread.start()
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:
            with active_lock:
                if active[0] == 10:
                    break
            time.sleep(0.005)
        with active_lock:
            assert active[0] == 10
        server.shutdown()
        for thread in threads:
            thread.join()
        assert sorted(responses) == list(range(10))
        assert all(text == "OK count=1" for text in responses.values())


class TestRestart:
    def test_restart_preserves_data(self, start_server, client_factory):
        first = start_server(subdir="db")
        client = client_factory(first)
        client.roundtrip("create table t (a int primary key, b str(6))")
        client.roundtrip("create index on t (a)")
        client.roundtrip("insert into t values (1, 'x')")
        client.roundtrip("insert into t values (2, 'y')")
        expected = client.roundtrip("select a, b from t where a >= 1")
        client.close()
        first.shutdown()

        second = start_server(subdir="db")
        reopened = client_factory(second)
        assert reopened.roundtrip("select a, b from t where a >= 1") == expected
        assert reopened.roundtrip("insert into t values (3, 'z')") == \
            "OK count=1"


class TestConfig:
    def test_parse_config_file(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text(
            "# comment\n"
            "\n"
            "port = 5432\n"
            "policy=lfu\n"
            "admin_enabled = yes\n"
            "data_dir = /tmp/db\n",
            encoding="utf-8")
        assert parse_config_file(path) == {
            "port": 5432,
            "policy": "lfu",
            "admin_enabled": True,
            "data_dir": "/tmp/db",
        }

    def test_config_file_rejects_unknown_key(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text("volume=11\n", encoding="utf-8")
        with pytest.raises(ValueError, match="1"):
            parse_config_file(path)

    def test_config_file_rejects_missing_equals(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text("port\n", encoding="utf-8")
        with pytest.raises(ValueError):
            parse_config_file(path)

    def test_load_config_precedence(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text("port=1111\ndata_dir=/from/file\n", encoding="utf-8")
        config = load_config(
            path,
            env={DATA_DIR_ENV: "/from/env"},
            port=2222)
        assert config.port == 2222
        assert config.data_dir == "/from/env"

    def test_load_config_ignores_none_overrides(self, tmp_path):
        config = load_config(None, env={}, port=None, worker_count=3)
        assert config.port == 0
        assert config.worker_count == 3

    def test_defaults(self):
        config = ServerConfig()
        assert config.host == "127.0.0.1"
        assert config.worker_count == 8
        assert config.policy == "lru"
        assert not config.admin_enabled
        assert str(config.resolved_log_path()).endswith("server.log")

    def test_explicit_log_path_wins(self):
        config = ServerConfig(data_dir="/data", log_path="/elsewhere/x.log")
        assert str(config.resolved_log_path()) == "/elsewhere/x.log"

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            ServerConfig(worker_count=0)
        with pytest.raises(ValueError):
            ServerConfig(policy="mru")
