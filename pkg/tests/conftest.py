"""Shared fixtures: servers on ephemeral ports over temporary data dirs."""

import pytest

from minirel.server import Server, ServerConfig
from testutil import RawClient


@pytest.fixture
def start_server(tmp_path):
    servers = []

    def make(subdir="data", **kwargs):
        config = ServerConfig(port=0, data_dir=str(tmp_path / subdir),
                              **kwargs)
        server = Server(config).start()
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.shutdown()


@pytest.fixture
def client_factory():
    clients = []

    def connect(server):
        client = RawClient(server.host, server.port)
        clients.append(client)
        return client

    yield connect
    for client in clients:
        try:
            client.close()
        except OSError:
            pass
