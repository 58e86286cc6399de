import socket
import threading

import pytest

from src.errors import ConfigError, ProtocolError, UsageError
from src.protocol import DocumentStatus
from src.server import CosmosServer
from src.settings import SENTINEL_PROFILE
from src.transport import (
    LENGTH,
    MAX_FRAME,
    CosmosSocketServer,
    InProcessChannel,
    SocketChannel,
    get_channel,
    recv_frame,
    send_frame,
)


def test_get_channel():
    server = CosmosServer()
    assert isinstance(get_channel("inprocess", server=server), InProcessChannel)
    assert isinstance(get_channel("Socket", path="/tmp/x.sock"), SocketChannel)
    with pytest.raises(UsageError):
        get_channel("socket")
    with pytest.raises(UsageError):
        get_channel("inprocess")
    with pytest.raises(UsageError):
        get_channel("carrier-pigeon")


@pytest.mark.parametrize("sms", [False, True])
def test_in_process_round_trip(upload, sms):
    server = CosmosServer()
    doc = InProcessChannel(server).send_context(upload, sms=sms)
    assert doc.status is DocumentStatus.TRAINING
    assert doc.profile == SENTINEL_PROFILE
    assert len(server.store) == 1


def test_frames_over_socket_pair():
    left, right = socket.socketpair()
    with left, right:
        send_frame(left, b"hello")
        send_frame(left, b"")
        assert recv_frame(right) == b"hello"
        assert recv_frame(right) == b""
        left.close()
        assert recv_frame(right) is None


def test_oversized_frames_are_refused():
    left, right = socket.socketpair()
    with left, right:
        with pytest.raises(UsageError):
            send_frame(left, b"x" * (MAX_FRAME + 1))
        left.sendall(LENGTH.pack(MAX_FRAME + 1))
        with pytest.raises(ProtocolError):
            recv_frame(right)


def test_truncated_frame():
    left, right = socket.socketpair()
    with left, right:
        left.sendall(LENGTH.pack(10) + b"abc")
        left.close()
        with pytest.raises(ConnectionError):
            recv_frame(right)


@pytest.fixture
def socket_server(tmp_path):
    path = str(tmp_path / "cosmos.sock")
    cosmos = CosmosServer()
    server = CosmosSocketServer(path, cosmos)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield path, cosmos
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def test_socket_round_trip(socket_server, upload):
    path, cosmos = socket_server
    channel = SocketChannel(path, timeout=5.0)
    assert channel.send_context(upload).status is DocumentStatus.TRAINING
    assert channel.send_context(upload, sms=True).sequence == 1
    assert len(cosmos.store) == 2
    assert b'kind="MALFORMED"' in channel.request(b"<context")


def test_server_refuses_to_replace_a_regular_file(tmp_path):
    path = tmp_path / "cosmos.sock"
    path.write_text("not a socket")
    with pytest.raises(ConfigError):
        CosmosSocketServer(str(path), CosmosServer())
    assert path.read_text() == "not a socket"


def test_server_replaces_a_stale_socket(tmp_path):
    path = str(tmp_path / "cosmos.sock")
    stale = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    stale.bind(path)
    stale.close()
    server = CosmosSocketServer(path, CosmosServer())
    server.server_close()
