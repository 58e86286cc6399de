"""
Request channels between COSMOS clients and the server
"""

import logging
import os
import socket
import socketserver
import stat
import struct
from typing import Optional

from .errors import ConfigError, ProtocolError, ProtocolErrorKind, UsageError
from .protocol import (
    ContextUpload,
    SettingsDocument,
    build_context_xml,
    decode_sms_reply,
    encode_context_sms,
    parse_response,
)
from .server import SMS_MARKER, CosmosServer

logger = logging.getLogger(__name__)

LENGTH = struct.Struct(">I")
MAX_FRAME = 1 << 20


def send_frame(sock: socket.socket, body: bytes) -> None:
    if len(body) > MAX_FRAME:
        raise UsageError(f"frame of {len(body)} bytes exceeds {MAX_FRAME}")
    sock.sendall(LENGTH.pack(len(body)) + body)


def _recv_exact(sock: socket.socket, size: int) -> Optional[bytes]:
    chunks = []
    remaining = size
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> Optional[bytes]:
    """Next frame, or None when the peer closed cleanly."""
    header = _recv_exact(sock, LENGTH.size)
    if header is None:
        return None
    (size,) = LENGTH.unpack(header)
    if size > MAX_FRAME:
        raise ProtocolError(ProtocolErrorKind.MALFORMED, f"frame of {size} bytes exceeds {MAX_FRAME}")
    body = _recv_exact(sock, size)
    if body is None:
        raise ConnectionError("connection closed mid-frame")
    return body


class Channel:
    """Base class for request channels"""

    def request(self, body: bytes) -> bytes:
        """Send one request body and return the reply body"""
        raise NotImplementedError

    def send_context(self, upload: ContextUpload, sms: bool = False) -> SettingsDocument:
        if sms:
            reply = self.request(SMS_MARKER + encode_context_sms(upload).encode("ascii"))
            if not reply.startswith(SMS_MARKER):
                raise ProtocolError(ProtocolErrorKind.MALFORMED, "expected an SMS reply")
            return decode_sms_reply(reply[len(SMS_MARKER):].decode("ascii"))
        return parse_response(self.request(build_context_xml(upload)))


class SocketChannel(Channel):
    """Length-prefixed frames over a Unix stream socket"""

    def __init__(self, path: str, timeout: float = 10.0):
        self.path = path
        self.timeout = timeout

    def request(self, body: bytes) -> bytes:
        with socket.socket(socket.AF_UNIX, socket.SOCK_STREAM) as sock:
            sock.settimeout(self.timeout)
            sock.connect(self.path)
            send_frame(sock, body)
            reply = recv_frame(sock)
        if reply is None:
            raise ConnectionError("server closed the connection without replying")
        return reply


class InProcessChannel(Channel):
    """Talks to a server object directly; used by the simulator"""

    def __init__(self, server: CosmosServer):
        self.server = server

    def request(self, body: bytes) -> bytes:
        return self.server.handle_message(body)


def get_channel(name: str, path: Optional[str] = None, server: Optional[CosmosServer] = None) -> Channel:
    """Factory function to get a request channel"""
    if name.lower() == "socket":
        if not path:
            raise UsageError("a socket channel needs a path")
        return SocketChannel(path)
    elif name.lower() == "inprocess":
        if server is None:
            raise UsageError("an in-process channel needs a server")
        return InProcessChannel(server)
    else:
        raise UsageError(f"Unsupported channel: {name}")


class _FrameHandler(socketserver.BaseRequestHandler):
    def handle(self):
        cosmos: CosmosServer = self.server.cosmos
        while True:
            try:
                body = recv_frame(self.request)
            except (ProtocolError, ConnectionError) as e:
                logger.warning("Dropping connection: %s", e)
                return
            if body is None:
                return
            send_frame(self.request, cosmos.handle_message(body))


def _remove_stale_socket(path: str) -> None:
    """Clear a socket left by an earlier run; anything else at the path is an error."""
    try:
        mode = os.lstat(path).st_mode
    except FileNotFoundError:
        return
    if not stat.S_ISSOCK(mode):
        raise ConfigError(f"{path} exists and is not a socket")
    os.unlink(path)


class CosmosSocketServer(socketserver.ThreadingUnixStreamServer):
    daemon_threads = True

    def __init__(self, path: str, cosmos: CosmosServer):
        _remove_stale_socket(path)
        self.cosmos = cosmos
        super().__init__(path, _FrameHandler)


def serve(cosmos: CosmosServer, path: str) -> None:
    with CosmosSocketServer(path, cosmos) as server:
        logger.info("Listening on %s", path)
        try:
            server.serve_forever()
        finally:
            if os.path.exists(path):
                os.unlink(path)
