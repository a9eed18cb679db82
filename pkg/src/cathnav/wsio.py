"""Minimal WebSocket (RFC 6455) framing over blocking sockets.

Supports unfragmented text/close/ping/pong frames, which is all the expert
gateway protocol needs. Client frames are masked, server frames are not.
"""

import base64
import hashlib
import os
import struct

GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WsError(Exception):
    pass


def _recv_exact(sock, n):
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WsError("connection closed")
        buf += chunk
    return buf


def _read_http_head(sock):
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise WsError("connection closed during handshake")
        data += chunk
        if len(data) > 65536:
            raise WsError("oversized handshake")
    return data.split(b"\r\n\r\n", 1)[0].decode("latin-1")


def accept_handshake(sock):
    """Server side of the upgrade handshake."""
    head = _read_http_head(sock)
    key = None
    for line in head.split("\r\n")[1:]:
        if ":" not in line:
            continue
        name, value = line.split(":", 1)
        if name.strip().lower() == "sec-websocket-key":
            key = value.strip()
    if key is None:
        raise WsError("missing Sec-WebSocket-Key")
    accept = base64.b64encode(
        hashlib.sha1((key + GUID).encode("ascii")).digest()).decode("ascii")
    sock.sendall((
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept}\r\n\r\n").encode("latin-1"))


def client_handshake(sock, host, port, path="/"):
    """Client side of the upgrade handshake."""
    key = base64.b64encode(os.urandom(16)).decode("ascii")
    sock.sendall((
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n").encode("latin-1"))
    head = _read_http_head(sock)
    if "101" not in head.split("\r\n")[0]:
        raise WsError(f"handshake rejected: {head.splitlines()[0]}")
    want = base64.b64encode(
        hashlib.sha1((key + GUID).encode("ascii")).digest()).decode("ascii")
    for line in head.split("\r\n")[1:]:
        if line.lower().startswith("sec-websocket-accept:"):
            if line.split(":", 1)[1].strip() != want:
                raise WsError("bad Sec-WebSocket-Accept")
            return
    raise WsError("missing Sec-WebSocket-Accept")


def send_frame(sock, opcode, payload=b"", mask=False):
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    head = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 65536:
        head += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        body = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        sock.sendall(head + key + body)
    else:
        sock.sendall(head + payload)


def recv_frame(sock):
    """Read one frame; returns (opcode, payload bytes)."""
    b0, b1 = _recv_exact(sock, 2)
    opcode = b0 & 0x0F
    if not (b0 & 0x80):
        raise WsError("fragmented frames not supported")
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", _recv_exact(sock, 2))
    elif n == 127:
        (n,) = struct.unpack(">Q", _recv_exact(sock, 8))
    key = _recv_exact(sock, 4) if masked else None
    payload = _recv_exact(sock, n) if n else b""
    if masked:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload


def send_text(sock, text, mask=False):
    send_frame(sock, OP_TEXT, text, mask=mask)


def recv_text(sock):
    """Read frames until a text frame arrives, answering pings; returns
    None on close."""
    while True:
        opcode, payload = recv_frame(sock)
        if opcode == OP_TEXT:
            return payload.decode("utf-8")
        if opcode == OP_PING:
            send_frame(sock, OP_PONG, payload)
            continue
        if opcode == OP_CLOSE:
            return None
        # pongs and other control frames are ignored
