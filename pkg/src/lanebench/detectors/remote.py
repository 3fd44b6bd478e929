"""Host side of the external-detector wire protocol (version 1).

Messages are single-line UTF-8 JSON objects over a byte stream (child
process pipes or a TCP socket). The host opens with a hello, the adapter
answers hello_ack declaring its family, input size and gradient capability;
detect and gradient requests then correlate by integer id, one in flight at
a time. Any failure comes back as {"type": "error", "id": ..., "msg": ...}.

Image payloads are base64-encoded binary PGM (8-bit grayscale); masks use
255 for selected pixels. Gradient responses list values for the selected
pixels in row-major order.
"""

import base64
import json
import queue
import socket
import subprocess
import threading
import numpy as np

from ..geometry import ImageFrame
from ..imageio import decode_pgm, frame_to_pgm, mask_to_pgm
from ..lanes import AnchorProposal, LaneRepresentation
from .base import DetectorError, DetectorHandle, FAMILIES

__all__ = [
    "ProtocolError",
    "HandshakeError",
    "DetectorTimeout",
    "WireTransport",
    "PipeTransport",
    "SocketTransport",
    "LoopbackTransport",
    "RemoteDetector",
    "serve_external",
    "launch_command",
]

PROTO_VERSION = 1
DEFAULT_TIMEOUT_S = 5.0


class ProtocolError(DetectorError):
    """The adapter violated the wire protocol."""


class HandshakeError(ProtocolError):
    """The opening hello/hello_ack exchange failed."""


class DetectorTimeout(DetectorError):
    """The adapter did not answer within the configured timeout."""


class WireTransport:
    """Line transport with a reader thread so receives can time out."""

    def __init__(self):
        self._queue: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _read_line_blocking(self) -> bytes | None:
        raise NotImplementedError

    def _write_line(self, data: bytes) -> None:
        raise NotImplementedError

    def _pump(self) -> None:
        try:
            while True:
                line = self._read_line_blocking()
                if not line:
                    break
                self._queue.put(line)
        except (OSError, ValueError):
            pass
        self._queue.put(None)  # EOF marker

    def send(self, message: dict) -> None:
        self._write_line(json.dumps(message, separators=(",", ":")).encode() + b"\n")

    def receive(self, timeout: float) -> dict:
        try:
            line = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise DetectorTimeout(f"no response within {timeout:.1f} s") from None
        if line is None:
            raise ProtocolError("connection closed by the adapter")
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed message: {exc}") from None
        if not isinstance(msg, dict):
            raise ProtocolError("message is not a JSON object")
        return msg

    def close(self) -> None:
        pass


class PipeTransport(WireTransport):
    """Transport over a child process's standard pipes."""

    def __init__(self, proc: subprocess.Popen):
        self.proc = proc
        super().__init__()

    def _read_line_blocking(self) -> bytes | None:
        return self.proc.stdout.readline()

    def _write_line(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"adapter pipe closed: {exc}") from None

    def close(self) -> None:
        # Terminate first: the reader thread is blocked in readline and holds
        # the stream lock, so closing stdout before EOF would deadlock.
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        self.proc.terminate()
        try:
            self.proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait(timeout=2.0)
        try:
            self.proc.stdout.close()
        except OSError:
            pass


class SocketTransport(WireTransport):
    """Transport over a connected TCP socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._file = sock.makefile("rb")
        super().__init__()

    def _read_line_blocking(self) -> bytes | None:
        return self._file.readline()

    def _write_line(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise ProtocolError(f"socket closed: {exc}") from None

    def close(self) -> None:
        # Shut the socket down rather than closing the buffered reader: the
        # reader thread blocked in readline holds the file lock, and shutdown
        # unblocks it with EOF.
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class LoopbackTransport(WireTransport):
    """In-process transport joined to a peer by queues (tests, stubs)."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        super().__init__()

    @classmethod
    def pair(cls) -> tuple["LoopbackTransport", "LoopbackTransport"]:
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b), cls(b, a)

    def _read_line_blocking(self) -> bytes | None:
        item = self._inbox.get()
        return item

    def _write_line(self, data: bytes) -> None:
        self._outbox.put(data)

    def close(self) -> None:
        self._outbox.put(None)


def _decode_image(msg: dict, key: str) -> np.ndarray:
    try:
        return decode_pgm(base64.b64decode(msg[key]))
    except (KeyError, ValueError) as exc:
        raise ProtocolError(f"bad {key} payload: {exc}") from None


_FAMILY_KEYS = {"points": "lines", "probmap": "maps", "poly": "coeffs",
                "anchors": "anchors"}


def parse_lanes_payload(msg: dict, family: str) -> LaneRepresentation:
    """Family-specific payload of a lanes message, validated against family."""
    for fam, key in _FAMILY_KEYS.items():
        if fam != family and key in msg:
            raise ProtocolError(
                f"adapter declared family {family!r} but sent {key!r}")
    key = _FAMILY_KEYS[family]
    if key not in msg:
        raise ProtocolError(f"lanes message lacks {key!r} for family {family!r}")
    payload = msg[key]
    try:
        if family == "points":
            return LaneRepresentation(points=[np.asarray(line, dtype=np.float64)
                                              for line in payload])
        if family == "poly":
            coeffs = np.asarray(payload, dtype=np.float64)
            return LaneRepresentation(polynomials=coeffs.reshape(-1, coeffs.shape[-1])
                                      if coeffs.size else np.zeros((0, 4)))
        if family == "probmap":
            h, w = int(msg["height"]), int(msg["width"])
            maps = np.asarray(payload, dtype=np.float64).reshape(-1, h, w)
            return LaneRepresentation(prob_maps=maps,
                                      row_normalized=bool(msg.get("row_normalized", False)))
        props = [AnchorProposal(pi=float(a["pi"]), ys=a["ys"], xs=a["xs"],
                                deltas=a["deltas"]) for a in payload]
        return LaneRepresentation(anchors=props)
    except (TypeError, ValueError, KeyError) as exc:
        raise ProtocolError(f"invalid {family} payload: {exc}") from None


class RemoteDetector(DetectorHandle):
    """Detector proxy speaking protocol v1 over a transport."""

    def __init__(self, transport: WireTransport, timeout: float = DEFAULT_TIMEOUT_S):
        self.transport = transport
        self.timeout = timeout
        self._next_id = 0
        transport.send({"type": "hello", "proto": PROTO_VERSION})
        try:
            ack = transport.receive(timeout)
        except DetectorError as exc:
            raise HandshakeError(f"no hello_ack: {exc}") from None
        if ack.get("type") != "hello_ack":
            raise HandshakeError(f"expected hello_ack, got {ack.get('type')!r}")
        family = ack.get("family")
        if family not in FAMILIES:
            raise HandshakeError(f"unknown family {family!r}")
        try:
            self.input_size = (int(ack["input_w"]), int(ack["input_h"]))
        except (KeyError, TypeError, ValueError):
            raise HandshakeError("hello_ack lacks input dimensions") from None
        self.family = family
        self.supports_gradient = bool(ack.get("gradient", False))

    def _request(self, message: dict) -> dict:
        self._next_id += 1
        rid = self._next_id
        message["id"] = rid
        self.transport.send(message)
        reply = self.transport.receive(self.timeout)
        if reply.get("id") != rid:
            raise ProtocolError(
                f"response id {reply.get('id')!r} does not match request {rid}")
        if reply.get("type") == "error":
            raise DetectorError(f"adapter error: {reply.get('msg')}")
        return reply

    def detect(self, frame: ImageFrame) -> LaneRepresentation:
        self.check_frame(frame)
        pgm = base64.b64encode(frame_to_pgm(frame)).decode("ascii")
        reply = self._request({"type": "detect", "image_pgm_b64": pgm})
        if reply.get("type") != "lanes":
            raise ProtocolError(f"expected lanes, got {reply.get('type')!r}")
        return parse_lanes_payload(reply, self.family)

    def gradient(self, frame: ImageFrame, direction: str,
                 region: np.ndarray) -> np.ndarray:
        if not self.supports_gradient:
            return super().gradient(frame, direction, region)
        self.check_frame(frame)
        region = np.asarray(region, dtype=bool)
        reply = self._request({
            "type": "gradient",
            "direction": direction,
            "image_pgm_b64": base64.b64encode(frame_to_pgm(frame)).decode("ascii"),
            "mask_pgm_b64": base64.b64encode(mask_to_pgm(region)).decode("ascii"),
        })
        if reply.get("type") != "grad":
            raise ProtocolError(f"expected grad, got {reply.get('type')!r}")
        values = np.asarray(reply.get("values", []), dtype=np.float64)
        n_sel = int(region.sum())
        if values.size != n_sel:
            raise ProtocolError(
                f"gradient carries {values.size} values for {n_sel} mask pixels")
        grad = np.zeros(region.shape)
        grad[region] = values
        return grad

    def close(self) -> None:
        self.transport.close()


def serve_external(transport: WireTransport,
                   timeout: float = DEFAULT_TIMEOUT_S) -> RemoteDetector:
    """Handshake over an open transport and return the detector handle."""
    return RemoteDetector(transport, timeout=timeout)


def launch_command(cmd: list[str], timeout: float = DEFAULT_TIMEOUT_S) -> RemoteDetector:
    """Spawn an adapter child process and connect over its pipes."""
    proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
    return RemoteDetector(PipeTransport(proc), timeout=timeout)
