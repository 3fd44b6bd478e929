"""In-process adapter stub speaking wire protocol v1 for host-side tests."""

import base64
import json
import threading

import numpy as np

from lanebench.imageio import decode_pgm


class StubAdapter(threading.Thread):
    """Protocol peer with scriptable behavior, driven over a LoopbackTransport.

    behavior:
      normal        answer everything correctly
      wrong_family  declare the configured family but send poly payloads
      die_mid      close the stream instead of answering the first detect
      never_respond swallow detect requests silently
      garbage       reply to detect with a non-JSON line
    """

    def __init__(self, transport, family="poly", input_size=(320, 192),
                 gradient=True, behavior="normal", payload=None):
        super().__init__(daemon=True)
        self.transport = transport
        self.family = family
        self.input_size = input_size
        self.gradient = gradient
        self.behavior = behavior
        self.payload = payload if payload is not None else [[0.0, 0.0, 0.0, 120.0],
                                                            [0.0, 0.0, 0.0, 200.0]]
        self.requests_seen = []

    def run(self):
        while True:
            try:
                msg = self.transport.receive(timeout=10.0)
            except Exception:
                return
            self.requests_seen.append(msg.get("type"))
            if msg.get("type") == "hello":
                self.transport.send({
                    "type": "hello_ack", "family": self.family,
                    "input_w": self.input_size[0], "input_h": self.input_size[1],
                    "gradient": self.gradient,
                })
            elif msg.get("type") == "detect":
                rid = msg.get("id")
                if self.behavior == "die_mid":
                    self.transport.close()
                    return
                if self.behavior == "never_respond":
                    continue
                if self.behavior == "garbage":
                    self.transport._write_line(b"}{ not json\n")
                    continue
                if self.behavior == "wrong_family":
                    self.transport.send({"type": "lanes", "id": rid,
                                         "coeffs": self.payload})
                    continue
                self.transport.send(self._lanes_reply(rid))
            elif msg.get("type") == "gradient":
                rid = msg.get("id")
                mask = decode_pgm(base64.b64decode(msg["mask_pgm_b64"]))
                n = int((mask > 0).sum())
                self.transport.send({"type": "grad", "id": rid,
                                     "values": [0.0] * n})
            else:
                self.transport.send({"type": "error", "id": msg.get("id"),
                                     "msg": f"unknown type {msg.get('type')!r}"})

    def _lanes_reply(self, rid):
        reply = {"type": "lanes", "id": rid}
        if self.family == "poly":
            reply["coeffs"] = self.payload
        elif self.family == "points":
            reply["lines"] = self.payload
        elif self.family == "probmap":
            maps = np.asarray(self.payload)
            reply["maps"] = maps.ravel().tolist()
            reply["height"] = maps.shape[1]
            reply["width"] = maps.shape[2]
        else:
            reply["anchors"] = self.payload
        return reply
