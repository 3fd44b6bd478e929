"""Detector handles: built-ins plus the external wire-protocol host."""

from .base import CapabilityError, DetectorError, DetectorHandle, FAMILIES
from .builtin import ClassicalConfig, ClassicalDetector, OracleDetector, default_h_samples
from .remote import (DetectorTimeout, HandshakeError, LoopbackTransport,
                     PipeTransport, ProtocolError, RemoteDetector,
                     SocketTransport, launch_command, serve_external)

__all__ = [
    "CapabilityError",
    "DetectorError",
    "DetectorHandle",
    "FAMILIES",
    "ClassicalConfig",
    "ClassicalDetector",
    "OracleDetector",
    "default_h_samples",
    "DetectorTimeout",
    "HandshakeError",
    "LoopbackTransport",
    "PipeTransport",
    "ProtocolError",
    "RemoteDetector",
    "SocketTransport",
    "launch_command",
    "serve_external",
]
