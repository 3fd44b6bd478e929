"""Detector abstraction shared by built-in and out-of-process detectors."""

import numpy as np
from abc import ABC, abstractmethod

from ..geometry import ImageFrame
from ..lanes import LaneRepresentation

__all__ = ["DetectorHandle", "DetectorError", "CapabilityError", "FAMILIES"]

FAMILIES = ("points", "probmap", "poly", "anchors")


class DetectorError(RuntimeError):
    """Base class for detector failures."""


class CapabilityError(DetectorError):
    """The detector does not support the requested operation."""


class DetectorHandle(ABC):
    """A lane detector: declared family, fixed input size, optional gradients."""

    family: str = "points"
    input_size: tuple[int, int] = (0, 0)
    supports_gradient: bool = False

    def check_frame(self, frame: ImageFrame) -> None:
        w, h = self.input_size
        if frame.width != w or frame.height != h:
            raise DetectorError(
                f"frame {frame.width}x{frame.height} does not match detector "
                f"input {w}x{h}"
            )

    @abstractmethod
    def detect(self, frame: ImageFrame) -> LaneRepresentation:
        """Family-consistent representation for one frame."""

    def gradient(self, frame: ImageFrame, direction: str,
                 region: np.ndarray) -> np.ndarray:
        """d(attack_loss) / d(pixel gray) over ``region`` for this frame.

        Only available when ``supports_gradient``; the returned array has the
        frame's (h, w) shape and is zero outside the region.
        """
        raise CapabilityError(f"{type(self).__name__} serves no gradients")

    def close(self) -> None:
        """Release external resources; built-ins need nothing."""
