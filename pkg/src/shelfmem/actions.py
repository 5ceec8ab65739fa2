"""Action records shared by the planner, the simulator and the logs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ViewPose:
    """Camera position plus look-at target, both in world metres."""

    cam: tuple[float, float, float]
    target: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "cam", tuple(float(v) for v in self.cam))
        object.__setattr__(self, "target", tuple(float(v) for v in self.target))
        if self.cam == self.target:
            raise ValueError("camera position and look-at target coincide")

    @property
    def direction(self) -> np.ndarray:
        d = np.asarray(self.target) - np.asarray(self.cam)
        return d / np.linalg.norm(d)

    def to_dict(self) -> dict:
        return {"cam": list(self.cam), "target": list(self.target)}

    @classmethod
    def from_dict(cls, d: dict) -> "ViewPose":
        return cls(tuple(d["cam"]), tuple(d["target"]))


@dataclass(frozen=True)
class PushCandidate:
    """Planar push: pusher start point, unit direction, object travel length (m)."""

    start: tuple[float, float]
    direction: tuple[float, float]
    length: float
    target_object: int
    predicted_vig: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("push direction must be non-zero")
        if abs(n - 1.0) > 1e-12:  # leave unit vectors bit-exact for log replay
            d = d / n
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "direction", tuple(float(v) for v in d))
        object.__setattr__(self, "length", float(self.length))

    def with_vig(self, vig: float) -> "PushCandidate":
        return PushCandidate(self.start, self.direction, self.length, self.target_object, float(vig))

    def to_dict(self) -> dict:
        return {
            "start": list(self.start),
            "direction": list(self.direction),
            "length": self.length,
            "target_object": self.target_object,
            "predicted_vig": self.predicted_vig,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PushCandidate":
        return cls(tuple(d["start"]), tuple(d["direction"]), d["length"], d["target_object"], d.get("predicted_vig", 0.0))
