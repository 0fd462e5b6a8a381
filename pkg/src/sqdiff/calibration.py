"""Empirical constants standing in for the unspecified absolute constants.

The frozen values live in ``data/calibration.json``; the ``SQDF_CALIBRATION``
environment variable points at an alternative sidecar.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

__all__ = ["CalibrationConstants", "load_calibration", "default_calibration_path", "ENV_VAR"]

ENV_VAR = "SQDF_CALIBRATION"


@dataclass(frozen=True)
class CalibrationConstants:
    """``c1`` (minor-arc bound), ``c2`` (telescoping bound), ``c_eta`` (in eta_eps).

    ``c_flat``, ``c_strength`` and ``c_prime`` are the remaining unnamed
    constants: translation flatness, the witness-count fraction and the
    lower exponent for the selected eta.
    """

    c1: float
    c2: float
    c_eta: float
    c_flat: float = 1.0
    c_strength: float = 0.25
    c_prime: float = 1.0
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("c1", "c2", "c_eta", "c_flat", "c_strength", "c_prime"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ValueError(f"calibration constant {name} must be > 0, got {v!r}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "CalibrationConstants":
        known = {k: obj[k] for k in ("c1", "c2", "c_eta", "c_flat", "c_strength", "c_prime") if k in obj}
        return cls(**known, provenance=obj.get("provenance", {}))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        return path

    def numbers(self) -> dict:
        """The constants without provenance, for echoing into reports."""
        d = self.to_json()
        d.pop("provenance")
        return d


def default_calibration_path() -> Path:
    return Path(str(resources.files("sqdiff") / "data" / "calibration.json"))


def load_calibration(path=None) -> CalibrationConstants:
    """Load from ``path``, else ``$SQDF_CALIBRATION``, else the bundled file."""
    if path is None:
        path = os.environ.get(ENV_VAR) or default_calibration_path()
    return CalibrationConstants.from_json(json.loads(Path(path).read_text()))
