import json
from pathlib import Path

import numpy as np

from dsslab.core.system import ControllerParams, HyperbolicSystem


PRESETS_DIR = Path(__file__).resolve().parent.parent / "presets"


def scalar_system(H: float = 0.0, speed: float = 1.0) -> HyperbolicSystem:
    return HyperbolicSystem.from_speeds([speed], [[H]], [[1.0]])


def scalar_controller(K: float = 0.0, alpha: float = 1.0, eta0: float = 0.0) -> ControllerParams:
    return ControllerParams(K=[[K]], alpha=alpha, eta0=[eta0])


def bump(z):
    """cos(2πz) − 1: нулевые значения на обоих концах."""
    return (np.cos(2 * np.pi * np.atleast_1d(z)) - 1.0)[:, None]


def load_preset(name: str) -> dict:
    return json.loads((PRESETS_DIR / f"{name}.json").read_text(encoding="utf-8"))
