"""JSON checkpoint container: parameter name -> shape + float64 values, plus config."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..errors import ConfigError, FormatError

FORMAT = "graphre-checkpoint/1"


def save_checkpoint(path, state: Dict[str, np.ndarray], config: Dict[str, Any], extra=None) -> None:
    payload = {
        "format": FORMAT,
        "config": config,
        "extra": extra or {},
        "params": {
            name: {"shape": list(arr.shape), "values": np.asarray(arr, dtype=np.float64).ravel().tolist()}
            for name, arr in state.items()
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path, expected_config: Optional[Dict[str, Any]] = None
                    ) -> Tuple[Dict[str, np.ndarray], Dict[str, Any], Dict[str, Any]]:
    """Read a checkpoint; when ``expected_config`` is given, every key in it
    must match the stored configuration."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a checkpoint ({exc})") from None
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        found = payload.get("format") if isinstance(payload, dict) else type(payload).__name__
        raise FormatError(f"{path}: not a checkpoint (format {found!r})")
    config = payload["config"]
    if expected_config is not None:
        diff = {k: (config.get(k), v) for k, v in expected_config.items() if config.get(k) != v}
        if diff:
            raise ConfigError(f"checkpoint configuration mismatch: {diff}")
    state = {}
    for name, entry in payload["params"].items():
        values = np.asarray(entry["values"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if values.size != int(np.prod(shape)):
            raise FormatError(f"{path}: parameter {name} has {values.size} values for shape {shape}")
        state[name] = values.reshape(shape)
    return state, config, payload.get("extra", {})
