import dataclasses
import json
import math
from collections.abc import Mapping, Sequence
from enum import Enum
from logging import getLogger
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import scipy

from tslim.core import SpeedLimitReport
from tslim.utils import get_version

if TYPE_CHECKING:
    from tslim.experiment import ExperimentConfig

logger = getLogger(__name__)


def to_json_value(value: Any) -> Any:
    """Plain JSON value for numpy scalars, arrays, enums, paths and dataclasses.
    Non-finite floats become null."""
    match value:
        case None | bool() | str():
            return value
        case np.bool_():
            return bool(value)
        case Enum():
            return to_json_value(value.value)
        case Path():
            return value.as_posix()
        case int() | np.integer():
            return int(value)
        case float() | np.floating():
            number = float(value)
            return number if math.isfinite(number) else None
        case np.ndarray():
            return to_json_value(value.tolist())
        case Mapping():
            return {str(key): to_json_value(item) for key, item in value.items()}
        case list() | tuple():
            return [to_json_value(item) for item in value]
        case _ if dataclasses.is_dataclass(value) and not isinstance(value, type):
            return to_json_value(dataclasses.asdict(value))
        case _:
            raise TypeError(f"cannot write {type(value).__name__} to a JSON summary")


def write_summary(
    path: Path | str,
    cfg: "ExperimentConfig",
    reports: Sequence[SpeedLimitReport],
    extra: Mapping[str, Any] | None = None,
) -> Path:
    path = Path(path)
    summary = {
        "config": {
            "kind": cfg.kind,
            "parameters": cfg.parameters,
            "seed": cfg.seed,
        },
        "versions": {
            "tslim": get_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "reports": list(reports),
        "extra": dict(extra or {}),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(to_json_value(summary), indent=4, sort_keys=True) + "\n")
    logger.debug(f"summary written to {path}")
    return path
