"""
Experiment configuration files.

A config is a flat JSON object holding the parameters of one experiment kind, plus
the optional keys kind, seed and output_dir. Missing optional parameters are filled
in from the defaults below after validation, so ExperimentConfig.parameters always
holds the complete parameter block.
"""

import copy
import json
from dataclasses import dataclass, field
from enum import StrEnum
from logging import getLogger
from pathlib import Path
from typing import Any

import jsonschema

from tslim.constants import (
    DEFAULT_MP_NODES,
    DEFAULT_N_POINTS,
    DEFAULT_N_QUAD,
    DEFAULT_N_REALIZATIONS,
    DEFAULT_N_SEEDS,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_SEED,
)
from tslim.errors import ConfigError, schema_message

logger = getLogger(__name__)


class ExperimentKind(StrEnum):
    NTK_SCALING = "ntk_scaling"
    NTK_INEFFICIENCY = "ntk_inefficiency"
    LINREG_FINITE = "linreg_finite"
    LINREG_ASYMPTOTIC = "linreg_asymptotic"
    LANGEVIN_SIM = "langevin_sim"
    ANALYZE_TRAJECTORY = "analyze_trajectory"

    @property
    def subcommand(self) -> str:
        if self is ExperimentKind.ANALYZE_TRAJECTORY:
            return "analyze"
        return self.value.replace("_", "-")

    @classmethod
    def from_subcommand(cls, name: str) -> "ExperimentKind":
        for kind in cls:
            if kind.subcommand == name:
                return kind
        raise ConfigError(f"subcommand: unknown experiment {name!r}")


POSITIVE: dict[str, Any] = {"type": "number", "exclusiveMinimum": 0}
NON_NEGATIVE: dict[str, Any] = {"type": "number", "minimum": 0}
POSITIVE_INT: dict[str, Any] = {"type": "integer", "minimum": 1}
NUMBER_LIST: dict[str, Any] = {"type": "array", "items": {"type": "number"}}
MATRIX: dict[str, Any] = {
    "type": "array",
    "items": NUMBER_LIST | {"minItems": 1},
    "minItems": 1,
}
N_POINTS: dict[str, Any] = {"type": "integer", "minimum": 3}

POWER_LAW_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "alpha": POSITIVE,
        "delta": NON_NEGATIVE,
        "n": POSITIVE_INT,
        "scale": POSITIVE,
        "residue_scale": NON_NEGATIVE,
        "k_star": POSITIVE_INT,
    },
    "required": ["alpha", "delta", "n"],
    "additionalProperties": False,
}

PARAMETER_SCHEMAS: dict[ExperimentKind, dict[str, Any]] = {
    ExperimentKind.NTK_SCALING: {
        "properties": {
            "alpha": POSITIVE,
            "delta": NON_NEGATIVE,
            "n_modes": POSITIVE_INT,
            "t_min": POSITIVE,
            "t_max": POSITIVE,
            "scale": POSITIVE,
            "residue_scale": NON_NEGATIVE,
            "k_star": POSITIVE_INT,
            "n_points": N_POINTS,
            "n_quad": POSITIVE_INT,
        },
        "required": ["alpha", "delta", "n_modes", "t_min", "t_max"],
    },
    ExperimentKind.NTK_INEFFICIENCY: {
        "properties": {
            "spectrum": {
                "oneOf": [
                    {
                        "type": "object",
                        "properties": {"power_law": POWER_LAW_SCHEMA},
                        "required": ["power_law"],
                        "additionalProperties": False,
                    },
                    {
                        "type": "object",
                        "properties": {
                            "eigenvalues": {
                                "type": "array",
                                "items": POSITIVE,
                                "minItems": 1,
                            },
                            "residues_sq": {
                                "type": "array",
                                "items": NON_NEGATIVE,
                                "minItems": 1,
                            },
                        },
                        "required": ["eigenvalues", "residues_sq"],
                        "additionalProperties": False,
                    },
                ]
            },
            "t_min": POSITIVE,
            "t_max": POSITIVE,
            "n_points": N_POINTS,
            "n_quad": POSITIVE_INT,
        },
        "required": ["spectrum", "t_min", "t_max"],
    },
    ExperimentKind.LINREG_FINITE: {
        "properties": {
            "d": POSITIVE_INT,
            "n": POSITIVE_INT,
            "lambda": POSITIVE,
            "beta": POSITIVE,
            "alpha": POSITIVE,
            "n_seeds": POSITIVE_INT,
        },
        "required": ["d", "n", "lambda", "beta", "alpha"],
    },
    ExperimentKind.LINREG_ASYMPTOTIC: {
        "properties": {
            "gamma": POSITIVE,
            "beta": {
                "oneOf": [
                    POSITIVE,
                    {"type": "array", "items": POSITIVE, "minItems": 1},
                ]
            },
            "lambda": POSITIVE,
            "alpha": POSITIVE,
            "mean_shift": {"type": "boolean"},
            "mp_nodes": POSITIVE_INT,
        },
        "required": ["gamma", "beta", "lambda", "alpha"],
    },
    ExperimentKind.LANGEVIN_SIM: {
        "properties": {
            "A": MATRIX,
            "b": NUMBER_LIST | {"minItems": 1},
            "c": {"type": "number"},
            "init_mean": NUMBER_LIST | {"minItems": 1},
            "init_cov": MATRIX,
            "beta_inv": POSITIVE,
            "dt": POSITIVE,
            "T": POSITIVE,
            "n_realizations": {"type": "integer", "minimum": 2},
            "n_points": POSITIVE_INT,
        },
        "required": ["A", "b", "init_mean", "init_cov", "beta_inv", "dt", "T"],
    },
    ExperimentKind.ANALYZE_TRAJECTORY: {
        "properties": {
            "archive": {"type": "string", "minLength": 1},
            "warm_start": {"type": ["integer", "null"], "minimum": 0},
            "triplets": {
                "type": "array",
                "items": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 0},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
        },
        "required": ["archive"],
    },
}

DEFAULTS: dict[ExperimentKind, dict[str, Any]] = {
    ExperimentKind.NTK_SCALING: {
        "scale": 1.0,
        "residue_scale": 1.0,
        "k_star": 1,
        "n_points": DEFAULT_N_POINTS,
        "n_quad": DEFAULT_N_QUAD,
    },
    ExperimentKind.NTK_INEFFICIENCY: {
        "n_points": DEFAULT_N_POINTS,
        "n_quad": DEFAULT_N_QUAD,
    },
    ExperimentKind.LINREG_FINITE: {"n_seeds": DEFAULT_N_SEEDS},
    ExperimentKind.LINREG_ASYMPTOTIC: {
        "mean_shift": True,
        "mp_nodes": DEFAULT_MP_NODES,
    },
    ExperimentKind.LANGEVIN_SIM: {
        "c": 0.0,
        "n_realizations": DEFAULT_N_REALIZATIONS,
        "n_points": DEFAULT_N_POINTS,
    },
    ExperimentKind.ANALYZE_TRAJECTORY: {"warm_start": None, "triplets": []},
}

POWER_LAW_DEFAULTS: dict[str, Any] = {"scale": 1.0, "residue_scale": 1.0, "k_star": 1}

RESERVED_KEYS: dict[str, Any] = {
    "kind": {"enum": [kind.value for kind in ExperimentKind]},
    "seed": {"type": "integer", "minimum": 0},
    "output_dir": {"type": "string", "minLength": 1},
}


def document_schema(kind: ExperimentKind) -> dict[str, Any]:
    parameters = PARAMETER_SCHEMAS[kind]
    return {
        "type": "object",
        "properties": parameters["properties"] | RESERVED_KEYS,
        "required": parameters["required"],
        "additionalProperties": False,
    }


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind
    parameters: dict[str, Any]
    output_dir: Path
    seed: int = DEFAULT_SEED
    source: Path | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ConfigError(f"seed: must be non-negative, got {self.seed}")

    @classmethod
    def from_document(
        cls,
        document: dict[str, Any],
        kind: ExperimentKind | str,
        *,
        base_dir: Path | None = None,
        output_dir: Path | str | None = None,
        seed: int | None = None,
        source: Path | None = None,
    ) -> "ExperimentConfig":
        """
        Validate a parsed config document and merge defaults. Explicit output_dir and
        seed arguments take precedence over the document.
        """
        kind = ExperimentKind(kind)
        if not isinstance(document, dict):
            raise ConfigError(
                f"config: expected a JSON object, got {type(document).__name__}"
            )
        validator = jsonschema.Draft202012Validator(document_schema(kind))
        errors = sorted(validator.iter_errors(document), key=_error_order)
        if errors:
            raise ConfigError(
                f"config ({kind}): " + "; ".join(schema_message(e) for e in errors)
            )
        if document.get("kind", kind) != kind:
            raise ConfigError(
                f"kind: config is for {document['kind']!r}, not {kind.value!r}"
            )
        parameters = copy.deepcopy(DEFAULTS[kind]) | {
            key: copy.deepcopy(value)
            for key, value in document.items()
            if key not in RESERVED_KEYS
        }
        _check_parameters(kind, parameters)
        if kind is ExperimentKind.NTK_INEFFICIENCY:
            spectrum = parameters["spectrum"]
            if "power_law" in spectrum:
                spectrum["power_law"] = POWER_LAW_DEFAULTS | spectrum["power_law"]
        if kind is ExperimentKind.ANALYZE_TRAJECTORY:
            archive = Path(parameters["archive"])
            if not archive.is_absolute() and base_dir is not None:
                archive = base_dir / archive
            parameters["archive"] = archive.resolve().as_posix()
        out = output_dir if output_dir is not None else document.get("output_dir")
        return cls(
            kind=kind,
            parameters=parameters,
            output_dir=Path(out if out is not None else DEFAULT_OUTPUT_DIR).resolve(),
            seed=seed if seed is not None else document.get("seed", DEFAULT_SEED),
            source=source,
        )


def _error_order(error: jsonschema.ValidationError) -> tuple[str, str]:
    return ".".join(str(part) for part in error.path), error.message


def _check_parameters(kind: ExperimentKind, parameters: dict[str, Any]) -> None:
    """Cross-key checks that the schemas cannot express."""
    match kind:
        case ExperimentKind.NTK_SCALING | ExperimentKind.NTK_INEFFICIENCY:
            if not parameters["t_min"] < parameters["t_max"]:
                raise ConfigError(
                    f"t_min: {parameters['t_min']} must be smaller than t_max "
                    f"{parameters['t_max']}"
                )
            if kind is ExperimentKind.NTK_SCALING:
                if parameters["k_star"] > parameters["n_modes"]:
                    raise ConfigError(
                        f"k_star: {parameters['k_star']} exceeds n_modes "
                        f"{parameters['n_modes']}"
                    )
            else:
                spectrum = parameters["spectrum"]
                if "eigenvalues" in spectrum and len(spectrum["eigenvalues"]) != len(
                    spectrum["residues_sq"]
                ):
                    raise ConfigError(
                        f"spectrum.residues_sq: {len(spectrum['residues_sq'])} values "
                        f"for {len(spectrum['eigenvalues'])} eigenvalues"
                    )
        case ExperimentKind.LANGEVIN_SIM:
            d = len(parameters["b"])
            for name in ("A", "init_cov"):
                matrix = parameters[name]
                if len(matrix) != d or any(len(row) != d for row in matrix):
                    raise ConfigError(f"{name}: expected a {d} x {d} matrix")
            if len(parameters["init_mean"]) != d:
                raise ConfigError(
                    f"init_mean: {len(parameters['init_mean'])} values, expected {d}"
                )


def load_config(
    path: Path | str,
    kind: ExperimentKind | str,
    output_dir: Path | str | None = None,
    seed: int | None = None,
) -> ExperimentConfig:
    """Read and validate a config file. An empty file counts as {}."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ConfigError(f"{path}: byte {e.start}: not UTF-8") from e
    if not text.strip():
        document: Any = {}
    else:
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"{path}: line {e.lineno} column {e.colno}: {e.msg}"
            ) from e
    cfg = ExperimentConfig.from_document(
        document,
        kind,
        base_dir=path.resolve().parent,
        output_dir=output_dir,
        seed=seed,
        source=path,
    )
    logger.info(f"{cfg.kind} config loaded from {path}")
    return cfg
