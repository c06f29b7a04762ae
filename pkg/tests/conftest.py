import json
from pathlib import Path

import numpy as np
import pytest

from tslim.core import GaussianMeasure, QuadraticPotential, Trajectory


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def three_checkpoints() -> Trajectory:
    """Times 0, 1, 2 with weights (0, 0), (1, 0), (1, 1) and losses 2, 1, 0.5."""
    return Trajectory(
        times=np.array([0.0, 1.0, 2.0]),
        weights=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]),
        losses=np.array([2.0, 1.0, 0.5]),
    )


@pytest.fixture
def random_potential(rng: np.random.Generator) -> QuadraticPotential:
    """Positive definite 3 x 3 potential with eigenvalues in [0.5, 2]."""
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    A = (q * np.array([0.5, 1.0, 2.0])) @ q.T
    return QuadraticPotential(A=A, b=rng.standard_normal(3), c=0.25)


@pytest.fixture
def random_gaussian(rng: np.random.Generator) -> GaussianMeasure:
    factor = rng.standard_normal((3, 3))
    return GaussianMeasure(rng.standard_normal(3), factor @ factor.T + 0.5 * np.eye(3))


@pytest.fixture
def write_config(tmp_path: Path):
    """Write a config document to tmp_path/config.json and return its path."""

    def write(document: dict, name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write
