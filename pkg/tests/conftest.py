"""
Test configuration and fixtures for dhym-lab tests.
"""

import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

# Import our package from the source tree
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from dhym_lab.stability import ClassData, Subvariety  # noqa: E402
from dhym_lab.torus import TorusProblem  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so randomized tests are reproducible."""
    return np.random.default_rng(20240611)


@pytest.fixture
def line_problem() -> TorusProblem:
    """n=1, N=64, B=(1), alpha=I."""
    return TorusProblem(n=1, N=64, B=np.eye(1))


@pytest.fixture
def plane_problem() -> TorusProblem:
    """n=2, N=16, B=diag(2,2), alpha=I."""
    return TorusProblem(n=2, N=16, B=np.diag([2.0, 2.0]))


@pytest.fixture
def manufactured_potential() -> Callable[[TorusProblem], np.ndarray]:
    """u* = 0.3 cos(2 pi x0) on the problem's grid."""

    def build(prob: TorusProblem) -> np.ndarray:
        return prob.grid_field("0.3*cos(2*pi*x0)")

    return build


@pytest.fixture
def surface_data() -> Callable[..., ClassData]:
    """The (2, 1, 0) surface with optional curves given as (label, v0, v1)."""

    def build(*curves: tuple) -> ClassData:
        subs = [Subvariety(label=label, dim=1, v=[v0, v1]) for label, v0, v1 in curves]
        return ClassData(n=2, m=[2.0, 1.0, 0.0], subvarieties=subs)

    return build


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[Dict[str, Any]], Path]:
    """Write a run configuration into tmp_path, pointing output there as well."""

    def write(data: Dict[str, Any], name: str = "run.json") -> Path:
        data = dict(data)
        data.setdefault("output", {"directory": str(tmp_path / "out")})
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return write

