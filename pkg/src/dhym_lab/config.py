"""
Run configuration.

``LabSettings`` reads the process environment (DHYM_THREADS, DHYM_LOG_LEVEL).
``RunConfig`` is the strict schema of a JSON run file; unknown keys are rejected.
Precedence is model defaults, then the JSON file, then command line flags.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import InputError
from .phase_core import HermitianForm
from .solver import SolverOptions
from .torus import TorusProblem

logger = logging.getLogger(__name__)


class LabSettings(BaseSettings):
    """Process-level settings read from DHYM_* environment variables."""

    model_config = SettingsConfigDict(env_prefix="DHYM_")

    threads: PositiveInt = Field(default_factory=lambda: os.cpu_count() or 1)
    log_level: str = "INFO"


MatrixSpec = Union[str, List[List[float]], List[float], float]


def parse_matrix(spec: MatrixSpec, n: int) -> NDArray[np.complex128]:
    """Matrix from the config notation: a string (I, diag:..., rows:...), nested rows, a diagonal or a scalar."""
    if isinstance(spec, str):
        return HermitianForm.parse(spec, n).entries
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.asarray(float(arr) * np.eye(n), dtype=np.complex128)
    if arr.ndim == 1:
        return np.asarray(np.diag(arr), dtype=np.complex128)
    return np.asarray(arr, dtype=np.complex128)


class _Section(BaseModel):
    """Config section base: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid")


class ProblemConfig(_Section):
    """Torus problem, phase target and starting potentials."""

    n: int = Field(default=1, ge=1, le=3)
    N: int = Field(default=64, ge=8)
    alpha: MatrixSpec = "I"
    B: MatrixSpec = "I"
    h: Optional[Union[float, str]] = None
    theta_hat: Optional[float] = None
    chi_potential: Union[float, str] = 0.0
    u0: Union[float, str] = 0.0
    manufactured: Optional[str] = None

    @field_validator("N")
    @classmethod
    def even_grid(cls, v: int) -> int:
        """Reject odd grid sizes."""
        if v % 2:
            raise ValueError("N must be even")
        return v

    def torus(self) -> TorusProblem:
        """Build the torus problem described by this section."""
        alpha = HermitianForm(parse_matrix(self.alpha, self.n))
        b = parse_matrix(self.B, self.n)
        if np.any(np.abs(b.imag) > 0.0):
            raise InputError("B must be real")
        return TorusProblem(n=self.n, N=self.N, B=b.real, alpha=alpha, h_spec=self.h)


class SolverConfig(_Section):
    """Newton and flow controls."""

    method: Literal["newton", "flow"] = "newton"
    tol_nl: PositiveFloat = 1e-10
    krylov_rtol: PositiveFloat = 1e-12
    krylov_max_iter: PositiveInt = 500
    krylov_restart: PositiveInt = 80
    max_iter: int = Field(default=50, ge=0)
    max_halvings: PositiveInt = 30
    armijo: PositiveFloat = 1e-4
    t_end: PositiveFloat = 50.0
    dt_min: PositiveFloat = 1e-12
    max_steps: PositiveInt = 200_000
    flow_monitor: Literal["l2", "oscillation"] = "l2"

    def options(self) -> SolverOptions:
        """Solver options for this section."""
        return SolverOptions(
            tol_nl=self.tol_nl,
            krylov_rtol=self.krylov_rtol,
            krylov_max_iter=self.krylov_max_iter,
            krylov_restart=self.krylov_restart,
            max_iter=self.max_iter,
            max_halvings=self.max_halvings,
            armijo=self.armijo,
            dt_min=self.dt_min,
            max_steps=self.max_steps,
            flow_monitor=self.flow_monitor,
        )


class PathSection(_Section):
    """Continuation step control and the optional direct comparison."""

    t_step_init: PositiveFloat = 0.1
    t_step_min: PositiveFloat = 1e-4
    t_step_max: PositiveFloat = 0.25
    tau_path: PositiveFloat = 1e-8
    supercritical_margin: float = Field(default=0.0, ge=0.0)
    compare_direct: bool = False

    def steps(self) -> Dict[str, float]:
        """Keyword arguments for ``choose_deltas``."""
        return self.model_dump(exclude={"compare_direct"})


class StabilitySection(_Section):
    """Location of the class data file."""

    class_data: Optional[Path] = None


class OutputConfig(_Section):
    """Output directory and report formats."""

    directory: Path = Path("out")
    formats: List[Literal["json", "csv"]] = Field(default_factory=lambda: ["json", "csv"])


class RunConfig(_Section):
    """A complete run file."""

    seed: int = 0
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    path: PathSection = Field(default_factory=PathSection)
    stability: StabilitySection = Field(default_factory=StabilitySection)
    output: OutputConfig = Field(default_factory=OutputConfig)


def _merge(base: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict update; nested mappings are merged key by key."""
    out = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a JSON run file and apply dotted-key overrides such as ``{"problem.N": 128}``.

    ``None`` override values are ignored so unset command line flags leave the file alone.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise InputError(f"config {path} must hold a JSON object")
    nested: Dict[str, Any] = {}
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = nested
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    try:
        return RunConfig.model_validate(_merge(data, nested))
    except ValidationError as e:
        raise InputError(f"invalid configuration: {e}") from e
