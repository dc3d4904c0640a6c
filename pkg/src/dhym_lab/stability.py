"""
Cohomological side: charges, phase angles and the subvariety obstruction.

Intersection numbers are inputs. For a variety of dimension p with numbers
v_k = int alpha^{p-k} omega^k, the charge is int (alpha + i*omega)^p, expanded binomially.
Angles are principal values in (-pi, pi]; near the branch cut they are flagged.
"""

import itertools
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InputError
from .phase_core import HALF_PI, TAU_CLASS, elementary_symmetric

logger = logging.getLogger(__name__)

BRANCH_BAND = 0.01

COMPLETENESS_CAVEAT = (
    "the subvariety list is user-supplied; the criterion is only conclusive when it contains every "
    "irreducible curve"
)


class Subvariety(BaseModel):
    """A proper subvariety given by its numbers v_k = int_V alpha^{p-k} omega^k, k = 0..p."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    label: str
    dim: int = Field(ge=1)
    v: List[float]

    @model_validator(mode="after")
    def check_numbers(self) -> "Subvariety":
        """A subvariety of dimension p carries p + 1 numbers."""
        if len(self.v) != self.dim + 1:
            raise ValueError(f"subvariety '{self.label}' of dimension {self.dim} needs {self.dim + 1} numbers")
        return self


class ClassData(BaseModel):
    """Numbers m_k = int_X alpha^{n-k} omega^k, k = 0..n, and the subvarieties to test."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(ge=1)
    m: List[float]
    subvarieties: List[Subvariety] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_numbers(self) -> "ClassData":
        """Lengths, properness, unique labels and positive curve degrees."""
        if len(self.m) != self.n + 1:
            raise ValueError(f"dimension {self.n} needs {self.n + 1} numbers m_0..m_n, got {len(self.m)}")
        labels = set()
        for sub in self.subvarieties:
            if sub.dim >= self.n:
                raise ValueError(f"subvariety '{sub.label}' is not proper (dim {sub.dim} >= {self.n})")
            if sub.label in labels:
                raise ValueError(f"duplicate subvariety label '{sub.label}'")
            labels.add(sub.label)
            if self.n == 2 and not sub.v[0] > 0.0:
                raise ValueError(f"curve '{sub.label}' has int_C alpha = {sub.v[0]} <= 0")
        return self

    @property
    def warnings(self) -> List[str]:
        """Normalization warnings; m_0 is expected to be n!."""
        out = []
        expected = math.factorial(self.n)
        if abs(self.m[0] - expected) > 1e-12 * expected:
            out.append(f"m_0 = {self.m[0]} differs from n! = {expected}")
        return out

    def subvariety(self, label: str) -> Subvariety:
        """The subvariety with this label."""
        for sub in self.subvarieties:
            if sub.label == label:
                return sub
        raise InputError(f"no subvariety labelled '{label}'")

    def numbers(self, which: Optional[str] = None) -> Tuple[int, List[float]]:
        """Dimension and numbers of X or of a labelled subvariety."""
        if which is None or which == "X":
            return self.n, list(self.m)
        sub = self.subvariety(which)
        return sub.dim, list(sub.v)

    def flipped(self) -> "ClassData":
        """The data of -omega: odd-order numbers change sign."""

        def flip(v: Sequence[float]) -> List[float]:
            return [(-x if k % 2 else x) for k, x in enumerate(v)]

        return ClassData(
            n=self.n,
            m=flip(self.m),
            subvarieties=[Subvariety(label=s.label, dim=s.dim, v=flip(s.v)) for s in self.subvarieties],
        )


def load_class_data(source: Union[str, Path, Dict[str, Any]]) -> ClassData:
    """Class data from a dict or a JSON file; every failure becomes InputError."""
    try:
        if isinstance(source, dict):
            return ClassData.model_validate(source)
        return ClassData.model_validate_json(Path(source).read_text())
    except ValidationError as e:
        raise InputError(f"invalid class data: {e}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read class data: {e}") from e


def _expand(numbers: Sequence[float], p: int) -> complex:
    """Binomial expansion of int (alpha + i*omega)^p from the numbers v_k."""
    return sum((math.comb(p, k) * (1j**k) * numbers[k] for k in range(p + 1)), 0j)


def z_class(data: ClassData, which: Optional[str] = None) -> complex:
    """int (alpha + i*omega)^p; divided by n! for X itself."""
    p, numbers = data.numbers(which)
    z = _expand(numbers, p)
    if which is None or which == "X":
        z /= math.factorial(p)
    return complex(z)


def central_charge(numbers: Sequence[float], p: int) -> complex:
    """Z = -int e^{-i*alpha + omega} truncated at order p, i.e. -(-i)^p int (alpha + i*omega)^p / p!."""
    z = sum((math.comb(p, k) * ((-1j) ** (p - k)) * numbers[k] for k in range(p + 1)), 0j)
    return complex(-z / math.factorial(p))


def principal_angle(z: complex) -> Tuple[float, bool]:
    """Arg z in (-pi, pi] and whether it lies within BRANCH_BAND of the cut."""
    if z == 0:
        raise InputError("charge vanishes; the angle is undefined")
    angle = math.atan2(z.imag, z.real)
    if angle == -math.pi:
        angle = math.pi
    return angle, abs(angle) > math.pi - BRANCH_BAND


def theta_angle(data: ClassData, which: Optional[str] = None) -> Tuple[float, bool]:
    """Principal value of Arg z_class in (-pi, pi] and a near-branch flag."""
    return principal_angle(z_class(data, which))


def stability_check(data: ClassData) -> Dict[str, Any]:
    """Test theta_V > theta_X - (n - dim V) pi/2 for every listed subvariety."""
    theta_x, branch_x = theta_angle(data)
    charge_x = central_charge(data.m, data.n)
    arg_x, _ = principal_angle(charge_x)
    warnings = list(data.warnings)
    if branch_x:
        warnings.append(f"theta_X = {theta_x} is within {BRANCH_BAND} of the branch cut")
    if not data.subvarieties:
        warnings.append("no subvarieties listed: vacuously stable; " + COMPLETENESS_CAVEAT)

    verdicts = []
    for sub in data.subvarieties:
        theta_v, branch_v = theta_angle(data, sub.label)
        margin = theta_v - theta_x + (data.n - sub.dim) * HALF_PI
        charge_v = central_charge(sub.v, sub.dim)
        arg_v, _ = principal_angle(charge_v)
        if branch_v:
            warnings.append(f"theta of '{sub.label}' = {theta_v} is within {BRANCH_BAND} of the branch cut")
        verdicts.append(
            {
                "label": sub.label,
                "dim": sub.dim,
                "theta": theta_v,
                "near_branch": branch_v,
                "margin": margin,
                "stable": margin > TAU_CLASS,
                "charge_re": charge_v.real,
                "charge_im": charge_v.imag,
                "charge_arg": arg_v,
                "charge_stable": arg_v > arg_x,
                "converse_applicable": theta_v > (sub.dim - 2) * HALF_PI,
            }
        )
    for w in warnings:
        logger.warning(w)
    return {
        "n": data.n,
        "theta_x": theta_x,
        "near_branch": branch_x,
        "charge_x_re": charge_x.real,
        "charge_x_im": charge_x.imag,
        "charge_x_arg": arg_x,
        "stable": all(v["stable"] for v in verdicts),
        "subvarieties": verdicts,
        "warnings": warnings,
    }


def surface_criterion(data: ClassData) -> Dict[str, Any]:
    """Existence test on a surface through the class kappa = cot(theta_X) alpha + omega."""
    if data.n != 2:
        raise InputError(f"the surface criterion needs n = 2, got n = {data.n}")
    theta_x, _ = theta_angle(data)
    flipped = theta_x < 0.0
    if flipped:
        data = data.flipped()
        theta_x = -theta_x
    result: Dict[str, Any] = {"theta_x": theta_x, "flipped": flipped, "caveat": COMPLETENESS_CAVEAT}
    if abs(theta_x) <= TAU_CLASS:
        result.update(exists=True, note="theta_X = 0: the curve condition is vacuous and a solution exists")
        return result
    if abs(math.sin(theta_x)) < 1e-12:
        raise InputError("theta_X = pi: cot(theta_X) is undefined")

    cot = math.cos(theta_x) / math.sin(theta_x)
    m0, m1, m2 = data.m
    kappa_sq = cot * cot * m0 + 2.0 * cot * m1 + m2
    curves = []
    for sub in data.subvarieties:
        if sub.dim != 1:
            continue
        value = cot * sub.v[0] + sub.v[1]
        curves.append({"label": sub.label, "kappa_degree": value, "positive": value > 0.0})
    result.update(
        cot=cot,
        kappa_square=kappa_sq,
        kappa_square_positive=kappa_sq > 0.0,
        curves=curves,
        exists=kappa_sq > 0.0 and all(c["positive"] for c in curves),
    )
    if abs(m0 - 2.0) <= 1e-12:
        result["kappa_square_at_least_one"] = kappa_sq >= 1.0 - 1e-12
    return result


def dim2_phase_identity(data: ClassData) -> Dict[str, float]:
    """Residuals of Re Z = cot(theta_X) Im Z and of the variant 1 - m_2 = 2 cot(theta_X) m_1."""
    if data.n != 2:
        raise InputError(f"the phase identity needs n = 2, got n = {data.n}")
    theta_x, _ = theta_angle(data)
    if not 0.0 < theta_x < math.pi:
        raise InputError(f"theta_X = {theta_x} must lie in (0, pi)")
    z = z_class(data)
    cot = math.cos(theta_x) / math.sin(theta_x)
    _, m1, m2 = data.m
    return {
        "theta_x": theta_x,
        "definitional_residual": z.real - cot * z.imag,
        "printed_residual": (1.0 - m2) - 2.0 * cot * m1,
        "normalized_residual": (1.0 - 0.5 * m2) - cot * m1,
    }


def torus_class_data(mu: Sequence[float], dims: Sequence[int] = ()) -> ClassData:
    """Numbers for a flat torus with alpha = I and omega = diag(mu) and its coordinate subtori.

    m_k = k!(n-k)! e_k(mu); a subtorus on the coordinates J has v_k = k!(p-k)! e_k(mu_J).
    """
    n = len(mu)

    def numbers(values: Sequence[float]) -> List[float]:
        p = len(values)
        e = elementary_symmetric(values)
        return [math.factorial(k) * math.factorial(p - k) * e[k] for k in range(p + 1)]

    subs = []
    for p in dims:
        if not 1 <= p <= n - 1:
            raise InputError(f"subtorus dimension must be in 1..{n - 1}, got {p}")
        for subset in itertools.combinations(range(n), p):
            label = "T_" + "".join(str(j) for j in subset)
            subs.append(Subvariety(label=label, dim=p, v=numbers([mu[j] for j in subset])))
    return ClassData(n=n, m=numbers(list(mu)), subvarieties=subs)
