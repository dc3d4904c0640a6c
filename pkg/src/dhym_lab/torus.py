"""
Flat torus discretization of the phase equation.

Potentials depend only on the real coordinates x_j of z_j = x_j + i*y_j, so
i*ddbar(u) reduces to Hess(u)/4 and the unknown form is omega(x) = B + Hess(u)(x)/4,
a real symmetric field on the periodic N^n grid with spacing 1/N.

Field arrays carry the grid axes first; matrix and spectrum fields append their
trailing (n, n) or (n,) axes.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import sympy
from numpy.typing import ArrayLike, NDArray
from sympy.parsing.sympy_parser import auto_number, parse_expr

from .errors import InputError
from .phase_core import HALF_PI, HermitianForm

logger = logging.getLogger(__name__)

MAX_DIM = 3
MIN_POINTS = 8

_FUNCTIONS = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tan": sympy.tan,
    "exp": sympy.exp,
    "log": sympy.log,
    "sqrt": sympy.sqrt,
    "arctan": sympy.atan,
    "tanh": sympy.tanh,
    "cosh": sympy.cosh,
    "sinh": sympy.sinh,
    "abs": sympy.Abs,
}
_NUMBERS = {"Integer": sympy.Integer, "Float": sympy.Float, "Rational": sympy.Rational, "__builtins__": {}}
_ATTRIBUTE = re.compile(r"\.\s*[A-Za-z_]")


def grid_expression(expr: str, coordinates: Tuple[NDArray[np.float64], ...]) -> NDArray[np.float64]:
    """Evaluate an arithmetic expression in x0, x1, x2 on the grid.

    Only numbers, the coordinate names, ``pi``, arithmetic operators and the functions
    in ``_FUNCTIONS`` are accepted.
    """
    if "__" in expr or _ATTRIBUTE.search(expr):
        raise InputError(f"unsupported syntax in expression '{expr}'")
    symbols = [sympy.Symbol(f"x{j}", real=True) for j in range(len(coordinates))]
    local: Dict[str, Any] = {"pi": sympy.pi, **_FUNCTIONS}
    local.update((str(s), s) for s in symbols)
    try:
        parsed = parse_expr(expr, local_dict=local, global_dict=dict(_NUMBERS), transformations=(auto_number,))
    except Exception as e:
        raise InputError(f"cannot parse expression '{expr}': {e}") from e
    if not isinstance(parsed, sympy.Expr) or not parsed.free_symbols <= set(symbols):
        raise InputError(f"unsupported syntax in expression '{expr}'")
    with np.errstate(all="ignore"):
        value = sympy.lambdify(symbols, parsed, modules="numpy")(*coordinates)
    out = np.broadcast_to(np.asarray(value, dtype=float), coordinates[0].shape).copy()
    if not np.all(np.isfinite(out)):
        raise InputError(f"expression '{expr}' is not finite on the grid")
    return out


FieldSpec = Union[float, str]


@dataclass(frozen=True, eq=False)
class TorusProblem:
    """Grid, background data and phase target of one torus problem."""

    n: int
    N: int
    B: NDArray[np.float64]
    alpha: Optional[HermitianForm] = None
    h_spec: Optional[FieldSpec] = None
    _alpha_inv_factor: NDArray[np.complex128] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 1 <= self.n <= MAX_DIM:
            raise InputError(f"n must be in 1..{MAX_DIM}, got {self.n}")
        if self.N < MIN_POINTS or self.N % 2:
            raise InputError(f"N must be even and >= {MIN_POINTS}, got {self.N}")
        b = np.array(self.B, dtype=float)
        if b.ndim == 0:
            b = b.reshape(1, 1)
        if b.shape != (self.n, self.n):
            raise InputError(f"B must be {self.n}x{self.n}, got shape {b.shape}")
        if float(np.max(np.abs(b - b.T))) > 1e-12 * max(1.0, float(np.max(np.abs(b)))):
            raise InputError("B must be real symmetric")
        b = 0.5 * (b + b.T)
        b.setflags(write=False)
        object.__setattr__(self, "B", b)

        alpha = self.alpha if self.alpha is not None else HermitianForm.identity(self.n)
        if alpha.dim != self.n:
            raise InputError(f"alpha must be {self.n}x{self.n}, got {alpha.dim}x{alpha.dim}")
        alpha.require_positive_definite()
        object.__setattr__(self, "alpha", alpha)

        # alpha = L L^H; the relative eigenproblem becomes a standard one for Linv omega Linv^H
        linv = np.linalg.inv(np.linalg.cholesky(alpha.entries))
        if np.allclose(linv.imag, 0.0):
            linv = linv.real
        linv.setflags(write=False)
        object.__setattr__(self, "_alpha_inv_factor", linv)

    @property
    def spacing(self) -> float:
        """Grid spacing 1/N."""
        return 1.0 / self.N

    @property
    def shape(self) -> Tuple[int, ...]:
        """Shape of a scalar grid field."""
        return (self.N,) * self.n

    @property
    def lower(self) -> float:
        """Supercritical threshold (n-2)*pi/2."""
        return (self.n - 2) * HALF_PI

    @property
    def alpha_form(self) -> HermitianForm:
        """Reference form, the identity unless one was given."""
        assert self.alpha is not None
        return self.alpha

    def coordinates(self) -> Tuple[NDArray[np.float64], ...]:
        """Grid coordinates x_j = i_j/N, one array per axis."""
        axis = np.arange(self.N) * self.spacing
        return tuple(np.meshgrid(*([axis] * self.n), indexing="ij"))

    def grid_field(self, spec: Union[FieldSpec, ArrayLike, None], default: float = 0.0) -> NDArray[np.float64]:
        """A grid field from a constant, an expression or an explicit array."""
        if spec is None:
            return np.full(self.shape, default)
        if isinstance(spec, str):
            return grid_expression(spec, self.coordinates())
        arr = np.asarray(spec, dtype=float)
        if arr.ndim == 0:
            return np.full(self.shape, float(arr))
        if arr.shape != self.shape:
            raise InputError(f"field has shape {arr.shape}, expected {self.shape}")
        return arr.copy()

    def h_field(self) -> NDArray[np.float64]:
        """Phase target h on the grid."""
        if self.h_spec is None:
            raise InputError("problem has no phase target h")
        return self.grid_field(self.h_spec)

    def with_grid(self, N: int) -> TorusProblem:
        """Same problem on an N^n grid."""
        return TorusProblem(n=self.n, N=N, B=self.B, alpha=self.alpha, h_spec=self.h_spec)


def recenter(u: NDArray[np.float64]) -> NDArray[np.float64]:
    """Fix the gauge: subtract the grid mean."""
    return np.asarray(u - u.mean())


def discrete_hessian(u: NDArray[np.float64]) -> NDArray[np.float64]:
    """Periodic second-order central differences with spacing 1/N, N = u.shape[0]."""
    n = u.ndim
    h2 = (1.0 / u.shape[0]) ** 2
    hess = np.empty(u.shape + (n, n))
    for j in range(n):
        fwd = np.roll(u, -1, axis=j)
        bwd = np.roll(u, 1, axis=j)
        hess[..., j, j] = (fwd - 2.0 * u + bwd) / h2
        for k in range(j + 1, n):
            mixed = (
                np.roll(fwd, -1, axis=k) - np.roll(fwd, 1, axis=k) - np.roll(bwd, -1, axis=k) + np.roll(bwd, 1, axis=k)
            ) / (4.0 * h2)
            hess[..., j, k] = mixed
            hess[..., k, j] = mixed
    return hess


def omega_field(u: NDArray[np.float64], prob: TorusProblem) -> NDArray[np.float64]:
    """omega = B + Hess(u)/4 at every grid point."""
    if u.shape != prob.shape:
        raise InputError(f"potential has shape {u.shape}, expected {prob.shape}")
    return np.asarray(prob.B + 0.25 * discrete_hessian(u))


def _reduced(omega: NDArray[np.float64], prob: TorusProblem) -> NDArray[np.complex128] | NDArray[np.float64]:
    """Linv omega Linv^H, Hermitian-symmetrized."""
    linv = prob._alpha_inv_factor
    m = linv @ omega @ linv.conj().T
    return np.asarray(0.5 * (m + np.swapaxes(m, -1, -2).conj()))


def field_spectra(u: NDArray[np.float64], prob: TorusProblem) -> NDArray[np.float64]:
    """Relative eigenvalues of omega(x) with respect to alpha at every grid point, descending."""
    lam = np.linalg.eigvalsh(_reduced(omega_field(u, prob), prob))
    return np.asarray(lam[..., ::-1])


def theta_field(u: NDArray[np.float64], prob: TorusProblem) -> NDArray[np.float64]:
    """Phase Theta(omega_u) = sum arctan(lambda) on the grid."""
    return np.asarray(np.arctan(field_spectra(u, prob)).sum(axis=-1))


def cone_slack_field(u: NDArray[np.float64], prob: TorusProblem) -> NDArray[np.float64]:
    """Theta - (n-2)*pi/2; positive where omega_u is supercritical."""
    return theta_field(u, prob) - prob.lower


def min_cone_slack(u: NDArray[np.float64], prob: TorusProblem) -> float:
    """Smallest supercritical slack on the grid."""
    return float(cone_slack_field(u, prob).min())


@dataclass(frozen=True)
class ClassPhase:
    """Grid quadrature Z of prod(1 + i*lambda) and its lifted argument."""

    charge: complex
    theta_hat: float
    mean_theta: float

    def to_dict(self) -> dict[str, object]:
        """Charge split into real and imaginary parts."""
        return {
            "charge_re": self.charge.real,
            "charge_im": self.charge.imag,
            "theta_hat": self.theta_hat,
            "mean_theta": self.mean_theta,
        }


def class_phase(u: NDArray[np.float64], prob: TorusProblem) -> ClassPhase:
    """Constant phase of the class of omega, on the 2*pi branch nearest the mean pointwise phase."""
    lam = field_spectra(u, prob)
    charge = complex(np.prod(1.0 + 1j * lam, axis=-1).mean())
    if abs(charge) == 0.0:
        raise InputError("class charge vanishes; the constant phase is undefined")
    mean_theta = float(np.arctan(lam).sum(axis=-1).mean())
    principal = math.atan2(charge.imag, charge.real)
    k = round((mean_theta - principal) / (2.0 * math.pi))
    return ClassPhase(charge=charge, theta_hat=principal + 2.0 * math.pi * k, mean_theta=mean_theta)


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """Delta_eta frozen at a potential: w -> sum_jk G_jk(x) Hess(w)_jk / 4 with G = Re(eta^{-1})."""

    coefficients: NDArray[np.float64]

    @property
    def spacing(self) -> float:
        """Grid spacing of the frozen coefficients."""
        return 1.0 / self.coefficients.shape[0]

    def apply(self, w: NDArray[np.float64]) -> NDArray[np.float64]:
        """Apply the frozen operator to w."""
        return np.asarray(0.25 * np.einsum("...jk,...jk->...", self.coefficients, discrete_hessian(w)))

    def mean_coefficients(self) -> NDArray[np.float64]:
        """Grid mean of G; the constant-coefficient preconditioner symbol."""
        n = self.coefficients.shape[-1]
        return np.asarray(self.coefficients.reshape(-1, n, n).mean(axis=0))

    def spectral_radius_bound(self) -> float:
        """Gershgorin bound on the discrete operator."""
        g = self.coefficients
        diag = np.trace(np.abs(g), axis1=-2, axis2=-1)
        off = np.abs(g).sum(axis=(-2, -1)) - diag
        return float((0.25 * (4.0 * diag + off)).max() / self.spacing**2)


def linearized_operator(u: NDArray[np.float64], prob: TorusProblem) -> LinearizedOperator:
    """Coefficients eta^{-1} = Linv^H (I + M^2)^{-1} Linv, M = Linv omega Linv^H, per point."""
    m = _reduced(omega_field(u, prob), prob)
    lam, vecs = np.linalg.eigh(m)
    inner = (vecs * (1.0 / (1.0 + lam**2))[..., None, :]) @ np.swapaxes(vecs, -1, -2).conj()
    linv = prob._alpha_inv_factor
    g = (linv.conj().T @ inner @ linv).real
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    return LinearizedOperator(coefficients=np.asarray(g))


def linearized_apply(u: NDArray[np.float64], w: NDArray[np.float64], prob: TorusProblem) -> NDArray[np.float64]:
    """Linearization of Theta at u applied to w."""
    return linearized_operator(u, prob).apply(w)


def global_coefficient_bound(prob: TorusProblem) -> float:
    """A Gershgorin bound valid for every potential, using Re(eta^{-1}) <= Re(alpha^{-1})."""
    a_inv = np.linalg.inv(prob.alpha_form.entries).real
    d = np.diag(a_inv)
    off = np.sqrt(np.outer(d, d)).sum() - d.sum()
    return float(0.25 * (4.0 * d.sum() + off) / prob.spacing**2)
