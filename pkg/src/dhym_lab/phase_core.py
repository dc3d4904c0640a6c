"""
Pointwise algebra of the Lagrangian phase operator.

Everything here works at a single point: relative eigenvalues of a form omega with
respect to a background metric alpha, the phase Theta = sum(arctan(lambda_i)), the
eta metric, membership in the cone Gamma and its level sets, boundary sampling,
the Wang-Yuan arithmetic checks and the concave reformulation F0.

Spectra are always sorted in descending order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, optimize

from .errors import InputError, NotPositiveDefiniteError

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * math.pi

# Tolerances
TAU_HERM = 1e-12
TAU_CLASS = 1e-9
ROOT_TOL = 1e-13


@dataclass(frozen=True)
class HermitianForm:
    """An n x n Hermitian coefficient matrix (alpha, omega, chi or eta at a point)."""

    entries: NDArray[np.complex128]

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InputError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InputError("matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(a))))
        asym = float(np.max(np.abs(a - a.conj().T)))
        if asym > TAU_HERM * scale:
            raise InputError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
        a = 0.5 * (a + a.conj().T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        """Matrix size n."""
        return int(self.entries.shape[0])

    def smallest_eigenvalue(self) -> float:
        """Smallest eigenvalue of the Hermitian matrix."""
        return float(np.linalg.eigvalsh(self.entries)[0])

    def require_positive_definite(self, what: str = "alpha") -> HermitianForm:
        """Return self, or raise naming the offending smallest eigenvalue."""
        lam = self.smallest_eigenvalue()
        if not lam > 0.0:
            raise NotPositiveDefiniteError(lam, what)
        return self

    @classmethod
    def metric(cls, entries: ArrayLike) -> HermitianForm:
        """A positive definite form; raises NotPositiveDefiniteError otherwise."""
        return cls(np.asarray(entries)).require_positive_definite()

    @classmethod
    def identity(cls, n: int) -> HermitianForm:
        """The n x n identity."""
        return cls(np.eye(n))

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> HermitianForm:
        """A real diagonal form."""
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> HermitianForm:
        """Parse the command line matrix notation.

        Accepted forms: ``I`` (needs ``n``), ``I<k>``, ``0`` (needs ``n``),
        ``diag:3,-1`` and ``rows:2,1;1,1``.
        """
        spec = text.strip()
        try:
            if spec in ("I", "0"):
                if n is None:
                    raise InputError(f"'{spec}' needs a dimension")
                return cls.identity(n) if spec == "I" else cls(np.zeros((n, n)))
            if spec.startswith("I") and spec[1:].isdigit():
                return cls.identity(int(spec[1:]))
            if spec.startswith("diag:"):
                return cls.diagonal([float(v) for v in spec[5:].split(",")])
            if spec.startswith("rows:"):
                rows = [[float(v) for v in row.split(",")] for row in spec[5:].split(";")]
                return cls(np.array(rows, dtype=float))
        except ValueError as e:
            raise InputError(f"invalid matrix '{text}': {e}") from e
        raise InputError(f"invalid matrix '{text}': expected I, I<k>, 0, diag:... or rows:...")


@dataclass(frozen=True)
class Spectrum:
    """Real eigenvalues sorted descending."""

    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise InputError("empty spectrum")
        if not all(math.isfinite(v) for v in vals):
            raise InputError("spectrum has non-finite values")
        for a, b in zip(vals, vals[1:]):
            if a < b:
                raise InputError(f"spectrum is not sorted descending: {vals}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, values: Iterable[float]) -> Spectrum:
        """Spectrum from unsorted values."""
        return cls(tuple(sorted((float(v) for v in values), reverse=True)))

    @property
    def n(self) -> int:
        """Number of eigenvalues."""
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    def __neg__(self) -> Spectrum:
        return Spectrum.of(-v for v in self.values)

    def shifted(self, t: float) -> Spectrum:
        """lambda - t, still descending."""
        return Spectrum(tuple(v - t for v in self.values))

    def as_array(self) -> NDArray[np.float64]:
        """Eigenvalues as a float array."""
        return np.array(self.values)


SpectrumLike = Union[Spectrum, Sequence[float]]


def _values(lam: SpectrumLike) -> Tuple[float, ...]:
    """Plain tuple of eigenvalues from a Spectrum or a sequence."""
    return lam.values if isinstance(lam, Spectrum) else tuple(float(v) for v in lam)


@dataclass(frozen=True)
class ConeLevel:
    """Phase level sigma in complex dimension n."""

    n: int
    sigma: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InputError(f"dimension must be >= 1, got {self.n}")

    @property
    def lower(self) -> float:
        """The supercritical threshold (n-2)*pi/2."""
        return (self.n - 2) * HALF_PI

    @property
    def is_supercritical(self) -> bool:
        """True when (n-2)*pi/2 < sigma < n*pi/2."""
        return self.lower < self.sigma < self.n * HALF_PI

    def require_supercritical(self) -> ConeLevel:
        """Return self, or raise InputError outside the supercritical range."""
        if not self.is_supercritical:
            raise InputError(
                f"sigma={self.sigma} is outside the supercritical range ({self.lower}, {self.n * HALF_PI})"
            )
        return self


class Membership(str, Enum):
    """Position of a point relative to an open set."""

    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


def classify(slack: float, tol: float = TAU_CLASS) -> Membership:
    """Membership from a signed slack with a symmetric tolerance band."""
    if slack > tol:
        return Membership.INSIDE
    if slack >= -tol:
        return Membership.BOUNDARY
    return Membership.OUTSIDE


def theta(lam: SpectrumLike) -> float:
    """Lagrangian phase sum(arctan(lambda_i))."""
    return math.fsum(math.atan(v) for v in _values(lam))


def asymptotic_phase(lam: SpectrumLike) -> float:
    """Limit of theta(s*lambda) as s -> infinity."""
    vals = _values(lam)
    return HALF_PI * (sum(1 for v in vals if v > 0) - sum(1 for v in vals if v < 0))


def relative_eigenvalues(alpha: HermitianForm, omega: HermitianForm) -> Spectrum:
    """Generalized eigenvalues of omega v = lambda alpha v, descending.

    The generalized problem is reduced through the Cholesky factor of alpha (LAPACK hegv).
    """
    if alpha.dim != omega.dim:
        raise InputError(f"dimension mismatch: alpha is {alpha.dim}x{alpha.dim}, omega is {omega.dim}x{omega.dim}")
    alpha.require_positive_definite()
    w = linalg.eigh(omega.entries, alpha.entries, eigvals_only=True)
    return Spectrum.of(w)


def eta_metric(alpha: HermitianForm, omega: HermitianForm) -> HermitianForm:
    """The metric eta = alpha + omega alpha^{-1} omega."""
    if alpha.dim != omega.dim:
        raise InputError(f"dimension mismatch: alpha is {alpha.dim}x{alpha.dim}, omega is {omega.dim}x{omega.dim}")
    alpha.require_positive_definite()
    factor = linalg.cho_factor(alpha.entries)
    eta = alpha.entries + omega.entries @ linalg.cho_solve(factor, omega.entries)
    return HermitianForm(0.5 * (eta + eta.conj().T))


@dataclass(frozen=True)
class ConeReport:
    """Where a spectrum sits relative to Gamma^sigma and to Gamma itself."""

    theta: float
    slack: float
    status: Membership
    gamma_status: Membership
    gamma_slack: float
    asymptotic_phase: float

    def to_dict(self) -> dict[str, object]:
        """Report as plain values."""
        return {
            "theta": self.theta,
            "slack": self.slack,
            "status": self.status.value,
            "gamma_status": self.gamma_status.value,
            "gamma_slack": self.gamma_slack,
            "asymptotic_phase": self.asymptotic_phase,
        }


def cone_membership(lam: SpectrumLike, level: ConeLevel) -> ConeReport:
    """Classify lambda against the level set {Theta > sigma} and against the cone Gamma.

    Gamma membership uses the two-point rule: the direct phase at s=1 and the
    limit of theta(s*lambda) as s -> infinity, both compared with (n-2)*pi/2.
    When the limit sits on the threshold, the side it is approached from decides.
    """
    vals = _values(lam)
    if len(vals) != level.n:
        raise InputError(f"spectrum has {len(vals)} values but level is for n={level.n}")
    th = theta(vals)
    slack = th - level.sigma
    direct = th - level.lower
    limit = asymptotic_phase(vals) - level.lower
    gamma_slack = max(direct, limit)
    # theta(s*lambda) approaches the limit like -sum(1/lambda)/s
    drift = -math.fsum(1.0 / v for v in vals if v != 0.0) if abs(limit) <= TAU_CLASS else 0.0
    if all(v == 0.0 for v in vals):
        gamma_status = Membership.BOUNDARY
    elif direct > TAU_CLASS or limit > TAU_CLASS or drift > TAU_CLASS:
        gamma_status = Membership.INSIDE
    elif direct >= -TAU_CLASS or (abs(limit) <= TAU_CLASS and drift >= -TAU_CLASS):
        gamma_status = Membership.BOUNDARY
    else:
        gamma_status = Membership.OUTSIDE
    return ConeReport(
        theta=th,
        slack=slack,
        status=classify(slack),
        gamma_status=gamma_status,
        gamma_slack=gamma_slack,
        asymptotic_phase=asymptotic_phase(vals),
    )


def boundary_solve(prefix: Sequence[float], level: ConeLevel) -> float:
    """Smallest eigenvalue lambda_n completing ``prefix`` to a point of the level set Theta = sigma."""
    vals = tuple(float(v) for v in prefix)
    if len(vals) != level.n - 1 or not vals:
        raise InputError(f"prefix must hold n-1={level.n - 1} values, got {len(vals)}")
    for a, b in zip(vals, vals[1:]):
        if a < b:
            raise InputError(f"prefix is not sorted descending: {vals}")
    partial = math.fsum(math.atan(v) for v in vals)
    target = level.sigma - partial
    if not -HALF_PI < target < HALF_PI:
        raise InputError(f"no root: sigma - sum(arctan(prefix)) = {target} is outside (-pi/2, pi/2)")

    lam = math.tan(target)
    g = math.inf
    for _ in range(50):
        g = partial + math.atan(lam) - level.sigma
        if abs(g) <= ROOT_TOL:
            break
        lam -= g * (1.0 + lam * lam)
    if abs(g) > ROOT_TOL:
        raise InputError(f"boundary root not resolved (residual {g:.3e})")

    last = vals[-1]
    if lam > last:
        if lam - last <= 1e-12 * max(1.0, abs(last)):
            lam = last
        else:
            raise InputError(f"root {lam} exceeds the smallest prefix value {last}; descending order violated")
    return lam


def elementary_symmetric(values: Sequence[float]) -> List[float]:
    """e_0..e_m by the recurrence e_k(l_1..l_m) = e_k(l_1..l_{m-1}) + l_m e_{k-1}(l_1..l_{m-1})."""
    e = [1.0] + [0.0] * len(values)
    for m, v in enumerate(values, start=1):
        for k in range(m, 0, -1):
            e[k] += v * e[k - 1]
    return e


@dataclass(frozen=True)
class WangYuanReport:
    """Arithmetic properties of a spectrum lying on a supercritical level set."""

    sigma: float
    second_smallest_positive: bool
    dominance_margin: float
    dominance: bool
    sum_margin: float
    sum_condition: bool
    symmetric_functions: Tuple[float, ...]
    symmetric_conditions: Tuple[bool, ...]

    @property
    def holds(self) -> bool:
        """True when every arithmetic property holds."""
        return (
            self.second_smallest_positive and self.dominance and self.sum_condition and all(self.symmetric_conditions)
        )

    def to_dict(self) -> dict[str, object]:
        """Report with the combined verdict."""
        return {
            "sigma": self.sigma,
            "second_smallest_positive": self.second_smallest_positive,
            "dominance_margin": self.dominance_margin,
            "dominance": self.dominance,
            "sum_margin": self.sum_margin,
            "sum_condition": self.sum_condition,
            "symmetric_functions": list(self.symmetric_functions),
            "symmetric_conditions": list(self.symmetric_conditions),
            "holds": self.holds,
        }


def wang_yuan_report(lam: SpectrumLike, sigma: float) -> WangYuanReport:
    """Check the arithmetic consequences of theta(lambda) = sigma for sigma above (n-2)*pi/2."""
    vals = _values(lam)
    n = len(vals)
    if n < 2:
        raise InputError("the arithmetic report needs n >= 2")
    level = ConeLevel(n, sigma)
    th = theta(vals)
    if abs(th - sigma) > TAU_CLASS:
        raise InputError(f"spectrum is not on the level set: theta - sigma = {th - sigma:.3e}")
    if sigma < level.lower - 1e-12:
        raise InputError(f"sigma={sigma} is below (n-2)*pi/2={level.lower}")

    second, last = vals[-2], vals[-1]
    dominance_margin = second - abs(last)
    sum_margin = vals[0] + (n - 1) * last
    e = elementary_symmetric(vals)
    e_abs = elementary_symmetric([abs(v) for v in vals])
    symmetric = tuple(e[1:n])
    conditions = tuple(e[k] >= -TAU_CLASS * max(1.0, e_abs[k]) for k in range(1, n))
    return WangYuanReport(
        sigma=sigma,
        second_smallest_positive=second > 0.0,
        dominance_margin=dominance_margin,
        dominance=dominance_margin >= -TAU_CLASS * max(1.0, abs(second)),
        sum_margin=sum_margin,
        sum_condition=sum_margin >= -TAU_CLASS * max(1.0, abs(vals[0])),
        symmetric_functions=symmetric,
        symmetric_conditions=conditions,
    )


def f0(lam: SpectrumLike, sigma: float) -> float:
    """The unique t with theta(lambda - t) = sigma; positive exactly when theta(lambda) > sigma."""
    vals = np.array(_values(lam), dtype=float)
    n = len(vals)
    if not -n * HALF_PI < sigma < n * HALF_PI:
        raise InputError(f"sigma={sigma} is outside (-n*pi/2, n*pi/2) for n={n}")

    def g(t: float) -> float:
        return float(np.sum(np.arctan(vals - t))) - sigma

    # theta(lambda - t) is strictly decreasing in t; these offsets bracket the root
    lo = float(vals.min()) - (math.tan(max(sigma / n, 0.0)) + 1.0)
    hi = float(vals.max()) + (math.tan(max(-sigma / n, 0.0)) + 1.0)
    t = float(optimize.brentq(g, lo, hi, xtol=1e-15, maxiter=200))
    for _ in range(10):
        r = g(t)
        if abs(r) <= ROOT_TOL:
            break
        t += r / float(np.sum(1.0 / (1.0 + (vals - t) ** 2)))
    return t


def f0_matrix(alpha: HermitianForm, a: HermitianForm, sigma: float) -> float:
    """f0 of the eigenvalues of a relative to alpha."""
    return f0(relative_eigenvalues(alpha, a), sigma)
