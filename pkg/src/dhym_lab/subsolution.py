"""
The C-subsolution predicate.

Three equivalent pointwise forms are implemented: deleted eigenvalue sums, positivity
of the (n-1, n-1) form built from prod(1 + i*mu), and argument pairing over index
subsets. ``subsolution_field_test`` reduces the eigenvalue form over a grid.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InputError
from .phase_core import HALF_PI, TAU_CLASS, Membership, SpectrumLike, _values, classify

logger = logging.getLogger(__name__)

MAX_PAIRING_DIM = 12
# below this many grid points the field test stays on the calling thread
PARALLEL_MIN_POINTS = 1 << 16


def _check_level(n: int, h: float, name: str = "h") -> None:
    """Reject a level outside the supercritical range ((n-2)*pi/2, n*pi/2)."""
    if not (n - 2) * HALF_PI < h < n * HALF_PI:
        raise InputError(f"{name}={h} is outside the supercritical range (({n}-2)*pi/2, {n}*pi/2)")


def _deleted_phases(vals: Sequence[float]) -> Tuple[float, ...]:
    """Phase sums with one eigenvalue left out, in input order."""
    phases = [math.atan(v) for v in vals]
    return tuple(math.fsum(phases[:j] + phases[j + 1 :]) for j in range(len(phases)))


@dataclass(frozen=True)
class SubsolutionVerdict:
    """Eigenvalue form verdict. ``margins[j]`` is the deleted sum at j minus (h - pi/2)."""

    is_subsolution: bool
    worst_index: int
    slack: float
    margins: Tuple[float, ...]

    @property
    def status(self) -> Membership:
        """Slack classified with the cone tolerance."""
        return classify(self.slack)

    def to_dict(self) -> dict[str, object]:
        """Verdict as plain values."""
        return {
            "is_subsolution": self.is_subsolution,
            "status": self.status.value,
            "worst_index": self.worst_index,
            "slack": self.slack,
            "margins": list(self.margins),
        }


def c_subsolution_test(mu: SpectrumLike, h: float) -> SubsolutionVerdict:
    """Every deleted phase sum must exceed h - pi/2."""
    vals = _values(mu)
    n = len(vals)
    if n < 1:
        raise InputError("empty spectrum")
    _check_level(n, h)
    target = h - HALF_PI
    margins = tuple(d - target for d in _deleted_phases(vals))
    worst = int(np.argmin(margins))
    slack = margins[worst]
    return SubsolutionVerdict(is_subsolution=slack > TAU_CLASS, worst_index=worst, slack=slack, margins=margins)


@dataclass(frozen=True)
class FormPositivityVerdict:
    """Coefficient form verdict with the window and fallback flags."""

    holds: bool
    margins: Tuple[float, ...]
    in_window: bool
    fallback: bool

    def to_dict(self) -> dict[str, object]:
        """Verdict as plain values."""
        return {
            "holds": self.holds,
            "margins": list(self.margins),
            "in_window": self.in_window,
            "fallback": self.fallback,
        }


def form_positivity_test(mu: SpectrumLike, theta_hat: float) -> FormPositivityVerdict:
    """Positivity of the diagonal coefficients of the (n-1, n-1) form.

    The coefficient at j is P_j = prod_{i != j}(1 + i*mu_i). Margins are the signed
    inequality values divided by |P_j|. The inequality matches the eigenvalue form only
    when every deleted phase lies in ((n-3)*pi/2, (n-1)*pi/2); ``in_window`` reports it.
    """
    vals = _values(mu)
    n = len(vals)
    _check_level(n, theta_hat, "theta_hat")
    factors = [complex(1.0, v) for v in vals]
    products = []
    for j in range(n):
        p = complex(1.0, 0.0)
        for i, f in enumerate(factors):
            if i != j:
                p *= f
        products.append(p)

    deleted = _deleted_phases(vals)
    in_window = all((n - 3) * HALF_PI < d < (n - 1) * HALF_PI for d in deleted)

    fallback = False
    margins = []
    if n % 2 == 0:
        s = math.sin(theta_hat)
        if abs(s) < 1e-12:
            fallback = True
        else:
            cot = math.cos(theta_hat) / s
            sign = -((1j**n).real)
            margins = [sign * (p.imag + cot * p.real) / abs(p) for p in products]
    else:
        c = math.cos(theta_hat)
        if abs(c) < 1e-12:
            fallback = True
        else:
            tan = math.sin(theta_hat) / c
            sign = (1j ** (n - 1)).real
            margins = [sign * (tan * p.imag + p.real) / abs(p) for p in products]

    if fallback:
        margins = [d - (theta_hat - HALF_PI) for d in deleted]
    return FormPositivityVerdict(
        holds=min(margins) > 0.0, margins=tuple(margins), in_window=in_window, fallback=fallback
    )


@dataclass(frozen=True)
class PairingVerdict:
    """Worst size-p subset for the argument pairing form."""

    holds: bool
    p: int
    worst_subset: Tuple[int, ...]
    margin: float

    def to_dict(self) -> dict[str, object]:
        """Verdict as plain values."""
        return {"holds": self.holds, "p": self.p, "worst_subset": list(self.worst_subset), "margin": self.margin}


def argument_pairing_test(mu: SpectrumLike, theta_hat: float, p: int) -> PairingVerdict:
    """Check Arg prod_{j in J}(1 + i*mu_j) > theta_hat - (n-p)*pi/2 over every J of size p.

    Each factor has argument in (-pi/2, pi/2), so the argument of the product is the sum
    of the factor arctangents.
    """
    vals = _values(mu)
    n = len(vals)
    if n > MAX_PAIRING_DIM:
        raise InputError(f"argument pairing enumerates subsets exhaustively; n={n} exceeds {MAX_PAIRING_DIM}")
    if not 1 <= p <= n - 1:
        raise InputError(f"p must satisfy 1 <= p <= n-1, got p={p}, n={n}")
    phases = [math.atan(v) for v in vals]
    target = theta_hat - (n - p) * HALF_PI
    worst: Tuple[int, ...] = ()
    worst_margin = math.inf
    for subset in itertools.combinations(range(n), p):
        margin = math.fsum(phases[j] for j in subset) - target
        if margin < worst_margin:
            worst, worst_margin = subset, margin
    return PairingVerdict(holds=worst_margin > TAU_CLASS, p=p, worst_subset=worst, margin=worst_margin)


@dataclass(frozen=True)
class FieldVerdict:
    """Grid reduction of the eigenvalue form: minimum slack and where it occurs."""

    is_subsolution: bool
    slack: float
    location: Tuple[int, ...]
    worst_index: int
    coordinates: Optional[Tuple[float, ...]] = None

    def to_dict(self) -> dict[str, object]:
        """Verdict with the location of the minimum."""
        return {
            "is_subsolution": self.is_subsolution,
            "status": classify(self.slack).value,
            "slack": self.slack,
            "location": list(self.location),
            "coordinates": None if self.coordinates is None else list(self.coordinates),
            "worst_index": self.worst_index,
        }


def slack_field(mu_field: NDArray[np.float64], h_field: NDArray[np.float64]) -> NDArray[np.float64]:
    """Per-point deleted-sum margins, shape (*grid, n)."""
    phases = np.arctan(mu_field)
    deleted = phases.sum(axis=-1, keepdims=True) - phases
    return np.asarray(deleted - (h_field[..., None] - HALF_PI))


def _chunk_minimum(margins: NDArray[np.float64], start: int) -> Tuple[float, int]:
    """Pointwise minimum over one chunk of flattened margins and its global index."""
    pointwise = margins.min(axis=-1)
    k = int(np.argmin(pointwise))
    return float(pointwise[k]), start + k


def subsolution_field_test(
    mu_field: ArrayLike,
    h_field: ArrayLike,
    threads: int = 1,
    spacing: Optional[float] = None,
) -> FieldVerdict:
    """Minimum slack over the grid; ties go to the lowest linear index.

    ``mu_field`` has shape (*grid, n) and ``h_field`` shape (*grid) or is a scalar.
    With ``spacing`` given, the minimizer's coordinates i*spacing are reported.
    """
    mu = np.asarray(mu_field, dtype=float)
    if mu.ndim < 1:
        raise InputError("mu_field must carry the spectrum on its last axis")
    grid = mu.shape[:-1]
    n = mu.shape[-1]
    h = np.asarray(h_field, dtype=float)
    if h.ndim == 0:
        h = np.full(grid, float(h))
    if h.shape != grid:
        raise InputError(f"grid mismatch: mu_field grid {grid}, h_field {h.shape}")
    lo, hi = float(h.min()), float(h.max())
    if not ((n - 2) * HALF_PI < lo and hi < n * HALF_PI):
        raise InputError(f"h ranges over [{lo}, {hi}], outside (({n}-2)*pi/2, {n}*pi/2)")

    flat_mu = mu.reshape(-1, n)
    flat_h = h.reshape(-1)
    size = flat_h.size
    if threads > 1 and size >= PARALLEL_MIN_POINTS:
        bounds = np.linspace(0, size, min(threads, size) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(
                    lambda ab: _chunk_minimum(slack_field(flat_mu[ab[0] : ab[1]], flat_h[ab[0] : ab[1]]), ab[0]),
                    zip(bounds[:-1], bounds[1:]),
                )
            )
        slack, linear = min(parts)
    else:
        slack, linear = _chunk_minimum(slack_field(flat_mu, flat_h), 0)

    margins = slack_field(flat_mu[linear : linear + 1], flat_h[linear : linear + 1])[0]
    location = tuple(int(i) for i in np.unravel_index(linear, grid)) if grid else ()
    coords = None if spacing is None else tuple(i * spacing for i in location)
    verdict = FieldVerdict(
        is_subsolution=slack > TAU_CLASS,
        slack=slack,
        location=location,
        worst_index=int(np.argmin(margins)),
        coordinates=coords,
    )
    logger.debug(f"Field subsolution slack {slack:.6e} at {location}")
    return verdict
