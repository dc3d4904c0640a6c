"""
Randomized sweeps over the pointwise algebra, shipped as the ``selftest`` command.

Every sweep draws from a seeded numpy generator and returns a summary dict with the
sample count, the number of failures and the worst observed margin.
"""

import logging
import math
from typing import Any, Callable, Dict, Tuple

import numpy as np
from numpy.typing import NDArray

from .phase_core import HALF_PI, ConeLevel, Spectrum, boundary_solve, f0, theta, wang_yuan_report
from .stability import ClassData, Subvariety, stability_check, surface_criterion
from .subsolution import argument_pairing_test, c_subsolution_test, form_positivity_test

logger = logging.getLogger(__name__)

SKIP_BAND = 1e-8


def level_spectrum(rng: np.random.Generator, n: int, sigma: float) -> Spectrum:
    """A spectrum with theta = sigma: arctans pi/2 - eps_i, eps uniform on the simplex of sum n*pi/2 - sigma."""
    eps = (n * HALF_PI - sigma) * rng.dirichlet(np.ones(n))
    return Spectrum.of(1.0 / np.tan(np.clip(eps, 1e-300, None)))


def supercritical_spectrum(rng: np.random.Generator, n: int, depth: float = math.pi) -> Spectrum:
    """A spectrum with theta uniform in (n*pi/2 - depth, n*pi/2)."""
    return level_spectrum(rng, n, n * HALF_PI - depth * rng.uniform(1e-6, 1.0))


def random_hermitian(rng: np.random.Generator, n: int, scale: float = 2.0) -> NDArray[np.complex128]:
    """A random Hermitian matrix with Gaussian entries times ``scale``."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return np.asarray(scale * 0.5 * (a + a.conj().T))


def with_spectrum(rng: np.random.Generator, lam: Spectrum) -> NDArray[np.complex128]:
    """A random unitary conjugate of diag(lam)."""
    q, _ = np.linalg.qr(random_hermitian(rng, lam.n) + 1j * np.eye(lam.n))
    return np.asarray((q * lam.as_array()) @ q.conj().T)


def _summary(samples: int, failures: int, worst: float, **extra: Any) -> Dict[str, Any]:
    """Common summary layout of every sweep."""
    return {"samples": samples, "failures": failures, "passed": failures == 0, "worst": worst, **extra}


def wang_yuan_sweep(rng: np.random.Generator, samples: int, dims: Tuple[int, ...] = (2, 3, 4, 5)) -> Dict[str, Any]:
    """Level-set points completed by the boundary solve must satisfy the dominance and sum bounds."""
    failures = 0
    worst = math.inf
    total = 0
    for n in dims:
        for offset in (0.0, 0.5, 1.2):
            level = ConeLevel(n, (n - 2) * HALF_PI + offset)
            for _ in range(samples):
                lam = level_spectrum(rng, n, level.sigma)
                last = boundary_solve(lam.values[:-1], level)
                report = wang_yuan_report(Spectrum(lam.values[:-1] + (last,)), level.sigma)
                total += 1
                worst = min(worst, report.dominance_margin, report.sum_margin, *report.symmetric_functions)
                if not report.holds:
                    failures += 1
    return _summary(total, failures, worst)


def subsolution_sweep(
    rng: np.random.Generator, samples: int, dims: Tuple[int, ...] = (2, 3, 4, 5, 6)
) -> Dict[str, Any]:
    """The eigenvalue, coefficient and pairing forms of the subsolution test must agree."""
    failures = 0
    skipped = 0
    total = 0
    chain_failures = 0
    for n in dims:
        lo, hi = (n - 2) * HALF_PI, n * HALF_PI
        special = [k * 0.25 * math.pi for k in range(4 * n + 1) if lo < k * 0.25 * math.pi < hi]
        for i in range(samples):
            mu = supercritical_spectrum(rng, n)
            theta_hat = special[i % len(special)] if i % 10 == 0 else rng.uniform(lo, hi)
            if not lo < theta_hat < hi:
                continue
            eig = c_subsolution_test(mu, theta_hat)
            if abs(eig.slack) <= SKIP_BAND:
                skipped += 1
                continue
            total += 1
            form = form_positivity_test(mu, theta_hat)
            pairing = argument_pairing_test(mu, theta_hat, n - 1)
            if not (eig.is_subsolution == form.holds == pairing.holds):
                failures += 1
                logger.warning(f"Disagreement at mu={mu.values}, theta_hat={theta_hat}")
            if eig.is_subsolution and not all(argument_pairing_test(mu, theta_hat, p).holds for p in range(1, n)):
                chain_failures += 1
    return _summary(total, failures + chain_failures, 0.0, skipped=skipped, chain_failures=chain_failures)


def f0_sweep(rng: np.random.Generator, samples: int, dims: Tuple[int, ...] = (2, 3, 4)) -> Dict[str, Any]:
    """f0 vanishes on the level set and is concave along matrix midpoints."""
    failures = 0
    worst = math.inf
    total = 0
    for n in dims:
        for _ in range(samples):
            sigma = (n - 2) * HALF_PI + rng.uniform(0.0, 1.2)
            lam = level_spectrum(rng, n, sigma)
            # d theta(lambda - t)/dt at t = 0, written without squaring huge eigenvalues
            slope = float(np.sum(np.cos(np.arctan(lam.as_array())) ** 2))
            if abs(theta(lam) - sigma) > 1e-12 or abs(f0(lam, sigma)) * slope > 1e-12:
                failures += 1
            a, b = random_hermitian(rng, n), random_hermitian(rng, n)
            fa, fb = (f0(np.linalg.eigvalsh(x), sigma) for x in (a, b))
            gap = f0(np.linalg.eigvalsh(0.5 * (a + b)), sigma) - 0.5 * (fa + fb)
            worst = min(worst, gap)
            if gap < -1e-9:
                failures += 1
            total += 1
    return _summary(total, failures, worst)


def hypercritical_sweep(rng: np.random.Generator, samples: int, dims: Tuple[int, ...] = (2, 3, 4)) -> Dict[str, Any]:
    """The phase is concave along midpoints of hypercritical matrices."""
    failures = 0
    worst = math.inf
    total = 0
    for n in dims:
        for _ in range(samples):
            a = with_spectrum(rng, supercritical_spectrum(rng, n, depth=HALF_PI))
            b = with_spectrum(rng, supercritical_spectrum(rng, n, depth=HALF_PI))
            phases = [theta(np.linalg.eigvalsh(x)) for x in (a, b, 0.5 * (a + b))]
            gap = phases[2] - 0.5 * (phases[0] + phases[1])
            worst = min(worst, gap)
            if gap < -1e-9:
                failures += 1
            total += 1
    return _summary(total, failures, worst)


def surface_sweep(rng: np.random.Generator, samples: int) -> Dict[str, Any]:
    """On surfaces, the angle inequality and the kappa-degree sign must agree."""
    failures = 0
    skipped = 0
    total = 0
    for _ in range(samples):
        m = [2.0, rng.uniform(0.05, 3.0), rng.uniform(-4.0, 4.0)]
        curve = Subvariety(label="C", dim=1, v=[rng.uniform(0.05, 3.0), rng.uniform(-5.0, 5.0)])
        data = ClassData(n=2, m=m, subvarieties=[curve])
        margin = stability_check(data)["subvarieties"][0]["margin"]
        degree = surface_criterion(data)["curves"][0]["kappa_degree"]
        if abs(margin) <= 1e-9 or abs(degree) <= 1e-9:
            skipped += 1
            continue
        total += 1
        if (margin > 0.0) != (degree > 0.0):
            failures += 1
    return _summary(total, failures, 0.0, skipped=skipped)


def threshold_sweep(rng: np.random.Generator, samples: int, dims: Tuple[int, ...] = (2, 3, 4)) -> Dict[str, Any]:
    """Subsolutions for h above ((n-2) + 2/n)*pi/2 must themselves be supercritical."""
    failures = 0
    worst = math.inf
    total = 0
    hits = 0
    for n in dims:
        lower = (n - 2) * HALF_PI
        for _ in range(samples):
            mu = Spectrum.of(np.tan(rng.uniform(-HALF_PI, HALF_PI, size=n)))
            h = rng.uniform(((n - 2) + 2.0 / n) * HALF_PI, n * HALF_PI)
            total += 1
            if not c_subsolution_test(mu, h).is_subsolution:
                continue
            hits += 1
            margin = theta(mu) - lower
            worst = min(worst, margin)
            if not margin > 0.0:
                failures += 1
                logger.warning(f"Subsolution below the lower threshold at mu={mu.values}, h={h}")
    return _summary(total, failures, worst, subsolutions=hits)


SWEEPS: Dict[str, Callable[[np.random.Generator, int], Dict[str, Any]]] = {
    "wang_yuan": wang_yuan_sweep,
    "subsolution_equivalence": subsolution_sweep,
    "f0": f0_sweep,
    "hypercritical_concavity": hypercritical_sweep,
    "surface_criterion": surface_sweep,
    "existence_threshold": threshold_sweep,
}


def run_selftest(seed: int = 0, samples: int = 1000) -> Dict[str, Any]:
    """Run every sweep from one seeded generator."""
    rng = np.random.default_rng(seed)
    results = {}
    for name, sweep in SWEEPS.items():
        logger.info(f"Running sweep {name} with {samples} samples per case")
        results[name] = sweep(rng, samples)
    return {"seed": seed, "samples": samples, "passed": all(r["passed"] for r in results.values()), "sweeps": results}
