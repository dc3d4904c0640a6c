"""
Two-stage method of continuity from a subsolution chi to the constant phase theta_hat.

Stage A deforms the target from Theta0 = Theta(chi) to Theta1, a regularized maximum of
Theta0 and theta_hat; stage B deforms Theta1 to theta_hat. The unknown constants b_t and
c_t are solved for together with the potentials, and every bound they are known to
satisfy is checked at each accepted step. A failed bound raises PathAssertionError.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from .errors import InputError, PathAssertionError, SubcriticalError
from .phase_core import HALF_PI
from .solver import SolveReport, SolverOptions, newton_solve
from .subsolution import subsolution_field_test
from .torus import TorusProblem, class_phase, field_spectra, recenter, theta_field

logger = logging.getLogger(__name__)

TAU_PATH = 1e-8
# sample points for the infimum-interpolation check
INTERPOLATION_SAMPLES = 11
# one-sided difference step for the kernel matching check, as a fraction of delta
KERNEL_STEP = 1e-3
# scan cells per delta for the slope continuity check
SCAN_RESOLUTION = 1000
KERNEL_TOLERANCES = {"value": 1e-8, "slope": 1e-4, "curvature": 5e-2, "slope_jump": 1.0}


@dataclass(frozen=True)
class PathConfig:
    """Regularization margins and continuation step control."""

    delta0: float
    delta1: float
    t_step_init: float = 0.1
    t_step_min: float = 1e-4
    t_step_max: float = 0.25
    tau_path: float = TAU_PATH
    supercritical_margin: float = 0.0
    delta: float = field(init=False)

    def __post_init__(self) -> None:
        delta = min(self.delta0, self.delta1)
        if not delta > 0.0:
            raise InputError(f"delta = min(delta0, delta1) must be positive, got {delta}")
        if not 0.0 < self.t_step_min <= self.t_step_init <= self.t_step_max <= 1.0:
            raise InputError("continuation steps must satisfy 0 < t_step_min <= t_step_init <= t_step_max <= 1")
        object.__setattr__(self, "delta", delta)

    def to_dict(self) -> Dict[str, Any]:
        """Margins and step control as plain values."""
        return asdict(self)


def compute_theta0(chi_potential: NDArray[np.float64], prob: TorusProblem) -> NDArray[np.float64]:
    """Phase field of chi; raises SubcriticalError unless it stays above the lower threshold."""
    theta0 = theta_field(chi_potential, prob)
    slack = float(theta0.min()) - prob.lower
    if not slack > 0.0:
        raise SubcriticalError(f"subsolution candidate is not supercritical: minimum cone slack {slack:.6e}")
    logger.info(f"Theta0 ranges over [{theta0.min():.12g}, {theta0.max():.12g}]")
    return theta0


def choose_deltas(
    theta0_field: NDArray[np.float64], theta_hat: float, subsol_slack: float, **steps: Any
) -> PathConfig:
    """delta0 = s/200 and delta1 = (theta_hat - inf Theta0)/100."""
    if not subsol_slack > 0.0:
        raise SubcriticalError(f"subsolution slack must be positive, got {subsol_slack}")
    gap = theta_hat - float(np.min(theta0_field))
    if not gap > 0.0:
        raise InputError(f"inf Theta0 must lie below theta_hat (gap {gap})")
    return PathConfig(delta0=subsol_slack / 200.0, delta1=gap / 100.0, **steps)


def existence_hypotheses(
    theta0: NDArray[np.float64], theta_hat: float, subsol_slack: float, n: int
) -> Dict[str, Any]:
    """Evaluate the two alternative sufficient conditions for the path to reach theta_hat.

    Both need a supercritical theta_hat and chi a subsolution. The first adds
    inf Theta0 > (n-2)*pi/2; the second adds theta_hat >= ((n-2) + 2/n)*pi/2, under
    which a subsolution is already supercritical.
    """
    lower = (n - 2) * HALF_PI
    threshold = ((n - 2) + 2.0 / n) * HALF_PI
    critical = theta_hat - lower
    supercritical = float(np.min(theta0)) - lower
    automatic = theta_hat >= threshold
    report: Dict[str, Any] = {
        "critical_phase": {"holds": critical > 0.0, "slack": critical},
        "subsolution": {"holds": subsol_slack > 0.0, "slack": subsol_slack},
        "supercritical_theta0": {"holds": supercritical > 0.0, "slack": supercritical},
        "phase_threshold": {"holds": automatic, "threshold": threshold, "margin": theta_hat - threshold},
    }
    base = critical > 0.0 and subsol_slack > 0.0
    report["satisfied"] = base and (supercritical > 0.0 or automatic)
    if base and automatic and not supercritical > 0.0:
        raise PathAssertionError(
            f"theta_hat {theta_hat:.12g} is above the 2/n threshold but Theta0 is not supercritical "
            f"(slack {supercritical:.6e})"
        )
    return report


def smoothing_kernel(s: NDArray[np.float64] | float, delta: float) -> NDArray[np.float64]:
    """Even C^2 smoothing of |s|: exact outside [-delta, delta], a quartic inside."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    inner = 0.375 * delta + 0.75 * s**2 / delta - 0.125 * s**4 / delta**3
    return np.where(a >= delta, a, inner)


def _side_jets(s0: float, delta: float, direction: float) -> Tuple[float, float, float]:
    """Value, slope and curvature at s0 of the quadratic through the kernel at s0 + direction*k*e, k = 1..3."""
    e = KERNEL_STEP * delta
    f1, f2, f3 = (float(smoothing_kernel(s0 + direction * k * e, delta)) for k in (1, 2, 3))
    value = 3.0 * f1 - 3.0 * f2 + f3
    slope = direction * (-5.0 * f1 + 8.0 * f2 - 3.0 * f3) / (2.0 * e)
    curvature = (f1 - 2.0 * f2 + f3) / e**2
    return value, slope, curvature


def kernel_matching(delta: float) -> Dict[str, float]:
    """Smoothness defects of ``smoothing_kernel`` and ``regularized_max`` at scale delta.

    ``value``, ``slope`` and ``curvature`` are the jumps across s = +-delta between
    one-sided quadratic fits from either side, scaled by 1/delta, 1 and delta.
    ``slope_jump`` is the largest change of the finite-difference slope of
    regularized_max(a, 0, delta) between neighbouring cells over [-3*delta, 3*delta],
    in units of cell/delta; it stays O(1) only while the slope is continuous.
    """
    jumps = {"value": 0.0, "slope": 0.0, "curvature": 0.0}
    for s0 in (-delta, delta):
        inward = -math.copysign(1.0, s0)
        inner = _side_jets(s0, delta, inward)
        outer = _side_jets(s0, delta, -inward)
        jumps["value"] = max(jumps["value"], abs(inner[0] - outer[0]) / delta)
        jumps["slope"] = max(jumps["slope"], abs(inner[1] - outer[1]))
        jumps["curvature"] = max(jumps["curvature"], abs(inner[2] - outer[2]) * delta)

    cell = delta / SCAN_RESOLUTION
    # half-cell offset keeps samples off a = 0 and the matching points
    a = (np.arange(-3 * SCAN_RESOLUTION, 3 * SCAN_RESOLUTION) + 0.5) * cell
    slope = np.diff(regularized_max(a, 0.0, delta)) / cell
    jumps["slope_jump"] = float(np.max(np.abs(np.diff(slope)))) * delta / cell
    return jumps


def kernel_defect(delta: float) -> float:
    """Worst entry of ``kernel_matching`` as a fraction of its tolerance; at most 1 when smooth."""
    return max(value / KERNEL_TOLERANCES[key] for key, value in kernel_matching(delta).items())


def regularized_max(a_field: Any, b_field: Any, delta: float) -> NDArray[np.float64]:
    """Smooth maximum with max(a,b) <= M <= max(a,b) + delta and M = max(a,b) once |a-b| >= 2*delta."""
    if not delta > 0.0:
        raise InputError(f"delta must be positive, got {delta}")
    a = np.asarray(a_field, dtype=float)
    b = np.asarray(b_field, dtype=float)
    half = 0.5 * (a - b)
    smooth = 0.5 * (a + b) + smoothing_kernel(half, delta)
    return np.where(np.abs(half) >= delta, np.maximum(a, b), smooth)


@dataclass(frozen=True)
class PropertyCheck:
    """Outcome of one Theta1 property on the grid."""

    holds: bool
    violation: float
    statement: str


def _argmin(field_: NDArray[np.float64]) -> Tuple[int, ...]:
    """Grid index of the minimum."""
    return tuple(int(i) for i in np.unravel_index(int(np.argmin(field_)), field_.shape))


def verify_theta1(
    theta0: NDArray[np.float64], theta1: NDArray[np.float64], theta_hat: float, cfg: PathConfig
) -> Dict[str, PropertyCheck]:
    """Check the properties of Theta1 on the grid."""
    tau = cfg.tau_path
    delta = cfg.delta
    top = np.maximum(theta0, theta_hat)
    inf0 = float(theta0.min())
    p = _argmin(theta0)
    checks: Dict[str, PropertyCheck] = {}

    defect = kernel_defect(delta)
    checks["smooth"] = PropertyCheck(
        defect <= 1.0, defect, "kernel is C^2 across +-delta and the regularized maximum has a continuous slope"
    )

    sandwich = max(float(np.max(top - theta1)), float(np.max(theta1 - top - delta)))
    checks["sandwich"] = PropertyCheck(sandwich <= tau, sandwich, "max(Theta0, theta_hat) <= Theta1 <= max + delta")

    # the statements about the argmin need theta_hat - inf Theta0 >= 2*delta
    applicable = theta_hat - inf0 >= 2.0 * delta

    low = theta0 + delta <= theta_hat - delta
    low_dev = float(np.max(np.abs(theta1[low] - theta_hat))) if low.any() else 0.0
    checks["equals_target_below"] = PropertyCheck(
        low_dev <= tau and (bool(low[p]) or not applicable),
        low_dev,
        "Theta1 = theta_hat where Theta0 + delta <= theta_hat - delta",
    )

    high = theta_hat + delta <= theta0 - delta
    high_dev = float(np.max(np.abs(theta1[high] - theta0[high]))) if high.any() else 0.0
    checks["equals_theta0_above"] = PropertyCheck(
        high_dev <= tau, high_dev, "Theta1 = Theta0 where theta_hat + delta <= Theta0 - delta"
    )

    if not applicable:
        for key, statement in (
            ("infimum_interpolates", "inf((1-t)Theta0 + t Theta1) = (1-t) inf Theta0 + t theta_hat"),
            ("sup_gain_at_argmin", "sup(Theta1 - Theta0) = theta_hat - inf Theta0, attained at argmin Theta0"),
        ):
            checks[key] = PropertyCheck(True, 0.0, statement + " (not applicable: inf Theta0 is not below theta_hat)")
        return checks

    interp = 0.0
    for t in np.linspace(0.0, 1.0, INTERPOLATION_SAMPLES):
        lhs = float(np.min((1.0 - t) * theta0 + t * theta1))
        interp = max(interp, abs(lhs - ((1.0 - t) * inf0 + t * theta_hat)))
    checks["infimum_interpolates"] = PropertyCheck(
        interp <= tau, interp, "inf((1-t)Theta0 + t Theta1) = (1-t) inf Theta0 + t theta_hat"
    )

    gain = theta1 - theta0
    expected = theta_hat - inf0
    sup_dev = max(abs(float(gain.max()) - expected), abs(float(gain[p]) - expected))
    checks["sup_gain_at_argmin"] = PropertyCheck(
        sup_dev <= tau, sup_dev, "sup(Theta1 - Theta0) = theta_hat - inf Theta0, attained at argmin Theta0"
    )
    return checks


def build_theta1(theta0_field: NDArray[np.float64], theta_hat: float, cfg: PathConfig) -> NDArray[np.float64]:
    """Regularized maximum of Theta0 and theta_hat, rejected unless every property check holds."""
    theta1 = regularized_max(theta0_field, theta_hat, cfg.delta)
    failed = {k: c.violation for k, c in verify_theta1(theta0_field, theta1, theta_hat, cfg).items() if not c.holds}
    if failed:
        raise PathAssertionError(f"Theta1 construction violates {sorted(failed)}: {failed}")
    return theta1


@dataclass(frozen=True)
class PathState:
    """One accepted continuation step."""

    stage: Literal["A", "B"]
    t: float
    potential: NDArray[np.float64] = field(repr=False, compare=False)
    constant: float
    residual_max: float
    subsolution_slack: float
    supercritical_slack: float
    newton_iterations: int = 0
    step: float = 0.0

    def to_row(self) -> Dict[str, Any]:
        """Trace row without the potential."""
        return {
            "stage": self.stage,
            "t": self.t,
            "constant": self.constant,
            "residual_max": self.residual_max,
            "subsolution_slack": self.subsolution_slack,
            "supercritical_slack": self.supercritical_slack,
            "newton_iterations": self.newton_iterations,
            "step": self.step,
        }


@dataclass(frozen=True)
class PathReport:
    """Accepted steps of one stage and how the stage ended."""

    stage: Literal["A", "B"]
    completed: bool
    last_good_t: float
    states: Tuple[PathState, ...]
    failure: Optional[str] = None
    last_solve: Optional[SolveReport] = None

    @property
    def final(self) -> PathState:
        """Last accepted state."""
        return self.states[-1]

    def to_dict(self) -> Dict[str, Any]:
        """Stage summary with the full trace."""
        return {
            "stage": self.stage,
            "completed": self.completed,
            "last_good_t": self.last_good_t,
            "failure": self.failure,
            "steps": len(self.states) - 1,
            "trace": [s.to_row() for s in self.states],
            "last_solve": None if self.last_solve is None else self.last_solve.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class StageAResult:
    """Output of stage A plus the fields stage B continues from."""

    u1: NDArray[np.float64]
    b1: float
    report: PathReport
    chi_potential: NDArray[np.float64]
    theta0: NDArray[np.float64]
    theta1: NDArray[np.float64]
    theta_hat: float


Verifier = Callable[[float, float, NDArray[np.float64]], Tuple[float, float]]


def _continue(
    stage: Literal["A", "B"],
    start: NDArray[np.float64],
    constant: float,
    target: Callable[[float], NDArray[np.float64]],
    verify: Verifier,
    prob: TorusProblem,
    cfg: PathConfig,
    options: Optional[SolverOptions],
    initial_diagnostics: Tuple[float, float],
) -> PathReport:
    """Adaptive continuation in t from 0 to 1; ``start`` is the full potential at t = 0."""
    sub0, sup0 = initial_diagnostics
    residual0 = float(np.max(np.abs(theta_field(start, prob) - target(0.0) - constant)))
    states: List[PathState] = [PathState(stage, 0.0, start, constant, residual0, sub0, sup0)]
    t = 0.0
    u = start
    step = cfg.t_step_init
    successes = 0
    last: Optional[SolveReport] = None
    while t < 1.0:
        t_try = min(1.0, t + step)
        u_new, c_new, report = newton_solve(u, target(t_try), prob, options, c0=constant)
        last = report
        if report.converged:
            sub, sup = verify(t_try, c_new, u_new)
            t, u, constant = t_try, u_new, c_new
            states.append(PathState(stage, t, u, constant, report.residual_max, sub, sup, report.iterations, step))
            logger.info(f"Stage {stage}: t {t:.6g} accepted, constant {constant:.12g}, step {step:.3g}")
            successes += 1
            if successes >= 2:
                step = min(2.0 * step, cfg.t_step_max)
                successes = 0
        else:
            if step <= cfg.t_step_min * (1.0 + 1e-12):
                logger.error(f"Stage {stage}: Newton failed at minimal step from t {t:.6g} ({report.failure})")
                return PathReport(stage, False, t, tuple(states), f"newton_failure_at_min_step: {report.failure}", last)
            step = max(0.5 * step, cfg.t_step_min)
            successes = 0
            logger.info(f"Stage {stage}: Newton failed at t {t_try:.6g}; step halved to {step:.3g}")
    return PathReport(stage, True, 1.0, tuple(states), None, last)


def _persistence(
    chi_spectra: NDArray[np.float64], rhs: NDArray[np.float64], prob: TorusProblem, cfg: PathConfig, what: str
) -> Tuple[float, float]:
    """Supercritical slack of the right hand side and subsolution slack of chi against it."""
    sup = float(rhs.min()) - prob.lower
    if not sup > cfg.supercritical_margin:
        raise PathAssertionError(f"{what}: right hand side lost supercriticality (slack {sup:.6e})")
    verdict = subsolution_field_test(chi_spectra, rhs)
    if not verdict.is_subsolution:
        raise PathAssertionError(f"{what}: chi is no longer a subsolution (slack {verdict.slack:.6e})")
    return verdict.slack, sup


def run_stage_a(
    chi_potential: NDArray[np.float64],
    prob: TorusProblem,
    cfg: PathConfig,
    theta_hat: float,
    options: Optional[SolverOptions] = None,
) -> StageAResult:
    """Solve Theta(chi + u_t) = (1-t)Theta0 + t Theta1 + b_t from (u, b) = (0, 0) to t = 1."""
    chi = recenter(np.asarray(chi_potential, dtype=float))
    theta0 = compute_theta0(chi, prob)
    chi_spectra = field_spectra(chi, prob)
    start = subsolution_field_test(chi_spectra, np.maximum(theta0, theta_hat))
    if not start.is_subsolution:
        raise SubcriticalError(f"chi is not a subsolution for theta_hat={theta_hat} (slack {start.slack:.6e})")
    theta1 = build_theta1(theta0, theta_hat, cfg)
    upper_rate = float(np.max(theta0 - theta1))
    lower_rate = float(np.max(theta1 - theta0))
    tau = cfg.tau_path

    def target(t: float) -> NDArray[np.float64]:
        return (1.0 - t) * theta0 + t * theta1

    def verify(t: float, b: float, full: NDArray[np.float64]) -> Tuple[float, float]:
        if b > t * upper_rate + tau or b < -t * lower_rate - tau:
            raise PathAssertionError(
                f"stage A: b_t={b:.12g} at t={t} outside [{-t * lower_rate:.12g}, {t * upper_rate:.12g}]"
            )
        return _persistence(chi_spectra, target(t) + b, prob, cfg, f"stage A at t={t}")

    initial = (start.slack, float(theta0.min()) - prob.lower)
    report = _continue("A", chi, 0.0, target, verify, prob, cfg, options, initial)
    final = report.final
    if report.completed:
        floor = float(np.min(theta1 + final.constant)) - prob.lower
        if not floor > 0.0:
            raise PathAssertionError(f"stage A: Theta1 + b1 is not supercritical (slack {floor:.6e})")
    return StageAResult(
        u1=final.potential - chi,
        b1=final.constant,
        report=report,
        chi_potential=chi,
        theta0=theta0,
        theta1=theta1,
        theta_hat=theta_hat,
    )


def run_stage_b(
    stage_a: StageAResult,
    prob: TorusProblem,
    cfg: PathConfig,
    options: Optional[SolverOptions] = None,
) -> Tuple[NDArray[np.float64], float, PathReport]:
    """Solve Theta(omega1 + v_t) = (1-t)Theta1 + t theta_hat + c_t from (v, c) = (0, b1) to t = 1."""
    if not stage_a.report.completed:
        raise InputError("stage B needs a completed stage A")
    chi = stage_a.chi_potential
    chi_spectra = field_spectra(chi, prob)
    theta1, theta_hat, b1 = stage_a.theta1, stage_a.theta_hat, stage_a.b1
    base = chi + stage_a.u1
    tau = cfg.tau_path

    def target(t: float) -> NDArray[np.float64]:
        return (1.0 - t) * theta1 + t * theta_hat

    def verify(t: float, c: float, full: NDArray[np.float64]) -> Tuple[float, float]:
        if c > tau or c < b1 - tau:
            raise PathAssertionError(f"stage B: c_t={c:.12g} at t={t} outside [{b1:.12g}, 0]")
        floor = float(np.min((1.0 - t) * (theta1 + b1) + t * (theta_hat + b1))) - prob.lower
        if not floor > 0.0:
            raise PathAssertionError(f"stage B: lower envelope lost supercriticality at t={t} (slack {floor:.6e})")
        return _persistence(chi_spectra, target(t) + c, prob, cfg, f"stage B at t={t}")

    a_final = stage_a.report.final
    report = _continue(
        "B", base, b1, target, verify, prob, cfg, options, (a_final.subsolution_slack, a_final.supercritical_slack)
    )
    final = report.final
    return final.potential - base, final.constant, report


@dataclass(frozen=True, eq=False)
class ContinuityResult:
    """Combined outcome of both stages, or the degenerate short circuit."""

    potential: NDArray[np.float64]
    constant: float
    theta_hat: float
    degenerate: bool
    config: Optional[PathConfig] = None
    stage_a: Optional[PathReport] = None
    stage_b: Optional[PathReport] = None
    theta1_checks: Dict[str, PropertyCheck] = field(default_factory=dict)
    theta0_range: Tuple[float, float] = (math.nan, math.nan)
    subsolution_slack: float = math.nan
    b1: float = 0.0
    direct_agreement: Optional[float] = None
    hypotheses: Dict[str, Any] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        """True when stage B reached t = 1 or nothing had to be continued."""
        return self.degenerate or bool(self.stage_b is not None and self.stage_b.completed)

    @property
    def failure(self) -> Optional[str]:
        """First stage failure, if any."""
        for report in (self.stage_a, self.stage_b):
            if report is not None and report.failure:
                return f"stage {report.stage}: {report.failure}"
        return None

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready summary of the run."""
        return {
            "completed": self.completed,
            "degenerate": self.degenerate,
            "failure": self.failure,
            "theta_hat": self.theta_hat,
            "constant": self.constant,
            "b1": self.b1,
            "theta0_min": self.theta0_range[0],
            "theta0_max": self.theta0_range[1],
            "subsolution_slack": self.subsolution_slack,
            "config": None if self.config is None else self.config.to_dict(),
            "theta1_checks": {k: asdict(v) for k, v in self.theta1_checks.items()},
            "stage_a": None if self.stage_a is None else self.stage_a.to_dict(),
            "stage_b": None if self.stage_b is None else self.stage_b.to_dict(),
            "direct_agreement": self.direct_agreement,
            "hypotheses": self.hypotheses,
        }

    def trace_rows(self) -> List[Dict[str, Any]]:
        """Trace rows of stage A followed by stage B."""
        rows: List[Dict[str, Any]] = []
        for report in (self.stage_a, self.stage_b):
            if report is not None:
                rows.extend(s.to_row() for s in report.states)
        return rows


def run_continuity(
    chi_potential: NDArray[np.float64],
    prob: TorusProblem,
    theta_hat: Optional[float] = None,
    options: Optional[SolverOptions] = None,
    compare_direct: bool = False,
    **steps: Any,
) -> ContinuityResult:
    """Both stages end to end. ``theta_hat`` defaults to the class phase of chi."""
    chi = recenter(np.asarray(chi_potential, dtype=float))
    theta0 = compute_theta0(chi, prob)
    if theta_hat is None:
        theta_hat = class_phase(chi, prob).theta_hat
        logger.info(f"Using the class phase theta_hat = {theta_hat:.15g}")
    tau = float(steps.get("tau_path", TAU_PATH))
    theta_range = (float(theta0.min()), float(theta0.max()))
    chi_spectra = field_spectra(chi, prob)
    slack = subsolution_field_test(chi_spectra, np.maximum(theta0, theta_hat)).slack
    hypotheses = existence_hypotheses(theta0, theta_hat, slack, prob.n)
    logger.info(f"Existence hypotheses satisfied: {hypotheses['satisfied']}")

    if float(np.max(np.abs(theta0 - theta_hat))) <= tau:
        logger.info("Theta0 already equals theta_hat; nothing to continue")
        return ContinuityResult(
            potential=np.zeros_like(chi),
            constant=0.0,
            theta_hat=theta_hat,
            degenerate=True,
            theta0_range=theta_range,
            subsolution_slack=slack,
            hypotheses=hypotheses,
        )

    cfg = choose_deltas(theta0, theta_hat, slack, **steps)
    logger.info(f"delta0 {cfg.delta0:.6e}, delta1 {cfg.delta1:.6e}, delta {cfg.delta:.6e}")
    stage_a = run_stage_a(chi, prob, cfg, theta_hat, options)
    checks = verify_theta1(theta0, stage_a.theta1, theta_hat, cfg)
    common: Dict[str, Any] = dict(
        theta_hat=theta_hat,
        degenerate=False,
        config=cfg,
        stage_a=stage_a.report,
        theta1_checks=checks,
        theta0_range=theta_range,
        subsolution_slack=slack,
        b1=stage_a.b1,
        hypotheses=hypotheses,
    )
    if not stage_a.report.completed:
        return ContinuityResult(potential=stage_a.u1, constant=stage_a.b1, **common)

    v1, c1, report_b = run_stage_b(stage_a, prob, cfg, options)
    total = stage_a.u1 + v1
    result = ContinuityResult(potential=total, constant=c1, stage_b=report_b, **common)
    if compare_direct and report_b.completed:
        direct, _, direct_report = newton_solve(chi, np.full(prob.shape, theta_hat), prob, options)
        if direct_report.converged:
            agreement = float(np.max(np.abs(recenter(chi + total) - direct)))
            logger.info(f"Direct Newton agrees with the path to {agreement:.3e}")
            result = replace(result, direct_agreement=agreement)
        else:
            logger.warning(f"Direct Newton did not converge ({direct_report.failure}); no comparison")
    return result
