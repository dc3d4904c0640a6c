"""
Nonlinear solvers for Theta(u) = h + c on the torus grid.

``newton_solve`` runs damped Newton on the pair (u, c) with a GMRES inner solve
preconditioned by the constant-coefficient operator inverted with FFTs.
``flow_solve`` integrates the parabolic flow du/dt = Theta(u) - h - c(t) explicitly.

Neither raises on non-convergence: the report carries ``converged=False`` and a
``failure`` reason, and the caller decides.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import fft
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import SubcriticalError
from .torus import (
    LinearizedOperator,
    TorusProblem,
    global_coefficient_bound,
    linearized_operator,
    recenter,
    theta_field,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Newton, Krylov and flow controls."""

    tol_nl: float = 1e-10
    krylov_rtol: float = 1e-12
    krylov_max_iter: int = 500
    krylov_restart: int = 80
    max_iter: int = 50
    max_halvings: int = 30
    armijo: float = 1e-4
    dt_min: float = 1e-12
    max_steps: int = 200_000
    flow_monitor: Literal["l2", "oscillation"] = "l2"
    history_stride: int = 100


@dataclass(frozen=True)
class IterationRecord:
    """One Newton iteration or one recorded flow step."""

    iteration: int
    residual_max: float
    residual_l2: float
    constant: float
    min_cone_slack: float
    step: float = 0.0
    krylov_iterations: int = 0
    time: float = 0.0


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a Newton or flow solve."""

    method: str
    converged: bool
    iterations: int
    residual_max: float
    residual_l2: float
    constant: float
    min_cone_slack: float
    history: Tuple[IterationRecord, ...] = ()
    failure: Optional[str] = None
    warnings: Tuple[str, ...] = ()
    time: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Report with its history as plain values."""
        out = asdict(self)
        out["history"] = [asdict(r) for r in self.history]
        out["warnings"] = list(self.warnings)
        return out


def _l2(r: NDArray[np.float64]) -> float:
    """Grid root mean square."""
    return float(np.sqrt(np.mean(r * r)))


class KrylovFailure(Exception):
    """GMRES broke down or missed its tolerance by more than the square root."""


class SpectralPreconditioner:
    """Inverse of the constant-coefficient operator w -> sum_jk Gbar_jk Hess(w)_jk / 4 by FFT."""

    def __init__(self, coefficients: NDArray[np.float64], shape: Tuple[int, ...], spacing: float):
        n = len(shape)
        angles = np.meshgrid(*[2.0 * np.pi * fft.fftfreq(N) for N in shape], indexing="ij")
        symbol = np.zeros(shape)
        for j in range(n):
            symbol += coefficients[j, j] * (2.0 * np.cos(angles[j]) - 2.0)
            for k in range(j + 1, n):
                symbol -= 2.0 * coefficients[j, k] * np.sin(angles[j]) * np.sin(angles[k])
        symbol *= 0.25 / spacing**2
        symbol[(0,) * n] = 1.0
        self.symbol = symbol
        self.size = int(np.prod(shape))

    def solve(self, rhs: NDArray[np.float64], mean: float = 0.0) -> NDArray[np.float64]:
        """Solve on the mean-zero subspace and set the grid mean to ``mean``."""
        spec = fft.fftn(rhs) / self.symbol
        spec[(0,) * rhs.ndim] = mean * self.size
        return np.asarray(fft.ifftn(spec).real)


def _newton_direction(
    op: LinearizedOperator, residual: NDArray[np.float64], options: SolverOptions
) -> Tuple[NDArray[np.float64], float, int, Optional[str]]:
    """Solve Delta_eta du - dc = -R with mean(du) = 0."""
    shape = residual.shape
    m = residual.size

    def matvec(z: NDArray[np.float64]) -> NDArray[np.float64]:
        z = np.asarray(z).reshape(-1)
        w = z[:m].reshape(shape)
        out = np.empty(m + 1)
        out[:m] = (op.apply(w) - z[m]).ravel()
        out[m] = w.mean()
        return out

    pre = SpectralPreconditioner(op.mean_coefficients(), shape, op.spacing)

    def psolve(z: NDArray[np.float64]) -> NDArray[np.float64]:
        z = np.asarray(z).reshape(-1)
        r = z[:m].reshape(shape)
        d = -float(r.mean())
        out = np.empty(m + 1)
        out[:m] = pre.solve(r + d, mean=float(z[m])).ravel()
        out[m] = d
        return out

    size = m + 1
    a_op = LinearOperator((size, size), matvec=matvec, dtype=float)
    m_op = LinearOperator((size, size), matvec=psolve, dtype=float)
    rhs = np.concatenate([-residual.ravel(), [0.0]])

    count = 0

    def tick(_: float) -> None:
        nonlocal count
        count += 1

    restart = min(size, options.krylov_restart)
    z = np.zeros(size)
    info = 1
    # restart cycles run one at a time so the total never exceeds krylov_max_iter
    while count < options.krylov_max_iter:
        before = count
        z, info = gmres(
            a_op,
            rhs,
            x0=z,
            rtol=options.krylov_rtol,
            atol=0.0,
            restart=min(restart, options.krylov_max_iter - count),
            maxiter=1,
            M=m_op,
            callback=tick,
            callback_type="pr_norm",
        )
        if info <= 0 or count == before:
            break
    if info < 0:
        raise KrylovFailure(f"GMRES breakdown (info={info})")
    true_rel = float(np.linalg.norm(rhs - matvec(z)) / np.linalg.norm(rhs))
    warning = None
    if info > 0:
        if true_rel > math.sqrt(options.krylov_rtol):
            raise KrylovFailure(f"GMRES did not converge in {count} iterations (relative residual {true_rel:.3e})")
        warning = f"GMRES hit its iteration cap; accepted with relative residual {true_rel:.3e}"
        logger.warning(warning)
    logger.debug(f"GMRES: {count} iterations, relative residual {true_rel:.3e}")
    return z[:m].reshape(shape), float(z[m]), count, warning


def _require_supercritical(theta: NDArray[np.float64], prob: TorusProblem) -> float:
    """Supercritical slack of a phase field; raises SubcriticalError when it is not positive."""
    slack = float(theta.min()) - prob.lower
    if not slack > 0.0:
        raise SubcriticalError(f"initial iterate is not supercritical: minimum cone slack {slack:.6e}")
    return slack


def newton_solve(
    u0: NDArray[np.float64],
    h_field: NDArray[np.float64],
    prob: TorusProblem,
    options: Optional[SolverOptions] = None,
    c0: Optional[float] = None,
) -> Tuple[NDArray[np.float64], float, SolveReport]:
    """Damped Newton for Theta(u) - h - c = 0 with mean(u) = 0.

    Returns the last iterate, its constant and the report. Raises SubcriticalError
    only when the initial iterate is not supercritical.
    """
    opts = options or SolverOptions()
    h = np.asarray(h_field, dtype=float)
    u = recenter(np.asarray(u0, dtype=float))
    theta = theta_field(u, prob)
    slack = _require_supercritical(theta, prob)
    c = float(np.mean(theta - h)) if c0 is None else float(c0)
    residual = theta - h - c

    history: List[IterationRecord] = []
    warnings: List[str] = []
    failure: Optional[str] = None
    converged = False
    step = 0.0
    kits = 0
    it = 0
    while True:
        rmax = float(np.max(np.abs(residual)))
        rl2 = _l2(residual)
        history.append(IterationRecord(it, rmax, rl2, c, slack, step, kits))
        logger.info(f"Newton {it}: max residual {rmax:.3e}, L2 {rl2:.3e}, c {c:.12g}, cone slack {slack:.3e}")
        if rmax <= opts.tol_nl:
            converged = True
            break
        if it >= opts.max_iter:
            failure = "max_iterations"
            break

        op = linearized_operator(u, prob)
        try:
            du, dc, kits, note = _newton_direction(op, residual, opts)
        except KrylovFailure as e:
            logger.error(str(e))
            failure = "krylov_nonconvergence"
            break
        if note:
            warnings.append(note)

        step = 1.0
        halvings = 0
        accepted = False
        while halvings <= opts.max_halvings:
            trial = u + step * du
            c_trial = c + step * dc
            theta_trial = theta_field(trial, prob)
            slack_trial = float(theta_trial.min()) - prob.lower
            r_trial = theta_trial - h - c_trial
            if slack_trial >= 0.5 * slack and _l2(r_trial) <= (1.0 - opts.armijo * step) * rl2:
                accepted = True
                break
            halvings += 1
            step *= 0.5
            logger.debug(f"Line search halving {halvings}: step {step:.3e}, trial cone slack {slack_trial:.3e}")
        if not accepted:
            failure = "line_search_stagnation" if slack_trial > 0.0 else "loss_of_supercriticality"
            logger.error(f"Newton stopped at iteration {it}: {failure}")
            break

        u, c, theta, slack, residual = recenter(trial), c_trial, theta_trial, slack_trial, r_trial
        it += 1

    report = SolveReport(
        method="newton",
        converged=converged,
        iterations=it,
        residual_max=history[-1].residual_max,
        residual_l2=history[-1].residual_l2,
        constant=c,
        min_cone_slack=slack,
        history=tuple(history),
        failure=failure,
        warnings=tuple(warnings),
    )
    return u, c, report


def _monitor(residual: NDArray[np.float64], kind: str) -> float:
    """Convergence measure of the flow residual: the l2 norm or the oscillation."""
    if kind == "oscillation":
        return float(residual.max() - residual.min())
    return _l2(residual)


def flow_solve(
    u0: NDArray[np.float64],
    h_field: NDArray[np.float64],
    prob: TorusProblem,
    t_end: float = 50.0,
    options: Optional[SolverOptions] = None,
) -> Tuple[NDArray[np.float64], SolveReport]:
    """Explicit Euler on du/dt = Theta(u) - h - c(t), c(t) = mean(Theta(u) - h).

    A step is accepted when the monitored residual norm does not grow by more than
    1e-12; otherwise dt is halved. dt never exceeds 1.9 over a Gershgorin bound of the
    linearized operator valid for every potential.
    """
    opts = options or SolverOptions()
    h = np.asarray(h_field, dtype=float)
    u = recenter(np.asarray(u0, dtype=float))
    theta = theta_field(u, prob)
    slack = _require_supercritical(theta, prob)
    c = float(np.mean(theta - h))
    residual = theta - h - c

    rho = global_coefficient_bound(prob)
    dt_cap = 1.9 / rho
    dt = 1.0 / rho
    t = 0.0
    steps = 0
    history: List[IterationRecord] = []
    failure: Optional[str] = None
    converged = False
    monitor = _monitor(residual, opts.flow_monitor)
    while True:
        rmax = float(np.max(np.abs(residual)))
        if steps % opts.history_stride == 0 or rmax <= opts.tol_nl:
            history.append(IterationRecord(steps, rmax, _l2(residual), c, slack, dt, 0, t))
            logger.info(f"Flow step {steps}: t {t:.6g}, max residual {rmax:.3e}, c {c:.12g}")
        if rmax <= opts.tol_nl:
            converged = True
            break
        if t >= t_end:
            failure = "t_end_reached"
            break
        if steps >= opts.max_steps:
            failure = "max_steps"
            break

        tau = min(dt, t_end - t)
        trial = recenter(u + tau * residual)
        theta_trial = theta_field(trial, prob)
        slack_trial = float(theta_trial.min()) - prob.lower
        c_trial = float(np.mean(theta_trial - h))
        r_trial = theta_trial - h - c_trial
        m_trial = _monitor(r_trial, opts.flow_monitor)
        if slack_trial > 0.0 and m_trial <= monitor + 1e-12:
            u, theta, slack, c, residual, monitor = trial, theta_trial, slack_trial, c_trial, r_trial, m_trial
            t += tau
            steps += 1
            dt = min(1.1 * dt, dt_cap)
        else:
            dt *= 0.5
            logger.debug(f"Flow step rejected at t {t:.6g}; dt halved to {dt:.3e}")
            if dt < opts.dt_min:
                failure = "dt_underflow"
                break

    if not converged:
        logger.error(f"Flow stopped at t {t:.6g} after {steps} steps: {failure}")
        history.append(IterationRecord(steps, float(np.max(np.abs(residual))), _l2(residual), c, slack, dt, 0, t))
    report = SolveReport(
        method="flow",
        converged=converged,
        iterations=steps,
        residual_max=history[-1].residual_max,
        residual_l2=history[-1].residual_l2,
        constant=c,
        min_cone_slack=slack,
        history=tuple(history),
        failure=failure,
        time=t,
    )
    return u, report
