"""
Command line interface.

Every command prints one JSON document on stdout; logs go to stderr. Library errors
map to exit codes: 2 input, 3 not supercritical / not a subsolution, 4 solver failure,
5 path assertion.
"""

import logging
import sys
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Optional

import numpy as np
import typer

from . import __version__
from .config import LabSettings, RunConfig, load_run_config
from .continuity import run_continuity
from .errors import DhymLabError, InputError, SolverFailure, SubcriticalError
from .phase_core import (
    TAU_CLASS,
    ConeLevel,
    HermitianForm,
    Spectrum,
    asymptotic_phase,
    cone_membership,
    eta_metric,
    f0,
    relative_eigenvalues,
    theta,
    wang_yuan_report,
)
from .reports import dumps, references, write_field, write_json, write_rows
from .selftest import run_selftest
from .solver import flow_solve, newton_solve
from .stability import dim2_phase_identity, load_class_data, stability_check, surface_criterion
from .subsolution import argument_pairing_test, c_subsolution_test, form_positivity_test, subsolution_field_test
from .torus import TorusProblem, class_phase, field_spectra, recenter, theta_field

logger = logging.getLogger(__name__)

app = typer.Typer(name="dhym-lab", help="Lagrangian phase / dHYM laboratory.", no_args_is_help=True)
phase_app = typer.Typer(help="Pointwise phase algebra.", no_args_is_help=True)
subsolution_app = typer.Typer(help="C-subsolution checks.", no_args_is_help=True)
continuity_app = typer.Typer(help="Two-stage method of continuity.", no_args_is_help=True)
stability_app = typer.Typer(help="Charges, angles and the subvariety obstruction.", no_args_is_help=True)
app.add_typer(phase_app, name="phase")
app.add_typer(subsolution_app, name="subsolution")
app.add_typer(continuity_app, name="continuity")
app.add_typer(stability_app, name="stability")

ConfigOption = Annotated[Optional[Path], typer.Option("--config", "-c", help="JSON run configuration.")]
OutputOption = Annotated[Optional[Path], typer.Option("--output", "-o", help="Output directory.")]
GridOption = Annotated[Optional[int], typer.Option("--N", help="Grid points per axis.")]


def _emit(payload: Dict[str, Any]) -> None:
    """Write a payload to stdout as deterministic JSON."""
    typer.echo(dumps(payload), nl=False)


def _run(body: Callable[[], int]) -> None:
    """Run a command body and translate library errors into exit codes."""
    try:
        code = body()
    except DhymLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        payload: Dict[str, Any] = {"error": str(e), "type": type(e).__name__, "exit_code": e.exit_code}
        if isinstance(e, SolverFailure) and e.report:
            payload["report"] = e.report
        _emit(payload)
        raise typer.Exit(e.exit_code)
    except Exception as e:
        logger.exception("Unexpected error")
        _emit({"error": str(e), "type": type(e).__name__, "exit_code": 1})
        raise typer.Exit(1)
    if code:
        raise typer.Exit(code)


def _floats(text: str) -> List[float]:
    """Parse a comma separated list of numbers."""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise InputError(f"invalid number list '{text}': {e}") from e


def _out_dir(cfg: RunConfig, output: Optional[Path]) -> Path:
    """Output directory: the flag wins over the config file."""
    return output if output is not None else cfg.output.directory


@app.callback()
def main_callback(
    log_level: Annotated[Optional[str], typer.Option("--log-level", help="Overrides DHYM_LOG_LEVEL.")] = None,
) -> None:
    """Numerical laboratory for the deformed Hermitian-Yang-Mills equation."""
    settings = LabSettings()
    logging.basicConfig(level=(log_level or settings.log_level).upper(), stream=sys.stderr)


@app.command()
def version() -> None:
    """Print the package version."""
    _emit({"version": __version__})


@phase_app.command("eval")
def phase_eval(
    lam: Annotated[Optional[str], typer.Option("--lambda", help="Comma separated eigenvalues.")] = None,
    alpha: Annotated[Optional[str], typer.Option("--alpha", help="Background metric: I, diag:..., rows:...")] = None,
    omega: Annotated[Optional[str], typer.Option("--omega", help="Form: diag:..., rows:...")] = None,
    sigma: Annotated[Optional[float], typer.Option("--sigma", help="Level for cone, F0 and Wang-Yuan checks.")] = None,
) -> None:
    """Evaluate the phase, cone position, F0 and the Wang-Yuan checks at one point."""

    def body() -> int:
        report: Dict[str, Any] = {}
        if lam is not None:
            spectrum = Spectrum.of(_floats(lam))
        elif omega is not None:
            w = HermitianForm.parse(omega)
            a = HermitianForm.parse(alpha or "I", w.dim).require_positive_definite()
            spectrum = relative_eigenvalues(a, w)
            eta = eta_metric(a, w)
            report["eta_eigenvalues"] = np.linalg.eigvalsh(eta.entries).tolist()
        else:
            raise InputError("give either --lambda or --omega (with optional --alpha)")
        th = theta(spectrum)
        report.update(spectrum=list(spectrum.values), theta=th, asymptotic_phase=asymptotic_phase(spectrum))
        keys = ["theta", "cone"]
        if sigma is not None:
            level = ConeLevel(spectrum.n, sigma)
            report["cone"] = cone_membership(spectrum, level).to_dict()
            report["f0"] = f0(spectrum, sigma) if abs(sigma) < spectrum.n * np.pi / 2 else None
            keys.append("f0")
            if spectrum.n >= 2 and abs(th - sigma) <= TAU_CLASS and sigma >= level.lower:
                report["wang_yuan"] = wang_yuan_report(spectrum, sigma).to_dict()
                keys.append("wang_yuan")
            else:
                report["wang_yuan"] = None
        report["references"] = references(*keys)
        _emit(report)
        return 0

    _run(body)


@subsolution_app.command("check")
def subsolution_check(
    mu: Annotated[Optional[str], typer.Option("--mu", help="Candidate eigenvalues for a pointwise check.")] = None,
    h: Annotated[Optional[float], typer.Option("--h", help="Phase level for a pointwise check.")] = None,
    config: ConfigOption = None,
    grid: GridOption = None,
) -> None:
    """Check the subsolution condition at a point (--mu, --h) or over a grid (--config)."""

    def body() -> int:
        if mu is not None:
            if h is None:
                raise InputError("--mu needs --h")
            spectrum = Spectrum.of(_floats(mu))
            eig = c_subsolution_test(spectrum, h)
            report: Dict[str, Any] = {
                "mode": "point",
                "eigenvalue_form": eig.to_dict(),
                "form_positivity": form_positivity_test(spectrum, h).to_dict(),
                "argument_pairing": [argument_pairing_test(spectrum, h, p).to_dict() for p in range(1, spectrum.n)],
                "references": references("subsolution", "form_positivity", "argument_pairing"),
            }
            passed = eig.is_subsolution
        else:
            cfg = load_run_config(config, {"problem.N": grid})
            prob = cfg.problem.torus()
            chi = prob.grid_field(cfg.problem.chi_potential)
            if cfg.problem.h is not None:
                target = prob.h_field()
            elif cfg.problem.theta_hat is not None:
                target = np.full(prob.shape, cfg.problem.theta_hat)
            else:
                target = np.full(prob.shape, class_phase(chi, prob).theta_hat)
            verdict = subsolution_field_test(
                field_spectra(chi, prob), target, threads=LabSettings().threads, spacing=prob.spacing
            )
            report = {"mode": "field", "verdict": verdict.to_dict(), "references": references("subsolution")}
            passed = verdict.is_subsolution
        _emit(report)
        return 0 if passed else SubcriticalError.exit_code

    _run(body)


def _solve_target(cfg: RunConfig, prob: TorusProblem) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Phase target and manufactured solution for the solve command."""
    if cfg.problem.manufactured is not None:
        exact = recenter(prob.grid_field(cfg.problem.manufactured))
        return theta_field(exact, prob), exact
    if cfg.problem.h is not None:
        return prob.h_field(), None
    if cfg.problem.theta_hat is not None:
        return np.full(prob.shape, cfg.problem.theta_hat), None
    raise InputError("solve needs problem.h, problem.theta_hat or problem.manufactured")


@app.command()
def solve(
    config: ConfigOption = None,
    grid: GridOption = None,
    method: Annotated[Optional[str], typer.Option("--method", help="newton or flow.")] = None,
    tol: Annotated[Optional[float], typer.Option("--tol", help="Max-norm residual tolerance.")] = None,
    output: OutputOption = None,
) -> None:
    """Solve Theta(B + Hess(u)/4) = h + c on the torus grid."""

    def body() -> int:
        cfg = load_run_config(config, {"problem.N": grid, "solver.method": method, "solver.tol_nl": tol})
        prob = cfg.problem.torus()
        h_field, exact = _solve_target(cfg, prob)
        u0 = prob.grid_field(cfg.problem.u0)
        options = cfg.solver.options()
        if cfg.solver.method == "flow":
            u, report = flow_solve(u0, h_field, prob, cfg.solver.t_end, options)
            c = report.constant
        else:
            u, c, report = newton_solve(u0, h_field, prob, options)

        summary: Dict[str, Any] = {
            "problem": {"n": prob.n, "N": prob.N},
            "converged": report.converged,
            "constant": c,
            "residual_max": report.residual_max,
            "report": report,
            "references": references("equation", "linearization"),
        }
        if exact is not None:
            summary["max_error"] = float(np.max(np.abs(u - exact)))
        out = _out_dir(cfg, output)
        if "csv" in cfg.output.formats:
            write_field(out / "solution.csv", u)
            write_rows(out / "history.csv", [r.__dict__ for r in report.history])
        if "json" in cfg.output.formats:
            write_json(out / "report.json", summary)
        if not report.converged:
            raise SolverFailure(f"{report.method} did not converge: {report.failure}", report.to_dict())
        _emit(summary)
        return 0

    _run(body)


@continuity_app.command("run")
def continuity_run(
    config: ConfigOption = None,
    grid: GridOption = None,
    theta_hat: Annotated[Optional[float], typer.Option("--theta-hat", help="Target constant phase.")] = None,
    output: OutputOption = None,
) -> None:
    """Run both continuation stages from problem.chi_potential to the constant phase."""

    def body() -> int:
        cfg = load_run_config(config, {"problem.N": grid, "problem.theta_hat": theta_hat})
        prob = cfg.problem.torus()
        chi = prob.grid_field(cfg.problem.chi_potential)
        result = run_continuity(
            chi,
            prob,
            theta_hat=cfg.problem.theta_hat,
            options=cfg.solver.options(),
            compare_direct=cfg.path.compare_direct,
            **cfg.path.steps(),
        )
        summary: Dict[str, Any] = {
            "problem": {"n": prob.n, "N": prob.N},
            "class_phase": class_phase(recenter(chi), prob),
            **result.to_dict(),
            "references": references("deltas", "regularized_max", "stage_a", "stage_b", "subsolution"),
        }
        out = _out_dir(cfg, output)
        if "csv" in cfg.output.formats:
            write_field(out / "potential.csv", result.potential)
            write_rows(out / "trace.csv", result.trace_rows())
        if "json" in cfg.output.formats:
            write_json(out / "report.json", summary)
        if not result.completed:
            raise SolverFailure(f"continuation failed: {result.failure}", result.to_dict())
        _emit(summary)
        return 0

    _run(body)


@stability_app.command("check")
def stability_check_cmd(
    class_data: Annotated[Optional[Path], typer.Argument(help="Class data JSON document.")] = None,
    config: ConfigOption = None,
) -> None:
    """Angles, margins and (for surfaces) the existence criterion."""

    def body() -> int:
        source = class_data
        if source is None:
            source = load_run_config(config).stability.class_data
        if source is None:
            raise InputError("give a class data file or stability.class_data in the config")
        data = load_class_data(source)
        report: Dict[str, Any] = stability_check(data)
        keys = ["stability", "central_charge"]
        if data.n == 2:
            report["surface_criterion"] = surface_criterion(data)
            keys.append("surface_criterion")
            try:
                report["phase_identity"] = dim2_phase_identity(data)
            except InputError as e:
                report["phase_identity"] = {"skipped": str(e)}
        report["references"] = references(*keys)
        _emit(report)
        return 0

    _run(body)


@app.command()
def selftest(
    seed: Annotated[Optional[int], typer.Option("--seed", help="Random seed; defaults to the config seed.")] = None,
    samples: Annotated[int, typer.Option("--samples", help="Samples per sweep case.", min=1)] = 1000,
    config: ConfigOption = None,
) -> None:
    """Randomized sweeps over the pointwise algebra; exit 1 if any fails."""

    def body() -> int:
        summary = run_selftest(seed=load_run_config(config, {"seed": seed}).seed, samples=samples)
        _emit(summary)
        return 0 if summary["passed"] else 1

    _run(body)
