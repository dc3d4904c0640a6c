"""
Report emission: deterministic JSON, CSV tables and atomic file writes.

Floats are written with 17 significant digits and non-finite values as null, so the
same inputs always produce byte-identical reports.
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

# Statement checked by each named check in the reports
REFERENCES: Dict[str, str] = {
    "theta": "Theta = sum_i arctan(lambda_i), lambda the eigenvalues of omega relative to alpha",
    "cone": "Gamma^sigma = {Theta > sigma}; Gamma is the cone over {Theta >= (n-2)pi/2}",
    "f0": "F0(lambda) is the unique t with Theta(lambda - t) = sigma; concave for supercritical sigma",
    "wang_yuan": (
        "on Theta = sigma >= (n-2)pi/2: lambda_{n-1} > 0, lambda_{n-1} >= |lambda_n|, "
        "lambda_1 + (n-1) lambda_n >= 0, sigma_k(lambda) >= 0 for k <= n-1"
    ),
    "subsolution": "sum_{l != j} arctan(mu_l) > h - pi/2 for every j",
    "form_positivity": "the (n-1,n-1) part of Re(alpha + i chi)^{n-1} - cot(theta_hat) Im(...) is positive",
    "argument_pairing": "Arg prod_{j in J}(1 + i mu_j) > theta_hat - (n-p)pi/2 for every |J| = p",
    "equation": "Theta_alpha(omega0 + i ddbar u) = h + c",
    "linearization": "dTheta = tr(eta^{-1} d omega), eta = alpha + omega alpha^{-1} omega",
    "stage_a": (
        "Theta(chi + i ddbar u_t) = (1-t)Theta0 + t Theta1 + b_t, "
        "-t sup(Theta1-Theta0) <= b_t <= t sup(Theta0-Theta1)"
    ),
    "stage_b": "Theta(omega1 + i ddbar v_t) = (1-t)Theta1 + t theta_hat + c_t, b_1 <= c_t <= 0",
    "regularized_max": "max(a,b) <= M <= max(a,b) + delta, M = max(a,b) when |a-b| >= 2 delta",
    "deltas": "delta0 = slack/200, delta1 = (theta_hat - inf Theta0)/100, delta = min(delta0, delta1)",
    "stability": "Theta_V > Theta_X - (n - dim V) pi/2 for every proper subvariety V",
    "central_charge": "Z(V) = -int_V e^{-i alpha + omega} truncated at order dim V; Arg Z(V) > Arg Z(X)",
    "surface_criterion": "on surfaces, cot(Theta_X) alpha + omega Kahler iff a solution exists",
}


def references(*keys: str) -> Dict[str, str]:
    """Citation strings for the given keys."""
    return {k: REFERENCES[k] for k in keys}


def _plain(obj: Any) -> Any:
    """Reduce dataclasses and pydantic models to plain containers."""
    if is_dataclass(obj) and not isinstance(obj, type):
        to_dict = getattr(obj, "to_dict", None)
        return to_dict() if callable(to_dict) else asdict(obj)
    if hasattr(obj, "model_dump"):
        return obj.model_dump(mode="json")
    return obj


def _emit(obj: Any, indent: int, level: int, out: List[str]) -> None:
    """Append the JSON text of obj to out; non-finite floats become null."""
    obj = _plain(obj)
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if obj is None or (isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj))):
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format(float(obj), ".17g"))
    elif isinstance(obj, complex):
        _emit({"re": obj.real, "im": obj.imag}, indent, level, out)
    elif isinstance(obj, Enum):
        _emit(obj.value, indent, level, out)
    elif isinstance(obj, (str, Path)):
        out.append(json.dumps(str(obj), ensure_ascii=False))
    elif isinstance(obj, Mapping):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(key), ensure_ascii=False)}: ")
            _emit(value, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(close + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not items:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(items):
            out.append(pad)
            _emit(value, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(close + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON text."""
    out: List[str] = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_atomic(path: Path, text: str) -> Path:
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.info(f"Wrote {path}")
    return path


def write_json(path: Path, obj: Any) -> Path:
    """Write obj as deterministic JSON, atomically."""
    return write_atomic(path, dumps(obj))


def _cell(value: Any) -> str:
    """One CSV cell; floats keep full precision and non-finite ones are left empty."""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g") if math.isfinite(float(value)) else ""
    if value is None:
        return ""
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV text with a header row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_rows(path: Path, rows: Sequence[Mapping[str, Any]]) -> Path:
    """CSV from a list of dicts; the header is the key order of the first row."""
    header = list(rows[0].keys()) if rows else []
    return write_atomic(path, csv_text(header, ([r[k] for k in header] for r in rows)))


def field_rows(values: NDArray[np.float64]) -> Iterable[List[Any]]:
    """Row-major rows N, n, i0.., x0.., value for a grid field."""
    N = values.shape[0]
    n = values.ndim
    for index in np.ndindex(values.shape):
        yield [N, n, *index, *(i / N for i in index), values[index]]


def write_field(path: Path, values: NDArray[np.float64]) -> Path:
    """Write a grid field as CSV rows N, n, indices, coordinates and value."""
    n = values.ndim
    header = ["N", "n", *(f"i{j}" for j in range(n)), *(f"x{j}" for j in range(n)), "value"]
    return write_atomic(path, csv_text(header, field_rows(values)))
