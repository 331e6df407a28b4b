"""File formats: state-space and model files (hex-float text, lossless and
human-diffable), per-run record CSVs with JSON sidecars, campaign traces
(JSON lines), and the Bode/sweep report tables.

Every artifact carries a schema tag.  Floats in the structured files are
hex-encoded so save -> load round-trips at full binary precision; report
CSVs use shortest round-trip decimal.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .barycentric import InterpolantModel, InterpolationData, assemble_model, build_bases
from .campaign import CampaignState
from .errors import NonuniformSampling
from .lti import SampledSignal, StateSpace
from .plant import ExperimentRecord

STATESPACE_HEADER = "barysid-statespace v1"
MODEL_HEADER = "barysid-model v1"

RECORD_SCHEMA = "barysid.record.v1"
TRACE_SCHEMA = "barysid.trace.v1"
BODE_SCHEMA = "barysid.bode.v1"
SWEEP_SCHEMA = "barysid.sweep.v1"

__all__ = [
    "save_statespace",
    "load_statespace",
    "save_model",
    "load_model",
    "load_any_system",
    "save_record",
    "save_trace",
    "save_bode_csv",
    "save_sweep_csv",
    "load_signal_csv",
]


def _hex_row(values) -> str:
    return " ".join(float(v).hex() for v in np.atleast_1d(values))


def _parse_hex_row(line: str) -> list[float]:
    return [float.fromhex(tok) for tok in line.split()]


def save_statespace(path, sys: StateSpace) -> None:
    """Write the flat text format: dims n/p/q, then row-major matrices."""
    lines = [
        STATESPACE_HEADER,
        f"n {sys.n_states}",
        f"p {sys.n_inputs}",
        f"q {sys.n_outputs}",
    ]
    for name, M in (("A", sys.A), ("B", sys.B), ("C", sys.C), ("D", sys.D)):
        lines.append(name)
        for row in M.reshape(M.shape[0], -1):
            lines.append(_hex_row(row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_statespace(path) -> StateSpace:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != STATESPACE_HEADER:
        raise ValueError(f"{path}: not a {STATESPACE_HEADER!r} file")
    n = int(lines[1].split()[1])
    p = int(lines[2].split()[1])
    q = int(lines[3].split()[1])
    pos = 4
    mats = {}
    for name, rows, cols in (("A", n, n), ("B", n, p), ("C", q, n), ("D", q, p)):
        if lines[pos] != name:
            raise ValueError(f"{path}: expected section {name!r}, got {lines[pos]!r}")
        pos += 1
        M = np.zeros((rows, cols))
        for r in range(rows):
            vals = _parse_hex_row(lines[pos])
            if len(vals) != cols:
                raise ValueError(f"{path}: row length mismatch in {name}")
            M[r] = vals
            pos += 1
        mats[name] = M
    return StateSpace(mats["A"], mats["B"], mats["C"], mats["D"])


def save_model(path, model: InterpolantModel) -> None:
    """Write interpolation data plus the weight row; the state-space form
    is reassembled deterministically on load."""
    data = model.data
    lines = [
        MODEL_HEADER,
        f"D {float(data.D).hex()}",
        f"K {float(data.K).hex()}",
        f"npoints {data.n_points}",
    ]
    for k in range(data.n_points):
        g = data.values[k]
        lines.append(
            f"{float(data.omegas[k]).hex()} {float(g.real).hex()} {float(g.imag).hex()}"
        )
    lines.append("weights")
    lines.append(_hex_row(model.weights))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> InterpolantModel:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != MODEL_HEADER:
        raise ValueError(f"{path}: not a {MODEL_HEADER!r} file")
    D = float.fromhex(lines[1].split()[1])
    K = float.fromhex(lines[2].split()[1])
    ell = int(lines[3].split()[1])
    points = []
    pos = 4
    for _ in range(ell):
        w, re, im = _parse_hex_row(lines[pos])
        points.append((w, complex(re, im)))
        pos += 1
    if lines[pos] != "weights":
        raise ValueError(f"{path}: missing weights section")
    weights = np.array(_parse_hex_row(lines[pos + 1]))
    data = InterpolationData.from_points(D, K, points)
    return assemble_model(build_bases(data), data, weights)


def load_any_system(path) -> StateSpace:
    """Load either file format as a bare state-space system."""
    first = ""
    with open(path) as fh:
        for line in fh:
            if line.strip():
                first = line.strip()
                break
    if first == STATESPACE_HEADER:
        return load_statespace(path)
    if first == MODEL_HEADER:
        return load_model(path).R
    raise ValueError(f"{path}: unrecognized header {first!r}")


def save_record(csv_path, record: ExperimentRecord) -> None:
    """Per-run CSV (t, u, y over transient + steady block) plus a JSON
    metadata sidecar at <csv_path>.meta.json."""
    fs = record.u_steady.fs
    parts_u = []
    parts_y = []
    if record.u_transient is not None:
        parts_u.append(record.u_transient.samples)
        parts_y.append(record.y_transient.samples)
    parts_u.append(record.u_steady.samples)
    parts_y.append(record.y_steady.samples)
    u = np.concatenate(parts_u)
    y = np.concatenate(parts_y)
    path = Path(csv_path)
    with open(path, "w") as fh:
        fh.write(f"# schema={RECORD_SCHEMA}\n")
        fh.write("t,u,y\n")
        for k in range(len(u)):
            fh.write(f"{repr(k / fs)},{repr(float(u[k]))},{repr(float(y[k]))}\n")
    meta = {
        "schema": RECORD_SCHEMA,
        "omega": record.omega,
        "amplitude": record.config.amplitude,
        "fs": fs,
        "x1": record.x1,
        "x2": record.x2,
        "gamma_hat": record.gamma_hat,
        "gamma": record.config.gamma,
        "detected_at": record.detected_at,
        "response": [record.response.value.real, record.response.value.imag],
        "response_raw": None
        if record.response_raw is None
        else [record.response_raw.value.real, record.response_raw.value.imag],
        "gamma_history": [float(g) for g in record.gamma_history],
    }
    path.with_name(path.name + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n"
    )


def save_trace(path, state: CampaignState) -> None:
    """Campaign trace as JSON lines, one object per iteration."""
    with open(path, "w") as fh:
        for snap in state.trace:
            obj = {
                "schema": TRACE_SCHEMA,
                "iteration": snap.iteration,
                "chosen_omega": snap.chosen_omega,
                "test_errors": [[w, e] for w, e in snap.test_errors],
                "model_order": snap.model_order,
                "optimizer_cost": snap.optimizer_cost,
                "cost_bound": snap.cost_bound,
                "spectral_abscissa": snap.spectral_abscissa,
                "n_experiments": snap.n_experiments,
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def save_bode_csv(path, omegas, plant_vals, model_vals) -> None:
    """Frequency, magnitude/phase of both systems, and error magnitude."""
    with open(path, "w") as fh:
        fh.write(f"# schema={BODE_SCHEMA}\n")
        fh.write(
            "omega_rad_s,mag_plant,phase_plant_rad,mag_model,phase_model_rad,mag_error\n"
        )
        for w, g, r in zip(omegas, plant_vals, model_vals):
            err = abs(r - g)
            fh.write(
                f"{repr(float(w))},{repr(abs(g))},{repr(float(np.angle(g)))},"
                f"{repr(abs(r))},{repr(float(np.angle(r)))},{repr(float(err))}\n"
            )


def save_sweep_csv(path, rows: list[dict], columns: list[str]) -> None:
    """Sweep table; cells may be float, NaN, or a failure-reason string in
    the paired *_note column."""
    with open(path, "w") as fh:
        fh.write(f"# schema={SWEEP_SCHEMA}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row.get(col, "")
                if isinstance(v, float):
                    cells.append("nan" if math.isnan(v) else repr(v))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def load_signal_csv(path) -> tuple[SampledSignal, SampledSignal]:
    """Read a t,u,y CSV back into (u, y) signals.

    Raises NonuniformSampling when the timestamps deviate from a uniform
    grid by more than 1e-9 relative.
    """
    t, u, y = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("t,"):
                continue
            a, b, c = line.split(",")
            t.append(float(a))
            u.append(float(b))
            y.append(float(c))
    if len(t) < 2:
        raise ValueError(f"{path}: need at least two samples")
    t = np.asarray(t)
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if dt <= 0:
        raise NonuniformSampling(f"{path}: non-increasing timestamps")
    dev = np.max(np.abs(np.diff(t) - dt))
    if dev > 1e-9 * max(dt, abs(t[-1])):
        raise NonuniformSampling(
            f"{path}: timestamps deviate from uniform grid by {dev:.3e}"
        )
    fs = 1.0 / dt
    return SampledSignal(fs, np.asarray(u)), SampledSignal(fs, np.asarray(y))
