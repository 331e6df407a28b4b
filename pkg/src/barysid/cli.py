"""Command-line interface.

Subcommands: gen-plant, identify, evaluate, sweep, ss-detect.  Frequencies
on the CLI are in Hz and converted to rad/s internally (the decay margin
--alpha is a pole real part and stays in rad/s).  Exit codes: 0 success,
2 infeasible/timeout, 3 I/O error, 4 validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import modelio, plots
from .barycentric import InterpolantModel
from .campaign import (
    CampaignState,
    adaptive_identify,
    default_alpha,
    gridded_identify,
    model_error_probe,
)
from .errors import (
    BarysidError,
    Infeasible,
    MaxIterations,
    NonuniformSampling,
    NumericalFailure,
    SingularCovariance,
    SteadyStateTimeout,
    UnstableSystem,
    NonzeroFeedthrough,
)
from .lti import StateSpace, freq_response_grid, h2_norm, linf_norm, spectral_abscissa, subtract
from .plant import (
    ExperimentConfig,
    PlantSpec,
    detect_steady_state,
    synth_plant,
    synth_plant_modes,
)
from .lti import SampledSignal

logger = logging.getLogger("barysid")

TWO_PI = 2.0 * math.pi

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


@dataclass
class CampaignConfig:
    """Mirrors the `identify`/`sweep` configuration file one-to-one."""

    band: tuple[float, float]  # Hz
    experiment: ExperimentConfig
    plant_file: Optional[str] = None
    plant_spec: Optional[PlantSpec] = None
    strategy: str = "adaptive"
    optimizer: str = "stable"
    alpha: Optional[float] = None  # rad/s
    budget: int = 12
    stop_tol: float = 1e-3
    output_dir: str = "."
    seed: int = 0
    save_records: bool = True

    def __post_init__(self):
        f_lo, f_hi = self.band
        if not 0.0 < f_lo < f_hi:
            raise ValueError(f"band {self.band!r} invalid")
        if self.budget < 2:
            raise ValueError("budget must be at least 2")
        if self.strategy not in ("gridded", "adaptive"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.optimizer not in ("explicit", "stable"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.experiment.fs < 10.0 * f_hi:
            raise ValueError(
                f"fs={self.experiment.fs} gives fewer than 10 samples per cycle "
                f"at the band top {f_hi} Hz"
            )
        if (self.plant_file is None) == (self.plant_spec is None):
            raise ValueError("exactly one of plant_file / plant_spec is required")

    @property
    def band_rad(self) -> tuple[float, float]:
        return (TWO_PI * self.band[0], TWO_PI * self.band[1])

    def resolve_plant(self) -> StateSpace:
        if self.plant_file is not None:
            return modelio.load_any_system(self.plant_file)
        return synth_plant(self.plant_spec)


def _parse_range(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition(":")
    return float(lo), float(hi)


def _config_from_file(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _build_campaign_config(args, require_plant=True) -> CampaignConfig:
    raw = _config_from_file(args.config) if args.config else {}
    exp_raw = dict(raw.get("experiment", {}))

    def pick(flag, key, fallback):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return raw.get(key, fallback)

    fs = getattr(args, "fs", None) or exp_raw.get("fs")
    if fs is None:
        raise ValueError("sample rate missing: pass --fs or an experiment.fs entry")
    experiment = ExperimentConfig(
        fs=float(fs),
        amplitude=float(
            getattr(args, "amplitude", None) or exp_raw.get("amplitude", 1.0)
        ),
        chunk_cycles=int(
            getattr(args, "chunk_cycles", None) or exp_raw.get("chunk_cycles", 4)
        ),
        gamma=float(getattr(args, "gamma", None) or exp_raw.get("gamma", 1e-3)),
        max_duration=float(
            getattr(args, "max_duration", None) or exp_raw.get("max_duration", 1e4)
        ),
        hold_compensation=bool(
            exp_raw.get("hold_compensation", True)
            if getattr(args, "hold_compensation", None) is None
            else args.hold_compensation
        ),
    )

    band = pick("band", "band", None)
    if isinstance(band, str):
        band = _parse_range(band)
    if band is None:
        raise ValueError("band missing: pass --band LO:HI (Hz) or a config entry")

    seed = pick("seed", "seed", 0)
    plant_file = pick("plant_file", "plant_file", None)
    plant_spec = None
    if plant_file is None:
        spec_raw = dict(raw.get("plant", {}))
        modes = getattr(args, "modes", None) or spec_raw.get("n_modes")
        if require_plant and modes is None:
            raise ValueError(
                "plant missing: pass --plant-file/--modes or a config entry"
            )
        if modes is not None:
            zeta = getattr(args, "zeta", None) or spec_raw.get(
                "damping_range", "0.01:0.05"
            )
            if isinstance(zeta, str):
                zeta = _parse_range(zeta)
            plant_band = spec_raw.get("band", band)
            if isinstance(plant_band, str):
                plant_band = _parse_range(plant_band)
            plant_spec = PlantSpec(
                seed=int(spec_raw.get("seed", seed)),
                n_modes=int(modes),
                band=tuple(plant_band),
                damping_range=tuple(zeta),
                gain_scale=float(
                    getattr(args, "gain_scale", None) or spec_raw.get("gain_scale", 1.0)
                ),
            )

    return CampaignConfig(
        band=tuple(band),
        experiment=experiment,
        plant_file=plant_file,
        plant_spec=plant_spec,
        strategy=pick("strategy", "strategy", "adaptive"),
        optimizer=pick("optimizer", "optimizer", "stable"),
        alpha=pick("alpha", "alpha", None),
        budget=int(pick("budget", "budget", 12)),
        stop_tol=float(pick("stop_tol", "stop_tol", 1e-3)),
        output_dir=str(pick("output_dir", "output_dir", ".")),
        seed=int(seed),
        save_records=not getattr(args, "no_records", False),
    )


def _run_campaign(cfg: CampaignConfig, diagnostics=None) -> CampaignState:
    plant = cfg.resolve_plant()
    band = cfg.band_rad
    if cfg.strategy == "gridded":
        return gridded_identify(
            plant,
            band,
            n_points=cfg.budget,
            optimizer=cfg.optimizer,
            config=cfg.experiment,
            alpha=cfg.alpha,
            diagnostics=diagnostics,
        )
    return adaptive_identify(
        plant,
        band,
        max_interp_points=cfg.budget,
        optimizer=cfg.optimizer,
        config=cfg.experiment,
        alpha=cfg.alpha,
        stop_tol=cfg.stop_tol,
        diagnostics=diagnostics,
    )


def cmd_gen_plant(args) -> int:
    spec = PlantSpec(
        seed=args.seed if args.seed is not None else 0,
        n_modes=args.modes,
        band=_parse_range(args.band),
        damping_range=_parse_range(args.zeta),
        gain_scale=args.gain_scale,
    )
    sys_ss = synth_plant(spec)
    out = Path(args.out)
    modelio.save_statespace(out, sys_ss)
    print(f"wrote {out} ({sys_ss.n_states} states, {spec.n_modes} modes)")
    print(f"{'f_n [Hz]':>12} {'zeta':>10} {'dc gain':>10}")
    for fn, zeta, gain in synth_plant_modes(spec):
        print(f"{fn:12.4f} {zeta:10.5f} {gain:10.4f}")
    return EXIT_OK


def cmd_identify(args) -> int:
    cfg = _build_campaign_config(args)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    diagnostics = None
    diag_fh = None
    if args.verbose:
        diag_fh = open(outdir / "sdp_diagnostics.jsonl", "w")
        diagnostics = diag_fh
    try:
        state = _run_campaign(cfg, diagnostics=diagnostics)
    finally:
        if diag_fh is not None:
            diag_fh.close()

    modelio.save_model(outdir / "model.bsid", state.current_model)
    modelio.save_trace(outdir / "trace.jsonl", state)
    if cfg.save_records:
        recdir = outdir / "records"
        recdir.mkdir(exist_ok=True)
        for i, rec in enumerate(state.all_records):
            modelio.save_record(recdir / f"run_{i:03d}.csv", rec)

    final = state.trace[-1]
    max_err = max((e for _, e in final.test_errors), default=float("nan"))
    sa = final.spectral_abscissa
    print(f"strategy:            {state.strategy} ({state.optimizer} optimizer)")
    print(f"model order:         {final.model_order}")
    print(f"experiments used:    {state.n_experiments}")
    print(f"final max test err:  {max_err:.6g}")
    print(f"spectral abscissa:   {sa:.6g}")
    print(f"outputs in:          {outdir}")
    if sa >= 0:
        print("note: identified model is unstable")
    return EXIT_OK


def _bode_grid(band_rad, n_points=10_000):
    lo, hi = band_rad
    return np.logspace(math.log10(lo), math.log10(hi), n_points)


def cmd_evaluate(args) -> int:
    model_sys = modelio.load_any_system(args.model)
    plant_sys = modelio.load_any_system(args.plant)
    band = _parse_range(args.band)
    band_rad = (TWO_PI * band[0], TWO_PI * band[1])
    outdir = Path(args.output_dir or ".")
    outdir.mkdir(parents=True, exist_ok=True)

    grid = _bode_grid(band_rad, args.points)
    plant_vals, _ = freq_response_grid(plant_sys, grid)
    model_vals, _ = freq_response_grid(model_sys, grid)
    modelio.save_bode_csv(outdir / "bode.csv", grid, plant_vals, model_vals)
    plots.save_bode_figure(
        outdir / "bode.png", grid, plant_vals, model_vals, title="plant vs model"
    )

    err_sys = subtract(model_sys, plant_sys)
    linf = linf_norm(err_sys, band_rad)
    try:
        h2 = h2_norm(err_sys)
        h2_text = f"{h2:.8g}"
    except UnstableSystem:
        h2 = float("nan")
        h2_text = "undefined: unstable"
    except NonzeroFeedthrough:
        h2 = float("nan")
        h2_text = "undefined: nonzero feedthrough"
    print(f"H2 norm of error system:   {h2_text}")
    print(f"Linf norm of error system: {linf:.8g}")
    metrics = {
        "schema": "barysid.metrics.v1",
        "h2_error": None if math.isnan(h2) else h2,
        "h2_note": h2_text if math.isnan(h2) else "",
        "linf_error": linf,
        "band_hz": list(band),
        "model_order": model_sys.n_states,
        "model_spectral_abscissa": spectral_abscissa(model_sys),
    }
    (outdir / "metrics.json").write_text(
        json.dumps(metrics, sort_keys=True, indent=1) + "\n"
    )
    return EXIT_OK


def _order_list(text: str) -> list[int]:
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 2
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",")]


def _snapshot_models(state: CampaignState) -> dict[int, InterpolantModel]:
    return {snap.model_order: snap.model for snap in state.trace}


def _error_norm(model_sys, plant, band_rad, which: str):
    err = subtract(model_sys, plant)
    if which == "h2":
        return h2_norm(err)
    return linf_norm(err, band_rad)


def cmd_sweep(args) -> int:
    cfg = _build_campaign_config(args)
    plant = cfg.resolve_plant()
    band_rad = cfg.band_rad
    orders = _order_list(args.orders)
    bad = [o for o in orders if o < 5 or o % 2 == 0]
    if bad:
        raise ValueError(f"orders must be odd and >= 5, got {bad}")
    max_budget = (max(orders) - 1) // 2
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    rows = []
    if args.compare == "strategies":
        norm_kind = "h2"
        cols = ["order", "gridded_h2", "gridded_note", "adaptive_h2", "adaptive_note"]
        logger.info("adaptive campaign to budget %d", max_budget)
        adaptive = adaptive_identify(
            plant, band_rad, max_budget, optimizer=cfg.optimizer,
            config=cfg.experiment, alpha=cfg.alpha, stop_tol=0.0,
        )
        snapshots = _snapshot_models(adaptive)
        for order in orders:
            row = {"order": order, "gridded_note": "", "adaptive_note": ""}
            try:
                g_state = gridded_identify(
                    plant, band_rad, (order - 1) // 2, optimizer=cfg.optimizer,
                    config=cfg.experiment, alpha=cfg.alpha, dc=(adaptive.K, adaptive.D),
                )
                row["gridded_h2"] = _error_norm(
                    g_state.current_model.R, plant, band_rad, norm_kind
                )
            except BarysidError as exc:
                row["gridded_h2"] = float("nan")
                row["gridded_note"] = type(exc).__name__
            try:
                snap = snapshots.get(order)
                if snap is None:
                    raise ValueError("order not reached")
                row["adaptive_h2"] = _error_norm(snap.R, plant, band_rad, norm_kind)
            except (BarysidError, ValueError) as exc:
                row["adaptive_h2"] = float("nan")
                row["adaptive_note"] = type(exc).__name__
            rows.append(row)
            logger.info("order %d done", order)
        series = {
            "gridded": [r.get("gridded_h2", float("nan")) for r in rows],
            "adaptive": [r.get("adaptive_h2", float("nan")) for r in rows],
        }
        ylabel = "H2 norm of error system"
    else:
        cols = ["order", "stable_linf", "stable_note", "explicit_linf", "explicit_note"]
        states = {}
        for opt in ("stable", "explicit"):
            logger.info("adaptive campaign (%s) to budget %d", opt, max_budget)
            states[opt] = adaptive_identify(
                plant, band_rad, max_budget, optimizer=opt,
                config=cfg.experiment, alpha=cfg.alpha, stop_tol=0.0,
            )
        snap_by_opt = {opt: _snapshot_models(s) for opt, s in states.items()}
        for order in orders:
            row = {"order": order, "stable_note": "", "explicit_note": ""}
            for opt in ("stable", "explicit"):
                try:
                    snap = snap_by_opt[opt].get(order)
                    if snap is None:
                        raise ValueError("order not reached")
                    row[f"{opt}_linf"] = _error_norm(snap.R, plant, band_rad, "linf")
                except (BarysidError, ValueError) as exc:
                    row[f"{opt}_linf"] = float("nan")
                    row[f"{opt}_note"] = type(exc).__name__
            rows.append(row)
        series = {
            "stable": [r.get("stable_linf", float("nan")) for r in rows],
            "explicit": [r.get("explicit_linf", float("nan")) for r in rows],
        }
        ylabel = "Linf norm of error system"

    modelio.save_sweep_csv(outdir / "sweep.csv", rows, cols)
    plots.save_sweep_figure(
        outdir / "sweep.png", orders, series, ylabel,
        title=f"{args.compare} comparison",
    )
    print(f"wrote {outdir / 'sweep.csv'} and sweep.png ({len(rows)} orders)")
    return EXIT_OK


def cmd_ss_detect(args) -> int:
    u, y = modelio.load_signal_csv(args.signal)
    fs = y.fs
    omega = TWO_PI * args.freq
    amplitude = args.amplitude or float(np.max(np.abs(u.samples)))
    L = int(round(args.chunk_cycles * TWO_PI * fs / omega))
    if L < 4:
        raise ValueError(f"chunk of {L} samples is too short; lower --chunk-cycles?")
    n0 = 0
    chunk_idx = 0
    y_arr = y.samples
    print(f"{'chunk':>6} {'start':>10} {'gamma_hat':>12}")
    while n0 + L <= len(y_arr):
        fit = detect_steady_state(
            SampledSignal(fs, y_arr[n0 : n0 + L]), omega, n0, args.gamma
        )
        print(f"{chunk_idx:6d} {n0:10d} {fit.gamma_hat:12.6g}")
        if fit.passed:
            value = (fit.x1 - 1j * fit.x2) / amplitude
            print(f"steady state detected at sample {n0} (chunk {chunk_idx})")
            print(f"fit: x1={fit.x1:.8g} x2={fit.x2:.8g}")
            print(f"estimated response: {value.real:.8g} {value.imag:+.8g}j")
            return EXIT_OK
        n0 += L
        chunk_idx += 1
    print("no steady state detected before the end of the signal (timeout)")
    return EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="barysid",
        description="Barycentric-interpolant frequency-domain system identification",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--output-dir", dest="output_dir", default=None)

    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-plant", parents=[common], help="write a synthetic plant file")
    g.add_argument("--modes", type=int, required=True)
    g.add_argument("--band", required=True, help="f_lo:f_hi in Hz")
    g.add_argument("--zeta", default="0.01:0.05", help="zeta_lo:zeta_hi")
    g.add_argument("--gain-scale", type=float, default=1.0)
    g.add_argument("--out", default="plant.ss")
    g.set_defaults(func=cmd_gen_plant)

    def add_campaign_flags(p):
        p.add_argument("--plant-file", dest="plant_file", default=None)
        p.add_argument("--modes", type=int, default=None, help="synthetic plant modes")
        p.add_argument("--zeta", default=None, help="synthetic damping lo:hi")
        p.add_argument("--gain-scale", dest="gain_scale", type=float, default=None)
        p.add_argument("--band", default=None, help="f_lo:f_hi in Hz")
        p.add_argument("--strategy", choices=["gridded", "adaptive"], default=None)
        p.add_argument("--optimizer", choices=["explicit", "stable"], default=None)
        p.add_argument("--alpha", type=float, default=None, help="decay margin rad/s")
        p.add_argument("--budget", type=int, default=None, help="interpolation points")
        p.add_argument("--stop-tol", dest="stop_tol", type=float, default=None)
        p.add_argument("--fs", type=float, default=None, help="sample rate Hz")
        p.add_argument("--amplitude", type=float, default=None)
        p.add_argument("--chunk-cycles", dest="chunk_cycles", type=int, default=None)
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--max-duration", dest="max_duration", type=float, default=None)
        p.add_argument(
            "--no-hold-compensation",
            dest="hold_compensation",
            action="store_false",
            default=None,
        )

    i = sub.add_parser("identify", parents=[common], help="run a campaign")
    add_campaign_flags(i)
    i.add_argument("--no-records", action="store_true", help="skip per-run CSVs")
    i.set_defaults(func=cmd_identify)

    e = sub.add_parser("evaluate", parents=[common], help="compare model vs plant")
    e.add_argument("--model", required=True)
    e.add_argument("--plant", required=True)
    e.add_argument("--band", required=True, help="f_lo:f_hi in Hz")
    e.add_argument("--points", type=int, default=10_000)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", parents=[common], help="order sweep tables")
    add_campaign_flags(s)
    s.add_argument("--orders", required=True, help="start:stop[:step] or list")
    s.add_argument(
        "--compare", choices=["strategies", "optimizers"], default="strategies"
    )
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("ss-detect", parents=[common], help="standalone detector")
    d.add_argument("--signal", required=True, help="CSV with t,u,y columns")
    d.add_argument("--freq", type=float, required=True, help="drive frequency Hz")
    d.add_argument("--gamma", type=float, required=True)
    d.add_argument("--chunk-cycles", dest="chunk_cycles", type=int, default=4)
    d.add_argument("--amplitude", type=float, default=None)
    d.set_defaults(func=cmd_ss_detect)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (Infeasible, SteadyStateTimeout, NumericalFailure, MaxIterations,
            SingularCovariance) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, NonuniformSampling, BarysidError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
