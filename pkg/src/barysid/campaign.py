"""Identification campaign orchestration: the gridded baseline and the
adaptive geometric-mean frequency selection loop.

Both strategies measure the DC gain and feedthrough once, interrogate the
plant at a growing set of frequencies, optimize the weights over the
transient data of *all* runs, and assemble the interpolant model.  The
adaptive loop keeps a pool of test frequencies at the logarithmic
midpoints between neighbouring interpolation frequencies, promotes the
test point with the largest model error, and spawns two new experiments
at the midpoints it opens up.

Weight optimization consumes bases built from the raw (discrete-time)
response estimates so that steady-state content in the recorded samples
cancels exactly in N u - M y; the assembled model interpolates the
hold-compensated estimates, which track the continuous-time plant.  The
two basis variants share A_cal and B_M, so the stability certificate and
the interpolation property transfer exactly.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .barycentric import (
    BasisPair,
    InterpolantModel,
    InterpolationData,
    assemble_model,
    build_bases,
)
from .errors import (
    BarysidError,
    DuplicateFrequency,
    Infeasible,
    SingularCovariance,
    SteadyStateTimeout,
)
from .lti import StateSpace, freq_response, spectral_abscissa
from .plant import ExperimentConfig, ExperimentRecord, estimate_dc_and_feedthrough, run_experiment
from .sdp import SolverOptions
from .weights import StableSolveResult, accumulate_covariance, solve_explicit, solve_stable

__all__ = [
    "CampaignState",
    "IterationSnapshot",
    "gridded_identify",
    "adaptive_identify",
    "model_error_probe",
    "default_alpha",
]

OPTIMIZERS = ("explicit", "stable")


def default_alpha(band: tuple[float, float]) -> float:
    """Default decay margin: 1e-4 of the band's upper edge, negligible
    relative to the plant dynamics yet strictly positive."""
    return 1e-4 * float(band[1])


@dataclass
class IterationSnapshot:
    """State after one adaptive iteration (or the initial solve)."""

    iteration: int
    chosen_omega: Optional[float]
    test_errors: list[tuple[float, float]]
    model_order: int
    optimizer_cost: float
    spectral_abscissa: float
    n_experiments: int
    cost_bound: Optional[float] = None
    model: InterpolantModel = field(repr=False, default=None)


@dataclass
class CampaignState:
    """Everything a campaign accumulated."""

    band: tuple[float, float]
    strategy: str
    optimizer: str
    alpha: float
    D: float
    K: float
    interp_freqs: list[float]
    test_pool: list[tuple[float, ExperimentRecord]]
    all_records: list[ExperimentRecord]
    current_model: InterpolantModel
    trace: list[IterationSnapshot]
    dc_measured: bool = True

    @property
    def n_experiments(self) -> int:
        """Total runs: one per distinct sinusoidal frequency plus the
        DC/feedthrough step run when it was measured in-campaign."""
        return len(self.all_records) + (1 if self.dc_measured else 0)

    def max_measured_magnitude(self) -> float:
        return max(abs(r.response.value) for r in self.all_records)


def model_error_probe(
    model: InterpolantModel, records: list[ExperimentRecord]
) -> list[tuple[float, float]]:
    """Per test frequency, |R(j w) - measured G(j w)|, in ascending
    frequency order (so an argmax scan breaks ties toward the lowest
    frequency)."""
    out = []
    for rec in sorted(records, key=lambda r: r.omega):
        err = abs(freq_response(model.R, rec.omega) - rec.response.value)
        out.append((rec.omega, float(err)))
    return out


def _with_context(exc: BarysidError, context: str) -> BarysidError:
    wrapped = type(exc)(f"{context}: {exc}")
    wrapped.__cause__ = exc
    return wrapped


def _interp_data(records_by_freq, interp_freqs, D, K, raw=False):
    points = []
    for w in interp_freqs:
        rec = records_by_freq[w]
        sample = rec.response_raw if raw and rec.response_raw is not None else rec.response
        points.append((w, sample.value))
    return InterpolationData.from_points(D, K, points)


def _solve_weights(
    bases_raw: BasisPair,
    records,
    optimizer: str,
    alpha: float,
    include_steady: bool,
    sdp_options: Optional[SolverOptions],
    diagnostics,
):
    """Optimize weights over all records; returns (w, cost, stable_result)."""
    cov = accumulate_covariance(bases_raw, records, include_steady=include_steady)
    if optimizer == "explicit":
        w = solve_explicit(cov)
        return w, cov.cost(w), None
    result = solve_stable(
        cov, bases_raw, alpha, options=sdp_options, diagnostics=diagnostics
    )
    return result.W_hat, result.achieved_cost, result


def _rebuild(
    records_by_freq,
    interp_freqs,
    D,
    K,
    records,
    optimizer,
    alpha,
    include_steady,
    sdp_options,
    diagnostics,
):
    data_raw = _interp_data(records_by_freq, interp_freqs, D, K, raw=True)
    data = _interp_data(records_by_freq, interp_freqs, D, K, raw=False)
    bases_raw = build_bases(data_raw)
    w, cost, stable = _solve_weights(
        bases_raw, records, optimizer, alpha, include_steady, sdp_options, diagnostics
    )
    model = assemble_model(build_bases(data), data, w)
    return model, cost, stable


def gridded_identify(
    plant: StateSpace,
    band: tuple[float, float],
    n_points: int,
    optimizer: str = "stable",
    config: ExperimentConfig = None,
    alpha: Optional[float] = None,
    spacing: str = "log",
    include_steady: bool = False,
    sdp_options: Optional[SolverOptions] = None,
    diagnostics=None,
    dc: Optional[tuple[float, float]] = None,
) -> CampaignState:
    """Identify over a fixed grid of frequencies.

    Runs experiments at `n_points` frequencies spanning the band
    (logarithmically spaced by default; `spacing="linear"` for ablation)
    plus the DC/feedthrough measurement, interpolates all of them, and
    solves the weights once over all transient data.  Model order is
    2 * n_points + 1.
    """
    if n_points < 2:
        raise ValueError("need at least 2 grid points")
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    w_lo, w_hi = float(band[0]), float(band[1])
    if not 0.0 < w_lo < w_hi:
        raise ValueError(f"invalid band {band!r}")
    if config is None:
        raise ValueError("an ExperimentConfig is required")
    alpha = default_alpha(band) if alpha is None else float(alpha)
    if spacing == "log":
        freqs = np.logspace(math.log10(w_lo), math.log10(w_hi), n_points)
    elif spacing == "linear":
        freqs = np.linspace(w_lo, w_hi, n_points)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")

    if dc is None:
        K, D = estimate_dc_and_feedthrough(plant, config, omega_ref=w_lo)
        dc_measured = True
    else:
        K, D = dc
        dc_measured = False

    records_by_freq: dict[float, ExperimentRecord] = {}
    records = []
    for w in freqs:
        try:
            rec = run_experiment(plant, float(w), config, feedthrough=D)
        except SteadyStateTimeout as exc:
            raise _with_context(exc, f"gridded run at omega={w:.6g}") from exc
        records_by_freq[float(w)] = rec
        records.append(rec)

    interp = [float(w) for w in freqs]
    try:
        model, cost, stable = _rebuild(
            records_by_freq, interp, D, K, records, optimizer, alpha,
            include_steady, sdp_options, diagnostics,
        )
    except (SingularCovariance, Infeasible) as exc:
        raise _with_context(exc, f"gridded solve over {n_points} points") from exc

    snap = IterationSnapshot(
        iteration=0,
        chosen_omega=None,
        test_errors=[],
        model_order=model.order,
        optimizer_cost=cost,
        spectral_abscissa=spectral_abscissa(model.R),
        n_experiments=len(records) + (1 if dc_measured else 0),
        cost_bound=None if stable is None else stable.cost_bound,
        model=model,
    )
    return CampaignState(
        band=(w_lo, w_hi),
        strategy="gridded",
        optimizer=optimizer,
        alpha=alpha,
        D=D,
        K=K,
        interp_freqs=interp,
        test_pool=[],
        all_records=records,
        current_model=model,
        trace=[snap],
        dc_measured=dc_measured,
    )


def adaptive_identify(
    plant: StateSpace,
    band: tuple[float, float],
    max_interp_points: int,
    optimizer: str = "stable",
    config: ExperimentConfig = None,
    alpha: Optional[float] = None,
    stop_tol: float = 1e-3,
    include_steady: bool = False,
    sdp_options: Optional[SolverOptions] = None,
    diagnostics=None,
    dc: Optional[tuple[float, float]] = None,
) -> CampaignState:
    """Adaptive identification with geometric-mean test frequencies.

    Starts by interpolating the band edges with one test experiment at
    their geometric mean; each iteration promotes the test frequency with
    the largest measured model error to an interpolation point, runs two
    new experiments at the geometric means it opens up, and re-solves the
    weights over the transient data of all experiments so far.  Stops at
    `max_interp_points` interpolation frequencies or when the largest
    test error falls below `stop_tol` relative to the largest measured
    response magnitude.
    """
    if max_interp_points < 3:
        raise ValueError("need a budget of at least 3 interpolation points")
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    w_lo, w_hi = float(band[0]), float(band[1])
    if not 0.0 < w_lo < w_hi:
        raise ValueError(f"invalid band {band!r}")
    if config is None:
        raise ValueError("an ExperimentConfig is required")
    alpha = default_alpha(band) if alpha is None else float(alpha)

    if dc is None:
        K, D = estimate_dc_and_feedthrough(plant, config, omega_ref=w_lo)
        dc_measured = True
    else:
        K, D = dc
        dc_measured = False

    records_by_freq: dict[float, ExperimentRecord] = {}
    all_records: list[ExperimentRecord] = []

    def run_at(w: float, what: str) -> ExperimentRecord:
        if w in records_by_freq:
            raise DuplicateFrequency(f"{what} frequency {w} already visited")
        try:
            rec = run_experiment(plant, w, config, feedthrough=D)
        except SteadyStateTimeout as exc:
            raise _with_context(exc, f"{what} run at omega={w:.6g}") from exc
        records_by_freq[w] = rec
        all_records.append(rec)
        return rec

    interp = [w_lo, w_hi]
    run_at(w_lo, "edge")
    run_at(w_hi, "edge")
    w_mid = math.sqrt(w_lo * w_hi)
    test_pool: list[tuple[float, ExperimentRecord]] = [(w_mid, run_at(w_mid, "test"))]

    def solve_and_snapshot(iteration: int, chosen: Optional[float]) -> IterationSnapshot:
        try:
            model, cost, stable = _rebuild(
                records_by_freq, interp, D, K, all_records, optimizer, alpha,
                include_steady, sdp_options, diagnostics,
            )
        except (SingularCovariance, Infeasible) as exc:
            raise _with_context(
                exc, f"adaptive solve with {len(interp)} interpolation points"
            ) from exc
        errors = model_error_probe(model, [rec for _, rec in test_pool])
        snap = IterationSnapshot(
            iteration=iteration,
            chosen_omega=chosen,
            test_errors=errors,
            model_order=model.order,
            optimizer_cost=cost,
            spectral_abscissa=spectral_abscissa(model.R),
            n_experiments=len(all_records) + (1 if dc_measured else 0),
            cost_bound=None if stable is None else stable.cost_bound,
            model=model,
        )
        return snap

    trace = [solve_and_snapshot(0, None)]

    iteration = 0
    while len(interp) < max_interp_points:
        errors = trace[-1].test_errors
        scale = max(abs(r.response.value) for r in all_records)
        best_idx = max(range(len(errors)), key=lambda i: errors[i][1])
        # Ascending frequency order makes max() break ties toward the
        # lowest frequency.
        best_w, best_err = errors[best_idx]
        if best_err < stop_tol * scale:
            break
        iteration += 1

        pool_pos = next(i for i, (w, _) in enumerate(test_pool) if w == best_w)
        _, promoted_rec = test_pool.pop(pool_pos)
        pos = bisect.bisect_left(interp, best_w)
        if not (0 < pos < len(interp)) or not (interp[pos - 1] < best_w < interp[pos]):
            raise DuplicateFrequency(
                f"test frequency {best_w} does not lie strictly inside the grid"
            )
        w_l, w_h = interp[pos - 1], interp[pos]
        interp.insert(pos, best_w)

        for w_new in (math.sqrt(best_w * w_l), math.sqrt(best_w * w_h)):
            rec = run_at(w_new, "test")
            bisect.insort(test_pool, (w_new, rec), key=lambda t: t[0])

        trace.append(solve_and_snapshot(iteration, best_w))
        _assert_interval_invariant(interp, test_pool)

    return CampaignState(
        band=(w_lo, w_hi),
        strategy="adaptive",
        optimizer=optimizer,
        alpha=alpha,
        D=D,
        K=K,
        interp_freqs=interp,
        test_pool=test_pool,
        all_records=all_records,
        current_model=trace[-1].model,
        trace=trace,
        dc_measured=dc_measured,
    )


def _assert_interval_invariant(interp, test_pool):
    for w, _ in test_pool:
        pos = bisect.bisect_left(interp, w)
        assert 0 < pos < len(interp) and interp[pos - 1] < w < interp[pos], (
            f"test frequency {w} escaped its interval"
        )
