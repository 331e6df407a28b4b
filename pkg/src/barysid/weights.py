"""Weight optimization from transient data.

The basis systems are driven by each run's transient input-output pair to
form the signal x = N u - M y; its empirical second-moment matrix X is the
data the optimizers consume.  The unconstrained minimizer of the quadratic
proxy cost [1 w] X [1 w]^T has the closed form w = -X0 X2^-1; the
stability-constrained variant solves a three-block LMI relaxation whose
feasible points certify a decay margin for the assembled model and carry
an explicit upper bound on the achieved cost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np
import scipy.linalg

from .barycentric import BasisPair
from .errors import DimensionMismatch, SingularCovariance
from .lti import SampledSignal, StateSpace, simulate_zoh
from .plant import ExperimentRecord
from .sdp import LMIBlock, LMISolution, SolverOptions, lmi_solve

__all__ = [
    "CovariancePartition",
    "StableSolveResult",
    "drive_bases",
    "covariance",
    "accumulate_covariance",
    "solve_explicit",
    "solve_stable",
]


@dataclass
class CovariancePartition:
    """Empirical covariance X of the basis-error signal, partitioned as
    [[X1, X0], [X0^T, X2]] with scalar X1."""

    X: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        dim = self.X.shape[0]
        if self.X.shape != (dim, dim) or dim < 1:
            raise DimensionMismatch("X must be square and non-empty")
        asym = np.max(np.abs(self.X - self.X.T)) if dim else 0.0
        scale = max(1.0, float(np.max(np.abs(self.X))))
        if asym > 1e-12 * scale:
            raise ValueError("X must be symmetric")
        lam_min = float(scipy.linalg.eigvalsh(self.X, subset_by_index=(0, 0))[0])
        if lam_min < -1e-10 * scale:
            raise ValueError(f"X has eigenvalue {lam_min:.3e}; not PSD")

    @property
    def dim(self) -> int:
        return self.X.shape[0]

    @property
    def X1_hat(self) -> float:
        return float(self.X[0, 0])

    @property
    def X0_hat(self) -> np.ndarray:
        return self.X[0, 1:]

    @property
    def X2_hat(self) -> np.ndarray:
        return self.X[1:, 1:]

    def cost(self, w: np.ndarray) -> float:
        """Quadratic proxy cost [1 w] X [1 w]^T."""
        v = np.concatenate([[1.0], np.asarray(w, dtype=float).ravel()])
        if v.size != self.dim:
            raise DimensionMismatch("weight row width does not match X")
        return float(v @ self.X @ v)


def drive_bases(
    bases: BasisPair,
    record: ExperimentRecord,
    include_steady: bool = False,
) -> SampledSignal:
    """x = N u - M y over a record's transient segment.

    Equals simulate_zoh(N_sys, u) - simulate_zoh(M_sys, y) sample for
    sample; computed in a single pass through the shared state matrix
    (inputs [u, y] with columns [B_N, -B_M]), which avoids the cancellation
    of two separately resonating simulations.  `include_steady` appends the
    passing block for ablation studies.
    """
    if record.u_transient is None and not include_steady:
        raise ValueError("record has an empty transient segment")
    parts_u, parts_y = [], []
    if record.u_transient is not None:
        parts_u.append(record.u_transient.samples)
        parts_y.append(record.y_transient.samples)
    if include_steady:
        parts_u.append(record.u_steady.samples)
        parts_y.append(record.y_steady.samples)
    u = np.concatenate(parts_u)
    y = np.concatenate(parts_y)
    fs = record.u_steady.fs

    dim = bases.state_dim
    data = bases.data
    combined = StateSpace(
        bases.A_cal,
        np.hstack([bases.B_N, -bases.B_M]),
        np.vstack([np.zeros((1, dim)), np.eye(dim)]),
        np.vstack([[data.D, -1.0], np.zeros((dim, 2))]),
    )
    out = simulate_zoh(combined, SampledSignal(fs, np.column_stack([u, y])))
    return out


def covariance(signals: Iterable[SampledSignal]) -> CovariancePartition:
    """X = sum_k (1/n_k) sum_i x_i x_i^T over the given vector signals,
    symmetrized to kill rounding asymmetry."""
    X = None
    count = 0
    for sig in signals:
        S = sig.channels()
        if X is None:
            X = np.zeros((S.shape[1], S.shape[1]))
        elif S.shape[1] != X.shape[0]:
            raise DimensionMismatch("signals disagree on channel count")
        X += (S.T @ S) / S.shape[0]
        count += 1
    if X is None:
        raise ValueError("need at least one signal")
    return CovariancePartition(0.5 * (X + X.T))


def accumulate_covariance(
    bases: BasisPair,
    records: Iterable[ExperimentRecord],
    include_steady: bool = False,
) -> CovariancePartition:
    """Covariance over many records without keeping all basis signals
    alive at once; records with empty transients are skipped unless the
    steady block is included."""
    X = np.zeros((bases.output_dim, bases.output_dim))
    used = 0
    for rec in records:
        if rec.u_transient is None and not include_steady:
            continue
        S = drive_bases(bases, rec, include_steady=include_steady).channels()
        X += (S.T @ S) / S.shape[0]
        used += 1
    if used == 0:
        raise SingularCovariance("no records contributed transient data")
    return CovariancePartition(0.5 * (X + X.T))


def _pd_tolerance(X2: np.ndarray) -> float:
    return 1e-10 * float(np.trace(X2)) / X2.shape[0]


def solve_explicit(
    cov: CovariancePartition, ridge: bool = False
) -> np.ndarray:
    """Unconstrained minimizer w = -X0 X2^-1 of the proxy cost.

    Requires the state block X2 to be positive definite (minimum
    eigenvalue above 1e-10 * trace/dim); raises SingularCovariance
    otherwise.  With `ridge` enabled a diagonal shift of the same size is
    added instead of failing, which masks rank deficiency and is off by
    default.
    """
    X2 = cov.X2_hat.copy()
    X0 = cov.X0_hat
    tol = _pd_tolerance(X2)
    lam_min = float(scipy.linalg.eigvalsh(X2, subset_by_index=(0, 0))[0])
    if lam_min <= tol:
        if not ridge:
            raise SingularCovariance(
                f"X2 min eigenvalue {lam_min:.3e} <= tolerance {tol:.3e}"
            )
        X2 += tol * np.eye(X2.shape[0])
    cf = scipy.linalg.cho_factor(X2)
    return -scipy.linalg.cho_solve(cf, X0)


@dataclass
class StableSolveResult:
    """Outcome of the stability-constrained weight solve."""

    W_hat: np.ndarray
    gamma: float
    P: np.ndarray
    Q: np.ndarray
    alpha: float
    cost_bound: float
    achieved_cost: float
    solution: LMISolution


def _svec_indices(d: int):
    rows, cols = np.triu_indices(d)
    return rows, cols


def _diag_mask(d: int) -> np.ndarray:
    rows, cols = _svec_indices(d)
    return rows == cols


def _stable_blocks(Y_shift, B_M, X2n, d, deltas, trace_cap, gamma_cap):
    """LMI blocks of the stability relaxation over [svec(P) | Q | gamma].

    Besides the three blocks of the relaxation itself, two scalar cap
    blocks bound trace(P) and gamma.  The caps are orders of magnitude
    beyond the optimizer's range, so they never bind at the solution, but
    without them the barrier subproblems are unbounded below (inflating P
    improves every log-det term indefinitely)."""
    rows, cols = _svec_indices(d)
    n_p = len(rows)
    m = n_p + d + 1
    d1, d2, d3 = deltas

    # Block 1: P - d1 I > 0.
    basis1 = np.zeros((n_p, d, d))
    for a, (i, j) in enumerate(zip(rows, cols)):
        basis1[a, i, j] = 1.0
        basis1[a, j, i] = 1.0
    block1 = LMIBlock(-d1 * np.eye(d), np.arange(n_p), basis1.copy())

    # Block 2: [[gamma, Q], [Q^T, 2P - X2]] - d2 I > 0.
    F0 = np.zeros((d + 1, d + 1))
    F0[1:, 1:] = -X2n
    F0 -= d2 * np.eye(d + 1)
    basis2 = np.zeros((m, d + 1, d + 1))
    for a in range(n_p):
        basis2[a, 1:, 1:] = 2.0 * basis1[a]
    for i in range(d):
        basis2[n_p + i, 0, 1 + i] = 1.0
        basis2[n_p + i, 1 + i, 0] = 1.0
    basis2[n_p + d, 0, 0] = 1.0
    block2 = LMIBlock(F0, np.arange(m), basis2)

    # Block 3: -(Ys P + P Ys^T - B_M Q - Q^T B_M^T) - d3 I > 0,
    # with Ys = Y + alpha I folded into Y_shift.
    basis3 = np.zeros((n_p + d, d, d))
    for a in range(n_p):
        E = basis1[a]
        T = Y_shift @ E
        basis3[a] = -(T + T.T)
    b = B_M[:, 0]
    for i in range(d):
        M = np.zeros((d, d))
        M[:, i] += b
        M[i, :] += b
        basis3[n_p + i] = M
    block3 = LMIBlock(-d3 * np.eye(d), np.arange(n_p + d), basis3)

    diag_vars = np.nonzero(rows == cols)[0]
    basis_tr = np.full((len(diag_vars), 1, 1), -1.0)
    block_tr = LMIBlock(np.array([[trace_cap]]), diag_vars, basis_tr)
    block_gm = LMIBlock(
        np.array([[gamma_cap]]), np.array([n_p + d]), np.full((1, 1, 1), -1.0)
    )
    return [block1, block2, block3, block_tr, block_gm], n_p, m


def _initial_point(Y_shift, B_M, X2n, d, n_p, deltas):
    """Strictly feasible start plus matched variable caps.

    Tries Q = 0 first (valid when the unconstrained optimum already meets
    the decay margin), else a Riccati-based stabilizing gain.  The P from
    the Lyapunov solve fixes the natural scale; the trace cap is set at
    50x that scale and P is pre-inflated to half the cap so the analytic
    center starts out roughly where the barrier wants it (enlarging P
    only improves every log-det term, so the center always parks near the
    trace cap).  Returns (x0, trace_cap, gamma_cap) or None.
    """
    rows, cols = _svec_indices(d)
    d1, d2, d3 = deltas

    def pack(P, Q, gamma):
        x = np.empty(n_p + d + 1)
        x[:n_p] = P[rows, cols]
        x[n_p : n_p + d] = Q
        x[n_p + d] = gamma
        return x

    def assemble(K):
        Yc = Y_shift - np.outer(B_M[:, 0], K)
        if np.max(np.linalg.eigvals(Yc).real) >= -1e-9:
            return None
        P = scipy.linalg.solve_continuous_lyapunov(Yc, -np.eye(d))
        P = 0.5 * (P + P.T)
        lam = float(scipy.linalg.eigvalsh(P, subset_by_index=(0, 0))[0])
        if lam <= 0:
            return None
        # Scale so 2P - X2 clears the margin; the decay block is
        # homogeneous in (P, Q) so scaling preserves it.
        lam2 = float(
            scipy.linalg.eigvalsh(X2n + 2.0 * (d2 + d1) * np.eye(d), P).max()
        )
        P *= max(1.0, 0.6 * lam2)
        trace_cap = 50.0 * max(float(np.trace(P)), float(d))
        P *= 0.5 * trace_cap / float(np.trace(P))
        Q = K @ P
        S = 2.0 * P - X2n - d2 * np.eye(d)
        quad = float(Q @ np.linalg.solve(S, Q))
        gamma = 2.0 * quad + d2 + 1.0
        gamma_cap = 1e3 * max(1.0, gamma)
        return pack(P, Q, gamma), trace_cap, gamma_cap

    out = assemble(np.zeros(d))
    if out is not None:
        return out
    # LQR-style gain guaranteeing the shifted system is Hurwitz.
    try:
        Pare = scipy.linalg.solve_continuous_are(
            Y_shift + 1e-3 * np.eye(d), B_M, np.eye(d), np.eye(1)
        )
        K = (B_M.T @ Pare)[0]
    except Exception:
        return None
    return assemble(K)


def solve_stable(
    cov: CovariancePartition,
    bases: BasisPair,
    alpha: float,
    options: Optional[SolverOptions] = None,
    diagnostics: Optional[IO[str]] = None,
) -> StableSolveResult:
    """Stability-constrained weight solve (LMI relaxation).

    Minimizes gamma over (P, Q, gamma) subject to P > 0,
    [[gamma, Q], [Q^T, 2P - X2]] > 0 and the decay inequality
    Y P - B_M Q + P Y^T - Q^T B_M^T < -2 alpha P, then returns
    w = Q P^-1 - X0 X2^-1.  Every strictly feasible point certifies
    spectral_abscissa(A_cal - B_M w) < -alpha and the cost bound
    gamma - X0 X2^-1 X0^T + X1.

    `diagnostics`, when given, receives one JSON line per interior-point
    iteration (t, Newton decrement, minimum block eigenvalues).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    X2 = cov.X2_hat
    X0 = cov.X0_hat
    d = X2.shape[0]
    if d != bases.state_dim:
        raise DimensionMismatch("covariance and bases disagree on dimension")
    tol = _pd_tolerance(X2)
    lam_min = float(scipy.linalg.eigvalsh(X2, subset_by_index=(0, 0))[0])
    if lam_min <= tol:
        raise SingularCovariance(
            f"X2 min eigenvalue {lam_min:.3e} <= tolerance {tol:.3e}"
        )

    # Uniform (P, Q, gamma) -> (P, Q, gamma)/s scaling keeps the feasible
    # set intact, so solve with a trace-normalized X2 for conditioning.
    s_x = float(np.trace(X2)) / d
    X2n = X2 / s_x
    # With w = Q P^-1 - X0 X2^-1 the closed loop is A_cal - B_M w =
    # (A_cal - B_M w_explicit) - B_M Q P^-1, so the fixed part of the
    # decay inequality is Y = A_cal - B_M w_explicit.
    w_explicit = solve_explicit(cov)
    Y = bases.A_cal - bases.B_M @ w_explicit[None, :]
    Y_shift = Y + alpha * np.eye(d)

    scale3 = 1.0 + float(np.linalg.norm(Y_shift, "fro")) / d
    deltas = (1e-8, 1e-8, 1e-8 * scale3)
    n_p = d * (d + 1) // 2
    start = _initial_point(Y_shift, bases.B_M, X2n, d, n_p, deltas)
    if start is not None:
        x0, trace_cap, gamma_cap = start
        gamma0 = float(x0[-1])
        trace0 = float(np.sum(x0[:n_p][_diag_mask(d)]))
    else:
        x0 = None
        trace_cap = gamma_cap = 1e8
        gamma0 = 1.0
        trace0 = float(d)
    blocks, n_p, m = _stable_blocks(
        Y_shift, bases.B_M, X2n, d, deltas, trace_cap, gamma_cap
    )

    opts = options or SolverOptions()
    if diagnostics is not None:
        def emit(info):
            rec = dict(info)
            rec["schema"] = "barysid.sdp_iteration.v1"
            diagnostics.write(json.dumps(rec, sort_keys=True) + "\n")
        opts = SolverOptions(
            tol=opts.tol,
            mu=opts.mu,
            t0=opts.t0,
            max_newton=opts.max_newton,
            max_stages=opts.max_stages,
            newton_tol=opts.newton_tol,
            armijo=opts.armijo,
            on_iteration=emit,
        )

    objective = np.zeros(m)
    objective[m - 1] = 1.0
    sol = lmi_solve(blocks, objective, x0=x0, options=opts)

    rows, cols = _svec_indices(d)
    Pn = np.zeros((d, d))
    Pn[rows, cols] = sol.x[:n_p]
    Pn = Pn + np.triu(Pn, 1).T
    Qn = sol.x[n_p : n_p + d]
    gamma_n = float(sol.x[n_p + d])

    P = Pn * s_x
    Q = Qn * s_x
    gamma = gamma_n * s_x

    correction = scipy.linalg.cho_solve(scipy.linalg.cho_factor(X2), X0)
    W_hat = np.linalg.solve(Pn.T, Qn) - correction
    x0x2x0 = float(X0 @ correction)
    cost_bound = gamma - x0x2x0 + cov.X1_hat
    achieved = cov.cost(W_hat)
    return StableSolveResult(
        W_hat=W_hat,
        gamma=gamma,
        P=P,
        Q=Q,
        alpha=float(alpha),
        cost_bound=cost_bound,
        achieved_cost=achieved,
        solution=sol,
    )

