"""Small dense semidefinite programming by logarithmic-barrier path
following.

Problems are posed as a linear objective over vectorized variables subject
to affine matrix-inequality blocks F0 + sum_a x_a F_a > 0.  The solver
minimizes t * objective - sum_i log det(block_i) with damped Newton steps
and a feasibility-preserving line search, increasing t geometrically until
the duality measure (total block dimension / t) drops below tolerance.
Every iterate is strictly feasible, so constraint-based guarantees hold
for the returned point even at loose tolerances.

Intended for blocks up to a couple hundred rows; everything is dense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import Infeasible, MaxIterations, NumericalFailure

__all__ = ["LMIBlock", "SolverOptions", "LMISolution", "lmi_solve"]


@dataclass
class LMIBlock:
    """One affine matrix inequality F0 + sum_a x[idx[a]] * basis[a] > 0.

    `var_indices` maps the stacked `basis` coefficient matrices onto the
    global variable vector, so blocks that touch only a subset of the
    variables stay compact.
    """

    F0: np.ndarray
    var_indices: np.ndarray
    basis: np.ndarray  # (len(var_indices), d, d)

    def __post_init__(self):
        self.F0 = np.asarray(self.F0, dtype=float)
        self.var_indices = np.asarray(self.var_indices, dtype=np.intp)
        self.basis = np.ascontiguousarray(self.basis, dtype=float)
        d = self.F0.shape[0]
        if self.F0.shape != (d, d):
            raise ValueError("F0 must be square")
        if self.basis.shape != (len(self.var_indices), d, d):
            raise ValueError("basis tensor shape mismatch")

    @property
    def dim(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        F = self.F0.copy()
        if len(self.var_indices):
            F += np.tensordot(x[self.var_indices], self.basis, axes=(0, 0))
        return 0.5 * (F + F.T)


@dataclass
class SolverOptions:
    tol: float = 1e-7          # duality measure (total dim / t) target
    mu: float = 20.0           # geometric t growth
    t0: Optional[float] = None  # None: scale from the objective at x0
    max_newton: int = 120      # per centering stage
    max_stages: int = 80
    # Approximate centering suffices for path following: accept the center
    # once (Newton decrement)^2 / 2 drops below this.  Exact centering is
    # unreachable in float64 at large t, where the active slacks scale
    # like 1/t.
    newton_tol: float = 0.02
    armijo: float = 0.25
    verbose: bool = False
    on_iteration: Optional[Callable[[dict], None]] = None


@dataclass
class LMISolution:
    x: np.ndarray
    objective: float
    t: float
    newton_steps: int
    stages: int
    min_eigs: list[float] = field(default_factory=list)


def _chol(F: np.ndarray):
    try:
        return np.linalg.cholesky(F)
    except np.linalg.LinAlgError:
        return None


def _min_eig(F: np.ndarray) -> float:
    return float(scipy.linalg.eigvalsh(F, subset_by_index=(0, 0))[0])


def _barrier_state(blocks, x):
    """Cholesky factors of all block values, or None if any is not PD."""
    Ls = []
    for blk in blocks:
        L = _chol(blk.evaluate(x))
        if L is None:
            return None
        Ls.append(L)
    return Ls


def _barrier_value(t, c, x, Ls):
    phi = t * float(c @ x)
    for L in Ls:
        phi -= 2.0 * float(np.sum(np.log(np.diag(L))))
    return phi


def _grad_hess(blocks, x, t, c, m):
    """Gradient and Hessian of t*c.x - sum log det F_i at x."""
    g = t * c.copy()
    H = np.zeros((m, m))
    Ls = []
    for blk in blocks:
        F = blk.evaluate(x)
        L = _chol(F)
        if L is None:
            raise NumericalFailure("iterate left the cone during assembly")
        Ls.append(L)
        if not len(blk.var_indices):
            continue
        Linv = scipy.linalg.solve_triangular(L, np.eye(blk.dim), lower=True)
        Finv = Linv.T @ Linv
        idx = blk.var_indices
        g[idx] -= np.einsum("ij,aji->a", Finv, blk.basis)
        # H_ab = tr(Finv B_a Finv B_b) = <W_a, W_b>, W_a = Linv B_a Linv^T
        W = np.matmul(Linv, np.matmul(blk.basis, Linv.T))
        S = W.reshape(len(idx), -1)
        H[np.ix_(idx, idx)] += S @ S.T
    return g, H, Ls


def _max_step(blocks, Ls, x, dx) -> float:
    """Largest sigma with every block still PD at x + sigma * dx."""
    sigma = math.inf
    for blk, L in zip(blocks, Ls):
        if not len(blk.var_indices):
            continue
        dF = np.tensordot(dx[blk.var_indices], blk.basis, axes=(0, 0))
        dF = 0.5 * (dF + dF.T)
        if not np.any(dF):
            continue
        Linv = scipy.linalg.solve_triangular(L, np.eye(blk.dim), lower=True)
        W = Linv @ dF @ Linv.T
        lam_min = _min_eig(0.5 * (W + W.T))
        if lam_min < 0:
            sigma = min(sigma, -1.0 / lam_min)
    return sigma


def _center(blocks, c, x, t, opts, phase):
    """Damped Newton to the analytic center for fixed t.  Returns
    (x, newton_steps, Ls)."""
    m = len(x)
    steps = 0
    for _ in range(opts.max_newton):
        g, H, Ls = _grad_hess(blocks, x, t, c, m)
        # Tiny ridge keeps the factorization alive when H is near-singular.
        jitter = 1e-13 * (np.trace(H) / m + 1.0)
        for attempt in range(6):
            try:
                cf = scipy.linalg.cho_factor(H + jitter * np.eye(m))
                break
            except np.linalg.LinAlgError:
                jitter *= 100.0
        else:
            raise NumericalFailure("Newton system factorization failed")
        dx = -scipy.linalg.cho_solve(cf, g)
        dec2 = float(-g @ dx)  # squared Newton decrement
        if opts.on_iteration is not None:
            opts.on_iteration(
                {
                    "phase": phase,
                    "t": t,
                    "newton_decrement": math.sqrt(max(dec2, 0.0)),
                    "min_block_eigs": [_min_eig(L @ L.T) for L in Ls],
                }
            )
        if dec2 / 2.0 <= opts.newton_tol:
            return x, steps, Ls
        sigma = _max_step(blocks, Ls, x, dx)
        step = min(1.0, 0.99 * sigma)
        phi0 = _barrier_value(t, c, x, Ls)
        slope = float(g @ dx)
        while step > 1e-14:
            x_new = x + step * dx
            Ls_new = _barrier_state(blocks, x_new)
            if Ls_new is not None:
                phi_new = _barrier_value(t, c, x_new, Ls_new)
                if phi_new <= phi0 + opts.armijo * step * slope:
                    break
            step *= 0.5
        else:
            # No productive step: accept a roughly centered point (the
            # duality estimate degrades by a constant factor), otherwise
            # report the stall.
            if dec2 / 2.0 <= 0.5:
                return x, steps, Ls
            raise NumericalFailure(
                f"line search stalled (decrement^2={dec2:.3e}, t={t:.3e})"
            )
        x = x + step * dx
        steps += 1
    raise MaxIterations(f"centering did not converge within {opts.max_newton} steps")


def _path_follow(blocks, c, x0, opts, phase, stop_early=None):
    total_dim = sum(b.dim for b in blocks)
    x = np.asarray(x0, dtype=float).copy()
    if _barrier_state(blocks, x) is None:
        raise NumericalFailure("starting point is not strictly feasible")
    t = opts.t0
    if t is None:
        # Anchor the first center near the starting objective scale.
        t = max(1.0, total_dim / (1.0 + abs(float(c @ x))))
    newton_total = 0
    stages = 0
    for _ in range(opts.max_stages):
        x, steps, Ls = _center(blocks, c, x, t, opts, phase)
        newton_total += steps
        stages += 1
        if stop_early is not None and stop_early(x):
            break
        if total_dim / t < opts.tol:
            break
        t *= opts.mu
    else:
        raise MaxIterations("path following exceeded stage limit")
    min_eigs = [_min_eig(b.evaluate(x)) for b in blocks]
    return LMISolution(
        x=x,
        objective=float(c @ x),
        t=t,
        newton_steps=newton_total,
        stages=stages,
        min_eigs=min_eigs,
    )


def _phase1(blocks, x0, opts):
    """Find a strictly feasible point by minimizing the uniform shift s in
    F_i(x) + s I > 0; infeasible if the optimal shift stays positive."""
    m = len(x0)
    ext_blocks = []
    for blk in blocks:
        idx = np.concatenate([blk.var_indices, [m]])
        basis = np.concatenate(
            [blk.basis, np.eye(blk.dim)[None, :, :]], axis=0
        )
        ext_blocks.append(LMIBlock(blk.F0, idx, basis))
    worst = min(_min_eig(blk.evaluate(x0)) for blk in blocks)
    scale = max(
        1.0, max(abs(np.trace(b.F0)) / b.dim for b in blocks)
    )
    s0 = max(0.0, -worst) + 0.1 * scale
    z0 = np.concatenate([x0, [s0]])
    c = np.zeros(m + 1)
    c[m] = 1.0
    margin = 1e-8 * scale

    def feasible_now(z):
        return z[m] < -margin

    opts1 = SolverOptions(
        tol=opts.tol,
        mu=opts.mu,
        t0=opts.t0,
        max_newton=opts.max_newton,
        max_stages=opts.max_stages,
        newton_tol=opts.newton_tol,
        armijo=opts.armijo,
        on_iteration=opts.on_iteration,
    )
    sol = _path_follow(ext_blocks, c, z0, opts1, "phase1", stop_early=feasible_now)
    if sol.x[m] >= -margin:
        raise Infeasible(
            f"feasibility phase objective stayed positive (s* = {sol.x[m]:.3e})"
        )
    return sol.x[:m]


def lmi_solve(
    blocks: list[LMIBlock],
    objective: np.ndarray,
    x0: Optional[np.ndarray] = None,
    options: Optional[SolverOptions] = None,
) -> LMISolution:
    """Minimize `objective . x` subject to every block being positive
    definite.

    If `x0` is strictly feasible it seeds the path following directly;
    otherwise a feasibility phase (minimizing the worst eigenvalue shift)
    finds an interior point first and raises Infeasible when none exists.
    """
    opts = options or SolverOptions()
    c = np.asarray(objective, dtype=float).ravel()
    m = c.size
    for blk in blocks:
        if len(blk.var_indices) and blk.var_indices.max() >= m:
            raise ValueError("block refers to variable beyond objective size")
    if x0 is None:
        x0 = np.zeros(m)
    x0 = np.asarray(x0, dtype=float).copy()
    if _barrier_state(blocks, x0) is None:
        x0 = _phase1(blocks, x0, opts)
    return _path_follow(blocks, c, x0, opts, "phase2")
