"""Continuous-time LTI state-space systems and the operations the rest of
the package is built on: exact zero-order-hold simulation, frequency
response, H2 and L-infinity norms, and stability measures.

All systems use 1/s (continuous-time) semantics; sample rates enter only
through simulation. Instances are treated as immutable after construction
and every function here is pure, so concurrent use is safe.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NonzeroFeedthrough,
    SingularAtFrequency,
    UnstableSystem,
)

logger = logging.getLogger(__name__)

__all__ = [
    "StateSpace",
    "SampledSignal",
    "freq_response",
    "freq_response_grid",
    "simulate_zoh",
    "discretize_zoh",
    "h2_norm",
    "linf_norm",
    "spectral_abscissa",
    "series",
    "subtract",
    "solve_lyapunov_dense",
]

# Reciprocal condition number below which (jwI - A) counts as singular.
_RCOND_FLOOR = 1e-14

# State dimension above which the Lyapunov solve switches from dense
# Kronecker vectorization (an n^2 x n^2 linear solve, O(n^6) flops) to
# scipy's Schur-based Bartels-Stewart routine.  50 keeps the Kronecker
# system under ~50 MB; large error systems (e.g. a 270-state plant) take
# the Schur path.
LYAPUNOV_KRON_MAX = 50


@dataclass
class StateSpace:
    """Real state-space system dx/dt = Ax + Bu, y = Cx + Du.

    A is n x n, B is n x p, C is q x n, D is q x p.  Matrices are
    normalized to 2-D float64 arrays and validated on construction.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionMismatch(
                f"B has {self.B.shape[0]} rows, expected {n}"
            )
        if self.C.shape[1] != n:
            raise DimensionMismatch(
                f"C has {self.C.shape[1]} cols, expected {n}"
            )
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise DimensionMismatch(
                f"D is {self.D.shape}, expected {(self.C.shape[0], self.B.shape[1])}"
            )
        for name, M in (("A", self.A), ("B", self.B), ("C", self.C), ("D", self.D)):
            if M.size and not np.all(np.isfinite(M)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def is_siso(self) -> bool:
        return self.n_inputs == 1 and self.n_outputs == 1


@dataclass
class SampledSignal:
    """Uniformly sampled real signal: `samples[k]` is the value at k/fs.

    `samples` is 1-D for single-channel signals or (n, channels) for
    vector-valued ones.
    """

    fs: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.fs = float(self.fs)
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.fs > 0:
            raise ValueError(f"fs must be positive, got {self.fs}")
        if self.samples.ndim not in (1, 2) or self.samples.shape[0] < 1:
            raise ValueError("samples must be a non-empty 1-D or 2-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite entries")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    def channels(self) -> np.ndarray:
        """Samples as a 2-D (n, channels) view."""
        s = self.samples
        return s[:, None] if s.ndim == 1 else s


def freq_response(sys: StateSpace, omega: float):
    """Evaluate C (jwI - A)^-1 B + D at a single frequency (rad/s).

    Returns a complex scalar for SISO systems, else a (q, p) complex array.

    Raises SingularAtFrequency when (jwI - A) is numerically singular,
    which signals evaluation at an undamped pole.
    """
    n = sys.n_states
    if n == 0:
        val = sys.D.astype(complex)
        return complex(val[0, 0]) if sys.is_siso else val
    M = 1j * float(omega) * np.eye(n) - sys.A
    anorm = np.linalg.norm(M, 1)
    try:
        lu, piv = scipy.linalg.lu_factor(M)
    except scipy.linalg.LinAlgError as exc:
        raise SingularAtFrequency(omega) from exc
    gecon = scipy.linalg.get_lapack_funcs("gecon", (M,))
    rcond, info = gecon(lu, anorm)
    if info != 0 or rcond < _RCOND_FLOOR:
        raise SingularAtFrequency(omega, rcond=float(rcond))
    X = scipy.linalg.lu_solve((lu, piv), sys.B.astype(complex))
    val = sys.C @ X + sys.D
    return complex(val[0, 0]) if sys.is_siso else val


def _residue_form(sys: StateSpace):
    """Eigendecomposition (lam, L, R) with G(jw) = sum L[:,i] R[i,:] / (jw - lam_i) + D.

    Returns None when A is too ill-conditioned to diagonalize reliably.
    """
    if sys.n_states == 0:
        return np.empty(0, dtype=complex), None, None
    lam, V = np.linalg.eig(sys.A)
    try:
        cond = np.linalg.cond(V)
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(cond) or cond > 1e10:
        return None
    L = sys.C.astype(complex) @ V
    R = np.linalg.solve(V, sys.B.astype(complex))
    return lam, L, R


def freq_response_grid(sys: StateSpace, omegas: np.ndarray):
    """Frequency response on an array of frequencies.

    Returns (values, skipped): for SISO, `values` is a complex (m,) array;
    otherwise (m, q, p).  Grid points that land on an undamped pole are
    NaN in `values` and listed in `skipped` instead of raising.
    """
    omegas = np.asarray(omegas, dtype=float)
    lam_all = np.linalg.eigvals(sys.A) if sys.n_states else np.empty(0, complex)
    scale = max(1.0, float(np.max(np.abs(lam_all))) if lam_all.size else 1.0)
    if lam_all.size:
        dist = np.abs(1j * omegas[:, None] - lam_all[None, :]).min(axis=1)
        skipped = np.nonzero(dist < 1e-13 * scale)[0]
    else:
        skipped = np.empty(0, dtype=int)

    res = _residue_form(sys)
    if res is not None:
        lam, L, R = res
        if sys.is_siso:
            values = np.full(len(omegas), complex(sys.D[0, 0]))
            if lam.size:
                r = (L[0, :] * R[:, 0]) if R is not None else np.empty(0)
                den = 1j * omegas[:, None] - lam[None, :]
                with np.errstate(divide="ignore", invalid="ignore"):
                    values = values + (r[None, :] / den).sum(axis=1)
        else:
            values = np.broadcast_to(
                sys.D.astype(complex), (len(omegas),) + sys.D.shape
            ).copy()
            if lam.size:
                den = 1j * omegas[:, None] - lam[None, :]
                with np.errstate(divide="ignore", invalid="ignore"):
                    values += np.einsum("qi,ip,mi->mqp", L, R, 1.0 / den)
    else:
        # Defective or badly conditioned eigenbasis: dense solve per point.
        shape = (len(omegas),) if sys.is_siso else (len(omegas), sys.n_outputs, sys.n_inputs)
        values = np.empty(shape, dtype=complex)
        for i, w in enumerate(omegas):
            if i in skipped:
                values[i] = np.nan
                continue
            try:
                values[i] = freq_response(sys, w)
            except SingularAtFrequency:
                values[i] = np.nan
                skipped = np.append(skipped, i)
    if skipped.size:
        values[np.asarray(skipped, dtype=int)] = np.nan
    return values, np.sort(np.asarray(skipped, dtype=int))


@numba.njit(cache=True)
def _state_recursion(Ad, Bd, u, x0):  # pragma: no cover - compiled
    N = u.shape[0]
    n = Ad.shape[0]
    p = Bd.shape[1]
    X = np.empty((N, n))
    x = x0.copy()
    xn = np.empty(n)
    for k in range(N):
        for i in range(n):
            X[k, i] = x[i]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Ad[i, j] * x[j]
            for j in range(p):
                acc += Bd[i, j] * u[k, j]
            xn[i] = acc
        for i in range(n):
            x[i] = xn[i]
    return X, x


def discretize_zoh(sys: StateSpace, fs: float):
    """Exact zero-order-hold discretization at sample rate fs.

    Returns (Ad, Bd) from the matrix exponential of the augmented block
    [[A, B], [0, 0]] * dt; scipy's expm uses Pade order 13 with scaling
    and squaring, so undamped rotation blocks discretize to exact
    cos/sin rotations up to roundoff.
    """
    n, p = sys.n_states, sys.n_inputs
    dt = 1.0 / float(fs)
    if n == 0:
        return np.zeros((0, 0)), np.zeros((0, p))
    M = np.zeros((n + p, n + p))
    M[:n, :n] = sys.A * dt
    M[:n, n:] = sys.B * dt
    E = scipy.linalg.expm(M)
    return E[:n, :n], E[:n, n:]


def _simulate_states(sys: StateSpace, u2d: np.ndarray, fs: float, x0=None):
    """State trajectory (one row per sample, state *before* each update)
    plus the final state after the last update."""
    n = sys.n_states
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if n == 0:
        return np.zeros((u2d.shape[0], 0)), x0
    Ad, Bd = discretize_zoh(sys, fs)
    return _state_recursion(
        np.ascontiguousarray(Ad),
        np.ascontiguousarray(Bd),
        np.ascontiguousarray(u2d),
        x0,
    )


def simulate_zoh(sys: StateSpace, u: SampledSignal) -> SampledSignal:
    """Simulate `sys` from rest driven by `u` held constant between samples.

    Exact discretization (matrix exponential), then the linear recursion
    x[k+1] = Ad x[k] + Bd u[k], y[k] = C x[k] + D u[k] with x[0] = 0, so
    y[0] = D u[0].  Output is sampled at the same instants as the input.
    """
    u2d = u.channels()
    if u2d.shape[1] != sys.n_inputs:
        raise DimensionMismatch(
            f"input has {u2d.shape[1]} channels, system expects {sys.n_inputs}"
        )
    X, _ = _simulate_states(sys, u2d, u.fs)
    Y = X @ sys.C.T + u2d @ sys.D.T
    if sys.n_outputs == 1:
        return SampledSignal(u.fs, Y[:, 0])
    return SampledSignal(u.fs, Y)


def spectral_abscissa(sys: StateSpace) -> float:
    """Maximum real part over the eigenvalues of A (-inf for static systems)."""
    if sys.n_states == 0:
        return -math.inf
    return float(np.max(np.linalg.eigvals(sys.A).real))


def solve_lyapunov_dense(A: np.ndarray, Qrhs: np.ndarray) -> np.ndarray:
    """Solve A P + P A^T + Qrhs = 0 for symmetric P.

    Uses dense Kronecker vectorization (an n^2-sized linear solve) up to
    LYAPUNOV_KRON_MAX states and scipy's Schur-based method beyond that.
    """
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if n <= LYAPUNOV_KRON_MAX:
        eye = np.eye(n)
        K = np.kron(eye, A) + np.kron(A, eye)
        # Column-major vec so that vec(AP) = (I (x) A) vec(P).
        vecP = np.linalg.solve(K, -Qrhs.flatten(order="F"))
        P = vecP.reshape((n, n), order="F")
    else:
        P = scipy.linalg.solve_continuous_lyapunov(A, -Qrhs)
    return 0.5 * (P + P.T)


def h2_norm(sys: StateSpace) -> float:
    """H2 norm sqrt(trace(C P C^T)) with A P + P A^T + B B^T = 0.

    Requires a Hurwitz A and zero feedthrough; raises UnstableSystem or
    NonzeroFeedthrough otherwise.
    """
    if np.any(sys.D != 0.0):
        raise NonzeroFeedthrough(f"D = {sys.D!r} is nonzero; H2 norm undefined")
    if sys.n_states == 0:
        return 0.0
    if spectral_abscissa(sys) >= 0.0:
        raise UnstableSystem("A is not Hurwitz; H2 norm undefined")
    P = solve_lyapunov_dense(sys.A, sys.B @ sys.B.T)
    val = float(np.trace(sys.C @ P @ sys.C.T))
    return math.sqrt(max(val, 0.0))


def _grid_magnitude(values: np.ndarray) -> np.ndarray:
    if values.ndim == 1:
        return np.abs(values)
    return np.linalg.norm(values, ord=2, axis=(1, 2))


def linf_norm(
    sys: StateSpace,
    band: tuple[float, float],
    grid_density: int = 2000,
) -> float:
    """sup of |G(jw)| over a logarithmic grid on `band` (rad/s), followed
    by golden-section refinement around the grid argmax.

    Defined for unstable systems as well: only the imaginary axis is
    evaluated.  Grid points that hit an undamped pole are skipped and
    logged.
    """
    lo, hi = float(band[0]), float(band[1])
    if not (0.0 < lo < hi):
        raise ValueError(f"invalid band {band!r}")
    decades = math.log10(hi / lo)
    npts = max(int(math.ceil(decades * grid_density)) + 1, 16)
    grid = np.logspace(math.log10(lo), math.log10(hi), npts)
    values, skipped = freq_response_grid(sys, grid)
    if skipped.size:
        logger.warning(
            "linf_norm: skipped %d grid points at undamped poles: %s",
            skipped.size,
            grid[skipped][:5],
        )
    mags = _grid_magnitude(values)
    finite = np.isfinite(mags)
    if not np.any(finite):
        raise SingularAtFrequency(float(grid[0]))
    k = int(np.nanargmax(np.where(finite, mags, -np.inf)))
    best = float(mags[k])

    def mag_at(logw: float) -> float:
        vals, _ = freq_response_grid(sys, np.array([10.0**logw]))
        m = _grid_magnitude(vals)[0]
        return float(m) if np.isfinite(m) else -math.inf

    # Golden-section maximization between the grid neighbours of the argmax.
    a = math.log10(grid[max(k - 1, 0)])
    b = math.log10(grid[min(k + 1, npts - 1)])
    if b > a:
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        fc, fd = mag_at(c), mag_at(d)
        for _ in range(60):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = mag_at(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = mag_at(d)
            if b - a < 1e-12:
                break
        best = max(best, fc, fd)
    return best


def series(first: StateSpace, second: StateSpace) -> StateSpace:
    """Series interconnection: u -> first -> second -> y."""
    if second.n_inputs != first.n_outputs:
        raise DimensionMismatch(
            f"cannot cascade {first.n_outputs} outputs into {second.n_inputs} inputs"
        )
    n1, n2 = first.n_states, second.n_states
    A = np.block(
        [
            [first.A, np.zeros((n1, n2))],
            [second.B @ first.C, second.A],
        ]
    )
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpace(A, B, C, D)


def subtract(left: StateSpace, right: StateSpace) -> StateSpace:
    """Parallel difference left - right (the error system)."""
    if left.n_inputs != right.n_inputs or left.n_outputs != right.n_outputs:
        raise DimensionMismatch("left and right must share input/output dims")
    n1, n2 = left.n_states, right.n_states
    A = scipy.linalg.block_diag(left.A, right.A)
    B = np.vstack([left.B, right.B])
    C = np.hstack([left.C, -right.C])
    D = left.D - right.D
    return StateSpace(A, B, C, D)
