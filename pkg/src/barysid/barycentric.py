"""Barycentric interpolant machinery: weight-independent basis systems built
from frequency-response data, and assembly of the identified model from a
weight row.

An interpolant of order 2l+1 is parametrized by a feedthrough D, a DC gain
K = G(0), l positive frequencies with complex response values, and a real
weight row of width 2l+1 (one entry for the DC term, two per frequency
pair).  Whenever the weight block attached to a data point is nonzero, the
assembled model matches that point exactly; the remaining freedom in the
weights is what the optimizers in `weights` exploit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, DuplicateFrequency, RemovableSingularity
from .lti import StateSpace, freq_response

__all__ = [
    "InterpolationData",
    "BasisPair",
    "InterpolantModel",
    "build_bases",
    "assemble_model",
    "eval_interpolant",
    "complex_weights",
    "ACTIVE_BLOCK_TOL",
]

# Weight blocks with euclidean norm above this count as "active": the
# interpolation property is only guaranteed (and only tested) for them.
ACTIVE_BLOCK_TOL = 1e-12


@dataclass
class InterpolationData:
    """Feedthrough D, DC gain K = G(0), and l positive-frequency samples.

    `omegas` are rad/s, strictly positive and pairwise distinct within a
    relative tolerance of 1e-12; `values` are the matching complex
    responses.  An empty point list is allowed (DC term only).
    """

    D: float
    K: float
    omegas: np.ndarray = field(default_factory=lambda: np.empty(0))
    values: np.ndarray = field(default_factory=lambda: np.empty(0, complex))

    def __post_init__(self):
        self.D = float(self.D)
        self.K = float(self.K)
        self.omegas = np.asarray(self.omegas, dtype=float).ravel()
        self.values = np.asarray(self.values, dtype=complex).ravel()
        if self.omegas.shape != self.values.shape:
            raise DimensionMismatch("omegas and values must have equal length")
        if self.omegas.size and np.any(self.omegas <= 0.0):
            raise ValueError("interpolation frequencies must be positive")
        if not (np.isfinite(self.D) and np.isfinite(self.K)):
            raise ValueError("D and K must be finite")
        if self.omegas.size and not np.all(np.isfinite(self.values)):
            raise ValueError("response values must be finite")
        _check_distinct(self.omegas)

    @classmethod
    def from_points(cls, D, K, points) -> "InterpolationData":
        """Build from an iterable of (omega, value) pairs."""
        pts = list(points)
        omegas = np.array([p[0] for p in pts], dtype=float)
        values = np.array([p[1] for p in pts], dtype=complex)
        return cls(D=D, K=K, omegas=omegas, values=values)

    @property
    def n_points(self) -> int:
        return int(self.omegas.size)

    @property
    def state_dim(self) -> int:
        return 2 * self.n_points + 1


def _check_distinct(omegas: np.ndarray):
    if omegas.size < 2:
        return
    srt = np.sort(omegas)
    gaps = np.diff(srt)
    scale = np.maximum(srt[1:], srt[:-1])
    bad = np.nonzero(gaps <= 1e-12 * scale)[0]
    if bad.size:
        raise DuplicateFrequency(
            f"frequencies {srt[bad[0]]} and {srt[bad[0] + 1]} coincide"
        )


@dataclass
class BasisPair:
    """Weight-independent SIMO basis systems sharing a block-diagonal state.

    `A_cal` is blkdiag(0, [[0, w1], [-w1, 0]], ...); `B_M` stacks the unit
    input columns and `B_N` stacks (K, Re G_k, -Im G_k).  `M_sys` and
    `N_sys` expose 2l+2 outputs each: the feedthrough row (1 resp. D)
    followed by the raw state.
    """

    data: InterpolationData
    A_cal: np.ndarray
    B_M: np.ndarray
    B_N: np.ndarray
    M_sys: StateSpace
    N_sys: StateSpace

    @property
    def state_dim(self) -> int:
        return self.A_cal.shape[0]

    @property
    def output_dim(self) -> int:
        return self.state_dim + 1


def build_bases(data: InterpolationData) -> BasisPair:
    """Realize the basis systems from interpolation data.

    The DC section contributes a scalar integrator (A = 0, input 1 resp.
    K); each frequency pair contributes the undamped rotation block
    [[0, w_k], [-w_k, 0]] with input column [1; 0] for M and
    [Re G_k; -Im G_k] for N.
    """
    ell = data.n_points
    dim = 2 * ell + 1
    blocks = [np.zeros((1, 1))]
    for w in data.omegas:
        blocks.append(np.array([[0.0, w], [-w, 0.0]]))
    A_cal = scipy.linalg.block_diag(*blocks)

    B_M = np.zeros((dim, 1))
    B_N = np.zeros((dim, 1))
    B_M[0, 0] = 1.0
    B_N[0, 0] = data.K
    for k in range(ell):
        B_M[1 + 2 * k, 0] = 1.0
        B_N[1 + 2 * k, 0] = data.values[k].real
        B_N[2 + 2 * k, 0] = -data.values[k].imag

    C = np.vstack([np.zeros((1, dim)), np.eye(dim)])
    D_M = np.zeros((dim + 1, 1))
    D_M[0, 0] = 1.0
    D_N = np.zeros((dim + 1, 1))
    D_N[0, 0] = data.D
    M_sys = StateSpace(A_cal, B_M, C, D_M)
    N_sys = StateSpace(A_cal, B_N, C, D_N)
    return BasisPair(data=data, A_cal=A_cal, B_M=B_M, B_N=B_N, M_sys=M_sys, N_sys=N_sys)


@dataclass
class InterpolantModel:
    """Interpolation data, bases, a weight row, and the assembled model R."""

    data: InterpolationData
    bases: BasisPair
    weights: np.ndarray
    R: StateSpace

    @property
    def order(self) -> int:
        return self.R.n_states

    def active_points(self) -> np.ndarray:
        """Boolean mask over the l frequency points whose 2-entry weight
        block is nonzero (norm > ACTIVE_BLOCK_TOL): only these are
        guaranteed to be interpolated."""
        ell = self.data.n_points
        w = self.weights
        mask = np.empty(ell, dtype=bool)
        for k in range(ell):
            mask[k] = np.hypot(w[1 + 2 * k], w[2 + 2 * k]) > ACTIVE_BLOCK_TOL
        return mask

    @property
    def dc_active(self) -> bool:
        return abs(self.weights[0]) > ACTIVE_BLOCK_TOL


def assemble_model(
    bases: BasisPair, data: InterpolationData, w: np.ndarray
) -> InterpolantModel:
    """Assemble R = (A_cal - B_M w, B_M D - B_N, -w, D) from a weight row.

    The resulting single-input single-output system has state dimension
    2l+1, feedthrough exactly `data.D`, and matches every data point whose
    weight block is active.
    """
    w = np.asarray(w, dtype=float).ravel()
    if w.size != bases.state_dim:
        raise DimensionMismatch(
            f"weight row has width {w.size}, bases expect {bases.state_dim}"
        )
    wrow = w[None, :]
    A = bases.A_cal - bases.B_M @ wrow
    B = bases.B_M * data.D - bases.B_N
    R = StateSpace(A, B, -wrow, np.array([[data.D]]))
    return InterpolantModel(data=data, bases=bases, weights=w, R=R)


def complex_weights(model: InterpolantModel) -> np.ndarray:
    """Complex weights (a_0, ..., a_l) of the scalar barycentric form.

    a_0 is the (real) DC weight; for k >= 1 the adjacent real pair
    (w_{2k-1}, w_{2k}) acting on the rotation block is equivalent to the
    complex weight (w_{2k-1} + j w_{2k}) / 2 at the pole +j w_k, with the
    conjugate weight at -j w_k.
    """
    ell = model.data.n_points
    w = model.weights
    out = np.empty(ell + 1, dtype=complex)
    out[0] = w[0]
    for k in range(ell):
        out[k + 1] = 0.5 * (w[1 + 2 * k] + 1j * w[2 + 2 * k])
    return out


def eval_interpolant(model: InterpolantModel, omega: float) -> complex:
    """Evaluate R(jw) = N(jw) / M(jw) from the barycentric sums.

    Independent of the state-space assembly: uses the rational form with
    complex weights reconstructed from the real pairs, so it serves as a
    cross-check of the assembled model.  Raises RemovableSingularity when
    `omega` coincides with an interpolation node (including DC); the
    caller should use the known data value there.
    """
    w = float(omega)
    data = model.data
    if abs(w) <= 1e-300:
        raise RemovableSingularity(w, 0)
    for k, wk in enumerate(data.omegas):
        if min(abs(w - wk), abs(w + wk)) <= 1e-12 * max(1.0, wk):
            raise RemovableSingularity(w, k + 1)
    a = complex_weights(model)
    s = 1j * w
    M = 1.0 + a[0] / s
    N = data.D + a[0] * data.K / s
    for k in range(data.n_points):
        pole = 1j * data.omegas[k]
        gk = data.values[k]
        M += a[k + 1] / (s - pole) + np.conj(a[k + 1]) / (s + pole)
        N += a[k + 1] * gk / (s - pole) + np.conj(a[k + 1] * gk) / (s + pole)
    return complex(N / M)


def interpolation_residuals(model: InterpolantModel) -> np.ndarray:
    """|R(j w_k) - G_k| at every active interpolation point (NaN where the
    weight block is inactive)."""
    ell = model.data.n_points
    out = np.full(ell, np.nan)
    active = model.active_points()
    for k in range(ell):
        if active[k]:
            rk = freq_response(model.R, model.data.omegas[k])
            out[k] = abs(rk - model.data.values[k])
    return out
