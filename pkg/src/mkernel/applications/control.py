"""Quadratic control functionals discretized over partitions.

A piecewise-constant control on a partition of [0, T] turns the quadratic
cost into a finite-dimensional QP: the Hessian block (i, j) is the kernel
at the cell midpoints scaled by both cell widths, and the linear term
collects cell integrals of a fixed function. Convexity of the discretized
problem is literally a PSD check on that Hessian; a kernel that is not PD
yields a descent direction along which scaled controls drive the cost to
minus infinity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..certify import DEFAULT_TOLERANCE
from ..kernels import MatrixKernel, gram_blocks

_GAUSS5_X, _GAUSS5_W = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class ControlQP:
    """Discretized quadratic control problem min_v v^T H v + b^T v."""

    breakpoints: np.ndarray
    midpoints: np.ndarray
    widths: np.ndarray
    H: np.ndarray
    b: np.ndarray
    block_dim: int

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing, at least two")
        H = np.asarray(self.H, dtype=float)
        if np.max(np.abs(H - H.T)) > 1e-12 * max(1.0, np.max(np.abs(H))):
            raise ValueError("control Hessian must be symmetric")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "midpoints", np.asarray(self.midpoints, dtype=float))
        object.__setattr__(self, "widths", np.asarray(self.widths, dtype=float))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(-1))

    @property
    def n_cells(self) -> int:
        return self.widths.size


def _cell_integrals(linear_term, breakpoints: np.ndarray, n_cells: int,
                    block_dim: int) -> np.ndarray:
    """Resolve the linear term to one vector of cell integrals per cell."""
    mids = 0.5 * (breakpoints[:-1] + breakpoints[1:])
    widths = np.diff(breakpoints)
    if callable(linear_term):
        b = np.zeros((n_cells, block_dim))
        for i in range(n_cells):
            t = mids[i] + 0.5 * widths[i] * _GAUSS5_X
            vals = np.asarray([np.atleast_1d(linear_term(ti)) for ti in t], dtype=float)
            b[i] = 0.5 * widths[i] * (_GAUSS5_W @ vals)
        return b.reshape(-1)
    arr = np.asarray(linear_term, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape == (n_cells * block_dim,):
        return arr.copy()
    if arr.shape == (n_cells, block_dim):
        return arr.reshape(-1)
    if arr.shape == (block_dim,):
        # constant integrand: integral over each cell is value * width
        return (widths[:, None] * arr).reshape(-1)
    raise ValueError(
        f"linear term shape {arr.shape} fits neither the full vector "
        f"({n_cells * block_dim},), per-cell ({n_cells}, {block_dim}), "
        f"nor a constant ({block_dim},)"
    )


def assemble_control_qp(kernel: MatrixKernel, breakpoints, linear_term) -> ControlQP:
    """Build the QP for a partition: H_(i,j) = K(mid_i, mid_j) w_i w_j.

    The linear term may be a precomputed vector, a constant vector, or a
    callable t -> R^N integrated over each cell by 5-point quadrature.
    """
    bp = np.asarray(breakpoints, dtype=float).reshape(-1)
    if bp.size < 2 or np.any(np.diff(bp) <= 0):
        raise ValueError("breakpoints must be strictly increasing, at least two")
    mids = 0.5 * (bp[:-1] + bp[1:])
    widths = np.diff(bp)
    M, N = mids.size, kernel.output_dim
    blocks = gram_blocks(kernel, mids.reshape(-1, 1))
    blocks = blocks * np.multiply.outer(widths, widths)[:, :, None, None]
    H = blocks.transpose(0, 2, 1, 3).reshape(M * N, M * N)
    b = _cell_integrals(linear_term, bp, M, N)
    return ControlQP(bp, mids, widths, H, b, N)


@dataclass(frozen=True)
class QPSolution:
    """Minimizer or certified unboundedness of v^T H v + b^T v."""

    status: str
    value: float
    v: np.ndarray | None
    direction: np.ndarray | None
    residual: float
    eig_min: float
    eig_max: float
    tolerance: float

    @property
    def unbounded(self) -> bool:
        return self.status == "unbounded"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "value": self.value if np.isfinite(self.value) else None,
            "v": None if self.v is None else self.v.tolist(),
            "direction": None if self.direction is None else self.direction.tolist(),
            "residual": self.residual if np.isfinite(self.residual) else None,
            "eig_min": self.eig_min,
            "eig_max": self.eig_max,
            "tolerance": self.tolerance,
        }


def qp_objective(H: np.ndarray, b: np.ndarray, v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    return float(v @ (H @ v) + b @ v)


def solve_qp(H, b, tolerance: float = DEFAULT_TOLERANCE) -> QPSolution:
    """Minimize v^T H v + b^T v by eigendecomposition.

    Unboundedness is a result, not an error: a negative eigenvalue yields a
    quadratic descent direction (sign fixed so b^T d <= 0), and b sticking
    out of range(H) yields a linear descent direction in the null space.
    Otherwise the minimum-norm solution v = -H^+ b / 2 is returned with the
    normal-equation residual |2 H v + b| relative to |b|.
    """
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    H = 0.5 * (H + H.T)
    evals, evecs = np.linalg.eigh(H)
    eig_min, eig_max = float(evals[0]), float(evals[-1])
    threshold = tolerance * max(1.0, eig_max)

    if eig_min < -threshold:
        d = evecs[:, 0]
        if b @ d > 0:
            d = -d
        return QPSolution("unbounded", -np.inf, None, d, np.nan,
                          eig_min, eig_max, tolerance)

    # rank decision at machine precision: a tiny-but-positive eigenvalue
    # still means b is in range and the minimum is finite (if remote)
    rank_cutoff = H.shape[0] * np.finfo(float).eps * max(eig_max, 0.0)
    null = evals <= rank_cutoff
    if null.any():
        r = evecs[:, null].T @ b
        rnorm = float(np.linalg.norm(r))
        if rnorm > tolerance * max(1.0, float(np.linalg.norm(b))):
            d = -(evecs[:, null] @ r) / rnorm
            return QPSolution("unbounded", -np.inf, None, d, np.nan,
                              eig_min, eig_max, tolerance)

    inv = np.where(null, 0.0, np.divide(1.0, evals, where=~null))
    v = -0.5 * (evecs @ (inv * (evecs.T @ b)))
    value = qp_objective(H, b, v)
    residual = float(np.linalg.norm(2.0 * H @ v + b)) / max(1.0, float(np.linalg.norm(b)))
    return QPSolution("minimum", value, v, None, residual, eig_min, eig_max, tolerance)


def solve_control_qp(qp: ControlQP, tolerance: float = DEFAULT_TOLERANCE) -> QPSolution:
    return solve_qp(qp.H, qp.b, tolerance)


@dataclass(frozen=True)
class RefinementReport:
    """QP values along a nested sequence of partitions."""

    values: list
    solutions: list
    non_increasing: bool

    def to_json(self) -> dict:
        return {
            "values": [v if np.isfinite(v) else None for v in self.values],
            "statuses": [s.status for s in self.solutions],
            "non_increasing": self.non_increasing,
        }


def refine_partition_study(kernel: MatrixKernel, partitions, linear_term,
                           tolerance: float = DEFAULT_TOLERANCE) -> RefinementReport:
    """Solve the control QP along nested partitions with a consistent
    linear term (cell integrals of one fixed function).

    Every coarse piecewise-constant control stays feasible on a finer
    partition, so the values are non-increasing; the report records whether
    that held numerically.
    """
    parts = [np.asarray(p, dtype=float).reshape(-1) for p in partitions]
    for coarse, fine in zip(parts, parts[1:]):
        for t in coarse:
            if np.min(np.abs(fine - t)) > 1e-12 * max(1.0, abs(t)):
                raise ValueError(
                    f"partitions are not nested: breakpoint {t} missing from refinement"
                )
    if not callable(linear_term):
        const = np.atleast_1d(np.asarray(linear_term, dtype=float))
        if const.ndim != 1 or const.size != kernel.output_dim:
            raise ValueError(
                "across refinements the linear term must be a fixed function: "
                "pass a callable or one constant vector"
            )
        linear_term = lambda t, c=const: c
    solutions = [solve_control_qp(assemble_control_qp(kernel, p, linear_term), tolerance)
                 for p in parts]
    values = [s.value for s in solutions]
    non_increasing = all(b <= a + 1e-10 * max(1.0, abs(a)) for a, b in zip(values, values[1:]))
    return RefinementReport(values, solutions, non_increasing)
