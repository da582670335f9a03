"""Oracle families {f_i} and the concrete instance types built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NormBoundViolated
from .geometry import GeometrySetup, Kind

_NORM_TOL = 1e-9


class MaxProblem:
    """Family f_1..f_n of convex functions with Lipschitz/smoothness bounds.

    Subclasses provide vectorized value/gradient access; everything the
    solver needs (softmax values, anchor gradients) goes through these.
    """

    n: int
    d: int
    lip: float  # bound on ||grad f_i||_{p*}
    smooth: float  # bound on the gradient's Lipschitz constant

    def values(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, i: int, x: np.ndarray) -> float:
        return float(self.values(np.array([i]), x)[0])

    def values_all(self, x: np.ndarray) -> np.ndarray:
        return self.values(np.arange(self.n), x)

    def grad(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_matrix(self, x: np.ndarray) -> np.ndarray:
        """All gradients at x, stacked as an (n, d) matrix."""
        return np.stack([self.grad(i, x) for i in range(self.n)])

    def f_max(self, x: np.ndarray) -> float:
        return float(np.max(self.values_all(x)))

    def f_smax(self, x: np.ndarray, eps_prime: float) -> float:
        z = self.values_all(x) / eps_prime
        m = float(z.max())
        return eps_prime * (m + math.log(float(np.sum(np.exp(z - m)))))

    def max_subgradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient of a maximizing component (subgradient of f_max)."""
        return self.grad(int(np.argmax(self.values_all(x))), x)


class LinearMaxProblem(MaxProblem):
    """f_i(x) = <a_i, x> for the rows of an (n, d) matrix."""

    def __init__(self, rows: np.ndarray, lip: float = 1.0):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2:
            raise DimensionMismatch("rows must be an (n, d) matrix")
        self.rows = rows
        self.n, self.d = rows.shape
        self.lip = lip
        self.smooth = 0.0

    def values(self, idx, x):
        return self.rows[idx] @ x

    def value(self, i, x):
        return float(self.rows[i] @ x)

    def values_all(self, x):
        return self.rows @ x

    def grad(self, i, x):
        return self.rows[i].copy()

    def grad_matrix(self, x):
        return self.rows


class QuadraticMaxProblem(MaxProblem):
    """f_i(x) = scale/2 ||x - p_i||^2 + c_i on the unit ball."""

    def __init__(self, centers: np.ndarray, offsets: np.ndarray | None = None, scale: float = 1.0):
        centers = np.asarray(centers, dtype=float)
        if centers.ndim != 2:
            raise DimensionMismatch("centers must be an (n, d) matrix")
        self.centers = centers
        self.n, self.d = centers.shape
        self.offsets = (
            np.zeros(self.n) if offsets is None else np.asarray(offsets, dtype=float).copy()
        )
        self.scale = float(scale)
        self.smooth = self.scale
        # gradient bound over the unit ball: scale * max ||x - p_i||
        self.lip = self.scale * float(1.0 + np.max(np.linalg.norm(centers, axis=1)))

    def values(self, idx, x):
        diff = x[None, :] - self.centers[idx]
        return 0.5 * self.scale * np.sum(diff * diff, axis=1) + self.offsets[idx]

    def value(self, i, x):
        diff = x - self.centers[i]
        return 0.5 * self.scale * float(diff @ diff) + float(self.offsets[i])

    def values_all(self, x):
        diff = x[None, :] - self.centers
        return 0.5 * self.scale * np.sum(diff * diff, axis=1) + self.offsets

    def grad(self, i, x):
        return self.scale * (x - self.centers[i])

    def grad_matrix(self, x):
        return self.scale * (x[None, :] - self.centers)


# ---------------------------------------------------------------------------
# Instances


def _operator_norm(a: np.ndarray, ball_domain: bool) -> float:
    """max_i of the dual norm of column a_i: l2 for the ball, linf for l1."""
    if ball_domain:
        return float(np.max(np.linalg.norm(a, axis=0))) if a.size else 0.0
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass
class MatrixGameInstance:
    """Bilinear game min_{x} max_{y in simplex} x^T A y with d x n payoff A.

    ``kind`` selects the primal domain: "l2l1" for the unit ball, "l1l1"
    for the simplex.  Columns must satisfy the unit operator-norm bound.
    """

    matrix: np.ndarray
    kind: str  # "l2l1" | "l1l1"

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise DimensionMismatch("payoff matrix must be 2-D")
        if self.kind not in ("l2l1", "l1l1"):
            raise NormBoundViolated(f"unknown game kind {self.kind!r}")
        nrm = _operator_norm(self.matrix, self.is_ball)
        if nrm > 1.0 + _NORM_TOL:
            raise NormBoundViolated(f"column norm bound violated: {nrm:.6g} > 1")

    @property
    def is_ball(self) -> bool:
        return self.kind == "l2l1"

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def problem(self) -> LinearMaxProblem:
        return LinearMaxProblem(self.matrix.T, lip=1.0)


@dataclass
class MebInstance:
    """Point set for minimum enclosing ball, normalized so a_1 = 0 and
    max ||a_i|| = 1; ``shift``/``scale`` map back to input coordinates."""

    points: np.ndarray
    shift: np.ndarray = field(init=False)
    scale: float = field(init=False)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float).copy()
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DimensionMismatch("need an (n, d) array with n >= 1")
        self.shift = pts[0].copy()
        pts = pts - self.shift
        nrm = float(np.max(np.linalg.norm(pts, axis=1)))
        self.scale = nrm if nrm > 0.0 else 1.0
        self.points = pts / self.scale

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def to_input_coords(self, center: np.ndarray, radius: float) -> tuple[np.ndarray, float]:
        return center * self.scale + self.shift, radius * self.scale
