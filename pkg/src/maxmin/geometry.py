"""Domain geometry: norms, Bregman divergences, prox/mirror steps.

Two setups are supported.  The *ball* setup works on the unit Euclidean
ball with the squared-distance divergence; the *truncated simplex* setup
works on ``{x in simplex : x_i >= nu}`` with the KL divergence.  Both
divergences satisfy a relaxed triangle inequality with a setup-dependent
constant, which the ball oracle relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InfeasibleInput, NonFinite

# Entries below this are treated as zero for KL purposes and rejected.
_MIN_POSITIVE = 1e-300
_FEAS_TOL = 1e-9
_BALL_PROJ_TOL = 1e-12


class Kind(Enum):
    BALL = "ball"
    TRUNCATED_SIMPLEX = "truncated_simplex"


@dataclass(frozen=True)
class GeometrySetup:
    """Domain descriptor: kind, dimension and simplex truncation level.

    The norm index ``p`` is 2 for the ball and 1 for the simplex; ``nu``
    must be 0 for the ball and in ``[0, 1/(2 dim)]`` for the simplex
    (``nu = 0`` gives the untruncated simplex, on which ``tau`` is
    unbounded).
    """

    kind: Kind
    dim: int
    nu: float = 0.0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InfeasibleInput(f"dim must be positive, got {self.dim}")
        if self.kind is Kind.BALL:
            if self.nu != 0.0:
                raise InfeasibleInput("ball setup requires nu = 0")
        else:
            if self.nu < 0.0 or self.nu > 0.5 / self.dim + _FEAS_TOL:
                raise InfeasibleInput(
                    f"truncated simplex requires 0 <= nu <= 1/(2d); got nu={self.nu}, d={self.dim}"
                )

    @property
    def p(self) -> int:
        return 2 if self.kind is Kind.BALL else 1

    def norm(self, v: np.ndarray) -> float:
        if self.kind is Kind.BALL:
            return float(np.sqrt(np.dot(v, v)))
        return float(np.sum(np.abs(v)))

    def center(self) -> np.ndarray:
        """A canonical interior starting point (origin / uniform)."""
        if self.kind is Kind.BALL:
            return np.zeros(self.dim)
        return np.full(self.dim, 1.0 / self.dim)

    def contains(self, x: np.ndarray, tol: float = _FEAS_TOL) -> bool:
        if x.shape != (self.dim,):
            return False
        if self.kind is Kind.BALL:
            return bool(np.dot(x, x) <= (1.0 + tol) ** 2)
        return bool(
            np.all(x >= self.nu - tol) and abs(float(np.sum(x)) - 1.0) <= tol * max(1.0, self.dim)
        )


def ball_setup(dim: int) -> GeometrySetup:
    return GeometrySetup(Kind.BALL, dim, 0.0)


def simplex_setup(dim: int, nu: float) -> GeometrySetup:
    return GeometrySetup(Kind.TRUNCATED_SIMPLEX, dim, nu)


def _check_pair(setup: GeometrySetup, x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != (setup.dim,) or y.shape != (setup.dim,):
        raise DimensionMismatch(f"expected shape ({setup.dim},), got {x.shape} and {y.shape}")


def bregman(setup: GeometrySetup, x: np.ndarray, y: np.ndarray) -> float:
    """Divergence V_x(y) of ``y`` from reference point ``x``.

    Ball: ``0.5 * ||x - y||_2^2``.  Simplex: ``sum_i y_i log(y_i / x_i)``
    (KL of y from x), which requires strictly positive entries.
    """
    _check_pair(setup, x, y)
    if setup.kind is Kind.BALL:
        d = x - y
        return 0.5 * float(np.dot(d, d))
    if np.any(x < _MIN_POSITIVE) or np.any(y < _MIN_POSITIVE):
        raise NonFinite("KL divergence needs strictly positive entries")
    v = float(np.sum(y * (np.log(y) - np.log(x))))
    if not math.isfinite(v):
        raise NonFinite("KL divergence evaluated to a non-finite value")
    return v


def bregman_pairwise(setup: GeometrySetup, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Row-wise V_{xs[i]}(ys[i]) for (m, d) batches; used by the fuzz suites."""
    if setup.kind is Kind.BALL:
        d = xs - ys
        return 0.5 * np.sum(d * d, axis=-1)
    if np.any(xs < _MIN_POSITIVE) or np.any(ys < _MIN_POSITIVE):
        raise NonFinite("KL divergence needs strictly positive entries")
    return np.sum(ys * (np.log(ys) - np.log(xs)), axis=-1)


def tau(setup: GeometrySetup) -> float:
    """Relaxed-triangle-inequality constant of the setup's divergence.

    Ball: 4.  Truncated simplex: ``6 log(1/nu)`` (infinite at nu = 0,
    where no finite constant works).
    """
    if setup.kind is Kind.BALL:
        return 4.0
    if setup.nu == 0.0:
        return math.inf
    return 6.0 * math.log(1.0 / setup.nu)


def max_divergence_bound(setup: GeometrySetup) -> float:
    """Upper bound on V_x(y) over all feasible pairs."""
    if setup.kind is Kind.BALL:
        return 2.0
    if setup.nu == 0.0:
        return math.inf
    return math.log(1.0 / setup.nu)


_IDX_CACHE: dict[int, np.ndarray] = {}


def _waterfill(log_xi: np.ndarray, nu: float) -> np.ndarray:
    """Entropic projection of unnormalized weights exp(log_xi) onto the
    nu-truncated simplex: scale the largest entries, clamp the rest to nu.

    Scale invariant in log_xi, so the max is subtracted before
    exponentiating.  Ties are broken by index (stable sort); tied entries
    receive identical treatment either way.
    """
    if not np.all(np.isfinite(log_xi)):
        raise NonFinite("water-filling weights overflowed")
    d = log_xi.size
    if d == 2:
        # closed form: normalize and clamp to [nu, 1 - nu]
        g = log_xi[1] - log_xi[0]
        if g > 700.0:
            w0 = 0.0
        elif g < -700.0:
            w0 = 1.0
        else:
            w0 = 1.0 / (1.0 + math.exp(g))
        w0 = min(max(w0, nu), 1.0 - nu)
        return np.array([w0, 1.0 - w0])
    xi = np.exp(log_xi - log_xi.max())
    order = np.argsort(-xi, kind="stable")
    xs = xi[order]
    cs = np.cumsum(xs)
    if nu == 0.0:
        return xi / cs[-1]
    idx = _IDX_CACHE.get(d)
    if idx is None:
        idx = np.arange(1, d + 1, dtype=float)
        _IDX_CACHE[d] = idx
    # largest i with xs_i / sum_{j<=i} xs_j >= nu / (1 - nu (d - i))
    ok = xs * (1.0 - nu * (d - idx)) >= nu * cs
    iprime = int(ok.nonzero()[0][-1]) + 1  # ok[0] always holds for nu <= 1/(2d)
    out = np.full(d, nu)
    scale = (1.0 - nu * (d - iprime)) / cs[iprime - 1]
    out[order[:iprime]] = xs[:iprime] * scale
    return out


def prox_step(
    setup: GeometrySetup,
    g: np.ndarray,
    eta: float,
    lam: float,
    y: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    """argmin_w  eta*(<g, w> + lam * V_y(w)) + V_x(w)  over the domain.

    Ball: shrink toward ``(x + eta lam y - eta g) / (1 + eta lam)`` and
    project onto the unit ball.  Simplex: multiplicative-weights update
    in log space followed by the water-filling projection onto the
    truncated simplex.
    """
    _check_pair(setup, x, y)
    if g.shape != (setup.dim,):
        raise DimensionMismatch(f"gradient shape {g.shape} != ({setup.dim},)")
    if not np.all(np.isfinite(g)):
        raise NonFinite("gradient has non-finite entries")
    if eta <= 0.0 or lam < 0.0:
        raise InfeasibleInput(f"need eta > 0 and lam >= 0, got eta={eta}, lam={lam}")

    el = eta * lam
    if setup.kind is Kind.BALL:
        return _prox_ball(g, eta, el, y, x)
    if np.any(x < _MIN_POSITIVE):
        raise NonFinite("simplex prox needs strictly positive previous iterate")
    if el > 0.0 and np.any(y < _MIN_POSITIVE):
        raise NonFinite("simplex prox needs strictly positive center")
    log_y = np.log(y) if el > 0.0 else None
    return _prox_simplex(g, eta, el, log_y, np.log(x), setup.nu)


def _prox_ball(g: np.ndarray, eta: float, el: float, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    w = (x + el * y - eta * g) / (1.0 + el)
    nrm = math.sqrt(float(np.dot(w, w)))
    if nrm > 1.0 + _BALL_PROJ_TOL:
        w = w / nrm
    return w


def _prox_simplex(
    g: np.ndarray, eta: float, el: float, log_y, log_x: np.ndarray, nu: float
) -> np.ndarray:
    log_xi = log_x - eta * g
    if el > 0.0:
        log_xi = log_xi + el * log_y
        log_xi /= 1.0 + el
    return _waterfill(log_xi, nu)


def mirror_average(
    setup: GeometrySetup, points: Sequence[np.ndarray], last_weight: float
) -> np.ndarray:
    """Mirror-space average of ``points`` with extra mass on the last one.

    Weight 1 goes to each point and ``last_weight`` additionally to the
    final point; the result is mapped back through the conjugate map
    restricted to the feasible set.  Ball: weighted arithmetic mean.
    Simplex: normalized weighted geometric mean followed by the
    water-filling projection onto the truncated simplex.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != setup.dim:
        raise DimensionMismatch(f"expected (T, {setup.dim}) stack of points, got {pts.shape}")
    if pts.shape[0] < 1:
        raise InfeasibleInput("need at least one point")
    if last_weight < 0.0:
        raise InfeasibleInput("last_weight must be nonnegative")
    if math.isinf(last_weight):
        return pts[-1].copy()

    t = pts.shape[0]
    if setup.kind is Kind.BALL:
        return (pts.sum(axis=0) + last_weight * pts[-1]) / (t + last_weight)
    if np.any(pts < _MIN_POSITIVE):
        raise NonFinite("geometric mean needs strictly positive points")
    logs = np.log(pts)
    log_xi = (logs.sum(axis=0) + last_weight * logs[-1]) / (t + last_weight)
    return _waterfill(log_xi, setup.nu)


def domain_radius_bound(setup: GeometrySetup, x0: np.ndarray) -> float:
    """Conservative R with V_{x0}(x) <= R^2 for every feasible x.

    Ball: ``1 + ||x0||`` (R = 1 from the origin, with slack).  Simplex:
    ``sqrt(2 log(1 / min_i x0_i))``, i.e. sqrt(2 log d) from uniform.
    """
    _check_pair(setup, x0, x0)
    if setup.kind is Kind.BALL:
        return 1.0 + math.sqrt(float(np.dot(x0, x0)))
    lo = float(np.min(x0))
    if lo < _MIN_POSITIVE:
        raise NonFinite("simplex radius bound needs a strictly positive start")
    return math.sqrt(2.0 * math.log(1.0 / lo))


def project(setup: GeometrySetup, x: np.ndarray) -> np.ndarray:
    """Cheap feasibility cleanup (not a Bregman projection): ball rescale /
    simplex clamp-and-renormalize.  Used only to undo float drift."""
    if setup.kind is Kind.BALL:
        nrm = math.sqrt(float(np.dot(x, x)))
        if nrm > 1.0 + _BALL_PROJ_TOL:
            return x / nrm
        return x
    w = np.maximum(x, setup.nu if setup.nu > 0.0 else _MIN_POSITIVE)
    free = 1.0 - setup.nu * setup.dim
    if setup.nu > 0.0 and free > 0.0:
        excess = w - setup.nu
        s = float(excess.sum())
        if s <= 0.0:
            return np.full(setup.dim, 1.0 / setup.dim)
        return setup.nu + excess * (free / s)
    return w / float(w.sum())
