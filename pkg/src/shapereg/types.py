"""Core value types: curves, periodic scalar fields, grids, and configs.

All geometry lives on the flat torus [0, 2pi)^2. Curve samples are ordered
cyclically; scalar loop fields sample s_j = 2*pi*j/n_p. Arrays are frozen
(non-writeable) after construction so values can be shared across threads.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, InputError

TWO_PI = 2.0 * np.pi


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


class ClosedCurve2D:
    """Ordered periodic sample of a closed planar curve.

    Index i+1 (mod n_p) is the successor along the orientation. Points are
    stored as an (n_p, 2) array. Points may wind outside the fundamental
    domain while a curve deforms; grid operations wrap coordinates
    periodically where needed.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InputError(f"curve points must be (n_p, 2), got {pts.shape}")
        if pts.shape[0] < 4:
            raise InputError(f"need at least 4 curve points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise InputError("curve points must be finite")
        nxt = np.roll(pts, -1, axis=0)
        if np.any(np.all(np.abs(nxt - pts) < 1e-14, axis=1)):
            raise InputError("consecutive curve points coincide")
        self.points = _freeze(pts)

    @property
    def n_p(self):
        return self.points.shape[0]

    def wrapped(self):
        """Points reduced to the fundamental domain [0, 2pi)^2."""
        return np.mod(self.points, TWO_PI)

    def __eq__(self, other):
        return isinstance(other, ClosedCurve2D) and np.array_equal(self.points, other.points)


class ScalarLoopField:
    """Periodic scalar function sampled at s_j = 2*pi*j/n_p."""

    __slots__ = ("values",)

    def __init__(self, values):
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 1:
            raise InputError(f"loop field must be 1-d, got shape {v.shape}")
        if v.shape[0] < 4:
            raise InputError("loop field needs at least 4 samples")
        if not np.all(np.isfinite(v)):
            raise InputError("loop field values must be finite")
        self.values = _freeze(v)

    @property
    def n_p(self):
        return self.values.shape[0]

    @property
    def knots(self):
        return TWO_PI * np.arange(self.n_p) / self.n_p

    @classmethod
    def zeros(cls, n_p):
        return cls(np.zeros(n_p))

    def __eq__(self, other):
        return isinstance(other, ScalarLoopField) and np.array_equal(self.values, other.values)


class TorusGridField:
    """Two-component field on the n_g x n_g periodic grid.

    data[a, b] holds the value at node (2*pi*a/n_g, 2*pi*b/n_g). n_g must
    be a power of two (spectral transforms).
    """

    __slots__ = ("data",)

    def __init__(self, data):
        d = np.asarray(data, dtype=np.float64)
        if d.ndim != 3 or d.shape[2] != 2 or d.shape[0] != d.shape[1]:
            raise InputError(f"grid field must be (n_g, n_g, 2), got {d.shape}")
        n = d.shape[0]
        if n < 4 or (n & (n - 1)) != 0:
            raise InputError(f"grid size must be a power of two >= 4, got {n}")
        if not np.all(np.isfinite(d)):
            raise InputError("grid field values must be finite")
        self.data = _freeze(d)

    @property
    def n_g(self):
        return self.data.shape[0]

    @classmethod
    def zeros(cls, n_g):
        return cls(np.zeros((n_g, n_g, 2)))


@dataclass(frozen=True)
class MetricSpec:
    """Inverse-Sobolev deformation metric (1 - alpha^2 Laplacian)^gamma.

    alpha is the filtering lengthscale in torus units; features below it are
    smoothed away by the deformation metric.
    """

    alpha: float = 0.4
    gamma: int = 2

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InputError(f"metric alpha must be positive, got {self.alpha}")
        if int(self.gamma) != self.gamma or self.gamma < 2:
            raise InputError(f"metric gamma must be an integer >= 2, got {self.gamma}")


@dataclass(frozen=True)
class ShootConfig:
    """Time discretisation of the geodesic flow on t in [0, 1]."""

    steps: int = 50
    metric: MetricSpec = field(default_factory=MetricSpec)
    n_g: int = 64
    hamiltonian_tol: float = 1e-3

    def __post_init__(self):
        if self.steps < 1:
            raise InputError(f"steps must be >= 1, got {self.steps}")
        if self.n_g < 4 or (self.n_g & (self.n_g - 1)) != 0:
            raise InputError(f"n_g must be a power of two >= 4, got {self.n_g}")
        if not self.hamiltonian_tol > 0:
            raise InputError("hamiltonian_tol must be > 0")


class PhaseState:
    """Paired (momentum covectors, curve points) evolving under the flow."""

    __slots__ = ("p", "q")

    def __init__(self, p, q):
        p = np.asarray(p, dtype=np.float64)
        if isinstance(q, ClosedCurve2D):
            qa = q.points
        else:
            qa = np.asarray(q, dtype=np.float64)
        if p.shape != qa.shape or p.ndim != 2 or p.shape[1] != 2:
            raise ContractError(
                f"momentum and curve shapes must match as (n_p, 2); got {p.shape} vs {qa.shape}"
            )
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(qa))):
            raise InputError("phase state entries must be finite")
        self.p = _freeze(p)
        self.q = _freeze(qa)

    @property
    def n_p(self):
        return self.p.shape[0]

    @property
    def curve(self):
        return ClosedCurve2D(self.q)
