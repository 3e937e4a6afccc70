"""Periodic interpolation, spreading, spectral solves, and curve geometry.

Interpolation is cardinal cubic B-spline throughout: node/knot values are
prefiltered into B-spline coefficients with a circulant FFT solve, so the
interpolant reproduces knot values exactly. Spreading is the exact discrete
transpose of interpolation (raw stencil deposit followed by the same
symmetric prefilter inverse), which makes the particle-grid pair adjoint to
rounding.
"""

import numpy as np

from . import _stencils
from .errors import ContractError, DegenerateCurveError, InputError
from .types import TWO_PI, ClosedCurve2D, MetricSpec, ScalarLoopField, TorusGridField

# cubic B-spline values at integer offsets: psi(0), psi(+-1)
_PSI0 = 2.0 / 3.0
_PSI1 = 1.0 / 6.0


def _prefilter_symbol(n):
    """DFT symbol of the knot-value stencil [1/6, 2/3, 1/6] (rfft layout)."""
    k = np.arange(n // 2 + 1)
    return _PSI0 + 2.0 * _PSI1 * np.cos(TWO_PI * k / n)


def _prefilter_symbol_full(n):
    k = np.fft.fftfreq(n) * n
    return _PSI0 + 2.0 * _PSI1 * np.cos(TWO_PI * k / n)


def loop_values_to_coef(values):
    """Periodic samples -> interpolating B-spline coefficients (axis 0)."""
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    sym = _prefilter_symbol(n)
    if v.ndim > 1:
        sym = sym.reshape((-1,) + (1,) * (v.ndim - 1))
    return np.fft.irfft(np.fft.rfft(v, axis=0) / sym, n, axis=0)


def loop_stencil(s, n):
    """Stencil indices and weight rows for angles s on an n-knot loop.

    Returns (idx, w, d, d2): each (len(s), 4); derivative rows already carry
    the 1/h and 1/h^2 scales.
    """
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise InputError("query angles must be finite")
    h = TWO_PI / n
    t = np.mod(s, TWO_PI) / h
    base = np.floor(t).astype(np.int64)
    u = t - base
    v = 1.0 - u
    w = np.stack(
        [
            v**3 / 6.0,
            (4.0 - 6.0 * u**2 + 3.0 * u**3) / 6.0,
            (1.0 + 3.0 * u + 3.0 * u**2 - 3.0 * u**3) / 6.0,
            u**3 / 6.0,
        ],
        axis=-1,
    )
    d = np.stack(
        [-(v**2) / 2.0, -2.0 * u + 1.5 * u**2, 0.5 + u - 1.5 * u**2, u**2 / 2.0],
        axis=-1,
    ) / h
    d2 = np.stack([v, 3.0 * u - 2.0, 1.0 - 3.0 * u, u], axis=-1) / h**2
    idx = np.mod(base[..., None] + np.arange(-1, 3), n)
    return idx, w, d, d2


class LoopSpline:
    """Interpolating periodic cubic spline through equispaced samples.

    Values may be (n,) scalars or (n, m) vector samples; evaluation
    broadcasts over the trailing axis.
    """

    __slots__ = ("coef", "n")

    def __init__(self, values):
        v = np.asarray(values, dtype=np.float64)
        self.n = v.shape[0]
        self.coef = loop_values_to_coef(v)

    def _contract(self, s, rows_index):
        idx, *rows = loop_stencil(s, self.n)
        rows = rows[rows_index]
        gathered = self.coef[idx]
        if gathered.ndim == 3:
            return np.einsum("qk,qkm->qm", rows, gathered)
        return np.einsum("qk,qk->q", rows, gathered)

    def eval(self, s):
        return self._contract(s, 0)

    def deriv(self, s):
        return self._contract(s, 1)

    def deriv2(self, s):
        return self._contract(s, 2)


def loop_deposit(s, g, n, kind="value"):
    """Transpose of the raw stencil contraction at angles s (no prefilter).

    g is (len(s),); returns an (n,) accumulation. kind selects the value or
    first-derivative stencil rows.
    """
    idx, w, d, _ = loop_stencil(s, n)
    rows = w if kind == "value" else d
    flat = (rows * np.asarray(g, dtype=np.float64)[:, None]).ravel()
    return np.bincount(idx.ravel(), weights=flat, minlength=n)


def dense_eval_matrix(n, s):
    """Dense matrix E with (E @ values)_i = spline(values)(s_i)."""
    s = np.asarray(s, dtype=np.float64)
    idx, w, _, _ = loop_stencil(s, n)
    stencil = np.zeros((len(s), n))
    np.add.at(stencil, (np.arange(len(s))[:, None], idx), w)
    sym = _prefilter_symbol_full(n)
    binv_col = np.real(np.fft.ifft(1.0 / sym))
    # circulant inverse prefilter: Binv[i, j] = binv_col[(i - j) % n]
    binv = binv_col[(np.arange(n)[:, None] - np.arange(n)[None, :]) % n]
    return stencil @ binv


def spline_eval_loop(field, queries):
    """Evaluate the periodic cubic interpolant of a loop field."""
    if isinstance(field, ScalarLoopField):
        values = field.values
    else:
        values = np.asarray(field, dtype=np.float64)
    return LoopSpline(values).eval(queries)


def grid_values_to_coef(data):
    """Node values -> tensor-product B-spline coefficients, per component."""
    d = np.asarray(data, dtype=np.float64)
    n = d.shape[0]
    sx = _prefilter_symbol_full(n)[:, None]
    sy = _prefilter_symbol(n)[None, :]
    out = np.empty_like(d)
    for c in range(d.shape[2]):
        out[..., c] = np.fft.irfft2(np.fft.rfft2(d[..., c]) / (sx * sy), s=(n, n))
    return out


def pack_components(data):
    """(n, n, 2) real field -> packed complex (x real, y imaginary)."""
    return np.ascontiguousarray(data[..., 0] + 1j * data[..., 1])


def spline_eval_grid(field, points):
    """Tensor-product periodic cubic B-spline interpolation at points."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"points must be (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InputError("evaluation points must be finite")
    coef = pack_components(grid_values_to_coef(field.data))
    out = np.empty_like(pts)
    _stencils.grid_eval(coef, pts, out)
    return out


def raw_deposit(p, q, n_g):
    """Stencil scatter of covectors p at positions q (no prefilter)."""
    buf = np.zeros((n_g, n_g), dtype=np.complex128)
    _stencils.grid_deposit(
        np.ascontiguousarray(q, dtype=np.float64),
        np.ascontiguousarray(p, dtype=np.float64),
        n_g,
        buf,
    )
    return np.stack([buf.real, buf.imag], axis=-1)


def spread_to_grid(p, q, n_g=64):
    """Exact discrete transpose of spline_eval_grid.

    For every grid field w: <spread(p, q), w>_nodes == sum_i <p_i, eval(w, q_i)>.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ContractError(f"p and q must have equal shapes, got {p.shape} vs {q.shape}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise InputError("spread inputs must be finite")
    raw = raw_deposit(p, q, n_g)
    # prefilter is symmetric, so the transpose of (stencil o B^-1) is B^-1 o stencil^T
    n = n_g
    sx = _prefilter_symbol_full(n)[:, None]
    sy = _prefilter_symbol(n)[None, :]
    out = np.empty_like(raw)
    for c in range(2):
        out[..., c] = np.fft.irfft2(np.fft.rfft2(raw[..., c]) / (sx * sy), s=(n, n))
    return TorusGridField(out)


def metric_symbol(n_g, spec, inverse=True, rfft_layout=True):
    """Spectral multiplier of (1 + alpha^2 |k|^2)^gamma on the grid."""
    kx = (np.fft.fftfreq(n_g) * n_g)[:, None]
    if rfft_layout:
        ky = np.arange(n_g // 2 + 1)[None, :]
    else:
        ky = (np.fft.fftfreq(n_g) * n_g)[None, :]
    lam = (1.0 + spec.alpha**2 * (kx**2 + ky**2)) ** spec.gamma
    return 1.0 / lam if inverse else lam


def metric_inverse(m, spec):
    """Componentwise spectral inverse of the metric operator."""
    if not isinstance(spec, MetricSpec):
        spec = MetricSpec(*spec)
    data = m.data
    n = data.shape[0]
    sym = metric_symbol(n, spec)
    out = np.empty_like(data)
    for c in range(2):
        out[..., c] = np.fft.irfft2(np.fft.rfft2(data[..., c]) * sym, s=(n, n))
    return TorusGridField(out)


def momentum_deposit_scale(n_p, n_g):
    """Combined covector weight turning density samples into a grid density.

    The curve pairing uses the mean quadrature (1/n_p) sum, and the deposit
    is converted to a grid function by 1/cell-area, so the velocity field
    converges under refinement of either resolution.
    """
    h = TWO_PI / n_g
    return 1.0 / (n_p * h * h)


def curve_normal(q):
    """Unit normals from the spline tangent rotated by a quarter turn.

    For the counterclockwise template circle the normals point outward.
    """
    if not isinstance(q, ClosedCurve2D):
        q = ClosedCurve2D(q)
    spline = LoopSpline(q.points)
    tangents = spline.deriv(TWO_PI * np.arange(q.n_p) / q.n_p)
    norms = np.hypot(tangents[:, 0], tangents[:, 1])
    if np.any(norms < 1e-12):
        raise DegenerateCurveError("curve tangent vanishes at a sample point")
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    return normals / norms[:, None]


def normals_at(q_spline, s):
    """Unit normals of a curve spline at arbitrary parameters."""
    tangents = q_spline.deriv(s)
    norms = np.hypot(tangents[:, 0], tangents[:, 1])
    if np.any(norms < 1e-12):
        raise DegenerateCurveError("curve tangent vanishes at a query point")
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    return normals / norms[:, None]
