"""Numba kernels for cubic B-spline particle-grid transfer on the torus.

Grid fields live in packed complex form (x-component real, y-component
imaginary) so one FFT handles both components of the spectral metric solve;
the multiplier symbols are real and even, which keeps the components
independent. Positions are in torus coordinates and wrap periodically.

Weight convention for a point with fractional offset u in [0,1) from node
`base`: the stencil touches nodes base-1 .. base+2 with the cardinal cubic
B-spline weights; derivative weights carry the 1/h (and 1/h^2) scales.
"""

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi


@njit(cache=True, inline="always")
def _weights(u, w, d, s):
    """Value, first- and second-derivative weights at offset u (in-place)."""
    v = 1.0 - u
    w[0] = v * v * v / 6.0
    w[1] = (4.0 - 6.0 * u * u + 3.0 * u * u * u) / 6.0
    w[2] = (1.0 + 3.0 * u + 3.0 * u * u - 3.0 * u * u * u) / 6.0
    w[3] = u * u * u / 6.0
    d[0] = -v * v / 2.0
    d[1] = -2.0 * u + 1.5 * u * u
    d[2] = 0.5 + u - 1.5 * u * u
    d[3] = u * u / 2.0
    s[0] = v
    s[1] = 3.0 * u - 2.0
    s[2] = 1.0 - 3.0 * u
    s[3] = u


@njit(cache=True, inline="always")
def _loop_vdd(coef, x):
    """Value, derivative, second derivative of a 1-d loop spline at angle x."""
    n = coef.shape[0]
    h = TWO_PI / n
    t = (x % TWO_PI) / h
    b = int(np.floor(t))
    u = t - b
    v = 1.0 - u
    w0 = v * v * v / 6.0
    w1 = (4.0 - 6.0 * u * u + 3.0 * u * u * u) / 6.0
    w2 = (1.0 + 3.0 * u + 3.0 * u * u - 3.0 * u * u * u) / 6.0
    w3 = u * u * u / 6.0
    d0 = -v * v / 2.0
    d1 = -2.0 * u + 1.5 * u * u
    d2 = 0.5 + u - 1.5 * u * u
    d3 = u * u / 2.0
    c0 = coef[(b - 1) % n]
    c1 = coef[b % n]
    c2 = coef[(b + 1) % n]
    c3 = coef[(b + 2) % n]
    val = w0 * c0 + w1 * c1 + w2 * c2 + w3 * c3
    der = (d0 * c0 + d1 * c1 + d2 * c2 + d3 * c3) / h
    der2 = (v * c0 + (3.0 * u - 2.0) * c1 + (1.0 - 3.0 * u) * c2 + u * c3) / (h * h)
    return val, der, der2


@njit(cache=True)
def lie_rk4(coef, steps, chi, d, stage_chi, stage_d):
    """RK4 flow of dchi/dt = nu(chi), dd/dt = nu'(chi) d per sample.

    chi and d are updated in place; stage states land in (steps, 4, m)
    caches for the adjoint sweep.
    """
    dt = 1.0 / steps
    for i in range(chi.shape[0]):
        c = chi[i]
        dd = d[i]
        for s in range(steps):
            stage_chi[s, 0, i] = c
            stage_d[s, 0, i] = dd
            v1, g1, _ = _loop_vdd(coef, c)
            k1c = v1
            k1d = g1 * dd
            c2 = c + 0.5 * dt * k1c
            d2 = dd + 0.5 * dt * k1d
            stage_chi[s, 1, i] = c2
            stage_d[s, 1, i] = d2
            v2, g2, _ = _loop_vdd(coef, c2)
            k2c = v2
            k2d = g2 * d2
            c3 = c + 0.5 * dt * k2c
            d3 = dd + 0.5 * dt * k2d
            stage_chi[s, 2, i] = c3
            stage_d[s, 2, i] = d3
            v3, g3, _ = _loop_vdd(coef, c3)
            k3c = v3
            k3d = g3 * d3
            c4 = c + dt * k3c
            d4 = dd + dt * k3d
            stage_chi[s, 3, i] = c4
            stage_d[s, 3, i] = d4
            v4, g4, _ = _loop_vdd(coef, c4)
            k4c = v4
            k4d = g4 * d4
            c = c + (dt / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
            dd = dd + (dt / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        chi[i] = c
        d[i] = dd


@njit(cache=True, inline="always")
def _loop_deposit_vd(g_cnu, x, g_val, g_der):
    """Scatter value- and derivative-stencil cotangents onto the coefficients."""
    n = g_cnu.shape[0]
    h = TWO_PI / n
    t = (x % TWO_PI) / h
    b = int(np.floor(t))
    u = t - b
    v = 1.0 - u
    g_cnu[(b - 1) % n] += (v * v * v / 6.0) * g_val + (-v * v / 2.0) / h * g_der
    g_cnu[b % n] += ((4.0 - 6.0 * u * u + 3.0 * u * u * u) / 6.0) * g_val + (
        -2.0 * u + 1.5 * u * u
    ) / h * g_der
    g_cnu[(b + 1) % n] += (
        (1.0 + 3.0 * u + 3.0 * u * u - 3.0 * u * u * u) / 6.0
    ) * g_val + (0.5 + u - 1.5 * u * u) / h * g_der
    g_cnu[(b + 2) % n] += (u * u * u / 6.0) * g_val + (u * u / 2.0) / h * g_der


@njit(cache=True)
def lie_rk4_adjoint(coef, steps, stage_chi, stage_d, g_chi, g_d, g_cnu):
    """Exact transpose of lie_rk4: cotangents on (chi(1), d(1)) map back to
    cotangents on (chi(0), d(0)) (in place) plus the coefficient gradient."""
    dt = 1.0 / steps
    for i in range(g_chi.shape[0]):
        gc = g_chi[i]
        gd = g_d[i]
        for s in range(steps - 1, -1, -1):
            # stage transpose helper, unrolled for the four stages
            c4 = stage_chi[s, 3, i]
            d4 = stage_d[s, 3, i]
            gk4c = (dt / 6.0) * gc
            gk4d = (dt / 6.0) * gd
            _, g4, h4 = _loop_vdd(coef, c4)
            jt4c = g4 * gk4c + h4 * d4 * gk4d
            jt4d = g4 * gk4d
            _loop_deposit_vd(g_cnu, c4, gk4c, d4 * gk4d)

            c3 = stage_chi[s, 2, i]
            d3 = stage_d[s, 2, i]
            gk3c = (dt / 3.0) * gc + dt * jt4c
            gk3d = (dt / 3.0) * gd + dt * jt4d
            _, g3, h3 = _loop_vdd(coef, c3)
            jt3c = g3 * gk3c + h3 * d3 * gk3d
            jt3d = g3 * gk3d
            _loop_deposit_vd(g_cnu, c3, gk3c, d3 * gk3d)

            c2 = stage_chi[s, 1, i]
            d2 = stage_d[s, 1, i]
            gk2c = (dt / 3.0) * gc + 0.5 * dt * jt3c
            gk2d = (dt / 3.0) * gd + 0.5 * dt * jt3d
            _, g2, h2 = _loop_vdd(coef, c2)
            jt2c = g2 * gk2c + h2 * d2 * gk2d
            jt2d = g2 * gk2d
            _loop_deposit_vd(g_cnu, c2, gk2c, d2 * gk2d)

            c1 = stage_chi[s, 0, i]
            d1 = stage_d[s, 0, i]
            gk1c = (dt / 6.0) * gc + 0.5 * dt * jt2c
            gk1d = (dt / 6.0) * gd + 0.5 * dt * jt2d
            _, g1, h1 = _loop_vdd(coef, c1)
            jt1c = g1 * gk1c + h1 * d1 * gk1d
            jt1d = g1 * gk1d
            _loop_deposit_vd(g_cnu, c1, gk1c, d1 * gk1d)

            gc = gc + jt1c + jt2c + jt3c + jt4c
            gd = gd + jt1d + jt2d + jt3d + jt4d
        g_chi[i] = gc
        g_d[i] = gd


@njit(cache=True)
def grid_deposit(points, vals, n_g, out):
    """Scatter vals (n, 2) into packed complex out (n_g, n_g)."""
    h = TWO_PI / n_g
    wx = np.empty(4)
    dx = np.empty(4)
    sx = np.empty(4)
    wy = np.empty(4)
    dy = np.empty(4)
    sy = np.empty(4)
    for i in range(points.shape[0]):
        tx = (points[i, 0] % TWO_PI) / h
        ty = (points[i, 1] % TWO_PI) / h
        bx = int(np.floor(tx))
        by = int(np.floor(ty))
        _weights(tx - bx, wx, dx, sx)
        _weights(ty - by, wy, dy, sy)
        v = complex(vals[i, 0], vals[i, 1])
        for a in range(4):
            ia = (bx + a - 1) % n_g
            wa = wx[a]
            for b in range(4):
                ib = (by + b - 1) % n_g
                out[ia, ib] += (wa * wy[b]) * v


@njit(cache=True)
def grid_eval(coef, points, out):
    """Evaluate the packed coefficient field at points; out is (n, 2)."""
    n_g = coef.shape[0]
    h = TWO_PI / n_g
    wx = np.empty(4)
    dx = np.empty(4)
    sx = np.empty(4)
    wy = np.empty(4)
    dy = np.empty(4)
    sy = np.empty(4)
    for i in range(points.shape[0]):
        tx = (points[i, 0] % TWO_PI) / h
        ty = (points[i, 1] % TWO_PI) / h
        bx = int(np.floor(tx))
        by = int(np.floor(ty))
        _weights(tx - bx, wx, dx, sx)
        _weights(ty - by, wy, dy, sy)
        acc = complex(0.0, 0.0)
        for a in range(4):
            ia = (bx + a - 1) % n_g
            wa = wx[a]
            for b in range(4):
                ib = (by + b - 1) % n_g
                acc += (wa * wy[b]) * coef[ia, ib]
        out[i, 0] = acc.real
        out[i, 1] = acc.imag


@njit(cache=True)
def stage_rates(coef, P, Q, pdot, qdot):
    """Geodesic stage rates: qdot = u(Q), pdot_j = -sum_k du_k/dx_j P_k."""
    n_g = coef.shape[0]
    h = TWO_PI / n_g
    inv_h = 1.0 / h
    wx = np.empty(4)
    dx = np.empty(4)
    sx = np.empty(4)
    wy = np.empty(4)
    dy = np.empty(4)
    sy = np.empty(4)
    for i in range(Q.shape[0]):
        tx = (Q[i, 0] % TWO_PI) / h
        ty = (Q[i, 1] % TWO_PI) / h
        bx = int(np.floor(tx))
        by = int(np.floor(ty))
        _weights(tx - bx, wx, dx, sx)
        _weights(ty - by, wy, dy, sy)
        val = complex(0.0, 0.0)
        gx = complex(0.0, 0.0)
        gy = complex(0.0, 0.0)
        for a in range(4):
            ia = (bx + a - 1) % n_g
            wa = wx[a]
            da = dx[a]
            for b in range(4):
                ib = (by + b - 1) % n_g
                c = coef[ia, ib]
                val += (wa * wy[b]) * c
                gx += (da * wy[b]) * c
                gy += (wa * dy[b]) * c
        qdot[i, 0] = val.real
        qdot[i, 1] = val.imag
        # G_jk = du_j/dx_k: rows (real, imag), columns (gx, gy)
        g00 = gx.real * inv_h
        g01 = gy.real * inv_h
        g10 = gx.imag * inv_h
        g11 = gy.imag * inv_h
        p0 = P[i, 0]
        p1 = P[i, 1]
        pdot[i, 0] = -(g00 * p0 + g10 * p1)
        pdot[i, 1] = -(g01 * p0 + g11 * p1)


@njit(cache=True)
def stage_adjoint_local(coef, P, Q, gpd, gqd, gP, gQ, gcoef):
    """Local (stencil) part of the stage Jacobian transpose.

    gpd/gqd are cotangents on (pdot, qdot). Accumulates direct contributions
    into gP, gQ and the cotangent deposit on the velocity coefficients into
    gcoef; the caller pushes gcoef through the symmetric spectral solve and
    finishes with stage_adjoint_deposit.
    """
    n_g = coef.shape[0]
    h = TWO_PI / n_g
    inv_h = 1.0 / h
    inv_h2 = inv_h * inv_h
    wx = np.empty(4)
    dx = np.empty(4)
    sx = np.empty(4)
    wy = np.empty(4)
    dy = np.empty(4)
    sy = np.empty(4)
    for i in range(Q.shape[0]):
        tx = (Q[i, 0] % TWO_PI) / h
        ty = (Q[i, 1] % TWO_PI) / h
        bx = int(np.floor(tx))
        by = int(np.floor(ty))
        _weights(tx - bx, wx, dx, sx)
        _weights(ty - by, wy, dy, sy)
        gxc = complex(0.0, 0.0)
        gyc = complex(0.0, 0.0)
        hxx = complex(0.0, 0.0)
        hxy = complex(0.0, 0.0)
        hyy = complex(0.0, 0.0)
        for a in range(4):
            ia = (bx + a - 1) % n_g
            wa = wx[a]
            da = dx[a]
            sa = sx[a]
            for b in range(4):
                ib = (by + b - 1) % n_g
                c = coef[ia, ib]
                gxc += (da * wy[b]) * c
                gyc += (wa * dy[b]) * c
                hxx += (sa * wy[b]) * c
                hxy += (da * dy[b]) * c
                hyy += (wa * sy[b]) * c
        g00 = gxc.real * inv_h
        g01 = gyc.real * inv_h
        g10 = gxc.imag * inv_h
        g11 = gyc.imag * inv_h
        # H[j, k, m] = d^2 u_j / dx_k dx_m (symmetric in k, m)
        h000 = hxx.real * inv_h2
        h001 = hxy.real * inv_h2
        h011 = hyy.real * inv_h2
        h100 = hxx.imag * inv_h2
        h101 = hxy.imag * inv_h2
        h111 = hyy.imag * inv_h2

        p0 = P[i, 0]
        p1 = P[i, 1]
        a0 = gpd[i, 0]
        a1 = gpd[i, 1]
        b0 = gqd[i, 0]
        b1 = gqd[i, 1]

        # pdot_j = -sum_k G_kj P_k  =>  gP_k += -sum_j G_kj gpd_j
        gP[i, 0] += -(g00 * a0 + g01 * a1)
        gP[i, 1] += -(g10 * a0 + g11 * a1)
        # qdot = u(Q)  =>  gQ_m += sum_j gqd_j G_jm
        gQ[i, 0] += b0 * g00 + b1 * g10
        gQ[i, 1] += b0 * g01 + b1 * g11
        # pdot's dependence on Q through G: gQ_m += -sum_{jk} gpd_j H_{k,j,m} P_k
        gQ[i, 0] += -(a0 * (h000 * p0 + h100 * p1) + a1 * (h001 * p0 + h101 * p1))
        gQ[i, 1] += -(a0 * (h001 * p0 + h101 * p1) + a1 * (h011 * p0 + h111 * p1))

        # cotangent on the coefficient field:
        #   from qdot: value stencil times gqd
        #   from pdot: gG[k, j] = -P_k gpd_j through the derivative stencils
        q00 = -p0 * a0
        q01 = -p0 * a1
        q10 = -p1 * a0
        q11 = -p1 * a1
        for a in range(4):
            ia = (bx + a - 1) % n_g
            wa = wx[a]
            da = dx[a]
            for b in range(4):
                ib = (by + b - 1) % n_g
                wv = wa * wy[b]
                wgx = da * wy[b] * inv_h
                wgy = wa * dy[b] * inv_h
                re = wv * b0 + q00 * wgx + q01 * wgy
                im = wv * b1 + q10 * wgx + q11 * wgy
                gcoef[ia, ib] += complex(re, im)


@njit(cache=True)
def stage_adjoint_deposit(gm, P, Q, w_pair, gP, gQ):
    """Transpose of the momentum deposit m = sum_i w_pair * P_i x stencil(Q_i)."""
    n_g = gm.shape[0]
    h = TWO_PI / n_g
    inv_h = 1.0 / h
    wx = np.empty(4)
    dx = np.empty(4)
    sx = np.empty(4)
    wy = np.empty(4)
    dy = np.empty(4)
    sy = np.empty(4)
    for i in range(Q.shape[0]):
        tx = (Q[i, 0] % TWO_PI) / h
        ty = (Q[i, 1] % TWO_PI) / h
        bx = int(np.floor(tx))
        by = int(np.floor(ty))
        _weights(tx - bx, wx, dx, sx)
        _weights(ty - by, wy, dy, sy)
        acc_p = complex(0.0, 0.0)
        acc_qx = 0.0
        acc_qy = 0.0
        p0 = P[i, 0]
        p1 = P[i, 1]
        for a in range(4):
            ia = (bx + a - 1) % n_g
            wa = wx[a]
            da = dx[a]
            for b in range(4):
                ib = (by + b - 1) % n_g
                m = gm[ia, ib]
                acc_p += (wa * wy[b]) * m
                pm = p0 * m.real + p1 * m.imag
                acc_qx += pm * da * wy[b] * inv_h
                acc_qy += pm * wa * dy[b] * inv_h
        gP[i, 0] += w_pair * acc_p.real
        gP[i, 1] += w_pair * acc_p.imag
        gQ[i, 0] += w_pair * acc_qx
        gQ[i, 1] += w_pair * acc_qy


@njit(cache=True)
def deposit_linearized(P, Q, dP, dQ, w_pair, n_g, out):
    """Directional derivative of the deposit in (P, Q) directions (dP, dQ)."""
    h = TWO_PI / n_g
    inv_h = 1.0 / h
    wx = np.empty(4)
    dx = np.empty(4)
    sx = np.empty(4)
    wy = np.empty(4)
    dy = np.empty(4)
    sy = np.empty(4)
    for i in range(Q.shape[0]):
        tx = (Q[i, 0] % TWO_PI) / h
        ty = (Q[i, 1] % TWO_PI) / h
        bx = int(np.floor(tx))
        by = int(np.floor(ty))
        _weights(tx - bx, wx, dx, sx)
        _weights(ty - by, wy, dy, sy)
        p = complex(w_pair * P[i, 0], w_pair * P[i, 1])
        e = complex(w_pair * dP[i, 0], w_pair * dP[i, 1])
        vx = dQ[i, 0]
        vy = dQ[i, 1]
        for a in range(4):
            ia = (bx + a - 1) % n_g
            wa = wx[a]
            da = dx[a]
            for b in range(4):
                ib = (by + b - 1) % n_g
                wv = wa * wy[b]
                dwd = (da * wy[b] * vx + wa * dy[b] * vy) * inv_h
                out[ia, ib] += wv * e + dwd * p


@njit(cache=True)
def stage_rates_linearized(coef, dcoef, P, Q, dP, dQ, dpdot, dqdot):
    """Directional derivative of stage_rates given the velocity perturbation."""
    n_g = coef.shape[0]
    h = TWO_PI / n_g
    inv_h = 1.0 / h
    inv_h2 = inv_h * inv_h
    wx = np.empty(4)
    dx = np.empty(4)
    sx = np.empty(4)
    wy = np.empty(4)
    dy = np.empty(4)
    sy = np.empty(4)
    for i in range(Q.shape[0]):
        tx = (Q[i, 0] % TWO_PI) / h
        ty = (Q[i, 1] % TWO_PI) / h
        bx = int(np.floor(tx))
        by = int(np.floor(ty))
        _weights(tx - bx, wx, dx, sx)
        _weights(ty - by, wy, dy, sy)
        duc = complex(0.0, 0.0)
        gxc = complex(0.0, 0.0)
        gyc = complex(0.0, 0.0)
        dgx = complex(0.0, 0.0)
        dgy = complex(0.0, 0.0)
        hxx = complex(0.0, 0.0)
        hxy = complex(0.0, 0.0)
        hyy = complex(0.0, 0.0)
        for a in range(4):
            ia = (bx + a - 1) % n_g
            wa = wx[a]
            da = dx[a]
            sa = sx[a]
            for b in range(4):
                ib = (by + b - 1) % n_g
                c = coef[ia, ib]
                e = dcoef[ia, ib]
                wv = wa * wy[b]
                wgx = da * wy[b]
                wgy = wa * dy[b]
                duc += wv * e
                gxc += wgx * c
                gyc += wgy * c
                dgx += wgx * e
                dgy += wgy * e
                hxx += (sa * wy[b]) * c
                hxy += (da * dy[b]) * c
                hyy += (wa * sy[b]) * c
        g00 = gxc.real * inv_h
        g01 = gyc.real * inv_h
        g10 = gxc.imag * inv_h
        g11 = gyc.imag * inv_h
        vx = dQ[i, 0]
        vy = dQ[i, 1]
        # total gradient perturbation dG_jk = (dcoef grads) + H_jkm dQ_m
        t00 = dgx.real * inv_h + (hxx.real * vx + hxy.real * vy) * inv_h2
        t01 = dgy.real * inv_h + (hxy.real * vx + hyy.real * vy) * inv_h2
        t10 = dgx.imag * inv_h + (hxx.imag * vx + hxy.imag * vy) * inv_h2
        t11 = dgy.imag * inv_h + (hxy.imag * vx + hyy.imag * vy) * inv_h2
        dqdot[i, 0] = duc.real + g00 * vx + g01 * vy
        dqdot[i, 1] = duc.imag + g10 * vx + g11 * vy
        p0 = P[i, 0]
        p1 = P[i, 1]
        e0 = dP[i, 0]
        e1 = dP[i, 1]
        dpdot[i, 0] = -(t00 * p0 + t10 * p1) - (g00 * e0 + g10 * e1)
        dpdot[i, 1] = -(t01 * p0 + t11 * p1) - (g01 * e0 + g11 * e1)
