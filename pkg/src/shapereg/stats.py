"""Chain statistics: effective sample size and a unimodality dip test.

The dip statistic is the sup-norm distance from the sample's piecewise-linear
empirical CDF to the nearest unimodal CDF, computed with the classic
shrinking-modal-interval iteration over convex-minorant / concave-majorant
hulls. The test calibrates the null by simulating uniform samples of the
same size, the least-favourable unimodal case.
"""

import numpy as np


def autocorrelation(x):
    """Normalised autocorrelation function via FFT."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    x = x - x.mean()
    var = np.dot(x, x)
    if var <= 0.0:
        return np.zeros(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n]
    return acov / var


def effective_sample_size(x):
    """ESS with Geyer's initial-positive-sequence truncation; in [1, n]."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 2 or np.ptp(x) == 0.0:
        return 1.0
    rho = autocorrelation(x)
    tau = 0.0
    m = 0
    while 2 * m + 1 < n:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 1
    tau = max(tau - 1.0, 1.0)
    return float(min(n, max(1.0, n / tau)))


def _lower_hull(xs, ys):
    """Vertex indices of the greatest convex minorant of a polyline."""
    hull = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


def _upper_hull(xs, ys):
    hull = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross >= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


def dip_statistic(samples):
    """Hartigan dip of a 1-d sample."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.shape[0]
    if n < 4 or x[0] == x[-1]:
        return 0.0
    # midpoint empirical CDF; jitter exact ties so hull abscissae are distinct
    tie = np.diff(x) <= 0.0
    if np.any(tie):
        span = x[-1] - x[0]
        x = x + np.arange(n) * (1e-12 * span)
    y = (np.arange(1, n + 1) - 0.5) / n

    low, high = 0, n - 1
    dip = 0.0
    for _ in range(n):
        seg = slice(low, high + 1)
        xs = x[seg]
        ys = y[seg]
        gcm = _lower_hull(xs, ys) + low
        lcm = _upper_hull(xs, ys) + low
        gcm_at = np.interp(x[low : high + 1], x[gcm], y[gcm])
        lcm_at = np.interp(x[low : high + 1], x[lcm], y[lcm])

        # separation between hull curves at their touch vertices
        d = 0.0
        new_low, new_high = low, high
        for v in gcm:
            sep = lcm_at[v - low] - y[v]
            if sep > d:
                d = sep
                right = lcm[np.searchsorted(x[lcm], x[v], side="left")] if np.any(
                    x[lcm] >= x[v]
                ) else high
                new_low, new_high = v, right
        for v in lcm:
            sep = y[v] - gcm_at[v - low]
            if sep > d:
                d = sep
                pos = np.searchsorted(x[gcm], x[v], side="right") - 1
                left = gcm[max(pos, 0)]
                new_low, new_high = left, v
        if d <= dip or (new_low == low and new_high == high):
            break
        # deviations now finalised outside the shrunken modal interval
        left_dev = np.max(y[low : new_low + 1] - gcm_at[: new_low - low + 1])
        right_dev = np.max(lcm_at[new_high - low :] - y[new_high : high + 1])
        dip = max(dip, left_dev, right_dev)
        low, high = new_low, new_high
    return 0.5 * max(dip, 0.0)


def dip_test(samples, n_null=999, rng=None):
    """Monte-Carlo calibrated dip test; returns (dip, p_value).

    Small p-values reject unimodality.
    """
    rng = rng or np.random.default_rng(0)
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[0]
    observed = dip_statistic(x)
    null = np.array([dip_statistic(rng.uniform(0.0, 1.0, n)) for _ in range(n_null)])
    p = (1.0 + np.sum(null >= observed)) / (n_null + 1.0)
    return observed, float(p)
