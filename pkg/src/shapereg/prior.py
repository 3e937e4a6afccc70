"""Gaussian measures on periodic scalar fields with inverse-Helmholtz
covariance, their Cameron-Martin norms, and regularity validation.

Fields are expanded in the real Fourier basis; a draw is
u(s) = sum_k sqrt(delta) (1 + ell^2 k^2)^(-alpha/2) (xi_k cos ks + xi'_k sin ks)
with i.i.d. standard normal coefficients. The sine term is absent for k = 0
and for the Nyquist mode (invisible on the sample grid), which keeps the
sample <-> coefficient map bijective.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ValidationError
from .types import ScalarLoopField


@dataclass(frozen=True)
class PriorSpec:
    """N(0, delta * (I - ell^2 d^2/ds^2)^(-alpha)) on periodic scalars.

    n_modes defaults to the particle Nyquist mode n_p/2 when resolved
    against a resolution.
    """

    delta: float
    alpha: float
    ell: float = 1.0
    n_modes: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise InputError(f"prior delta must be positive, got {self.delta}")
        if not np.isfinite(self.alpha):
            raise InputError("prior alpha must be finite")
        if not (np.isfinite(self.ell) and self.ell > 0):
            raise InputError(f"prior ell must be positive, got {self.ell}")
        if self.n_modes is not None and self.n_modes < 1:
            raise InputError("n_modes must be >= 1")


@dataclass(frozen=True)
class PriorPair:
    momentum_prior: PriorSpec
    reparam_prior: PriorSpec


def paper_default_priors():
    """The default measure: delta1=30, alpha1=0.55 and delta2=0.05, alpha2=1.55."""
    return PriorPair(PriorSpec(30.0, 0.55), PriorSpec(0.05, 1.55))


class SpectralLayout:
    """Flat real-coefficient layout [a_0, a_1, b_1, ..., a_K(, b_K)].

    The b_K entry is dropped when K equals the Nyquist mode n_p/2.
    """

    def __init__(self, n_p, n_modes=None):
        if n_modes is None:
            n_modes = n_p // 2
        n_modes = min(int(n_modes), n_p // 2)
        self.n_p = int(n_p)
        self.n_modes = n_modes
        self.nyquist = (n_p % 2 == 0) and (n_modes == n_p // 2)
        ks = [0]
        for k in range(1, n_modes + 1):
            ks.append(k)
            if not (self.nyquist and k == n_modes):
                ks.append(k)
        self.mode_of_coeff = np.array(ks)
        # mark sine entries: within each k > 0 pair the second slot is sine
        is_sin = np.zeros(len(ks), dtype=bool)
        j = 1
        for k in range(1, n_modes + 1):
            if self.nyquist and k == n_modes:
                j += 1
            else:
                is_sin[j + 1] = True
                j += 2
        self.is_sin = is_sin

    @property
    def dim(self):
        return self.mode_of_coeff.shape[0]

    def to_samples(self, coeffs):
        c = np.asarray(coeffs, dtype=np.float64)
        n = self.n_p
        spec = np.zeros(n // 2 + 1, dtype=np.complex128)
        spec[0] = n * c[0]
        j = 1
        for k in range(1, self.n_modes + 1):
            if self.nyquist and k == self.n_modes:
                spec[k] = n * c[j]
                j += 1
            else:
                spec[k] = 0.5 * n * (c[j] - 1j * c[j + 1])
                j += 2
        return np.fft.irfft(spec, n)

    def from_samples(self, values):
        v = np.asarray(values, dtype=np.float64)
        spec = np.fft.rfft(v)
        n = self.n_p
        c = np.empty(self.dim)
        c[0] = spec[0].real / n
        j = 1
        for k in range(1, self.n_modes + 1):
            if self.nyquist and k == self.n_modes:
                c[j] = spec[k].real / n
                j += 1
            else:
                c[j] = 2.0 * spec[k].real / n
                c[j + 1] = -2.0 * spec[k].imag / n
                j += 2
        return c

    def adjoint_to_coeffs(self, g_samples):
        """Transpose of to_samples: maps a sample-space gradient to
        coefficient space (basis matrix transpose, not its inverse)."""
        c = self.from_samples(g_samples)
        scale = np.full(self.dim, 0.5 * self.n_p)
        scale[0] = self.n_p
        if self.nyquist:
            scale[-1] = self.n_p
        return c * scale

    def helmholtz_factors(self, spec):
        """(1 + ell^2 k^2)^alpha per coefficient slot."""
        k = self.mode_of_coeff
        return (1.0 + spec.ell**2 * k.astype(np.float64) ** 2) ** spec.alpha

    def coeff_std(self, spec):
        """Prior standard deviation of each coefficient."""
        k = self.mode_of_coeff
        return np.sqrt(spec.delta) * (1.0 + spec.ell**2 * k.astype(np.float64) ** 2) ** (
            -spec.alpha / 2.0
        )


def layout_for(spec, n_p):
    return SpectralLayout(n_p, spec.n_modes)


def sample_prior(spec, rng, n_p):
    """Draw a field from the measure, returned as n_p samples."""
    layout = layout_for(spec, n_p)
    coeffs = layout.coeff_std(spec) * rng.standard_normal(layout.dim)
    return ScalarLoopField(layout.to_samples(coeffs))


def sample_prior_coeffs(spec, rng, layout):
    """Draw spectral coefficients directly (sampler hot path)."""
    return layout.coeff_std(spec) * rng.standard_normal(layout.dim)


def cameron_martin_norm(u, spec, n_p=None):
    """Squared Cameron-Martin norm over the retained modes.

    Divides by delta: the measure N(0, delta H^(-alpha)) induces the penalty
    <u, H^alpha u> / delta.
    """
    values = u.values if isinstance(u, ScalarLoopField) else np.asarray(u, dtype=np.float64)
    layout = layout_for(spec, n_p if n_p is not None else values.shape[0])
    c = layout.from_samples(values)
    return float(np.sum(c * c * layout.helmholtz_factors(spec)) / spec.delta)


def cameron_martin_norm_coeffs(coeffs, spec, layout):
    c = np.asarray(coeffs, dtype=np.float64)
    return float(np.sum(c * c * layout.helmholtz_factors(spec)) / spec.delta)


@dataclass
class ValidationReport:
    errors: list
    warnings: list

    @property
    def ok(self):
        return not self.errors

    def raise_if_invalid(self):
        if self.errors:
            field, message = self.errors[0]
            raise ValidationError(field, message)


def validate_spec(pair, metric=None):
    """Check the prior pair (and optionally the metric) for admissibility.

    The momentum prior needs alpha > 1/2 for square-integrable samples and
    the generator prior needs alpha > 3/2 for continuously differentiable
    ones; the deformation metric should have exponent >= 3 for the strongest
    Lipschitz guarantees, so smaller exponents only warn.
    """
    errors = []
    warnings = []
    a1 = pair.momentum_prior.alpha
    a2 = pair.reparam_prior.alpha
    if a1 <= 0.5:
        errors.append(
            ("momentum_prior.alpha", f"must exceed 1/2 for L2 momentum samples, got {a1}")
        )
    if a2 <= 1.5:
        errors.append(
            ("reparam_prior.alpha", f"must exceed 3/2 for C1 generator samples, got {a2}")
        )
    if metric is not None and metric.gamma < 3:
        warnings.append(
            (
                "metric.gamma",
                f"gamma={metric.gamma} < 3: velocity fields may fall short of the"
                " regularity assumed by the strongest well-posedness results",
            )
        )
    return ValidationReport(errors, warnings)
