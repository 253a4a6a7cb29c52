"""Trigonometric interpolation helpers on equispaced periodic nodes."""
import warnings

import numpy as np

from .errors import ResolutionWarning


def nodes(n):
    return 2.0 * np.pi * np.arange(n) / n


def wavenumbers(n):
    return np.fft.rfftfreq(n, d=1.0 / n)


def coefficients(values):
    """rfft coefficients scaled so that c_0 is the mean (works along axis 0)."""
    values = np.asarray(values, dtype=float)
    return np.fft.rfft(values, axis=0) / values.shape[0]


def derivative(values, order=1):
    """Spectral derivative d^order/dtheta^order of nodal values (axis 0)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if order == 0:
        return values.copy()
    c = np.fft.rfft(values, axis=0)
    k = wavenumbers(n)
    mult = (1j * k) ** order
    if n % 2 == 0 and order % 2 == 1:
        mult[-1] = 0.0  # odd derivatives of the Nyquist mode are not real
    shape = (-1,) + (1,) * (values.ndim - 1)
    return np.fft.irfft(c * mult.reshape(shape), n=n, axis=0)


def evaluate(coef, theta, n, order=0):
    """Evaluate the interpolant with rfft/n coefficients ``coef`` at ``theta``.

    ``coef`` has shape (n//2+1,) or (n//2+1, m); result has shape
    theta.shape (+ (m,)).
    """
    theta = np.asarray(theta, dtype=float)
    k = wavenumbers(n)
    w = np.full(k.shape, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 0.0 if order > 0 else 1.0
    phase = np.exp(1j * np.multiply.outer(theta, k))
    factor = w * (1j * k) ** order
    if coef.ndim == 1:
        return np.real(phase @ (factor * coef))
    return np.real(phase @ (factor[:, None] * coef))


def shift(values, phi):
    """Values of the interpolant of ``values`` evaluated at theta_j - phi."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    c = np.fft.rfft(values, axis=0)
    k = wavenumbers(n)
    mult = np.exp(-1j * k * phi)
    if n % 2 == 0:
        mult[-1] = np.cos(k[-1] * phi)
    shape = (-1,) + (1,) * (values.ndim - 1)
    return np.fft.irfft(c * mult.reshape(shape), n=n, axis=0)


def resample(values, m):
    """Trigonometric interpolation of periodic nodal values onto m nodes."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if m == n:
        return values.copy()
    return evaluate(coefficients(values), nodes(m), n)


def tail_ratio(values):
    """Largest coefficient magnitude in the last quarter of modes relative to the largest."""
    values = np.asarray(values, dtype=float)
    mag = np.abs(np.fft.rfft(values - values.mean(), axis=0))
    if mag.ndim > 1:
        mag = mag.max(axis=1)
    top = mag.max()
    if top == 0.0:
        return 0.0
    nk = mag.shape[0]
    return float(mag[(3 * nk) // 4:].max() / top)


def check_resolution(values, what="field", threshold=1e-8):
    ratio = tail_ratio(values)
    if ratio > threshold:
        warnings.warn(
            f"{what}: Fourier tail ratio {ratio:.2e} exceeds {threshold:.0e}",
            ResolutionWarning,
            stacklevel=3,
        )
    return ratio
