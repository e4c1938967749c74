"""Bussgang gains of quantized complex Gaussian signals and input-variance estimates."""
from __future__ import annotations

import numpy as np

from .quantizer import QuantizerSpec, distortion_factor

VARIANCE_FLOOR = 1e-12


def _gain(spec: QuantizerSpec, variances: np.ndarray) -> np.ndarray:
    v = variances[..., None]
    decay = np.exp(-(spec.thresholds**2) / v)
    terms = spec.labels / np.sqrt(np.pi) * (decay[..., :-1] - decay[..., 1:])
    return np.sum(terms, axis=-1) / np.sqrt(variances)


def gain_scalar(spec: QuantizerSpec, variance: float) -> float:
    """Linear gain of ``spec`` applied to a complex Gaussian of the given variance.

    Closed form ``(1/sigma) * sum_j l_j/sqrt(pi) * (exp(-tau_j**2/s2) - exp(-tau_{j+1}**2/s2))``;
    the infinite end thresholds contribute ``exp(-inf) = 0``.
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    return float(_gain(spec, np.asarray([variance], dtype=float))[0])


def gain_diagonal(spec: QuantizerSpec, variances) -> np.ndarray:
    """Elementwise :func:`gain_scalar` over any array of variances."""
    variances = np.asarray(variances, dtype=float)
    if np.any(~(variances > 0)):
        raise ValueError("all variances must be positive")
    return _gain(spec, variances)


def estimate_input_variance(
    quantized_regressor,
    bits: int | None,
    floor: float = VARIANCE_FLOOR,
) -> float:
    """Estimate the unquantized input variance from one quantized regressor.

    Uses the instantaneous power ``||x_Q||**2 / M`` inflated by the relative
    distortion factor of a ``bits``-bit quantizer. ``bits=None`` means full
    resolution (no inflation). All-zero input returns ``floor``.
    """
    x = np.asarray(quantized_regressor)
    if x.size == 0:
        raise ValueError("regressor must have at least one entry")
    power = float(np.vdot(x, x).real) / x.size
    if bits is not None:
        power *= 1.0 + distortion_factor(bits)
    return power if power > 0 else floor


class VarianceTracker:
    """Exponentially weighted variance estimate for non-stationary inputs.

    ``smoothing`` is the weight kept on the previous estimate; 0 reproduces the
    instantaneous estimate and 1 freezes the first one.
    """

    def __init__(self, bits: int | None, smoothing: float = 0.95, floor: float = VARIANCE_FLOOR):
        if not 0.0 <= smoothing <= 1.0:
            raise ValueError("smoothing must be in [0, 1]")
        self.bits = bits
        self.smoothing = smoothing
        self.floor = floor
        self.value: float | None = None

    def update(self, quantized_regressor) -> float:
        current = estimate_input_variance(quantized_regressor, self.bits, self.floor)
        if self.value is None:
            self.value = current
        else:
            self.value = self.smoothing * self.value + (1.0 - self.smoothing) * current
        return self.value
