"""Scalar quantizers for Gaussian sources.

A b-bit quantizer is designed offline for a unit-variance real Gaussian with
the Lloyd-Max iteration, wrapped with infinite end thresholds, and its labels
rescaled so that a complex unit-power signal (each component of variance 1/2)
comes out with unit power.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

MAX_BITS = 8


class QuantizerDesignError(RuntimeError):
    """Lloyd-Max iteration did not reach the requested tolerance."""

    def __init__(self, bits: int, residual: float, iterations: int):
        self.bits = bits
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Lloyd-Max for {bits} bits did not converge after {iterations} "
            f"iterations (last label change {residual:.3e}); raise "
            f"max_iterations or loosen the tolerance"
        )


@dataclass(frozen=True)
class QuantizerSpec:
    """Thresholds and labels of a b-bit scalar quantizer.

    ``thresholds`` has ``2**bits + 1`` entries with ``-inf``/``+inf`` at the
    ends; cell ``p`` is the half-open interval ``(thresholds[p], thresholds[p+1]]``
    and maps to ``labels[p]``. ``alpha`` is the factor already applied to the
    raw Lloyd-Max labels (1.0 for a raw design).
    """

    bits: int
    thresholds: np.ndarray
    labels: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        thresholds = np.asarray(self.thresholds, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        levels = 2**self.bits
        if thresholds.shape != (levels + 1,) or labels.shape != (levels,):
            raise ValueError(
                f"{self.bits}-bit quantizer needs {levels + 1} thresholds and "
                f"{levels} labels, got {thresholds.size} and {labels.size}"
            )
        if not (thresholds[0] == -np.inf and thresholds[-1] == np.inf):
            raise ValueError("outer thresholds must be -inf and +inf")
        if np.any(np.diff(thresholds) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if np.any(labels <= thresholds[:-1]) or np.any(labels > thresholds[1:]):
            raise ValueError("every label must lie inside its cell")
        thresholds.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "labels", labels)

    @property
    def levels(self) -> int:
        return 2**self.bits

    def complex_power(self) -> float:
        """Output power for a complex unit-power input, per component variance 1/2."""
        cdf = norm.cdf(np.sqrt(2.0) * self.thresholds)
        return float(2.0 * np.sum(self.labels**2 * np.diff(cdf)))

    def table(self) -> str:
        """Plain-text table, one row per cell."""
        rows = ["cell_index, tau_low, tau_high, label"]
        for p in range(self.levels):
            lo, hi = self.thresholds[p], self.thresholds[p + 1]
            rows.append(f"{p}, {_fmt(lo)}, {_fmt(hi)}, {self.labels[p]:.12g}")
        return "\n".join(rows) + "\n"


def _fmt(value: float) -> str:
    if value == np.inf:
        return "+inf"
    if value == -np.inf:
        return "-inf"
    return f"{value:.12g}"


def _check_bits(bits: int) -> None:
    if isinstance(bits, bool) or not isinstance(bits, (int, np.integer)):
        raise ValueError(f"bits must be an integer, got {bits!r}")
    if not 1 <= bits <= MAX_BITS:
        raise ValueError(f"bits must be in 1..{MAX_BITS}, got {bits}")


def gaussian_centroids(thresholds: np.ndarray) -> np.ndarray:
    """Conditional means of a standard normal over the cells ``(t[p], t[p+1]]``."""
    lo, hi = thresholds[:-1], thresholds[1:]
    # mass via sf on the right half keeps tail cells accurate
    mass = np.where(lo >= 0, norm.sf(lo) - norm.sf(hi), norm.cdf(hi) - norm.cdf(lo))
    return (norm.pdf(lo) - norm.pdf(hi)) / mass


def _lloyd_map(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One Lloyd sweep: midpoint thresholds, then centroid labels."""
    thresholds = np.empty(labels.size + 1)
    thresholds[0], thresholds[-1] = -np.inf, np.inf
    thresholds[1:-1] = 0.5 * (labels[:-1] + labels[1:])
    return thresholds, gaussian_centroids(thresholds)


def _lloyd_jacobian(thresholds: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Derivative of the Lloyd sweep with respect to the labels (tridiagonal)."""
    lo, hi = thresholds[:-1], thresholds[1:]
    mass = np.where(lo >= 0, norm.sf(lo) - norm.sf(hi), norm.cdf(hi) - norm.cdf(lo))
    with np.errstate(invalid="ignore"):
        d_lo = np.where(np.isfinite(lo), norm.pdf(lo) * (centroids - lo) / mass, 0.0)
        d_hi = np.where(np.isfinite(hi), norm.pdf(hi) * (hi - centroids) / mass, 0.0)
    n = centroids.size
    jac = np.zeros((n, n))
    idx = np.arange(n)
    jac[idx, idx] = 0.5 * (d_lo + d_hi)
    jac[idx[1:], idx[:-1]] = 0.5 * d_lo[1:]
    jac[idx[:-1], idx[1:]] = 0.5 * d_hi[:-1]
    return jac


def lloyd_max_design(
    bits: int, max_iterations: int = 10_000, tolerance: float = 1e-12
) -> QuantizerSpec:
    """MSE-optimal quantizer for a unit-variance real Gaussian (raw labels).

    Labels start at the Gaussian quantiles ``(p + 0.5) / 2**bits``. The fixed
    point of the Lloyd sweep (midpoint thresholds, centroid labels) is found
    with Newton steps on ``sweep(labels) - labels``; a step that would break
    label ordering or grow the residual falls back to a plain sweep. Stops once
    no label moves by more than ``tolerance``.
    """
    _check_bits(bits)
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    levels = 2**bits
    labels = norm.ppf((np.arange(levels) + 0.5) / levels)
    change = np.inf
    for _ in range(max_iterations):
        thresholds, swept = _lloyd_map(labels)
        residual = swept - labels
        jac = _lloyd_jacobian(thresholds, swept) - np.eye(levels)
        candidate = labels - np.linalg.solve(jac, residual)
        if np.all(np.diff(candidate) > 0):
            cand_residual = _lloyd_map(candidate)[1] - candidate
            if np.max(np.abs(cand_residual)) > np.max(np.abs(residual)):
                candidate = swept
        else:
            candidate = swept
        # the source is symmetric, so enforce it against rounding drift
        candidate = 0.5 * (candidate - candidate[::-1])
        change = float(np.max(np.abs(candidate - labels)))
        labels = candidate
        if change < tolerance:
            break
    else:
        raise QuantizerDesignError(bits, change, max_iterations)
    thresholds, _ = _lloyd_map(labels)
    return QuantizerSpec(bits, thresholds, labels)


def rescale_labels(raw: QuantizerSpec) -> QuantizerSpec:
    """Scale labels so a complex unit-power input yields unit output power.

    The normalization uses the signed reading ``Phi(sqrt(2) * tau)``: a real
    component of a unit-power complex Gaussian has variance 1/2.
    """
    alpha = 1.0 / np.sqrt(raw.complex_power())
    return QuantizerSpec(raw.bits, raw.thresholds, alpha * raw.labels, raw.alpha * alpha)


def design_quantizer(bits: int, **kwargs) -> QuantizerSpec:
    """Lloyd-Max design followed by the unit-power label rescale."""
    return rescale_labels(lloyd_max_design(bits, **kwargs))


def quantize_real(spec: QuantizerSpec, value):
    """Map each value to the label of the cell ``(tau_p, tau_p+1]`` holding it."""
    inner = spec.thresholds[1:-1]
    index = np.searchsorted(inner, value, side="left")
    out = spec.labels[index]
    return float(out) if np.ndim(out) == 0 else out


def quantize_complex(spec: QuantizerSpec, value, scale=1.0):
    """Quantize real and imaginary parts independently in the ``value/scale`` domain.

    ``scale`` is the standard deviation of the complex input and may be an
    array broadcastable against ``value``.
    """
    scale = np.asarray(scale, dtype=float)
    if np.any(~(scale > 0)):
        raise ValueError(f"scale must be positive, got {scale}")
    value = np.asarray(value)
    re = quantize_real(spec, value.real / scale)
    im = quantize_real(spec, value.imag / scale)
    out = scale * (np.asarray(re) + 1j * np.asarray(im))
    return complex(out) if out.ndim == 0 else out


def distortion_factor(bits: int) -> float:
    """Approximate relative MSE of b-bit non-uniform Gaussian quantization."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    return float(np.pi * np.sqrt(3.0) / 2.0 * 2.0 ** (-2 * bits))
