"""Scalar special functions, the generalized Gaussian density and the
Gaussian kernel shared by the rest of the package."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_GAMMA_MAX = 171.0
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gamma_fn(x: float) -> float:
    """Gamma function on (0, 171].

    Raises
    ------
    ValueError
        For ``x <= 0`` or ``x > 171`` (the latter overflows a double).
    """
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"gamma_fn domain error: x={x!r} must be > 0")
    if x > _GAMMA_MAX:
        raise ValueError(f"gamma_fn overflow: x={x!r} exceeds {_GAMMA_MAX}")
    return math.gamma(x)


@dataclass(frozen=True)
class GGDParams:
    """Shape ``alpha`` and scale ``beta`` of the generalized Gaussian density."""

    alpha: float
    beta: float
    norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be > 0, got {self.beta!r}")
        # evaluated once, the density is called per codeword per step
        object.__setattr__(
            self, "norm", self.alpha / (2.0 * self.beta * gamma_fn(1.0 / self.alpha))
        )

    @property
    def peak(self) -> float:
        """Value of the density at zero, ``alpha / (2 beta Gamma(1/alpha))``."""
        return self.norm

    @property
    def scale_pow(self) -> float:
        """``beta ** alpha``."""
        return self.beta ** self.alpha


@dataclass(frozen=True)
class KernelParams:
    """Bandwidth of the Gaussian kernel."""

    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"kernel sigma must be > 0, got {self.sigma!r}")

    @property
    def norm(self) -> float:
        """``kappa(u, u) = 1 / (sqrt(2 pi) sigma)``."""
        return 1.0 / (_SQRT_2PI * self.sigma)

    @property
    def inv_two_sigma2(self) -> float:
        return 1.0 / (2.0 * self.sigma * self.sigma)


def abs_pow(e, alpha: float):
    """``|e| ** alpha`` with ``0 ** alpha = 0``."""
    return np.power(np.abs(e), alpha)


def ggd_density(e, p: GGDParams):
    """Generalized Gaussian density

        G(e) = alpha / (2 beta Gamma(1/alpha)) * exp(-|e|^alpha / beta^alpha)

    Accepts a scalar or an array; returns the same shape.
    """
    out = p.norm * np.exp(-abs_pow(e, p.alpha) / p.scale_pow)
    if np.ndim(out) == 0:
        return float(out)
    return out


def gaussian_density(e, sigma: float):
    """``G_sigma(e) = exp(-e^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)``."""
    e = np.asarray(e, dtype=float)
    out = np.exp(-(e * e) / (2.0 * sigma * sigma)) / (_SQRT_2PI * sigma)
    if out.ndim == 0:
        return float(out)
    return out


def gaussian_kernel(x, y, k: KernelParams) -> float:
    """Normalized Gaussian kernel between two vectors.

    The ``1/(sqrt(2 pi) sigma)`` factor is kept, so ``kappa(u, u) != 1``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(k.norm * math.exp(-float(diff @ diff) * k.inv_two_sigma2))


def gaussian_kernel_matrix(X, Y, k: KernelParams) -> np.ndarray:
    """Kernel matrix ``K[i, j] = kappa(X[i], Y[j])`` for row-stacked inputs."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    # direct differences: same rounding as the per-sample kernel rows
    diff = X[:, None, :] - Y[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return k.norm * np.exp(-sq * k.inv_two_sigma2)
