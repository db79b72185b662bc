"""Information-potential estimators and the per-sample weights used by the
recursive filters.

Two criterion families are supported:

``"GMEE"``
    generalized Gaussian density ``G_{alpha,beta}``, with the extra factor
    ``|e - c|^(alpha - 2)`` in the recursion weights;
``"MEE"``
    plain Gaussian ``G_sigma``.

The entropy order is fixed at 2 (quadratic information potential).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import GGDParams, abs_pow, gaussian_density, ggd_density
from .quantizer import Codebook

EPS_SING = 1e-8
"""Distance clamp for ``|e - c|^(alpha - 2)`` when ``alpha < 2``."""

GMEE = "GMEE"
MEE = "MEE"
_FAMILIES = (GMEE, MEE)


@dataclass(frozen=True)
class CriterionParams:
    """Criterion hyperparameters.

    Attributes
    ----------
    ggd : GGDParams
        Shape and scale for the GMEE family.
    mee_sigma : float
        Gaussian bandwidth for the MEE family (distinct from the kernel
        bandwidth of the filter).
    lam : float
        Forgetting factor in (0, 1].
    window_len : int
        Parzen window length ``L``.
    lambda_mode : {"literal", "time"}
        ``"literal"`` weights codeword ``h`` at time ``n`` by
        ``lam ** (n + h)``; ``"time"`` drops the codeword index.
    """

    ggd: GGDParams = field(default_factory=lambda: GGDParams(2.0, 1.0))
    mee_sigma: float = 1.0
    lam: float = 1.0
    window_len: int = 50
    lambda_mode: str = "literal"

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must be in (0, 1], got {self.lam!r}")
        if int(self.window_len) != self.window_len or self.window_len < 1:
            raise ValueError(f"window_len must be a positive integer, got {self.window_len!r}")
        if not self.mee_sigma > 0.0:
            raise ValueError(f"mee_sigma must be > 0, got {self.mee_sigma!r}")
        if self.lambda_mode not in ("literal", "time"):
            raise ValueError(f"lambda_mode must be 'literal' or 'time', got {self.lambda_mode!r}")


def _errors(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("error list is empty")
    return e


def _check_counts(e: np.ndarray, cb: Codebook):
    if cb.size == 0:
        raise ValueError("codebook is empty")
    if cb.total != e.size:
        raise ValueError(
            f"contract violation: codebook counts sum to {cb.total} but {e.size} errors given"
        )


def empirical_ip(errors: Sequence[float], p: GGDParams) -> float:
    """Double-sum estimate ``(1/L^2) sum_i sum_j G(e_i - e_j)``."""
    e = _errors(errors)
    return float(np.sum(ggd_density(e[:, None] - e[None, :], p)) / e.size**2)


def quantized_ip(errors: Sequence[float], cb: Codebook, p: GGDParams) -> float:
    """Quantized estimate ``(1/L^2) sum_i sum_h H_h G(e_i - c_h)``."""
    e = _errors(errors)
    _check_counts(e, cb)
    c = np.asarray(cb.codewords)
    H = np.asarray(cb.counts, dtype=float)
    G = ggd_density(e[:, None] - c[None, :], p)
    return float(np.sum(G * H[None, :]) / e.size**2)


def qmee_ip(errors: Sequence[float], cb: Codebook, sigma: float) -> float:
    """Quantized estimate with the Gaussian ``G_sigma``."""
    e = _errors(errors)
    _check_counts(e, cb)
    c = np.asarray(cb.codewords)
    H = np.asarray(cb.counts, dtype=float)
    G = gaussian_density(e[:, None] - c[None, :], sigma)
    return float(np.sum(G * H[None, :]) / e.size**2)


def parzen_density(x, errors: Sequence[float], p: GGDParams):
    """Parzen estimate ``(1/L) sum_i G(x - e_i)``."""
    e = _errors(errors)
    x = np.asarray(x, dtype=float)
    out = np.mean(ggd_density(x[..., None] - e, p), axis=-1)
    return float(out) if out.ndim == 0 else out


def large_beta_ip_approx(errors: Sequence[float], cb: Codebook, p: GGDParams) -> float:
    """First-order expansion of :func:`quantized_ip` for large ``beta``."""
    e = _errors(errors)
    c = np.asarray(cb.codewords)
    H = np.asarray(cb.counts, dtype=float)
    L = e.size
    moment = np.sum(H[None, :] * abs_pow(e[:, None] - c[None, :], p.alpha)) / L**2
    g = math.gamma(1.0 / p.alpha)
    return p.alpha / (2.0 * p.beta * g) - p.alpha / (2.0 * abs(p.beta) ** (p.alpha + 1) * g) * moment


def _lambda_powers(cp: CriterionParams, time_index: int, size: int) -> np.ndarray:
    if cp.lam == 1.0:
        return np.ones(size)
    h = np.arange(1, size + 1)
    if cp.lambda_mode == "literal":
        return cp.lam ** (time_index + h)
    return np.full(size, cp.lam**time_index)


def theta_terms(e: float, cb: Codebook, cp: CriterionParams, time_index: int, variant: str = GMEE):
    """Per-codeword weights ``kappa_h`` and a singularity flag.

    ``kappa_h = lam^(n+h) H_h G(e - c_h) |e - c_h|^(alpha-2)`` for GMEE and
    ``lam^(n+h) H_h G_sigma(e - c_h)`` for MEE.
    """
    if variant not in _FAMILIES:
        raise ValueError(f"variant must be one of {_FAMILIES}, got {variant!r}")
    if cb.size == 0:
        raise ValueError("theta undefined for an empty codebook")
    c = np.asarray(cb.codewords, dtype=float)
    H = np.asarray(cb.counts, dtype=float)
    diff = e - c
    lam = _lambda_powers(cp, time_index, c.size)
    singular = False
    if variant == MEE:
        kappa = lam * H * gaussian_density(diff, cp.mee_sigma)
    else:
        a = cp.ggd.alpha
        dist = np.abs(diff)
        if a < 2.0:
            close = dist < EPS_SING
            singular = bool(np.any(close))
            dist = np.where(close, EPS_SING, dist)
        kappa = lam * H * np.atleast_1d(ggd_density(diff, cp.ggd)) * np.power(dist, a - 2.0)
    return kappa, singular


def theta_weight(
    e: float,
    cb: Codebook,
    cp: CriterionParams,
    time_index: int,
    variant: str = GMEE,
    return_flag: bool = False,
):
    """Recursion weight ``theta = sum_h kappa_h``.

    With ``return_flag`` the result is ``(theta, singular)`` where
    ``singular`` reports that a distance was clamped at :data:`EPS_SING`.
    """
    kappa, singular = theta_terms(e, cb, cp, time_index, variant)
    theta = float(np.sum(kappa))
    return (theta, singular) if return_flag else theta


def effective_desired(
    d: float, e: float, cb: Codebook, cp: CriterionParams, time_index: int, variant: str = GMEE
) -> float:
    """kappa-weighted desired value ``sum_h kappa_h (d - c_h) / theta``.

    ``theta`` times this value reproduces the desired-signal term of the
    criterion gradient for the newest sample.
    """
    kappa, _ = theta_terms(e, cb, cp, time_index, variant)
    theta = float(np.sum(kappa))
    if not theta > 0.0:
        raise ValueError("theta must be positive")
    c = np.asarray(cb.codewords, dtype=float)
    return float(d - np.dot(kappa, c) / theta)


# -- batch regression ---------------------------------------------------------


def _pair_weights(e: np.ndarray, c: np.ndarray, H: np.ndarray, p: GGDParams) -> np.ndarray:
    diff = e[:, None] - c[None, :]
    dist = np.abs(diff)
    if p.alpha < 2.0:
        dist = np.maximum(dist, EPS_SING)
    return H[None, :] * ggd_density(diff, p) * np.power(dist, p.alpha - 2.0)


def qgmee_normal_equations(w, inputs, desired, cb: Codebook, p: GGDParams):
    """``(M, N)`` of the QGMEE normal equations evaluated at weights ``w``."""
    U = np.atleast_2d(np.asarray(inputs, dtype=float))
    d = np.asarray(desired, dtype=float)
    c = np.asarray(cb.codewords, dtype=float)
    H = np.asarray(cb.counts, dtype=float)
    e = d - U @ w
    W = _pair_weights(e, c, H, p)  # (L, H)
    rowsum = W.sum(axis=1)
    M = U.T @ (rowsum * d - W @ c)  # sum_ih W_ih (d_i - c_h) u_i
    N = (U * rowsum[:, None]).T @ U
    return M, N


def qgmee_gradient(w, inputs, desired, cb: Codebook, p: GGDParams) -> np.ndarray:
    """Gradient of the quantized IP w.r.t. linear weights ``w``."""
    M, N = qgmee_normal_equations(w, inputs, desired, cb, p)
    L = len(desired)
    return p.alpha / (L**2 * p.scale_pow) * (M - N @ w)


def batch_qgmee_fixed_point(
    inputs,
    desired,
    cb: Codebook,
    p: GGDParams,
    w0=None,
    tol: float = 1e-14,
    max_iter: int = 1000,
) -> np.ndarray:
    """Solve ``N(w) w = M(w)`` for a linear model by fixed-point iteration.

    The codebook is held fixed; errors, and hence the weights inside ``M`` and
    ``N``, are re-evaluated at every iterate. Starts from ordinary least
    squares unless ``w0`` is given.
    """
    U = np.atleast_2d(np.asarray(inputs, dtype=float))
    d = np.asarray(desired, dtype=float)
    if cb.size == 0:
        raise ValueError("codebook is empty")
    w = np.linalg.lstsq(U, d, rcond=None)[0] if w0 is None else np.asarray(w0, dtype=float)
    for _ in range(max_iter):
        M, N = qgmee_normal_equations(w, U, d, cb, p)
        if np.linalg.cond(N) > 1e12:
            N = N + 1e-12 * np.trace(N) / N.shape[0] * np.eye(N.shape[0])
        try:
            w_new = np.linalg.solve(N, M)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("QGMEE normal matrix is singular") from exc
        step = np.linalg.norm(w_new - w)
        w = w_new
        if step <= tol * max(1.0, np.linalg.norm(w)):
            break
    return w
