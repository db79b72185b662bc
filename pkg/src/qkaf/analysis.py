"""Convergence checks and complexity accounting.

* :func:`spectral_radius` and :func:`lyapunov_steady_state` for the
  mean / covariance recursions of the weight error.
* :func:`empirical_mean_error_check`, a Monte Carlo companion on an
  explicit-feature linear model driven by the same quantized theta weights
  as the kernel filters.
* :func:`theta_cost` / :func:`complexity_delta`, the operation counts of the
  theta computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .core import GGDParams
from .criteria import GMEE, CriterionParams, theta_weight
from .quantizer import Codebook

MAX_LYAP_DIM = 30


# -- spectral radius / Lyapunov -----------------------------------------------


class ConvergenceError(RuntimeError):
    pass


def spectral_radius(
    R,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    dense_max: int = 200,
    small_budget: int = 500,
    seed: int = 0,
) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Power iteration stops when the eigen-residual ``||R x - mu x||`` drops
    below ``tol * ||R||``.  If it does not (complex or nearly tied dominant
    eigenvalues), matrices up to ``dense_max`` fall back to a dense
    eigensolver after ``small_budget`` iterations; larger ones iterate up to
    ``max_iter`` and then raise :class:`ConvergenceError`.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError(f"square matrix required, got shape {R.shape}")
    m = R.shape[0]
    if m == 0:
        raise ValueError("empty matrix")
    scale = np.linalg.norm(R, 2) if m <= dense_max else np.linalg.norm(R)
    if scale == 0.0:
        return 0.0
    x = np.random.default_rng(seed).standard_normal(m)
    x /= np.linalg.norm(x)
    resid = np.inf
    budget = min(max_iter, small_budget) if m <= dense_max else max_iter
    for _ in range(budget):
        y = R @ x
        mu = float(x @ y)
        resid = float(np.linalg.norm(y - mu * x))
        if resid <= tol * scale:
            return abs(mu)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
    if m <= dense_max:
        return float(np.max(np.abs(np.linalg.eigvals(R))))
    raise ConvergenceError(f"power iteration did not converge (residual {resid:.3e})")


@dataclass
class LyapunovSystem:
    """``T = R T R^T + Xi``."""

    R: np.ndarray
    Xi: np.ndarray

    def __post_init__(self):
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.Xi = np.atleast_2d(np.asarray(self.Xi, dtype=float))
        m = self.R.shape[0]
        if self.R.shape != (m, m) or self.Xi.shape != (m, m):
            raise ValueError("R and Xi must be square and of the same size")
        if not np.allclose(self.Xi, self.Xi.T, rtol=0, atol=1e-12 * max(1.0, np.abs(self.Xi).max())):
            raise ValueError("Xi must be symmetric")

    @property
    def dim(self) -> int:
        return self.R.shape[0]

    def residual(self, T) -> float:
        return float(np.linalg.norm(T - self.R @ T @ self.R.T - self.Xi))


def lyapunov_steady_state(sys: LyapunovSystem) -> np.ndarray:
    """Solve ``vec(T) = (I - R kron R)^-1 vec(Xi)`` by dense LU."""
    m = sys.dim
    if m > MAX_LYAP_DIM:
        raise ValueError(f"dimension {m} exceeds the dense limit {MAX_LYAP_DIM}")
    rho = spectral_radius(sys.R)
    if rho >= 1.0:
        raise ConvergenceError(f"no steady state: spectral radius {rho:.6g} >= 1")
    M = np.eye(m * m) - np.kron(sys.R, sys.R)
    lu = scipy.linalg.lu_factor(M)
    T = scipy.linalg.lu_solve(lu, sys.Xi.reshape(-1)).reshape(m, m)
    return 0.5 * (T + T.T)


def lyapunov_iterate(sys: LyapunovSystem, steps: int = 500, T0=None) -> np.ndarray:
    """Plain fixed-point iteration ``T <- R T R^T + Xi``."""
    T = np.zeros_like(sys.Xi) if T0 is None else np.asarray(T0, dtype=float)
    for _ in range(steps):
        T = sys.R @ T @ sys.R.T + sys.Xi
    return T


# -- complexity -------------------------------------------------------------

# (mults, adds, exps) per theta evaluation, as printed
_THETA_ROWS = {
    "KRMEE": lambda L, H: (8 * L - 8, 3 * L - 3, 4 * L - 4),
    "QKRMEE": lambda L, H: (9 * H, 3 * H - 1, 4 * H),
    "KRGMEE": lambda L, H: (9 * L - 9, 4 * L - 4, 6 * L - 6),
    "QKRGMEE": lambda L, H: (10 * H, 4 * L - 1, 6 * H),
}


@dataclass
class ComplexityReport:
    mults: int
    adds: int
    exps: int
    wall_seconds: float = 0.0
    H_mean: float = 0.0
    L: int = 0

    def __post_init__(self):
        if min(self.mults, self.adds, self.exps) < 0 or self.wall_seconds < 0:
            raise ValueError("complexity counters must be non-negative")

    @property
    def total(self) -> int:
        return self.mults + self.adds + self.exps

    def as_dict(self) -> dict:
        return {
            "mults": self.mults,
            "adds": self.adds,
            "exps": self.exps,
            "total": self.total,
            "wall_seconds": self.wall_seconds,
            "H_mean": self.H_mean,
            "L": self.L,
        }


def theta_cost(L: int, H: int, variant: str) -> ComplexityReport:
    """Operation counts of one theta evaluation (table values as printed)."""
    if L < 1 or H < 1:
        raise ValueError("L and H must be >= 1")
    try:
        row = _THETA_ROWS[variant]
    except KeyError:
        raise ValueError(f"variant must be one of {sorted(_THETA_ROWS)}, got {variant!r}") from None
    m, a, e = row(int(L), int(H))
    return ComplexityReport(m, a, e, H_mean=float(H), L=int(L))


def complexity_delta(L: int, H: int, family: str) -> int:
    """Operations saved by quantization: ``15L - 14 - 16H`` (MEE) or
    ``19L - 18 - 20H`` (GMEE)."""
    if L < 1 or H < 1:
        raise ValueError("L and H must be >= 1")
    if family == "MEE":
        return 15 * L - 14 - 16 * H
    if family == "GMEE":
        return 19 * L - 18 - 20 * H
    raise ValueError(f"family must be 'MEE' or 'GMEE', got {family!r}")


# -- empirical mean-error check ----------------------------------------------


@dataclass(frozen=True)
class MeanErrorConfig:
    """Explicit-feature toy: ``d = w*^T phi + v`` learned by theta-weighted
    recursive least squares with the quantized GMEE weights."""

    m: int = 5
    n_steps: int = 200
    runs: int = 200
    noise_std: float = 0.0
    ggd: GGDParams = field(default_factory=lambda: GGDParams(2.0, 1.0))
    window_len: int = 20
    gamma: float = 0.04
    reg: float = 1e-2
    block: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.m <= 20:
            raise ValueError("feature dimension m must be in [1, 20]")
        if self.runs < 1 or self.n_steps < self.block or self.block < 1:
            raise ValueError("need runs >= 1 and n_steps >= block >= 1")


@dataclass
class MeanErrorReport:
    spectral_radius: float
    norms: np.ndarray  # ||E[eps_n]||, n = 0..n_steps
    smoothed: np.ndarray  # block means of norms[1:]
    tolerance: np.ndarray  # allowed rise per block transition
    verdict: str
    R_last: Optional[np.ndarray] = None  # run-averaged transition at the last step
    Xi_last: Optional[np.ndarray] = None  # noise_std^2 E[k k^T] at the last step

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        return {
            "spectral_radius": self.spectral_radius,
            "initial_norm": float(self.norms[0]),
            "final_norm": float(self.norms[-1]),
            "blocks": len(self.smoothed),
            "max_tolerance": float(np.max(self.tolerance)) if self.tolerance.size else 0.0,
            "verdict": self.verdict,
        }


def _weighted_rls_run(cfg: MeanErrorConfig, w_star, rng, cp: CriterionParams):
    m = cfg.m
    scale = cfg.ggd.scale_pow * cfg.reg
    P = np.eye(m) / scale
    w = np.zeros(m)
    cb = Codebook(cfg.gamma)
    window = []
    eps = np.empty((cfg.n_steps + 1, m))
    gains = np.empty((cfg.n_steps, m, m))
    eps[0] = w_star - w
    for n in range(cfg.n_steps):
        phi = rng.standard_normal(m)
        d = phi @ w_star + cfg.noise_std * rng.standard_normal()
        e = d - phi @ w
        j = cb.insert(e)
        window.append(cb.codewords[j])
        if len(window) > cfg.window_len:
            c_old = window.pop(0)
            cb.remove(cb.codewords.index(c_old))
        theta = theta_weight(e, cb, cp, n + 1, GMEE)
        Pphi = P @ phi
        k = Pphi / (1.0 / theta + phi @ Pphi)  # gain alpha_n
        w = w + k * e
        P = P - np.outer(k, Pphi)
        P = 0.5 * (P + P.T)
        gains[n] = np.outer(k, phi)
        eps[n + 1] = w_star - w
    return eps, gains, np.outer(k, k)


def empirical_mean_error_check(cfg: MeanErrorConfig = MeanErrorConfig()) -> MeanErrorReport:
    """Monte Carlo estimate of ``E[eps_n]`` and of ``I - E[alpha_n phi_n^T]``.

    The reported spectral radius is the largest one over all steps of the
    run-averaged transition matrix.  The verdict is ``"pass"`` when that
    radius is below one and the 10-step block means of ``||E[eps_n]||``
    never rise by more than the Monte Carlo noise floor while falling
    overall to half the initial norm or less; ``"no convergence evidence"``
    when the trajectory stays flat; ``"fail"`` otherwise.
    """
    rng = np.random.default_rng(cfg.seed)
    w_star = rng.standard_normal(cfg.m)
    cp = CriterionParams(ggd=cfg.ggd, window_len=cfg.window_len)
    eps_sum = np.zeros((cfg.n_steps + 1, cfg.m))
    eps_sq = np.zeros(cfg.n_steps + 1)
    gain_sum = np.zeros((cfg.n_steps, cfg.m, cfg.m))
    kk_sum = np.zeros((cfg.m, cfg.m))
    for seq in np.random.SeedSequence(cfg.seed).spawn(cfg.runs):
        eps, gains, kk = _weighted_rls_run(cfg, w_star, np.random.default_rng(seq), cp)
        kk_sum += kk
        eps_sum += eps
        eps_sq += np.sum(eps * eps, axis=1)
        gain_sum += gains
    mean_eps = eps_sum / cfg.runs
    norms = np.linalg.norm(mean_eps, axis=1)
    # Monte Carlo standard error of the mean vector's norm
    var = np.maximum(eps_sq / cfg.runs - norms**2, 0.0)
    se = np.sqrt(var / cfg.runs)
    nb = cfg.n_steps // cfg.block
    smoothed = norms[1 : 1 + nb * cfg.block].reshape(nb, cfg.block).mean(axis=1)
    # allowed rise between consecutive blocks: 3 standard errors of the later block
    block_se = se[1 : 1 + nb * cfg.block].reshape(nb, cfg.block).mean(axis=1)
    tol = 3.0 * block_se[1:] + 1e-12
    I = np.eye(cfg.m)
    rho = max(spectral_radius(I - g / cfg.runs) for g in gain_sum)
    drop = smoothed[-1] <= 0.5 * norms[0]
    monotone = bool(np.all(np.diff(smoothed) <= tol))
    if not drop:
        verdict = "no convergence evidence"
    elif rho < 1.0 and monotone:
        verdict = "pass"
    else:
        verdict = "fail"
    R_last = I - gain_sum[-1] / cfg.runs
    Xi_last = cfg.noise_std**2 * kk_sum / cfg.runs
    return MeanErrorReport(float(rho), norms, smoothed, tol, verdict, R_last, 0.5 * (Xi_last + Xi_last.T))


# -- reports ------------------------------------------------------------------


def format_report(report: dict, prefix: str = "") -> str:
    """``key=value`` lines, keys in insertion order."""
    lines = []
    for k, v in report.items():
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{prefix}{k}={v}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out
