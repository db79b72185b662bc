"""Recursive kernel filters: KRLS and the (quantized) kernel recursive
MEE / GMEE family.

Every filter keeps a growing dictionary of past inputs, a coefficient
vector ``A`` and the inverse ``Q`` of the regularized, weighted Gram matrix

    Q = (K + s * diag(1 / theta))^-1

where ``s`` is the ridge scale (``reg`` for KRLS, ``beta^alpha * reg`` for
GMEE, ``mee_sigma^2 * reg`` for MEE) and ``theta`` are per-sample weights
computed from a quantized window of recent errors.  Each update grows ``Q``
by block inversion and ``A`` by the matching block product, so after any
number of steps ``A = Q @ targets`` holds exactly (up to rounding).
"""

from __future__ import annotations

import json
import math
import time
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from ._backend import get_backend
from .core import GGDParams, KernelParams, gaussian_kernel_matrix
from .criteria import EPS_SING, GMEE, MEE, CriterionParams
from .quantizer import Codebook, build_codebook

VARIANTS = ("KRLS", "KRMEE", "KRGMEE", "QKRMEE", "QKRGMEE")
_FAMILY = {"KRLS": None, "KRMEE": MEE, "QKRMEE": MEE, "KRGMEE": GMEE, "QKRGMEE": GMEE}

R_MIN = 1e-12
R_JITTER = 1e-10
SNAPSHOT_FORMAT = "qkaf-filter-snapshot/1"


class NumericalBreakdown(FloatingPointError):
    """The Schur complement ``r`` stayed non-positive after jitter."""


@dataclass(frozen=True)
class FilterConfig:
    """Hyperparameters of one filter.

    ``variant`` selects the algorithm. ``KRMEE`` and ``KRGMEE`` are the
    ``gamma = 0`` cases of ``QKRMEE`` and ``QKRGMEE`` and reject a non-zero
    ``gamma``.

    ``reg`` is the regularization factor multiplying the ridge scale
    (``theta_2`` for GMEE, ``theta_{2;S}`` for MEE, the plain ridge for
    KRLS).

    ``target`` chooses the recursion target: ``"raw"`` regresses on ``d`` and
    lets ``theta`` act only through the ridge; ``"shifted"`` uses the
    kappa-weighted effective desired value ``d - sum kappa_h c_h / theta``.

    ``include_current`` quantizes the newest error before ``theta`` is
    evaluated (so it contributes its own term); set False to evaluate
    ``theta`` against the previous window only.

    ``codebook_mode`` is ``"incremental"`` (insert new, remove expired) or
    ``"rebuild"`` (re-quantize the raw window every step).
    """

    variant: str = "QKRGMEE"
    kernel: KernelParams = field(default_factory=KernelParams)
    criterion: CriterionParams = field(default_factory=CriterionParams)
    gamma: float = 0.0
    reg: float = 1.0
    target: str = "raw"
    include_current: bool = True
    codebook_mode: str = "incremental"
    name: Optional[str] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        if self.variant in ("KRMEE", "KRGMEE") and self.gamma != 0.0:
            raise ValueError(f"{self.variant} is the gamma=0 case; got gamma={self.gamma}")
        if not self.reg > 0.0:
            raise ValueError(f"reg must be > 0, got {self.reg!r}")
        if self.target not in ("raw", "shifted"):
            raise ValueError(f"target must be 'raw' or 'shifted', got {self.target!r}")
        if self.codebook_mode not in ("incremental", "rebuild"):
            raise ValueError(f"codebook_mode must be 'incremental' or 'rebuild', got {self.codebook_mode!r}")

    @property
    def family(self) -> Optional[str]:
        return _FAMILY[self.variant]

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.variant.startswith("Q"):
            return f"{self.variant}(gamma={self.gamma:g})"
        return self.variant

    @property
    def ridge_scale(self) -> float:
        if self.family is None:
            return self.reg
        if self.family == GMEE:
            return self.criterion.ggd.scale_pow * self.reg
        return self.criterion.mee_sigma**2 * self.reg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["criterion"]["ggd"] = {"alpha": self.criterion.ggd.alpha, "beta": self.criterion.ggd.beta}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FilterConfig":
        d = dict(d)
        kern = d.pop("kernel", {}) or {}
        crit = dict(d.pop("criterion", {}) or {})
        ggd = crit.pop("ggd", {}) or {}
        if "lambda" in crit:
            crit["lam"] = crit.pop("lambda")
        crit_obj = CriterionParams(ggd=GGDParams(**{"alpha": 2.0, "beta": 1.0, **ggd}), **crit)
        return cls(kernel=KernelParams(**kern), criterion=crit_obj, **d)


def mee_equivalent(cfg: FilterConfig) -> FilterConfig:
    """MEE-family config matching a GMEE config with ``alpha = 2``.

    ``beta = sqrt(2) * sigma`` makes the densities coincide, and the MEE
    regularization factor is ``alpha`` times the GMEE one.
    """
    if cfg.family != GMEE or cfg.criterion.ggd.alpha != 2.0:
        raise ValueError("only alpha=2 GMEE configurations have an MEE equivalent")
    sigma = cfg.criterion.ggd.beta / math.sqrt(2.0)
    variant = "QKRMEE" if cfg.variant == "QKRGMEE" else "KRMEE"
    return replace(
        cfg,
        variant=variant,
        criterion=replace(cfg.criterion, mee_sigma=sigma),
        reg=2.0 * cfg.reg,
        name=None,
    )


class KernelFilter:
    """State and recursion of one kernel filter.

    Use :meth:`start` (or :func:`init`) with the first sample, then call
    :meth:`update` once per sample.  ``backend`` picks the kernel
    implementation (``"cython"`` or ``"python"``; default: best available).
    """

    def __init__(self, cfg: FilterConfig, dim: int, capacity: int = 256, backend=None):
        self.cfg = cfg
        self.backend, self._k = get_backend(backend)
        self.dim = int(dim)
        self.n = 0
        self._alloc(max(int(capacity), 2))
        self.codebook = Codebook(cfg.gamma)
        self._window = deque()  # (error, codeword value)
        self.theta_history = []
        self.target_history = []
        self.r_history = []
        self.size_history = []
        self.singular_steps = 0
        self.jitter_steps = 0
        self.theta_seconds = 0.0
        self._kuu = cfg.kernel.norm
        self._inv2s2 = cfg.kernel.inv_two_sigma2
        crit = cfg.criterion
        if cfg.family == GMEE:
            self._theta_args = (True, crit.ggd.alpha, crit.ggd.scale_pow, crit.ggd.norm, 1.0)
        elif cfg.family == MEE:
            norm = 1.0 / (math.sqrt(2.0 * math.pi) * crit.mee_sigma)
            self._theta_args = (False, 2.0, 1.0, norm, crit.mee_sigma)
        else:
            self._theta_args = None

    # -- storage -----------------------------------------------------------
    def _alloc(self, cap: int):
        old_n = self.n
        X = np.zeros((cap, self.dim))
        A = np.zeros(cap)
        Q = np.zeros((cap, cap))
        if old_n:
            X[:old_n] = self._X[:old_n]
            A[:old_n] = self._A[:old_n]
            Q[:old_n, :old_n] = self._Q[:old_n, :old_n]
        self._X, self._A, self._Q = X, A, Q
        self._h = np.zeros(cap)
        self._z = np.zeros(cap)
        self.capacity = cap

    def _ensure(self, n: int):
        if n > self.capacity:
            self._alloc(max(n, 2 * self.capacity))

    # -- read-only views ---------------------------------------------------
    @property
    def dictionary(self) -> np.ndarray:
        return self._X[: self.n]

    @property
    def A(self) -> np.ndarray:
        return self._A[: self.n]

    @property
    def Q(self) -> np.ndarray:
        """Symmetric copy of the active inverse block."""
        up = np.triu(self._Q[: self.n, : self.n])
        return up + np.triu(up, 1).T

    @property
    def err_window(self) -> list:
        return [e for e, _ in self._window]

    @property
    def H_mean(self) -> float:
        return float(np.mean(self.size_history)) if self.size_history else 0.0

    # -- recursion -----------------------------------------------------------
    def start(self, u, d: float) -> "KernelFilter":
        """Initialize with the first sample (resets any existing state)."""
        u = self._vec(u)
        self.n = 0
        self.codebook = Codebook(self.cfg.gamma)
        self._window.clear()
        q = 1.0 / (self.cfg.ridge_scale + self._kuu)
        self._X[0] = u
        self._Q[0, 0] = q
        self._A[0] = q * d
        self.n = 1
        self.theta_history = [1.0]
        self.target_history = [float(d)]
        self.r_history = [1.0 / q]
        self.size_history = []
        if self.cfg.family is not None:
            # a-priori error of the empty filter
            self._push(float(d))
        return self

    def _vec(self, u) -> np.ndarray:
        u = np.ascontiguousarray(np.atleast_1d(np.asarray(u, dtype=float)))
        if u.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: expected ({self.dim},), got {u.shape}")
        return u

    def _push(self, e: float):
        if self.cfg.codebook_mode == "rebuild":
            self._window.append((e, None))
            if len(self._window) > self.cfg.criterion.window_len:
                self._window.popleft()
            self.codebook = build_codebook([x for x, _ in self._window], self.cfg.gamma)
            return
        j = self.codebook.insert(e)
        self._window.append((e, self.codebook.codewords[j]))
        if len(self._window) > self.cfg.criterion.window_len:
            _, c_old = self._window.popleft()
            # codeword values are unique, so the value identifies the index
            self.codebook.remove(self.codebook.codewords.index(c_old))

    def _theta(self, e: float, time_index: int):
        cb = self.codebook
        gmee, alpha, scale_pow, norm, sig = self._theta_args
        crit = self.cfg.criterion
        return self._k.theta_sum(
            e,
            np.asarray(cb.codewords, dtype=float),
            np.asarray(cb.counts, dtype=float),
            cb.size,
            gmee,
            alpha,
            scale_pow,
            norm,
            sig,
            crit.lam,
            time_index,
            crit.lambda_mode == "literal",
            EPS_SING,
        )

    def predict(self, u) -> float:
        """Filter output ``sum_j A_j kappa(u, u_j)``; no state change."""
        if self.n == 0:
            raise RuntimeError("filter has not been initialized")
        u = self._vec(u)
        h = np.empty(self.n)
        self._k.kernel_row(self._X, self.n, u, self._inv2s2, self._kuu, h)
        return float(h @ self._A[: self.n])

    def predict_many(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        K = gaussian_kernel_matrix(U, self.dictionary, self.cfg.kernel)
        return K @ self.A

    def update(self, u, d: float) -> float:
        """Process one sample; returns the a-priori error ``d - y``."""
        if self.n == 0:
            self.start(u, d)
            return float(d)
        u = self._vec(u)
        k = self._k
        n = self.n
        self._ensure(n + 1)
        h, z = self._h, self._z
        k.kernel_row(self._X, n, u, self._inv2s2, self._kuu, h)
        y = k.dot(h, self._A, n)
        e = d - y
        time_index = n + 1

        if self.cfg.family is None:
            theta, target = 1.0, d
        else:
            t0 = time.perf_counter()
            if self.cfg.include_current:
                self._push(e)
                theta, wc, singular = self._theta(e, time_index)
            else:
                theta, wc, singular = self._theta(e, time_index)
                self._push(e)
            self.theta_seconds += time.perf_counter() - t0
            if singular:
                self.singular_steps += 1
            if not theta > 0.0:
                raise NumericalBreakdown(f"theta={theta!r} at step {time_index}")
            target = d - wc / theta if self.cfg.target == "shifted" else d
            self.size_history.append(self.codebook.size)

        diag = self._kuu + self.cfg.ridge_scale / theta
        k.symv_upper(self._Q, n, h, z)
        r = diag - k.dot(z, h, n)
        if r < R_MIN:
            r += R_JITTER
            self.jitter_steps += 1
            if r < R_MIN:
                raise NumericalBreakdown(
                    f"r={r - R_JITTER:.3e} at step {time_index} (theta={theta:.3e}); "
                    "duplicate or near-duplicate input?"
                )
        k.grow_inverse(self._Q, n, z, r)
        k.update_coefficients(self._A, n, z, r, target - y)
        self._X[n] = u
        self.n = n + 1
        self.theta_history.append(float(theta))
        self.target_history.append(float(target))
        self.r_history.append(float(r))
        return float(e)

    # -- serialization -----------------------------------------------------
    def snapshot(self) -> dict:
        """Plain-data state: dictionary, A, Q (row-major), codebook, window."""
        return {
            "format": SNAPSHOT_FORMAT,
            "config": self.cfg.to_dict(),
            "step": self.n,
            "dim": self.dim,
            "dictionary": self.dictionary.tolist(),
            "A": self.A.tolist(),
            "Q": self.Q.tolist(),
            "codebook": {
                "gamma": self.codebook.gamma,
                "codewords": list(self.codebook.codewords),
                "counts": list(self.codebook.counts),
            },
            "err_window": [[e, c] for e, c in self._window],
            "theta_history": list(self.theta_history),
            "target_history": list(self.target_history),
        }

    def to_json(self, path=None, indent=None) -> str:
        text = json.dumps(self.snapshot(), indent=indent)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_snapshot(cls, snap: dict, backend=None) -> "KernelFilter":
        if snap.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"unsupported snapshot format {snap.get('format')!r}")
        cfg = FilterConfig.from_dict(snap["config"])
        n = int(snap["step"])
        f = cls(cfg, int(snap["dim"]), capacity=max(n + 1, 2), backend=backend)
        f._X[:n] = np.asarray(snap["dictionary"], dtype=float).reshape(n, f.dim)
        f._A[:n] = snap["A"]
        f._Q[:n, :n] = np.asarray(snap["Q"], dtype=float)
        f.n = n
        cb = snap["codebook"]
        f.codebook = Codebook(cb["gamma"], list(cb["codewords"]), list(cb["counts"]))
        f._window = deque((e, c) for e, c in snap["err_window"])
        f.theta_history = list(snap.get("theta_history", []))
        f.target_history = list(snap.get("target_history", []))
        return f

    @classmethod
    def from_json(cls, text_or_path, backend=None) -> "KernelFilter":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        return cls.from_snapshot(json.loads(text), backend=backend)


FilterState = KernelFilter


def init(u1, d1: float, cfg: FilterConfig, capacity: int = 256, backend=None) -> KernelFilter:
    """Create a filter from its first sample."""
    u1 = np.atleast_1d(np.asarray(u1, dtype=float))
    return KernelFilter(cfg, u1.size, capacity=capacity, backend=backend).start(u1, d1)


def predict(st: KernelFilter, u) -> float:
    return st.predict(u)


def update(st: KernelFilter, u, d: float) -> KernelFilter:
    """Advance ``st`` by one sample in place and return it."""
    st.update(u, d)
    return st


def batch_solve(inputs, desired, theta, cfg: FilterConfig) -> np.ndarray:
    """Closed-form coefficients ``(K + s * diag(1/theta))^-1 desired``.

    ``desired`` are the regression targets (the effective desired values for
    ``target="shifted"``) and ``theta`` the diagonal of the weight matrix.
    """
    U = np.atleast_2d(np.asarray(inputs, dtype=float))
    d = np.asarray(desired, dtype=float)
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0.0):
        raise ValueError("theta weights must be positive")
    if not (U.shape[0] == d.size == th.size):
        raise ValueError("inputs, desired and theta differ in length")
    K = gaussian_kernel_matrix(U, U, cfg.kernel)
    M = K + np.diag(cfg.ridge_scale / th)
    try:
        return np.linalg.solve(M, d)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("batch system is singular") from exc


def regularized_gram(inputs, theta, cfg: FilterConfig) -> np.ndarray:
    """``K + s * diag(1/theta)``; the inverse of a filter's ``Q``."""
    U = np.atleast_2d(np.asarray(inputs, dtype=float))
    K = gaussian_kernel_matrix(U, U, cfg.kernel)
    return K + np.diag(cfg.ridge_scale / np.asarray(theta, dtype=float))
