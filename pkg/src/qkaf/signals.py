"""Test signals: Mackey-Glass series, scenario noise models, time-delay
embedding and delimited-text ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np


# -- Mackey-Glass -------------------------------------------------------------


@dataclass(frozen=True)
class MGConfig:
    """Mackey-Glass integration settings.

    ``discard`` is the number of emitted (subsampled) points dropped as a
    transient before the series starts.  ``interp`` selects the half-step
    delay interpolation: ``"linear"`` or ``"hermite"`` (cubic, uses the
    stored derivatives).
    """

    tau: float = 30.0
    dt: float = 0.1
    subsample: int = 6
    s0: float = 1.2
    n_train: int = 1000
    n_test: int = 100
    discard: int = 1000
    interp: str = "hermite"

    def __post_init__(self):
        if not self.tau > 0 or not self.dt > 0:
            raise ValueError("tau and dt must be positive")
        ratio = self.tau / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ValueError(f"tau/dt must be a positive integer, got {ratio!r}")
        if int(self.subsample) != self.subsample or self.subsample < 1:
            raise ValueError("subsample must be a positive integer")
        if self.n_train < 1 or self.n_test < 0 or self.discard < 0:
            raise ValueError("n_train >= 1, n_test >= 0 and discard >= 0 required")
        if self.interp not in ("linear", "hermite"):
            raise ValueError(f"interp must be 'linear' or 'hermite', got {self.interp!r}")

    @property
    def delay_steps(self) -> int:
        return int(round(self.tau / self.dt))


def mg_rhs(s: float, s_tau: float) -> float:
    """ds/dt = 0.2 s(t - tau) / (1 + s(t - tau)^10) - 0.1 s(t)."""
    return 0.2 * s_tau / (1.0 + s_tau**10) - 0.1 * s


def mackey_glass(cfg: MGConfig = MGConfig(), n: int = None) -> np.ndarray:
    """Integrate the Mackey-Glass delay equation with RK4.

    The history is the constant ``s0`` for ``t <= 0``.  Delayed values at
    the RK4 half steps come from the stored trajectory by interpolation.
    Returns ``n`` points (default ``n_train + n_test``) sampled every
    ``subsample`` steps after dropping ``discard`` of them.
    """
    if n is None:
        n = cfg.n_train + cfg.n_test
    D = cfg.delay_steps
    h = cfg.dt
    steps = (cfg.discard + n) * cfg.subsample
    # x[k + D] holds s(k dt); indices < D are the constant history
    x = np.empty(steps + D + 1)
    f = np.zeros(steps + D + 1)  # stored derivatives; zero on the constant history
    x[: D + 1] = cfg.s0
    hermite = cfg.interp == "hermite"
    for k in range(steps):
        i = k + D
        s = x[i]
        a, b = x[i - D], x[i - D + 1]
        k1 = mg_rhs(s, a)
        f[i] = k1
        if hermite and k >= D:
            # cubic Hermite; intervals inside the constant history stay flat
            mid = 0.5 * (a + b) + 0.125 * h * (f[i - D] - f[i - D + 1])
        else:
            mid = 0.5 * (a + b)
        k2 = mg_rhs(s + 0.5 * h * k1, mid)
        k3 = mg_rhs(s + 0.5 * h * k2, mid)
        k4 = mg_rhs(s + h * k3, b)
        x[i + 1] = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    traj = x[D:]  # s(0), s(dt), ...
    start = cfg.discard * cfg.subsample
    return traj[start : start + n * cfg.subsample : cfg.subsample].copy()


# -- noise ----------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    """N(a, mu): mean ``a``, variance ``mu``."""

    a: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError("variance mu must be >= 0")

    def sample(self, rng, size=None):
        return rng.normal(self.a, math.sqrt(self.mu), size)

    @property
    def mean(self):
        return self.a

    @property
    def var(self):
        return self.mu


@dataclass(frozen=True)
class MixedGaussian:
    """varsigma N(a1, mu1) + (1 - varsigma) N(a2, mu2)."""

    varsigma: float
    a1: float
    a2: float
    mu1: float
    mu2: float

    def __post_init__(self):
        if not 0.0 <= self.varsigma <= 1.0:
            raise ValueError("varsigma must be in [0, 1]")
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise ValueError("mixture variances must be positive")

    def sample(self, rng, size=None):
        first = rng.random(size) < self.varsigma
        z = rng.standard_normal(size)
        return np.where(
            first, self.a1 + math.sqrt(self.mu1) * z, self.a2 + math.sqrt(self.mu2) * z
        ) if size is not None else float(
            self.a1 + math.sqrt(self.mu1) * z if first else self.a2 + math.sqrt(self.mu2) * z
        )

    @property
    def mean(self):
        return self.varsigma * self.a1 + (1 - self.varsigma) * self.a2

    @property
    def var(self):
        w = self.varsigma
        m2 = w * (self.mu1 + self.a1**2) + (1 - w) * (self.mu2 + self.a2**2)
        return m2 - self.mean**2


@dataclass(frozen=True)
class Rayleigh:
    """Rayleigh with scale ``chi``; ``center`` subtracts the analytic mean."""

    chi: float = 3.0
    center: bool = False

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError("chi must be positive")

    def sample(self, rng, size=None):
        u = rng.random(size)
        v = self.chi * np.sqrt(-2.0 * np.log1p(-u))
        if self.center:
            v = v - self.chi * math.sqrt(math.pi / 2.0)
        return v if size is not None else float(v)

    @property
    def mean(self):
        return 0.0 if self.center else self.chi * math.sqrt(math.pi / 2.0)

    @property
    def var(self):
        return (2.0 - math.pi / 2.0) * self.chi**2


@dataclass(frozen=True)
class Mixture:
    """weight_rayleigh R(chi) + (1 - weight_rayleigh) M(...), drawn by
    component selection."""

    weight_rayleigh: float
    rayleigh: Rayleigh
    mixed: MixedGaussian

    def __post_init__(self):
        if not 0.0 <= self.weight_rayleigh <= 1.0:
            raise ValueError("weight_rayleigh must be in [0, 1]")

    def sample(self, rng, size=None):
        pick = rng.random(size) < self.weight_rayleigh
        r = self.rayleigh.sample(rng, size)
        m = self.mixed.sample(rng, size)
        return np.where(pick, r, m) if size is not None else float(r if pick else m)

    @property
    def mean(self):
        w = self.weight_rayleigh
        return w * self.rayleigh.mean + (1 - w) * self.mixed.mean


NoiseModel = Union[Gaussian, MixedGaussian, Rayleigh, Mixture]


def sample_noise(m: NoiseModel, rng, size=None):
    """One draw (``size=None``) or an array of draws from ``m``."""
    return m.sample(rng, size)


def scenario_noise(k: int, center: bool = False) -> NoiseModel:
    """Noise model of experimental scenario ``k``.

    1: R(3); 2: M(0.95, 0, 0, 0.01, 64); 3: N(0, 0.01);
    4: 0.2 R(3) + 0.8 M(0.8, 0, 0, 0.01, 64).
    """
    if k == 1:
        return Rayleigh(3.0, center)
    if k == 2:
        return MixedGaussian(0.95, 0.0, 0.0, 0.01, 64.0)
    if k == 3:
        return Gaussian(0.0, 0.01)
    if k == 4:
        return Mixture(0.2, Rayleigh(3.0, center), MixedGaussian(0.8, 0.0, 0.0, 0.01, 64.0))
    raise ValueError(f"scenario must be 1..4, got {k!r}")


SCENARIO_NAMES = {1: "rayleigh", 2: "mixed_gaussian", 3: "gaussian", 4: "mixture"}


def noise_from_dict(d: dict) -> NoiseModel:
    """Build a noise model from ``{"type": ..., **params}``."""
    d = dict(d)
    kind = str(d.pop("type", "")).lower()
    if kind == "gaussian":
        return Gaussian(**d)
    if kind in ("mixed_gaussian", "mixedgaussian"):
        return MixedGaussian(**d)
    if kind == "rayleigh":
        return Rayleigh(**d)
    if kind == "mixture":
        return Mixture(d["weight_rayleigh"], Rayleigh(**d["rayleigh"]), MixedGaussian(**d["mixed"]))
    raise ValueError(f"unknown noise type {kind!r}")


# -- embedding ------------------------------------------------------------


@dataclass(frozen=True)
class Embedding:
    dim: int = 7
    horizon: int = 1

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("embedding dim must be a positive integer")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")

    @property
    def span(self) -> int:
        """Series points consumed by one (input, desired) pair."""
        return self.dim + self.horizon


def embed(series, emb: Embedding = Embedding()):
    """Time-delay embedding.

    ``inputs[i] = s[i : i + dim]`` and ``desired[i] = s[i + dim - 1 + horizon]``.
    """
    s = np.asarray(series, dtype=float).ravel()
    n = s.size - emb.dim - emb.horizon + 1
    if n < 1:
        raise ValueError(
            f"series of length {s.size} too short for dim={emb.dim}, horizon={emb.horizon}"
        )
    inputs = np.lib.stride_tricks.sliding_window_view(s, emb.dim)[:n].copy()
    desired = s[emb.dim - 1 + emb.horizon : emb.dim - 1 + emb.horizon + n].copy()
    return inputs, desired


# -- delimited text -------------------------------------------------------


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_rows(path: Path):
    text = path.read_text()
    lines = text.splitlines()
    sample = next((ln for ln in lines if ln.strip()), "")
    delim = "\t" if "\t" in sample else ","
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(lines, delimiter=delim))]
    return [(i, [c.strip() for c in r]) for i, r in rows if any(c.strip() for c in r)]


def load_series(path, column=0) -> np.ndarray:
    """Read one numeric column from a comma- or tab-separated file.

    A first row with any non-numeric cell is taken as the header.
    ``column`` is a header name or a zero-based index.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    rows = _read_rows(path)
    if not rows:
        raise ValueError(f"{path}: empty series")
    header = None
    if not all(_is_number(c) for c in rows[0][1]):
        header = rows[0][1]
        rows = rows[1:]
    if isinstance(column, str) and not column.lstrip("-").isdigit():
        if header is None or column not in header:
            avail = ", ".join(header) if header else "(no header row)"
            raise KeyError(f"{path}: column {column!r} not found; available columns: {avail}")
        idx = header.index(column)
    else:
        idx = int(column)
        width = len(header) if header else (len(rows[0][1]) if rows else 0)
        if header is not None and not 0 <= idx < width:
            raise KeyError(f"{path}: column index {idx} out of range; available columns: {', '.join(header)}")
    out = []
    for lineno, r in rows:
        if idx >= len(r):
            raise ValueError(f"{path}: row {lineno}: missing column {column!r}")
        try:
            out.append(float(r[idx]))
        except ValueError:
            raise ValueError(f"{path}: row {lineno}: non-numeric value {r[idx]!r}") from None
    if not out:
        raise ValueError(f"{path}: empty series (header only)")
    return np.asarray(out)


def dump_series(path, series, column: str = "value"):
    """Write a series as a one-column CSV with header, readable by
    :func:`load_series`."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([column])
        for v in np.asarray(series, dtype=float).ravel():
            w.writerow([repr(float(v))])
    return path
