"""Self-checks of the criterion properties and filter identities.

Each check returns a :class:`Check` with a verdict and the worst observed
deviation.  They back the ``kaf properties`` verb; the test suite carries
its own independent oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analysis import LyapunovSystem, complexity_delta, lyapunov_iterate, lyapunov_steady_state, theta_cost
from .core import GGDParams, KernelParams, ggd_density
from .criteria import (
    CriterionParams,
    batch_qgmee_fixed_point,
    empirical_ip,
    large_beta_ip_approx,
    parzen_density,
    qgmee_normal_equations,
    quantized_ip,
)
from .filters import FilterConfig, batch_solve, init, mee_equivalent, regularized_gram
from .quantizer import Codebook, build_codebook
from .signals import Embedding, MGConfig, embed, mackey_glass


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: worst={self.worst:.3e} {self.detail}".rstrip()


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def check_identity(rng) -> Check:
    worst = 0.0
    for _ in range(100):
        L = int(rng.integers(1, 51))
        e = rng.normal(size=L) * rng.uniform(0.1, 3)
        p = GGDParams(rng.uniform(0.2, 4), rng.uniform(0.2, 8))
        cb = build_codebook(e, 0.0)
        worst = max(worst, _rel(quantized_ip(e, cb, p), empirical_ip(e, p)))
    return Check("property-1 gamma=0 identity", worst <= 1e-14, worst)


def check_bound(rng) -> Check:
    worst_excess, worst_eq = -np.inf, 0.0
    for _ in range(1000):
        L = int(rng.integers(1, 40))
        e = rng.normal(size=L) * rng.uniform(0.01, 5)
        p = GGDParams(rng.uniform(0.2, 4), rng.uniform(0.2, 8))
        cb = build_codebook(e, rng.uniform(0, 1))
        worst_excess = max(worst_excess, quantized_ip(e, cb, p) - p.peak)
        x = rng.normal()
        same = np.full(L, x)
        worst_eq = max(worst_eq, _rel(quantized_ip(same, build_codebook(same, 0.0), p), p.peak))
    ok = worst_excess <= 0.0 and worst_eq <= 1e-14
    return Check("property-2 bound", ok, max(worst_excess, worst_eq))


def check_decomposition(rng) -> Check:
    worst = 0.0
    for _ in range(100):
        e = rng.normal(size=int(rng.integers(2, 50)))
        p = GGDParams(rng.uniform(0.2, 4), rng.uniform(0.2, 4))
        cb = build_codebook(e, rng.uniform(0, 0.5))
        a = np.asarray(cb.counts, float) / e.size
        dec = float(np.sum(a * parzen_density(np.asarray(cb.codewords), e, p)))
        worst = max(worst, _rel(dec, quantized_ip(e, cb, p)), abs(a.sum() - 1.0))
    return Check("property-3 decomposition", worst <= 1e-12, worst)


def check_gcc(rng) -> Check:
    worst = 0.0
    for _ in range(100):
        e = rng.normal(size=int(rng.integers(1, 50)))
        p = GGDParams(rng.uniform(0.2, 4), rng.uniform(0.2, 4))
        cb = Codebook(1.0, [0.0], [e.size])
        gcc = float(np.mean(ggd_density(e, p)))
        worst = max(worst, _rel(quantized_ip(e, cb, p), gcc))
    return Check("property-4 GCC reduction", worst <= 1e-14, worst)


def check_asymptotics(rng) -> Check:
    bad = 0
    for _ in range(20):
        e = rng.normal(size=int(rng.integers(2, 30)))
        a = rng.uniform(0.5, 3)
        cb = build_codebook(e, 0.1)
        gaps = []
        for b in (10.0, 100.0, 1000.0):
            p = GGDParams(a, b)
            exact = quantized_ip(e, cb, p)
            gaps.append(abs(large_beta_ip_approx(e, cb, p) - exact) / exact)
        bad += not (gaps[0] > gaps[1] > gaps[2])
    return Check("property-5 large-beta asymptotics", bad == 0, float(bad), f"non-decreasing={bad}/20")


def check_fixed_point(rng) -> Check:
    worst = 0.0
    for _ in range(20):
        m, n = int(rng.integers(1, 6)), int(rng.integers(10, 51))
        U = rng.normal(size=(n, m))
        d = U @ rng.normal(size=m) + 0.1 * rng.normal(size=n)
        p = GGDParams(rng.uniform(1, 3), rng.uniform(0.5, 3))
        cb = build_codebook(d - U @ np.linalg.lstsq(U, d, rcond=None)[0], 0.05)
        w = batch_qgmee_fixed_point(U, d, cb, p)
        M, N = qgmee_normal_equations(w, U, d, cb, p)
        worst = max(worst, np.linalg.norm(M - N @ w) / np.linalg.norm(M))
    return Check("property-6 fixed point", worst <= 1e-8, worst)


def _mg_pairs(n):
    s = mackey_glass(MGConfig(n_train=n, n_test=0), n + 7)
    return embed(s, Embedding(7, 1))


def check_reductions(rng) -> Check:
    U, d = _mg_pairs(200)
    d = d + 0.05 * rng.standard_normal(d.size)
    crit = CriterionParams(GGDParams(2.0, math.sqrt(2.0) * 0.7), window_len=20)
    k = KernelParams(1.0)

    def preds(cfg):
        f = init(U[0], d[0], cfg, capacity=len(d))
        out = []
        for i in range(1, len(d)):
            out.append(f.predict(U[i]))
            f.update(U[i], d[i])
        return np.asarray(out)

    pairs = [
        (FilterConfig("QKRGMEE", k, crit, gamma=0.0), FilterConfig("KRGMEE", k, crit)),
        (FilterConfig("QKRMEE", k, replace(crit, mee_sigma=0.7), gamma=0.0), FilterConfig("KRMEE", k, replace(crit, mee_sigma=0.7))),
    ]
    q = FilterConfig("QKRGMEE", k, crit, gamma=0.05)
    pairs.append((q, mee_equivalent(q)))
    worst = 0.0
    for a, b in pairs:
        pa, pb = preds(a), preds(b)
        worst = max(worst, float(np.max(np.abs(pa - pb)) / max(1.0, np.max(np.abs(pb)))))
    return Check("reduction chain", worst <= 1e-10, worst)


def check_block_inverse(rng) -> Check:
    U, d = _mg_pairs(30)
    cfg = FilterConfig("QKRGMEE", criterion=CriterionParams(window_len=10), gamma=0.02)
    f = init(U[0], d[0], cfg)
    worst = 0.0
    for i in range(1, 30):
        f.update(U[i], d[i] + 0.1 * rng.standard_normal())
        if f.n in (2, 5, 10):
            G = regularized_gram(U[: f.n], f.theta_history, cfg)
            worst = max(worst, float(np.max(np.abs(f.Q @ G - np.eye(f.n)))))
    A = batch_solve(U[:30], f.target_history, f.theta_history, cfg)
    worst = max(worst, float(np.max(np.abs(A - f.A)) / np.max(np.abs(A))))
    return Check("block inverse / batch agreement", worst <= 1e-8, worst)


def check_lyapunov(rng) -> Check:
    res, agree = 0.0, 0.0
    for _ in range(20):
        m = int(rng.integers(1, 11))
        R = rng.normal(size=(m, m))
        R *= rng.uniform(0.1, 0.95) / max(np.max(np.abs(np.linalg.eigvals(R))), 1e-12)
        B = rng.normal(size=(m, m))
        sys_ = LyapunovSystem(R, B @ B.T)
        T = lyapunov_steady_state(sys_)
        res = max(res, sys_.residual(T) / np.linalg.norm(sys_.Xi))
        agree = max(agree, np.max(np.abs(T - lyapunov_iterate(sys_, 500))) / max(1.0, np.max(np.abs(T))))
    ok = res <= 1e-10 and agree <= 1e-8
    return Check("lyapunov closed form", ok, max(res, agree), f"residual={res:.2e} iterate={agree:.2e}")


def check_complexity(rng) -> Check:
    bad = 0
    for L in range(1, 101):
        for H in range(1, 21):
            rows = {v: theta_cost(L, H, v) for v in ("KRMEE", "QKRMEE", "KRGMEE", "QKRGMEE")}
            bad += (rows["KRMEE"].mults, rows["KRMEE"].adds, rows["KRMEE"].exps) != (8 * L - 8, 3 * L - 3, 4 * L - 4)
            bad += (rows["QKRMEE"].mults, rows["QKRMEE"].adds, rows["QKRMEE"].exps) != (9 * H, 3 * H - 1, 4 * H)
            bad += (rows["KRGMEE"].mults, rows["KRGMEE"].adds, rows["KRGMEE"].exps) != (9 * L - 9, 4 * L - 4, 6 * L - 6)
            bad += (rows["QKRGMEE"].mults, rows["QKRGMEE"].adds, rows["QKRGMEE"].exps) != (10 * H, 4 * L - 1, 6 * H)
            # the MEE saving is the difference of the two table rows
            bad += complexity_delta(L, H, "MEE") != rows["KRMEE"].total - rows["QKRMEE"].total
            bad += complexity_delta(L, H, "GMEE") != 19 * L - 18 - 20 * H
    return Check("complexity counters", bad == 0, float(bad))


CHECKS = (
    check_identity,
    check_bound,
    check_decomposition,
    check_gcc,
    check_asymptotics,
    check_fixed_point,
    check_reductions,
    check_block_inverse,
    check_lyapunov,
    check_complexity,
)


def run_all(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [c(rng) for c in CHECKS]
