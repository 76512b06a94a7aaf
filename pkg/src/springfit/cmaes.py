"""Covariance Matrix Adaptation Evolution Strategy.

Standard (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu covariance
updates and cumulative step-size adaptation. Seeded and fully deterministic;
the covariance eigendecomposition is refreshed every generation (decision
vectors here are low-dimensional, so this is cheap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .types import ConfigError


def default_population(dimension: int) -> int:
    return 4 + int(3 * math.log(dimension))


@dataclass
class CmaesSettings:
    population: int | None = None     # None: 4 + floor(3 ln d)
    sigma0: float = 0.3
    max_evaluations: int = 3000
    seed: int = 0
    tolerance: float = 1e-9           # best-f improvement threshold over 20 iterations

    def resolve_population(self, dimension: int) -> int:
        pop = self.population if self.population is not None else default_population(dimension)
        if pop < 4:
            raise ConfigError("population must be at least 4")
        if self.max_evaluations < pop:
            raise ConfigError("max_evaluations must cover at least one population")
        return pop


@dataclass
class CmaesResult:
    best_x: np.ndarray
    best_f: float
    history: list[tuple[int, float]] = field(default_factory=list)  # (evals, best_f)
    evaluations: int = 0
    stop_reason: str = ""


def cmaes_minimize(objective, x0, settings: CmaesSettings) -> CmaesResult:
    """Minimize a black-box function from x0.

    The best-so-far value is monotone non-increasing over the history. Stops
    at the evaluation budget or once the best value improves by less than
    `tolerance` over 20 consecutive generations. Raises on non-finite
    objective values (divergence penalties must be finite).
    """
    mean = np.ascontiguousarray(x0, dtype=np.float64).copy()
    d = mean.shape[0]
    lam = settings.resolve_population(d)
    mu = lam // 2
    w = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
    w = w / w.sum()
    mueff = 1.0 / (w**2).sum()

    cc = (4 + mueff / d) / (d + 4 + 2 * mueff / d)
    cs = (mueff + 2) / (d + mueff + 5)
    c1 = 2 / ((d + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((d + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (d + 1)) - 1) + cs
    chi_n = math.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d**2))

    rng = np.random.default_rng(settings.seed)
    sigma = float(settings.sigma0)
    cov = np.eye(d)
    ps = np.zeros(d)
    pc = np.zeros(d)

    def check(f: float) -> float:
        f = float(f)
        if not math.isfinite(f):
            raise ConfigError("objective returned a non-finite value")
        return f

    best_f = check(objective(mean.copy()))
    best_x = mean.copy()
    evals = 1
    history = [(evals, best_f)]
    gen_best = [best_f]
    stop_reason = "budget"

    while evals + lam <= settings.max_evaluations:
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, 1e-30)
        scale = eigvecs * np.sqrt(eigvals)          # B * D
        inv_sqrt = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T

        z = rng.standard_normal((lam, d))
        y = z @ scale.T
        xs = mean[None, :] + sigma * y
        fs = np.array([check(objective(xs[i].copy())) for i in range(lam)])
        evals += lam

        order = np.argsort(fs, kind="stable")
        if fs[order[0]] < best_f:
            best_f = float(fs[order[0]])
            best_x = xs[order[0]].copy()

        x_old = mean
        sel = xs[order[:mu]]
        mean = w @ sel

        y_mean = (mean - x_old) / sigma
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt @ y_mean)
        hsig = (ps @ ps) / d / (1 - (1 - cs) ** (2 * evals / lam)) < 2 + 4.0 / (d + 1)
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * y_mean

        artmp = (sel - x_old[None, :]) / sigma
        cov = ((1 - c1 - cmu) * cov
               + c1 * (np.outer(pc, pc) + (not hsig) * cc * (2 - cc) * cov)
               + cmu * (artmp.T * w) @ artmp)
        cov = (cov + cov.T) / 2

        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1))

        history.append((evals, best_f))
        gen_best.append(best_f)
        if len(gen_best) > 20 and gen_best[-21] - gen_best[-1] < settings.tolerance:
            stop_reason = "tolerance"
            break

    return CmaesResult(best_x, best_f, history, evals, stop_reason)
