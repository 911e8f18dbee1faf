"""Monte Carlo aggregation and statistical verification.

Estimates carry their accumulated moments so partial results merge
associatively; every bound comparison follows one policy, pass when
estimate <= bound + 3 stderr + declared bias. Work is split into
fixed-size path chunks reduced in index order, so reports are identical
for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats as sp_stats

from . import engine
from .comparison import beta
from .coupling import CouplingConfig, CouplingKind, coupling_probability_bound
from .errors import InvalidInput
from .manifolds import ManifoldModel
from .walk import Schedule

CHUNK = 2048


# ---------------------------------------------------------------------------
# Estimates and reports
# ---------------------------------------------------------------------------

@dataclass
class McEstimate:
    """Sample mean with standard error and a 95% interval.

    Carries first/second moment sums (repr-hidden) so that merging partial
    estimates is exact and order-independent up to float associativity.
    """
    n: int
    mean: float
    stderr: float
    ci95: tuple[float, float]
    sum1: float = field(default=0.0, repr=False)
    sum2: float = field(default=0.0, repr=False)
    is_proportion: bool = field(default=False, repr=False)

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "McEstimate":
        x = np.asarray(x, dtype=float)
        return cls.from_sums(len(x), float(np.sum(x)), float(np.sum(x * x)))

    @classmethod
    def from_sums(cls, n: int, s1: float, s2: float,
                  proportion: bool = False) -> "McEstimate":
        if n <= 0:
            raise InvalidInput("estimate needs at least one sample")
        mean = s1 / n
        var = max(s2 / n - mean * mean, 0.0)
        stderr = math.sqrt(var / n)
        if proportion and (mean < 0.1 or mean > 0.9):
            ci = _wilson_interval(s1, n)
        else:
            ci = (mean - 1.96 * stderr, mean + 1.96 * stderr)
        return cls(n, mean, stderr, ci, s1, s2, proportion)

    @classmethod
    def from_bernoulli(cls, successes: int, n: int) -> "McEstimate":
        return cls.from_sums(n, float(successes), float(successes),
                             proportion=True)

    def merge(self, other: "McEstimate") -> "McEstimate":
        return McEstimate.from_sums(self.n + other.n, self.sum1 + other.sum1,
                                    self.sum2 + other.sum2,
                                    self.is_proportion or other.is_proportion)

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "stderr": self.stderr,
                "ci95": [self.ci95[0], self.ci95[1]]}


def _wilson_interval(successes: float, n: int, z: float = 1.96):
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(center - half, 0.0), min(center + half, 1.0))


def merge_estimates(parts: Sequence[McEstimate]) -> McEstimate:
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out


@dataclass
class VerificationReport:
    """One verified bound: estimate against bound with the 3-stderr policy."""
    experiment_id: str
    estimate: McEstimate
    bound: float
    bias: float
    metadata: dict

    @property
    def passed(self) -> bool:
        return self.estimate.mean <= self.bound + 3.0 * self.estimate.stderr \
            + self.bias

    @property
    def margin(self) -> float:
        return self.bound + 3.0 * self.estimate.stderr - self.estimate.mean

    def to_dict(self) -> dict:
        return {
            "id": self.experiment_id,
            "params": self.metadata.get("params", {}),
            "estimate": self.estimate.to_dict(),
            "bound": self.bound,
            "pass": self.passed,
            "bias_terms": {"declared": self.bias},
            "seed": self.metadata.get("seed"),
            "runtime_ms": self.metadata.get("runtime_ms"),
        }


# ---------------------------------------------------------------------------
# Thread-parallel map over fixed path chunks
# ---------------------------------------------------------------------------

def map_path_chunks(n_paths: int, fn: Callable[[range], dict],
                    workers: int = 1, chunk: int = CHUNK) -> list[dict]:
    """Apply fn to fixed path ranges; results returned in index order.

    Chunk boundaries do not depend on the worker count, and each path's
    randomness is keyed by its global index, so the reduced result is
    identical for any ``workers``.
    """
    if n_paths <= 0:
        raise InvalidInput("n_paths must be positive")
    ranges = [range(i, min(i + chunk, n_paths))
              for i in range(0, n_paths, chunk)]
    if workers <= 1 or len(ranges) == 1:
        return [fn(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, ranges))


def _concat(results: list[dict], key: str) -> np.ndarray:
    return np.concatenate([r[key] for r in results])


# ---------------------------------------------------------------------------
# Verification estimators
# ---------------------------------------------------------------------------

def estimate_coupling_survival(model: ManifoldModel, config: CouplingConfig,
                               n_paths: int, *, workers: int = 1,
                               bias: float = 0.0,
                               experiment_id: str = "coupling-survival"
                               ) -> VerificationReport:
    """Fraction of reflection-coupled pairs that never meet by the horizon,
    against the normal-mass bound at d0 / (2 sqrt(beta(T - t1)))."""
    if config.kind is not CouplingKind.REFLECTION:
        raise InvalidInput("survival estimate requires the reflection kind")
    sched = config.schedule()
    d0 = float(model.distance(config.t1, config.start1, config.start2))

    def fn(paths: range) -> dict:
        res = engine.coupled_chunk(
            model, sched, config.start1, config.start2, config.seed, paths,
            kind=config.kind.value, delta_couple=config.delta_couple,
            stick=config.stick_after_coupling, k=config.k,
            use_drift=config.use_drift)
        return {"survival": res["survival"]}

    survival = _concat(map_path_chunks(n_paths, fn, workers), "survival")
    est = McEstimate.from_bernoulli(int(np.count_nonzero(survival)),
                                    len(survival))
    bound = coupling_probability_bound(d0, config.k, config.t2 - config.t1)
    meta = {"params": {"alpha": config.alpha, "delta_couple": config.delta_couple,
                       "k": config.k, "d0": d0, "n_paths": n_paths,
                       "horizon": config.t2 - config.t1,
                       "manifold": model.describe()},
            "seed": config.seed}
    return VerificationReport(experiment_id, est, bound, bias, meta)


def check_contraction(model: ManifoldModel, config: CouplingConfig,
                      n_paths: int, *, coefficient: float = 5.0,
                      workers: int = 1,
                      experiment_id: str = "contraction") -> VerificationReport:
    """Largest increase of e^{k(t-t1)/2} d_{g(t)} over skeleton pairs s <= t,
    across all paths, against coefficient * alpha.

    The reported estimate's mean is the max statistic (stderr zero); the
    per-path maxima distribution is recorded in metadata.
    """
    if config.kind is not CouplingKind.PARALLEL_TRANSPORT:
        raise InvalidInput("contraction check requires the parallel kind")
    sched = config.schedule()

    def fn(paths: range) -> dict:
        res = engine.coupled_chunk(
            model, sched, config.start1, config.start2, config.seed, paths,
            kind=config.kind.value, delta_couple=config.delta_couple,
            stick=config.stick_after_coupling, k=config.k,
            use_drift=config.use_drift, contraction=True)
        return {"contraction_max": res["contraction_max"]}

    maxima = _concat(map_path_chunks(n_paths, fn, workers), "contraction_max")
    worst = float(np.max(maxima))
    est = McEstimate(n=n_paths, mean=worst, stderr=0.0, ci95=(worst, worst),
                     sum1=worst * n_paths, sum2=worst * worst * n_paths)
    bound = coefficient * config.alpha
    meta = {"params": {"alpha": config.alpha, "k": config.k,
                       "coefficient": coefficient, "n_paths": n_paths,
                       "statistic": "max",
                       "per_path_mean": float(np.mean(maxima)),
                       "manifold": model.describe()},
            "seed": config.seed}
    return VerificationReport(experiment_id, est, bound, 0.0, meta)


def check_gradient_estimate(model: ManifoldModel, config: CouplingConfig,
                            f: Callable[[np.ndarray], np.ndarray],
                            osc: float, n_paths: int, *, workers: int = 1,
                            experiment_id: str = "gradient"
                            ) -> VerificationReport:
    """|E f(X1(T)) - E f(X2(T))| via the common-noise coupled pair, against
    d0 osc / sqrt(2 pi beta(T - t1))."""
    sched = config.schedule()
    d0 = float(model.distance(config.t1, config.start1, config.start2))

    def fn(paths: range) -> dict:
        res = engine.coupled_chunk(
            model, sched, config.start1, config.start2, config.seed, paths,
            kind=config.kind.value, delta_couple=config.delta_couple,
            stick=config.stick_after_coupling, k=config.k,
            use_drift=config.use_drift)
        diff = np.asarray(f(res["end1"]), dtype=float) \
            - np.asarray(f(res["end2"]), dtype=float)
        return {"diff": diff}

    diffs = _concat(map_path_chunks(n_paths, fn, workers), "diff")
    signed = McEstimate.from_samples(diffs)
    est = McEstimate(n=signed.n, mean=abs(signed.mean), stderr=signed.stderr,
                     ci95=signed.ci95, sum1=signed.sum1, sum2=signed.sum2)
    horizon = config.t2 - config.t1
    bound = d0 * osc / math.sqrt(2.0 * math.pi * beta(horizon, config.k))
    meta = {"params": {"alpha": config.alpha, "delta_couple": config.delta_couple,
                       "k": config.k, "d0": d0, "osc": osc,
                       "n_paths": n_paths, "horizon": horizon,
                       "signed_mean": signed.mean,
                       "manifold": model.describe()},
            "seed": config.seed}
    return VerificationReport(experiment_id, est, bound, 0.0, meta)


# ---------------------------------------------------------------------------
# Distribution diagnostics
# ---------------------------------------------------------------------------

@dataclass
class KsResult:
    statistic: float
    threshold: float
    level: float
    n: int

    @property
    def passed(self) -> bool:
        return self.statistic <= self.threshold


def ks_statistic(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray],
                 level: float = 0.01) -> KsResult:
    """sup |F_emp - F| with the asymptotic Kolmogorov threshold at ``level``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < 100:
        raise InvalidInput("ks_statistic needs at least 100 samples")
    F = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    up = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    stat = float(max(np.max(up - F), np.max(F - lo)))
    threshold = float(sp_stats.kstwobign.isf(level) / math.sqrt(n))
    return KsResult(stat, threshold, level, n)


def wasserstein1_1d(a: np.ndarray, b: np.ndarray) -> float:
    """Order-1 transport distance of two empirical laws on the line.

    Equal sizes: mean absolute difference of sorted samples; otherwise both
    empirical quantile functions are evaluated on a common midpoint grid.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise InvalidInput("wasserstein1_1d: empty input")
    if len(a) == len(b):
        return float(np.mean(np.abs(a - b)))
    n = max(len(a), len(b))
    q = (np.arange(n) + 0.5) / n
    qa = np.quantile(a, q, method="inverted_cdf")
    qb = np.quantile(b, q, method="inverted_cdf")
    return float(np.mean(np.abs(qa - qb)))


def gaussian_cdf(mean: float, var: float) -> Callable[[np.ndarray], np.ndarray]:
    sd = math.sqrt(var)
    return lambda x: special.ndtr((np.asarray(x, dtype=float) - mean) / sd)


def wrapped_gaussian_cdf(mu: float, var: float,
                         n_wraps: int | None = None
                         ) -> Callable[[np.ndarray], np.ndarray]:
    """CDF on (-pi, pi] of a Gaussian wrapped around the circle."""
    sd = math.sqrt(var)
    if n_wraps is None:
        n_wraps = int(math.ceil(4.0 * sd / (2 * math.pi))) + 3

    def cdf(theta):
        theta = np.asarray(theta, dtype=float)
        total = np.zeros_like(theta)
        for j in range(-n_wraps, n_wraps + 1):
            shift = 2 * math.pi * j
            total = total + (special.ndtr((theta + shift - mu) / sd)
                             - special.ndtr((-math.pi + shift - mu) / sd))
        return np.clip(total, 0.0, 1.0)

    return cdf


def reference_quantiles(cdf: Callable[[np.ndarray], np.ndarray], n: int,
                        lo: float, hi: float, grid: int = 20001) -> np.ndarray:
    """Quantiles at midpoint levels by inverting a CDF on a dense grid."""
    xs = np.linspace(lo, hi, grid)
    Fs = np.asarray(cdf(xs), dtype=float)
    q = (np.arange(n) + 0.5) / n
    return np.interp(q, Fs, xs)


def circle_angles(points: np.ndarray) -> np.ndarray:
    """Angles in (-pi, pi] of points on the embedded unit circle."""
    return np.arctan2(points[..., 1], points[..., 0])


def convergence_diagnostic(model_factory: Callable[[float], ManifoldModel],
                           t1: float, t2: float, start: np.ndarray,
                           alphas: Sequence[float], n_paths: int, seed: int,
                           observable: Callable[[np.ndarray], np.ndarray],
                           reference_cdf: Callable[[np.ndarray], np.ndarray] | None,
                           reference_support: tuple[float, float],
                           workers: int = 1, level: float = 0.01) -> list[dict]:
    """Per-alpha endpoint-law diagnostics against a reference distribution.

    Returns one row per alpha with the transport distance to the reference
    quantiles and, when a reference CDF is supplied, the KS statistic.
    """
    if any(a2 >= a1 for a1, a2 in zip(alphas, alphas[1:])):
        raise InvalidInput("alphas must be strictly decreasing")
    rows = []
    for alpha in alphas:
        model = model_factory(alpha)
        sched = Schedule(t1, t2, alpha)

        def fn(paths: range) -> dict:
            res = engine.walk_chunk(model, sched, start, seed, paths)
            return {"end": res["end"]}

        ends = _concat(map_path_chunks(n_paths, fn, workers), "end")
        samples = np.asarray(observable(ends), dtype=float)
        row = {"alpha": alpha, "n": len(samples)}
        if reference_cdf is not None:
            ref_q = reference_quantiles(reference_cdf, len(samples),
                                        *reference_support)
            row["w1"] = wasserstein1_1d(samples, ref_q)
            ks = ks_statistic(samples, reference_cdf, level)
            row["ks_statistic"] = ks.statistic
            row["ks_threshold"] = ks.threshold
            row["ks_pass"] = ks.passed
        rows.append(row)
    return rows
