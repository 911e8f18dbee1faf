"""One-dimensional comparison objects.

The Ornstein-Uhlenbeck process dU = -(k/2) U dt + 2 dB with its exact
Gaussian transitions, the meeting-probability helpers chi and beta, the
radial comparison process with drift phi + psi, and the integral test that
decides explosion of the one-dimensional comparison diffusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from . import rng
from .errors import InvalidInput

_SMALL_K = 1e-8


def chi(a):
    """Two-sided standard normal mass: P(|N(0,1)| <= a) = erf(a / sqrt 2)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise InvalidInput("chi is defined for nonnegative arguments")
    out = special.erf(a / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def beta(t, k: float):
    """(e^{k t} - 1)/k, continuously extended through k = 0 by t."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInput("beta is defined for nonnegative times")
    if abs(k) < _SMALL_K:
        kt = k * t
        out = t * (1.0 + kt / 2.0 + kt * kt / 6.0)
    else:
        out = np.expm1(k * t) / k
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OUParams:
    """Initial value, decay constant and start time of the OU process."""
    a: float
    k: float
    t1: float = 0.0

    def __post_init__(self):
        if self.a < 0:
            raise InvalidInput("OU initial value must be nonnegative")


def _ou_transition(k: float, h: float) -> tuple[float, float]:
    """Decay factor and transition standard deviation over one step h."""
    decay = math.exp(-k * h / 2.0)
    if abs(k) < _SMALL_K:
        var = 4.0 * h * (1.0 - k * h / 2.0 + (k * h) ** 2 / 6.0)
    else:
        var = 4.0 * (-math.expm1(-k * h)) / k
    return decay, math.sqrt(var)


def simulate_ou(params: OUParams, h: float, horizon: float,
                stream: np.random.Generator) -> np.ndarray:
    """One OU path on the grid t1 + j h via exact Gaussian transitions."""
    if h <= 0 or horizon <= 0:
        raise InvalidInput("need positive step and horizon")
    n = int(math.ceil(horizon / h - 1e-9))
    decay, sd = _ou_transition(params.k, h)
    path = np.empty(n + 1)
    path[0] = params.a
    shocks = sd * stream.standard_normal(n)
    for j in range(n):
        path[j + 1] = decay * path[j] + shocks[j]
    return path


@dataclass
class OuSurvival:
    """Monte Carlo estimate of P(inf U > 0) with its analytic value."""
    n_paths: int
    estimate: float
    stderr: float
    analytic: float
    h: float

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.estimate - 1.96 * self.stderr,
                self.estimate + 1.96 * self.stderr)


def ou_survival_probability(params: OUParams, horizon: float, n_paths: int,
                            h: float, seed: int = 0,
                            chunk: int = 1024) -> OuSurvival:
    """Fraction of discretized OU paths whose grid infimum stays positive.

    The grid infimum underestimates barrier hits, so the estimate carries a
    known O(sqrt h) positive bias; the analytic value is
    chi(a / (2 sqrt(beta(horizon)))).
    """
    if n_paths < 1000:
        raise InvalidInput("need at least 1000 paths")
    if params.a == 0.0:
        return OuSurvival(n_paths, 0.0, 0.0,
                          0.0, h)
    n = int(math.ceil(horizon / h - 1e-9))
    decay, sd = _ou_transition(params.k, h)
    survived = 0
    done = 0
    index = 0
    while done < n_paths:
        b = min(chunk, n_paths - done)
        values = np.full(b, params.a)
        alive = np.ones(b, dtype=bool)
        streams = [rng.stream(seed, rng.PURPOSE_OU, index + i)
                   for i in range(b)]
        shocks = np.empty((b, n))
        for i, s in enumerate(streams):
            shocks[i] = s.standard_normal(n)
        for j in range(n):
            values = decay * values + sd * shocks[:, j]
            alive &= values > 0.0
        survived += int(np.count_nonzero(alive))
        done += b
        index += b
    p = survived / n_paths
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / n_paths)
    analytic = chi(params.a / (2.0 * math.sqrt(beta(horizon, params.k))))
    return OuSurvival(n_paths, p, stderr, analytic, h)


# ---------------------------------------------------------------------------
# Radial comparison process
# ---------------------------------------------------------------------------

def _cutoff_bridge(s: np.ndarray) -> np.ndarray:
    """Monotone cubic joining value 2 / slope -2 at s=0 to 0 / 0 at s=1."""
    return 2.0 * (s - 1.0) ** 2 * (s + 1.0)


@dataclass(frozen=True)
class RadialComparisonSpec:
    """Drift data for the radial comparison process.

    ``b`` is a locally bounded nonnegative function on [0, inf);
    phi(r) = c0 + (1/2) int_0^r b, and psi is the nonincreasing locally
    Lipschitz cutoff equal to 2/(r - 2 r0) on (2 r0, 2 r0 + 1], joined by a
    monotone cubic to 0 on [2 r0 + 2, inf).
    """
    b: Callable[[np.ndarray], np.ndarray]
    c0: float = 1.0
    r0: float = 0.5

    def __post_init__(self):
        if self.c0 <= 0 or self.r0 <= 0:
            raise InvalidInput("c0 and r0 must be positive")

    def b_integral(self, r) -> np.ndarray:
        """int_0^r b by composite trapezoid on a fine grid."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        rmax = float(np.max(r)) if r.size else 0.0
        if rmax <= 0.0:
            out = np.zeros_like(r)
            return float(out) if scalar else out
        n = max(64, int(rmax * 256))
        grid = np.linspace(0.0, rmax, n + 1)
        vals = np.asarray(self.b(grid), dtype=float)
        if np.any(~np.isfinite(vals)) or np.any(vals < 0):
            raise InvalidInput("b must be finite and nonnegative")
        cum = np.concatenate([[0.0], np.cumsum(
            0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))])
        out = np.interp(r, grid, cum)
        return float(out) if scalar else out

    def phi(self, r) -> np.ndarray:
        return self.c0 + 0.5 * self.b_integral(r)

    def psi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = r - 2.0 * self.r0
        s = np.maximum(s, 1e-9)
        out = np.where(s <= 1.0, 2.0 / s,
                       np.where(s >= 2.0, 0.0, _cutoff_bridge(
                           np.clip(s - 1.0, 0.0, 1.0))))
        return float(out) if out.ndim == 0 else out


def builtin_b(spec: dict) -> Callable[[np.ndarray], np.ndarray]:
    """Named drift profiles: zero, constant(c), linear, or a sampled table."""
    name = spec.get("name")
    if name == "zero":
        return lambda r: np.zeros_like(np.asarray(r, dtype=float))
    if name == "constant":
        c = float(spec["c"])
        if c < 0:
            raise InvalidInput("constant b must be nonnegative")
        return lambda r: np.full_like(np.asarray(r, dtype=float), c)
    if name == "linear":
        slope = float(spec.get("slope", 1.0))
        return lambda r: slope * np.asarray(r, dtype=float)
    if name == "table":
        xs = np.asarray(spec["r"], dtype=float)
        ys = np.asarray(spec["values"], dtype=float)
        if np.any(~np.isfinite(ys)) or np.any(ys < 0):
            raise InvalidInput("table values must be finite and nonnegative")
        return lambda r: np.interp(np.asarray(r, dtype=float), xs, ys)
    raise InvalidInput(f"unknown b profile: {name!r}")


def simulate_radial_comparison(spec: RadialComparisonSpec, a0: float, *,
                               alpha: float | None = None,
                               lambdas: np.ndarray | None = None,
                               fracs: np.ndarray | None = None,
                               h: float | None = None,
                               horizon: float | None = None,
                               stream: np.random.Generator | None = None
                               ) -> np.ndarray:
    """The radial comparison path.

    Discrete mode (alpha + lambdas): the recursion
    rho_{n+1} = rho_n + frac_n (alpha lambda_{n+1}
                + alpha^2 (phi(rho_n) + psi(rho_n))).
    Continuous mode (h + horizon + stream): Euler-Maruyama for
    d rho = dB + (phi(rho) + psi(rho)) dt.
    """
    if a0 <= 2.0 * spec.r0:
        raise InvalidInput("initial value must exceed 2 r0")
    if (alpha is None) == (h is None):
        raise InvalidInput("exactly one of alpha (discrete) or h (continuous)")
    if alpha is not None:
        if lambdas is None:
            raise InvalidInput("discrete mode needs the lambda record")
        lambdas = np.asarray(lambdas, dtype=float)
        n = len(lambdas)
        if fracs is None:
            fracs = np.ones(n)
        rho = np.empty(n + 1)
        rho[0] = a0
        for i in range(n):
            drift = spec.phi(rho[i]) + spec.psi(rho[i])
            rho[i + 1] = rho[i] + fracs[i] * (alpha * lambdas[i]
                                              + alpha ** 2 * drift)
        return rho
    if horizon is None or stream is None:
        raise InvalidInput("continuous mode needs horizon and stream")
    n = int(math.ceil(horizon / h - 1e-9))
    rho = np.empty(n + 1)
    rho[0] = a0
    shocks = math.sqrt(h) * stream.standard_normal(n)
    for i in range(n):
        drift = spec.phi(rho[i]) + spec.psi(rho[i])
        rho[i + 1] = rho[i] + shocks[i] + h * drift
    return rho


# ---------------------------------------------------------------------------
# Explosion test for the comparison diffusion
# ---------------------------------------------------------------------------

@dataclass
class FellerResult:
    """Outcome of the explosion integral test."""
    verdict: str                 # "survives" | "explodes" | "inconclusive"
    integral: float              # value at y_max
    decay_exponent: float        # fitted decay rate of the outer integrand
    details: dict

    @property
    def explodes(self) -> bool:
        return self.verdict == "explodes"

    @property
    def survives(self) -> bool:
        return self.verdict == "survives"


def _feller_integral(bb: Callable[[np.ndarray], np.ndarray], y_max: float,
                     n_grid: int) -> tuple[float, np.ndarray, np.ndarray]:
    """J(y_max) = int_1^{y_max} f with f(y) = int_1^y e^{B(z) - B(y)} dz.

    Exponentially fitted one-step recurrence, exact for piecewise-constant
    drift: f_{i+1} = e^{-dB} f_i + (1 - e^{-dB}) / b_mid with
    dB = b_mid h >= 0, so it stays stable and overflow-free however fast
    the drift grows.
    """
    ys = np.linspace(1.0, y_max, n_grid + 1)
    h = ys[1] - ys[0]
    bvals = np.asarray(bb(ys), dtype=float)
    if np.any(~np.isfinite(bvals)) or np.any(bvals <= 0.0):
        raise InvalidInput("comparison drift must be finite and positive")
    b_mid = 0.5 * (bvals[1:] + bvals[:-1])
    dB = b_mid * h
    f = np.empty(n_grid + 1)
    f[0] = 0.0
    for i in range(n_grid):
        e = math.exp(-min(dB[i], 700.0))
        f[i + 1] = e * f[i] + (1.0 - e) / b_mid[i] if dB[i] > 1e-12 \
            else f[i] + h
    J = float(np.trapezoid(f, ys))
    return J, ys, f


def feller_explosion_test(spec_or_b, C: float, y_max: float = 20.0,
                          n_grid: int = 4000) -> FellerResult:
    """Decide whether the comparison diffusion with drift (C + int_0^y b)/2
    reaches infinity in finite time.

    The diffusion survives exactly when the nested integral diverges as
    y_max grows; divergence is classified from the decay exponent p of the
    outer integrand between y_max/2 and y_max (p <= 1.02 survives,
    p >= 1.15 explodes, in between inconclusive), with a half-step
    quadrature stability check.
    """
    if C <= 0:
        raise InvalidInput("C must be positive")
    if y_max < 10.0:
        raise InvalidInput("y_max must be at least 10")
    if isinstance(spec_or_b, RadialComparisonSpec):
        spec = spec_or_b
    else:
        spec = RadialComparisonSpec(b=spec_or_b, c0=1.0, r0=0.5)

    def bb(y):
        return C + spec.b_integral(y)

    def classify(n: int):
        J, ys, f = _feller_integral(bb, y_max, n)
        f_end = float(f[-1])
        i_mid = int(np.searchsorted(ys, 0.5 * (1.0 + y_max)))
        f_mid = float(f[i_mid])
        if not math.isfinite(J):
            return "inconclusive", J, math.nan
        if f_end <= 0.0 or f_mid <= 0.0:
            return "explodes", J, math.inf
        # outer integrand decays like y^-p over the window's second half
        p = math.log(f_mid / f_end) / math.log(ys[-1] / ys[i_mid])
        if p <= 1.02:
            return "survives", J, p
        if p >= 1.15:
            return "explodes", J, p
        return "inconclusive", J, p

    verdict, J, p = classify(n_grid)
    verdict_half, J_half, p_half = classify(n_grid // 2)
    details = {"integral_half_step": J_half, "decay_exponent_half": p_half,
               "y_max": y_max}
    if verdict_half != verdict:
        return FellerResult("inconclusive", J, p, details)
    return FellerResult(verdict, J, p, details)
