"""Time-inhomogeneous geodesic random walks.

The walk advances on the schedule t_n = (t1 + alpha^2 n) wedge t2. At each
step a sample xi uniform on the unit ball is lifted through the orthonormal
frame, scaled by sqrt(m+2) alpha, the drift is added at order alpha^2, and
the exponential map is applied; between schedule times the defining geodesic
is traversed at fraction (t - t_n)/alpha^2. Paths are reproducible bit for
bit from (seed, path_index) and embarrassingly parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine, rng
from .errors import InvalidInput
from .manifolds import ManifoldModel, Point, TangentVector


class Schedule:
    """The step times (t1 + alpha^2 n) wedge t2 and their step fractions."""

    def __init__(self, t1: float, t2: float, alpha: float):
        if alpha <= 0:
            raise InvalidInput("alpha must be positive")
        if not alpha ** 2 < t2 - t1:
            raise InvalidInput("alpha^2 must be smaller than t2 - t1")
        self.t1, self.t2, self.alpha = float(t1), float(t2), float(alpha)
        n_steps = int(math.ceil((t2 - t1) / alpha ** 2 - 1e-9))
        times = t1 + alpha ** 2 * np.arange(n_steps + 1)
        times[-1] = min(times[-1], t2)
        self.times = times
        self.fracs = np.diff(times) / alpha ** 2

    @property
    def n_steps(self) -> int:
        """Total number of steps, the final possibly partial."""
        return len(self.times) - 1

    @property
    def full_steps(self) -> int:
        """Number of whole alpha^2 steps before the horizon truncates."""
        n = self.n_steps
        return n if self.fracs[-1] > 1.0 - 1e-12 else n - 1

    def locate(self, t: float) -> tuple[int, float]:
        """Step index n with t in [t_n, t_n+1] and the fraction (t-t_n)/a^2."""
        if not (self.t1 - 1e-12 <= t <= self.t2 + 1e-12):
            raise InvalidInput(f"time {t} outside [{self.t1}, {self.t2}]")
        n = int(np.searchsorted(self.times, t, side="right")) - 1
        n = min(max(n, 0), self.n_steps - 1)
        return n, (t - self.times[n]) / self.alpha ** 2


@dataclass(frozen=True)
class WalkConfig:
    """Parameters of one walk: scale, window, seed, start and options."""
    alpha: float
    t1: float
    t2: float
    seed: int
    start: np.ndarray
    use_drift: bool = False
    origin: np.ndarray | None = None
    exit_radius: float | None = None
    path_index: int = 0

    def __post_init__(self):
        if self.alpha <= 0 or self.alpha ** 2 >= self.t2 - self.t1:
            raise InvalidInput("need 0 < alpha^2 < t2 - t1")
        if self.exit_radius is not None and self.exit_radius <= 1.0:
            raise InvalidInput("exit radius must exceed 1")
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float))
        if self.origin is not None:
            object.__setattr__(self, "origin",
                               np.asarray(self.origin, dtype=float))

    def schedule(self) -> Schedule:
        return Schedule(self.t1, self.t2, self.alpha)


@dataclass(frozen=True)
class NoiseSample:
    """One ball sample and its frame lift sqrt(m+2) Phi(x) xi."""
    xi: np.ndarray
    xi_tilde: TangentVector


@dataclass
class WalkPath:
    """Discrete skeleton of one walk plus the data to interpolate it."""
    model_id: str
    schedule: Schedule
    skeleton: np.ndarray        # (n_steps + 1, ambient_dim)
    step_vectors: np.ndarray    # (n_steps, ambient_dim), alpha xi~ + alpha^2 Z
    noise_record: np.ndarray    # (n_steps, dim) ball samples

    def point(self, n: int) -> Point:
        return Point(self.skeleton[n], self.model_id)


def sample_unit_ball(dim: int, stream: np.random.Generator) -> np.ndarray:
    """One point uniform on the closed unit ball of R^dim."""
    if dim < 1:
        raise InvalidInput("dimension must be >= 1")
    return rng.unit_ball_samples(stream, 1, dim)[0]


def step(model: ManifoldModel, t: float, x, xi: np.ndarray, alpha: float,
         use_drift: bool = False, frac: float = 1.0):
    """One walk transition from x at time t driven by the ball sample xi.

    Returns the landing point and the noise record. ``frac`` traverses only
    that fraction of the defining geodesic (the final partial step).
    """
    xc = x.coords if isinstance(x, Point) else np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if float(np.linalg.norm(xi)) > 1.0 + 1e-12:
        raise InvalidInput("ball sample must satisfy |xi| <= 1")
    xt = engine.noise_lift(model, t, xc[None, :], xi[None, :])[0]
    w = alpha * xt
    if use_drift:
        w = w + alpha ** 2 * model.drift(t, xc)
    y = model.exp(t, xc, frac * w)
    base = Point(xc, model.model_id)
    return Point(y, model.model_id), NoiseSample(xi, TangentVector(base, xt))


def run_walk(model: ManifoldModel, config: WalkConfig) -> WalkPath:
    """Simulate one full walk; identical output for identical inputs."""
    sched = config.schedule()
    res = engine.walk_chunk(model, sched, config.start, config.seed,
                            range(config.path_index, config.path_index + 1),
                            use_drift=config.use_drift, want_trace=True)
    return WalkPath(model.model_id, sched, res["skeleton"][0],
                    res["step_vectors"][0], res["noise"][0])


def interpolate(model: ManifoldModel, path: WalkPath, t: float) -> Point:
    """The continuously interpolated walk position at time t."""
    sched = path.schedule
    n, frac = sched.locate(t)
    if frac <= 0.0:
        return path.point(n)
    x = path.skeleton[n]
    return Point(model.exp(sched.times[n], x, frac * path.step_vectors[n]),
                 path.model_id)


def exit_time(path: WalkPath, model: ManifoldModel, origin,
              radius: float) -> float:
    """First schedule time whose skeleton point is farther than radius - 1
    from the origin; infinity if none."""
    if radius <= 1.0:
        raise InvalidInput("exit radius must exceed 1")
    o = origin.coords if isinstance(origin, Point) else np.asarray(origin, dtype=float)
    for n, t in enumerate(path.schedule.times):
        if float(model.distance(t, o, path.skeleton[n])) > radius - 1.0:
            return float(t)
    return math.inf


@dataclass
class SubordinatedPath:
    """A walk evaluated at the jump times of an independent Poisson clock."""
    base: WalkPath
    jump_times: np.ndarray   # absolute times of clock jumps within the window
    cap_index: int           # largest skeleton index the clock may reach

    def index_at(self, t: float) -> int:
        sched = self.base.schedule
        if t < sched.t1 - 1e-12:
            raise InvalidInput("time before window start")
        count = int(np.searchsorted(self.jump_times, t, side="right"))
        return min(count, self.cap_index)

    def position(self, t: float) -> Point:
        return self.base.point(self.index_at(t))


def subordinated_walk(model: ManifoldModel,
                      config: WalkConfig) -> SubordinatedPath:
    """Time-change the walk by a Poisson clock of intensity alpha^-2,
    capped at the last full step of the schedule."""
    path = run_walk(model, config)
    sched = path.schedule
    stream = rng.stream(config.seed, rng.PURPOSE_SUBORDINATION,
                        config.path_index)
    horizon = sched.t2 - sched.t1
    gaps = []
    total = 0.0
    while total <= horizon:
        block = stream.exponential(config.alpha ** 2, size=256)
        for g in block:
            total += g
            if total > horizon:
                break
            gaps.append(total)
    jump_times = sched.t1 + np.asarray(gaps)
    return SubordinatedPath(path, jump_times, sched.full_steps)
