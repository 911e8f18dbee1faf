"""Coupled geodesic random walks: reflection and parallel transport.

Both couplings drive the pair with a single ball sample per step. The
second particle receives the first's lifted noise parallel-transported
along the connecting minimal geodesic; the reflection coupling additionally
mirrors it across the hyperplane orthogonal to the geodesic's arrival
direction. Discrete walks almost surely never meet exactly, so pairs are
declared coupled at distance <= delta_couple and, by default, the second
particle follows the first from then on, which preserves the marginal
transition rule because the declaration time is a stopping time of the pair.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .comparison import beta, chi
from .errors import DegenerateGeodesic, InvalidInput
from .manifolds import Geodesic, ManifoldModel, Point, TangentVector
from .walk import Schedule


class CouplingKind(enum.Enum):
    REFLECTION = "reflection"
    PARALLEL_TRANSPORT = "parallel"


@dataclass(frozen=True)
class CouplingConfig:
    """Parameters of one coupled run."""
    alpha: float
    t1: float
    t2: float
    seed: int
    start1: np.ndarray
    start2: np.ndarray
    kind: CouplingKind = CouplingKind.REFLECTION
    delta_couple: float | None = None   # default 2 alpha
    k: float = 0.0
    stick_after_coupling: bool = True
    use_drift: bool = False
    origin: np.ndarray | None = None
    exit_radius: float | None = None
    path_index: int = 0

    def __post_init__(self):
        if self.alpha <= 0 or self.alpha ** 2 >= self.t2 - self.t1:
            raise InvalidInput("need 0 < alpha^2 < t2 - t1")
        delta = self.delta_couple
        if delta is None:
            delta = 2.0 * self.alpha
        if delta > 0.0 and delta < self.alpha:
            raise InvalidInput("delta_couple must be >= alpha (or 0 to disable)")
        object.__setattr__(self, "delta_couple", float(delta))
        object.__setattr__(self, "start1", np.asarray(self.start1, dtype=float))
        object.__setattr__(self, "start2", np.asarray(self.start2, dtype=float))
        if self.origin is not None:
            object.__setattr__(self, "origin",
                               np.asarray(self.origin, dtype=float))

    def schedule(self) -> Schedule:
        return Schedule(self.t1, self.t2, self.alpha)


@dataclass
class CoupledPath:
    """Synchronized pair of skeletons with the distance and noise records.

    ``lambda_star_record[n]`` is the signed first-variation rate of the
    distance over step n (2 <xi~2, gdot(d)> = -2 <xi~1, gdot(0)>): in flat
    space distance_process[n+1] = |distance_process[n] + alpha lambda*[n]|
    exactly. ``noise_record`` holds the shared ball samples; replaying them
    through the single-walk step reproduces skeleton1, and
    ``noise_record_2`` (the second particle's effective ball coordinates)
    reproduces skeleton2.
    """
    model_id: str
    schedule: Schedule
    skeleton1: np.ndarray
    skeleton2: np.ndarray
    distance_process: np.ndarray
    lambda_star_record: np.ndarray
    coupled_flags: np.ndarray
    coupling_time: float
    noise_record: np.ndarray
    noise_record_2: np.ndarray


def reflection_map(model: ManifoldModel, t: float, geodesic: Geodesic,
                   v) -> TangentVector:
    """Mirror map along a geodesic: parallel-transport v to the end, then
    reflect across the hyperplane orthogonal to the arrival direction.

    A g(t)-isometry from the start tangent space to the end tangent space.
    """
    if geodesic.length <= 0.0:
        raise DegenerateGeodesic("reflection_map: zero-length geodesic")
    vc = v.components if isinstance(v, TangentVector) else np.asarray(v, dtype=float)
    if isinstance(v, TangentVector):
        if not np.allclose(v.base.coords, geodesic.start.coords, atol=1e-9):
            raise InvalidInput("reflection_map: v not based at geodesic start")
    carried = geodesic.transport_from_start(vc, geodesic.length)
    u1 = geodesic.velocity_coords(geodesic.length)
    end = geodesic.end.coords
    out = carried - 2.0 * float(model.inner(t, end, carried, u1)) * u1
    return TangentVector(geodesic.end, out)


def coupled_step(model: ManifoldModel, t: float, x1, x2, xi: np.ndarray,
                 alpha: float, kind: CouplingKind = CouplingKind.REFLECTION,
                 use_drift: bool = False, frac: float = 1.0):
    """One synchronized transition of the pair.

    Returns (new x1, new x2, lambda_star) with lambda_star the signed
    first-variation rate of the distance (zero for parallel transport).
    Coincident inputs receive identical noise and move together.
    """
    c1 = x1.coords if isinstance(x1, Point) else np.asarray(x1, dtype=float)
    c2 = x2.coords if isinstance(x2, Point) else np.asarray(x2, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if float(np.linalg.norm(xi)) > 1.0 + 1e-12:
        raise InvalidInput("ball sample must satisfy |xi| <= 1")
    X1, X2 = c1[None, :], c2[None, :]
    lift1 = engine.noise_lift(model, t, X1, xi[None, :])
    dist = model.distance(t, X1, X2)
    on_diag = dist[0] < 1e-12
    if on_diag:
        lift2 = lift1
        lam = 0.0
    else:
        v12 = model.log(t, X1, X2)
        u0 = v12 / dist[:, None]
        u1 = model.transport_along(t, X1, u0, dist, u0)
        carried = model.transport_along(t, X1, u0, dist, lift1)
        if kind is CouplingKind.REFLECTION:
            lift2 = carried - 2.0 * model.inner(t, X2, carried, u1)[:, None] * u1
            lam = float(2.0 * model.inner(t, X2, lift2, u1)[0])
        else:
            lift2 = carried
            lam = 0.0
    y1 = engine._advance(model, t, X1, lift1, alpha, use_drift, frac)[0]
    y2 = engine._advance(model, t, X2, lift2, alpha, use_drift, frac)[0]
    return Point(y1, model.model_id), Point(y2, model.model_id), lam


def run_coupled(model: ManifoldModel, config: CouplingConfig) -> CoupledPath:
    """Simulate one coupled pair over the full schedule."""
    sched = config.schedule()
    res = engine.coupled_chunk(
        model, sched, config.start1, config.start2, config.seed,
        range(config.path_index, config.path_index + 1),
        kind=config.kind.value, delta_couple=config.delta_couple,
        stick=config.stick_after_coupling, k=config.k,
        use_drift=config.use_drift, origin=config.origin,
        exit_radius=config.exit_radius, want_trace=True)
    step = int(res["couple_step"][0])
    coupling_time = math.inf if step < 0 else float(sched.times[step])
    return CoupledPath(model.model_id, sched, res["skeleton1"][0],
                       res["skeleton2"][0], res["distance"][0],
                       res["lambda_star"][0], res["coupled"][0],
                       coupling_time, res["noise"][0], res["noise2"][0])


def coupling_probability_bound(d0: float, k: float, horizon: float) -> float:
    """Upper bound on the probability that the pair never meets by the
    horizon: the two-sided normal mass at d0 / (2 sqrt(beta(horizon)))."""
    if d0 < 0 or horizon < 0:
        raise InvalidInput("d0 and horizon must be nonnegative")
    if d0 == 0.0:
        return 0.0
    if horizon == 0.0:
        return 1.0
    return float(chi(d0 / (2.0 * math.sqrt(beta(horizon, k)))))


def dominating_process(coupled: CoupledPath, k: float) -> np.ndarray:
    """The one-dimensional dominating path at skeleton times, rebuilt from
    the recorded lambda* values:
    U_n = e^{-k (t_n - t1)/2} (d_0 + alpha sum_j w_j lambda*_j) with
    w_j = frac_j e^{k (t_j - t1)/2}."""
    sched = coupled.schedule
    rel = sched.times - sched.t1
    weights = sched.fracs * np.exp(k * rel[1:] / 2.0)
    sums = np.concatenate([[0.0],
                           np.cumsum(weights * coupled.lambda_star_record)])
    return np.exp(-k * rel / 2.0) * (coupled.distance_process[0]
                                     + sched.alpha * sums)
