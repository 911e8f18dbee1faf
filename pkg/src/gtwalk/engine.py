"""Vectorized path kernels.

Each function advances a contiguous block of paths through the whole
schedule with numpy operations of shape (block, ambient_dim), collecting
online summaries (endpoints, exit steps, coupling times, domination and
contraction diagnostics) and, for small blocks, full traces. Noise comes
from per-path counter-based streams, so results do not depend on how paths
are grouped into blocks or scheduled onto workers.
"""

from __future__ import annotations

import numpy as np

from . import rng
from .manifolds import ManifoldModel

REFLECTION = "reflection"
PARALLEL = "parallel"


def noise_lift(model: ManifoldModel, t: float, x: np.ndarray,
               xi: np.ndarray) -> np.ndarray:
    """sqrt(m+2) Phi(t, x) xi for a block of points, shape (B, ambient)."""
    fr = model.frame(t, x)  # (B, m, ambient)
    return np.sqrt(model.dim + 2.0) * np.einsum("bj,bjd->bd", xi, fr)


def frame_coordinates(model: ManifoldModel, t: float, x: np.ndarray,
                      v: np.ndarray) -> np.ndarray:
    """Ball-sample coordinates of a lifted vector: inverse of noise_lift."""
    fr = model.frame(t, x)
    coords = np.empty((x.shape[0], model.dim))
    for j in range(model.dim):
        coords[:, j] = model.inner(t, x, fr[:, j, :], v)
    return coords / np.sqrt(model.dim + 2.0)


def _advance(model: ManifoldModel, t: float, x: np.ndarray, lift: np.ndarray,
             alpha: float, use_drift: bool, frac: float) -> np.ndarray:
    w = alpha * lift
    if use_drift:
        w = w + alpha ** 2 * model.drift(t, x)
    if frac != 1.0:
        w = frac * w
    return model.exp(t, x, w)


def walk_chunk(model: ManifoldModel, sched, x0: np.ndarray, seed: int,
               paths: range, *, use_drift: bool = False,
               origin: np.ndarray | None = None,
               exit_radius: float | None = None,
               radial: dict | None = None,
               want_trace: bool = False) -> dict:
    """Run a block of independent walks over the schedule.

    ``radial`` enables the one-dimensional comparison replay:
    {"phi": callable, "psi": callable, "r0": float, "rho0": float,
    "margin": float} tracks rho alongside each walk, driven by the walk's
    own radial noise pairing, and flags paths whose radial distance exceeds
    rho + margin before exit.
    """
    B = len(paths)
    times, fracs = sched.times, sched.fracs
    n_steps = len(fracs)
    alpha = sched.alpha
    m, d = model.dim, model.ambient_dim

    noise = rng.walk_noise_block(seed, paths, n_steps, m)
    X = np.broadcast_to(np.asarray(x0, dtype=float), (B, d)).copy()

    track_exit = exit_radius is not None
    track_radial = radial is not None
    if track_exit or track_radial:
        o = np.asarray(origin if origin is not None else model.origin(),
                       dtype=float)
    exit_step = np.full(B, -1, dtype=np.int64)

    if track_radial:
        rho = np.full(B, float(radial["rho0"]))
        r0 = float(radial["r0"])
        margin = float(radial["margin"])
        phi, psi = radial["phi"], radial["psi"]
        violated = np.zeros(B, dtype=bool)
        sqrt_m2 = np.sqrt(m + 2.0)

    if want_trace:
        skeleton = np.empty((B, n_steps + 1, d))
        skeleton[:, 0] = X
        step_vectors = np.empty((B, n_steps, d))
        rho_trace = np.empty((B, n_steps + 1)) if track_radial else None
        if track_radial:
            rho_trace[:, 0] = rho

    for n in range(n_steps):
        t = float(times[n])
        if track_exit or track_radial:
            d_o = model.distance(t, o, X)
        if track_exit:
            newly = (exit_step < 0) & (d_o > exit_radius - 1.0)
            exit_step[newly] = n

        xi = noise[:, n, :]
        lift = noise_lift(model, t, X, xi)

        if track_radial:
            active = exit_step < 0
            violated |= active & (d_o > rho + margin)
            to_o = model.log(t, X, o)
            dist_safe = np.where(d_o < 1e-300, 1.0, d_o)
            outward = -to_o / dist_safe[:, None]
            lam = np.where(d_o >= r0,
                           model.inner(t, X, lift, outward),
                           sqrt_m2 * xi[:, 0])
            rho = rho + float(fracs[n]) * (alpha * lam
                                           + alpha ** 2 * (phi(rho) + psi(rho)))
            if want_trace:
                rho_trace[:, n + 1] = rho

        w = alpha * lift
        if use_drift:
            w = w + alpha ** 2 * model.drift(t, X)
        X = model.exp(t, X, float(fracs[n]) * w)

        if want_trace:
            skeleton[:, n + 1] = X
            step_vectors[:, n] = w

    t_end = float(times[-1])
    if track_exit or track_radial:
        d_o = model.distance(t_end, o, X)
    if track_exit:
        newly = (exit_step < 0) & (d_o > exit_radius - 1.0)
        exit_step[newly] = n_steps
    if track_radial:
        violated |= (exit_step < 0) & (d_o > rho + margin)

    out = {"end": X, "exit_step": exit_step}
    if track_radial:
        out["radial_violation"] = violated
        out["rho_end"] = rho
    if want_trace:
        out["skeleton"] = skeleton
        out["step_vectors"] = step_vectors
        out["noise"] = noise
        if track_radial:
            out["rho_trace"] = rho_trace
    return out


def coupled_chunk(model: ManifoldModel, sched, x1: np.ndarray, x2: np.ndarray,
                  seed: int, paths: range, *, kind: str = REFLECTION,
                  delta_couple: float = 0.0, stick: bool = True,
                  k: float = 0.0, use_drift: bool = False,
                  origin: np.ndarray | None = None,
                  exit_radius: float | None = None,
                  domination_margin: float | None = None,
                  contraction: bool = False,
                  want_trace: bool = False) -> dict:
    """Run a block of coupled walks driven by one ball sample per step.

    The second particle's noise is the first's, parallel-transported along
    the connecting minimal geodesic and, for the reflection kind, mirrored
    across the hyperplane orthogonal to its arrival direction. Pairs closer
    than ``delta_couple`` at a schedule time are declared coupled; with
    ``stick`` the second particle is replaced by the first from that time on.

    The recorded lambda* is the signed first-variation rate of the distance,
    2 <xi~2, gdot(dist)> = -2 <xi~1, gdot(0)>, so in flat space the distance
    obeys d_{n+1} = |d_n + alpha lambda*| exactly.
    """
    B = len(paths)
    times, fracs = sched.times, sched.fracs
    n_steps = len(fracs)
    alpha = sched.alpha
    t1_win = float(times[0])
    m, d = model.dim, model.ambient_dim
    sqrt_m2 = np.sqrt(m + 2.0)

    noise = rng.walk_noise_block(seed, paths, n_steps, m)
    X1 = np.broadcast_to(np.asarray(x1, dtype=float), (B, d)).copy()
    X2 = np.broadcast_to(np.asarray(x2, dtype=float), (B, d)).copy()

    coupled = np.zeros(B, dtype=bool)
    couple_step = np.full(B, -1, dtype=np.int64)

    track_exit = exit_radius is not None
    if track_exit:
        o = np.asarray(origin if origin is not None else model.origin(),
                       dtype=float)
        exited = np.zeros(B, dtype=bool)

    track_dom = domination_margin is not None
    if track_dom:
        lam_sum = np.zeros(B)
        dom_violated = np.zeros(B, dtype=bool)
        a0 = np.empty(B)

    if contraction:
        run_min = np.full(B, np.inf)
        contraction_max = np.full(B, -np.inf)

    if want_trace:
        skel1 = np.empty((B, n_steps + 1, d))
        skel2 = np.empty((B, n_steps + 1, d))
        dist_trace = np.empty((B, n_steps + 1))
        lam_trace = np.empty((B, n_steps))
        coupled_trace = np.zeros((B, n_steps + 1), dtype=bool)
        noise2 = np.empty((B, n_steps, m))

    def observe(n: int, t: float) -> np.ndarray:
        """Coupling detection plus diagnostics at skeleton time t_n."""
        dist = model.distance(t, X1, X2)
        newly = ~coupled & (dist <= delta_couple)
        coupled[newly] = True
        couple_step[newly] = n
        if stick:
            dist = np.where(coupled, 0.0, dist)
        if track_dom:
            if n == 0:
                a0[:] = dist
            decay = np.exp(-k * (t - t1_win) / 2.0)
            bound = decay * (a0 + alpha * lam_sum)
            ok = ~coupled
            if track_exit:
                ok = ok & ~exited
            dom_violated[ok & (dist > bound + domination_margin)] = True
        if contraction:
            weighted = np.exp(k * (t - t1_win) / 2.0) * dist
            np.maximum(contraction_max, weighted - run_min,
                       out=contraction_max)
            np.minimum(run_min, weighted, out=run_min)
        return dist

    for n in range(n_steps):
        t = float(times[n])
        dist = observe(n, t)
        if track_exit:
            exited |= model.distance(t, o, X1) > exit_radius - 1.0
            exited |= model.distance(t, o, X2) > exit_radius - 1.0
        if stick:
            X2 = np.where(coupled[:, None], X1, X2)
        if want_trace:
            skel1[:, n] = X1
            skel2[:, n] = X2
            dist_trace[:, n] = dist
            coupled_trace[:, n] = coupled

        xi = noise[:, n, :]
        lift1 = noise_lift(model, t, X1, xi)

        v12 = model.log(t, X1, X2)
        dist_safe = np.where(dist < 1e-300, 1.0, dist)
        u0 = v12 / dist_safe[:, None]
        u1 = model.transport_along(t, X1, u0, dist, u0)
        carried = model.transport_along(t, X1, u0, dist, lift1)
        if kind == REFLECTION:
            lift2 = carried - 2.0 * model.inner(t, X2, carried, u1)[:, None] * u1
            lam = 2.0 * model.inner(t, X2, lift2, u1)
            lam = np.where(coupled, 2.0 * sqrt_m2 * xi[:, 0], lam)
        else:
            lift2 = carried
            lam = np.zeros(B)
        lift2 = np.where(coupled[:, None], lift1, lift2)

        if track_dom:
            weight = float(fracs[n]) * np.exp(
                k * (float(times[n + 1]) - t1_win) / 2.0)
            lam_sum += weight * lam

        if want_trace:
            lam_trace[:, n] = lam
            noise2[:, n] = frame_coordinates(model, t, X2, lift2)

        frac = float(fracs[n])
        X1n = _advance(model, t, X1, lift1, alpha, use_drift, frac)
        X2n = _advance(model, t, X2, lift2, alpha, use_drift, frac)
        X1 = X1n
        X2 = np.where(coupled[:, None], X1, X2n) if stick else X2n

    t_end = float(times[-1])
    dist = observe(n_steps, t_end)
    if stick:
        X2 = np.where(coupled[:, None], X1, X2)

    out = {
        "end1": X1, "end2": X2,
        "couple_step": couple_step,
        "survival": couple_step < 0,
        "final_distance": dist,
    }
    if track_dom:
        out["dom_violation"] = dom_violated
    if track_exit:
        out["exited"] = exited
    if contraction:
        out["contraction_max"] = contraction_max
    if want_trace:
        skel1[:, n_steps] = X1
        skel2[:, n_steps] = X2
        dist_trace[:, n_steps] = dist
        coupled_trace[:, n_steps] = coupled
        out.update({"skeleton1": skel1, "skeleton2": skel2,
                    "distance": dist_trace, "lambda_star": lam_trace,
                    "coupled": coupled_trace, "noise": noise,
                    "noise2": noise2})
    return out
