"""Numeric-chart manifold: user-supplied metric on a coordinate chart.

Geodesics are integrated with fixed-step RK4 using Christoffel symbols from
central finite differences of the metric; parallel transport integrates the
transport equation along the cached trajectory. Minimal geodesics and
distances between arbitrary points (boundary-value problems) are not
supported here.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import InvalidInput, UnsupportedOperation
from .manifolds import Geodesic, ManifoldModel

FD_EPS = 1e-5        # metric finite-difference step
FD_EPS_T = 1e-6      # metric time-derivative step
FD_EPS_CURV = 1e-4   # Christoffel finite-difference step for curvature
MAX_STEP = 0.05      # chart-length covered by one RK4 step
MIN_STEPS = 20


class NumericChart(ManifoldModel):
    """Chart R^m with metric from a callable ``metric(t, x) -> (m, m)``.

    Optional callables provide the metric time derivative and a drift field;
    the time derivative falls back to a central difference in t.
    """

    kind = "numeric-chart"

    def __init__(self, dim: int,
                 metric: Callable[[float, np.ndarray], np.ndarray],
                 metric_dt: Callable[[float, np.ndarray], np.ndarray] | None = None,
                 drift: Callable[[float, np.ndarray], np.ndarray] | None = None,
                 time_window=(0.0, 1.0)):
        super().__init__(dim, dim, time_window)
        self._metric = metric
        self._metric_dt = metric_dt
        self._drift = drift
        self.has_drift = drift is not None

    # -- pointwise metric data ----------------------------------------------

    def metric_matrix(self, t: float, x: np.ndarray) -> np.ndarray:
        g = np.asarray(self._metric(t, np.asarray(x, dtype=float)), dtype=float)
        if g.shape != (self.dim, self.dim):
            raise InvalidInput(f"metric callable returned shape {g.shape}")
        return 0.5 * (g + g.T)

    def inner(self, t, x, u, v):
        x, u, v = (np.asarray(a, dtype=float) for a in (x, u, v))
        if x.ndim == 1:
            return float(u @ self.metric_matrix(t, x) @ v)
        out = np.empty(np.broadcast(x[..., 0], u[..., 0], v[..., 0]).shape)
        xb, ub, vb = np.broadcast_arrays(x, u, v)
        flat = out.reshape(-1)
        for i, (xi, ui, vi) in enumerate(zip(
                xb.reshape(-1, self.dim), ub.reshape(-1, self.dim),
                vb.reshape(-1, self.dim))):
            flat[i] = ui @ self.metric_matrix(t, xi) @ vi
        return out

    def metric_dt(self, t, x, u, v):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            raise UnsupportedOperation("numeric-chart metric_dt is pointwise")
        if self._metric_dt is not None:
            g = np.asarray(self._metric_dt(t, x), dtype=float)
        else:
            h = FD_EPS_T
            g = (self.metric_matrix(t + h, x) - self.metric_matrix(t - h, x)) / (2 * h)
        u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        return float(u @ g @ v)

    def drift(self, t, x):
        if self._drift is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.asarray(self._drift(t, np.asarray(x, dtype=float)), dtype=float)

    # -- Christoffel symbols and curvature ------------------------------------

    def christoffel(self, t: float, x: np.ndarray,
                    eps: float = FD_EPS) -> np.ndarray:
        """Gamma^i_{jk} at (t, x) via central differences of the metric."""
        m = self.dim
        x = np.asarray(x, dtype=float)
        dg = np.empty((m, m, m))  # dg[l, j, k] = d g_jk / d x_l
        for l in range(m):
            step = np.zeros(m)
            step[l] = eps
            dg[l] = (self.metric_matrix(t, x + step)
                     - self.metric_matrix(t, x - step)) / (2 * eps)
        ginv = np.linalg.inv(self.metric_matrix(t, x))
        # term[j, k, l] = d_j g_kl + d_k g_jl - d_l g_jk
        term = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
        return 0.5 * np.einsum("il,jkl->ijk", ginv, term)

    def _gamma_apply(self, t: float, x: np.ndarray, a: np.ndarray,
                     b: np.ndarray) -> np.ndarray:
        """Gamma(a, b)^i = Gamma^i_{jk} a^j b^k."""
        gam = self.christoffel(t, x)
        return np.einsum("ijk,j,k->i", gam, a, b)

    def curvature(self, t, x, u, v, w):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            raise UnsupportedOperation("numeric-chart curvature is pointwise")
        m = self.dim
        eps = FD_EPS_CURV
        dgam = np.empty((m, m, m, m))  # dgam[l] = d Gamma / d x_l
        for l in range(m):
            step = np.zeros(m)
            step[l] = eps
            dgam[l] = (self.christoffel(t, x + step)
                       - self.christoffel(t, x - step)) / (2 * eps)
        gam = self.christoffel(t, x)
        u, v, w = (np.asarray(a, dtype=float) for a in (u, v, w))
        # R(u,v)w = (d_u Gamma)(v,w) - (d_v Gamma)(u,w) + Gamma(u, Gamma(v,w)) - Gamma(v, Gamma(u,w))
        du_gam = np.einsum("lijk,l->ijk", dgam, u)
        dv_gam = np.einsum("lijk,l->ijk", dgam, v)
        gvw = np.einsum("ijk,j,k->i", gam, v, w)
        guw = np.einsum("ijk,j,k->i", gam, u, w)
        out = (np.einsum("ijk,j,k->i", du_gam, v, w)
               - np.einsum("ijk,j,k->i", dv_gam, u, w)
               + np.einsum("ijk,j,k->i", gam, u, gvw)
               - np.einsum("ijk,j,k->i", gam, v, guw))
        return out

    def ricci(self, t, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        fr = self.frame(t, x)
        total = 0.0
        for a in range(self.dim):
            r = self.curvature(t, x, fr[a], v, v)
            total += self.inner(t, x, r, fr[a])
        return total

    # -- geodesics -------------------------------------------------------------

    def _ode_rhs(self, t: float, x: np.ndarray, xdot: np.ndarray):
        return xdot, -self._gamma_apply(t, x, xdot, xdot)

    def _integrate(self, t: float, x0: np.ndarray, v0: np.ndarray,
                   min_steps: int = MIN_STEPS):
        """RK4 geodesic trace over affine parameter [0, 1]; returns
        (tau grid, positions, velocities)."""
        speed = float(np.linalg.norm(v0))
        n = max(min_steps, int(np.ceil(speed / MAX_STEP)))
        h = 1.0 / n
        xs = np.empty((n + 1, self.dim))
        vs = np.empty((n + 1, self.dim))
        xs[0], vs[0] = x0, v0
        x, v = np.array(x0, dtype=float), np.array(v0, dtype=float)
        for i in range(n):
            k1x, k1v = self._ode_rhs(t, x, v)
            k2x, k2v = self._ode_rhs(t, x + 0.5 * h * k1x, v + 0.5 * h * k1v)
            k3x, k3v = self._ode_rhs(t, x + 0.5 * h * k2x, v + 0.5 * h * k2v)
            k4x, k4v = self._ode_rhs(t, x + h * k3x, v + h * k3v)
            x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            xs[i + 1], vs[i + 1] = x, v
        return np.linspace(0.0, 1.0, n + 1), xs, vs

    def exp(self, t, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise InvalidInput("exp: non-finite input")
        if x.ndim == 1:
            if float(np.linalg.norm(v)) == 0.0:
                return x.copy()
            return self._integrate(t, x, v)[1][-1]
        xb, vb = np.broadcast_arrays(x, v)
        out = np.empty_like(xb, dtype=float)
        for i in range(xb.reshape(-1, self.dim).shape[0]):
            out.reshape(-1, self.dim)[i] = self.exp(
                t, xb.reshape(-1, self.dim)[i], vb.reshape(-1, self.dim)[i])
        return out

    def geodesic_from_exp(self, t: float, x: np.ndarray,
                          v: np.ndarray) -> Geodesic:
        """The geodesic segment traced by exp(t, x, s v), s in [0, 1],
        reparametrized by g(t)-arclength, with a cached dense trajectory."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        length = float(np.sqrt(self.inner(t, x, v, v)))
        # denser trace than plain exp: samples are interpolated later
        taus, xs, vs = self._integrate(t, x, v, min_steps=4 * MIN_STEPS)
        return _NumericGeodesic(self, t, xs, vs, taus, length)

    def _integrate_with_transport(self, t: float, x0: np.ndarray,
                                  v0: np.ndarray, w0: np.ndarray) -> np.ndarray:
        """RK4 on the joint geodesic + parallel-transport system; returns
        the transported vector at affine parameter 1."""
        speed = float(np.linalg.norm(v0))
        n = max(MIN_STEPS, int(np.ceil(speed / MAX_STEP)))
        h = 1.0 / n
        x = np.array(x0, dtype=float)
        v = np.array(v0, dtype=float)
        w = np.array(w0, dtype=float)

        def rhs(state):
            xx, vv, ww = state
            gam = self.christoffel(t, xx)
            acc = -np.einsum("ijk,j,k->i", gam, vv, vv)
            wdot = -np.einsum("ijk,j,k->i", gam, vv, ww)
            return (vv, acc, wdot)

        for _ in range(n):
            s0 = (x, v, w)
            k1 = rhs(s0)
            s1 = tuple(a + 0.5 * h * b for a, b in zip(s0, k1))
            k2 = rhs(s1)
            s2 = tuple(a + 0.5 * h * b for a, b in zip(s0, k2))
            k3 = rhs(s2)
            s3 = tuple(a + h * b for a, b in zip(s0, k3))
            k4 = rhs(s3)
            x, v, w = (a + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
                       for a, b1, b2, b3, b4 in zip(s0, k1, k2, k3, k4))
        return w

    def transport_along(self, t, x, u, length, v):
        # u is a g(t)-unit initial velocity; integrate the transport
        # equation jointly with the geodesic of length ``length``.
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if x.ndim > 1:
            raise UnsupportedOperation("numeric-chart transport is pointwise")
        L = float(length)
        if L == 0.0:
            return v.copy()
        return self._integrate_with_transport(t, x, L * u, v)

    def frame(self, t, x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            out = np.empty(x.shape[:-1] + (self.dim, self.dim))
            for i, xi in enumerate(x.reshape(-1, self.dim)):
                out.reshape(-1, self.dim, self.dim)[i] = self.frame(t, xi)
            return out
        g = self.metric_matrix(t, x)
        basis = np.eye(self.dim)
        out = np.empty((self.dim, self.dim))
        for i in range(self.dim):
            w = basis[i]
            for j in range(i):
                w = w - (out[j] @ g @ w) * out[j]
            out[i] = w / np.sqrt(w @ g @ w)
        return out

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


class _NumericGeodesic(Geodesic):
    """Geodesic backed by a dense RK4 trace with Hermite interpolation."""

    def __init__(self, model: NumericChart, time: float, xs: np.ndarray,
                 vs: np.ndarray, taus: np.ndarray, length: float):
        u0 = vs[0] / length if length > 0 else vs[0]
        super().__init__(model, time, xs[0], xs[-1], length, u0)
        self._xs, self._vs, self._taus = xs, vs, taus

    def _locate(self, u: float):
        tau = np.clip(u / self.length if self.length > 0 else 0.0, 0.0, 1.0)
        i = min(int(tau * (len(self._taus) - 1)), len(self._taus) - 2)
        h = self._taus[i + 1] - self._taus[i]
        s = (tau - self._taus[i]) / h
        return i, s, h

    def sample_coords(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim:
            return np.stack([self.sample_coords(float(ui)) for ui in u])
        i, s, h = self._locate(float(u))
        x0, x1 = self._xs[i], self._xs[i + 1]
        v0, v1 = h * self._vs[i], h * self._vs[i + 1]
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * x0 + h10 * v0 + h01 * x1 + h11 * v1

    def velocity_coords(self, u: float) -> np.ndarray:
        i, s, h = self._locate(float(u))
        v = (1 - s) * self._vs[i] + s * self._vs[i + 1]
        return v / self.length if self.length > 0 else v

    def transport_from_start(self, v: np.ndarray, u: float) -> np.ndarray:
        model: NumericChart = self.model  # type: ignore[assignment]
        if u <= 0.0 or self.length == 0.0:
            return np.asarray(v, dtype=float).copy()
        scaled_v0 = (float(u) / self.length) * self._vs[0]
        return model._integrate_with_transport(self.time, self._xs[0],
                                               scaled_v0, np.asarray(v, dtype=float))
