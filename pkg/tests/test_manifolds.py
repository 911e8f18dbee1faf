import numpy as np
import pytest

from conftest import random_point, random_tangent
from oracles import sphere_geodesic_rk4, sphere_transport_ode

from gtwalk.errors import DegenerateGeodesic, InvalidInput
from gtwalk.manifolds import (Euclidean, Point,
                              ScaledMetric, TangentVector,
                              curvature_condition_residual, distance,
                              estimate_kappa, exp, frame_at, make_model,
                              minimal_geodesic, parallel_transport)

ALL_MODEL_NAMES = ["euclid2", "sphere2", "flow_sphere", "hyperbolic2",
                   "scaled_euclid2"]


def all_models(request):
    return [request.getfixturevalue(name) for name in ALL_MODEL_NAMES]


# ---------------------------------------------------------------------------
# exp
# ---------------------------------------------------------------------------

def test_exp_euclidean_is_translation(euclid2):
    p = Point(np.array([1.0, 2.0]), euclid2.model_id)
    v = TangentVector(p, np.array([0.5, -1.0]))
    out = exp(euclid2, 0.3, p, v)
    assert np.allclose(out.coords, [1.5, 1.0], atol=0)


@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_exp_zero_vector_is_identity(request, name, rng):
    model = request.getfixturevalue(name)
    x = random_point(model, rng)
    out = model.exp(model.time_window[0], x, np.zeros(model.ambient_dim))
    assert np.array_equal(out, x)


def test_exp_sphere_quarter_circle(sphere2):
    x = np.array([0.0, 0.0, 1.0])
    v = np.array([np.pi / 2, 0.0, 0.0])
    out = sphere2.exp(0.0, x, v)
    assert np.allclose(out, [1.0, 0.0, 0.0], atol=1e-12)
    # cross-check against integrating the ambient geodesic ODE
    oracle = sphere_geodesic_rk4(x, v, 1.0)
    assert np.allclose(out, oracle, atol=1e-9)


def test_exp_sphere_matches_ode_oracle(sphere2, rng):
    for _ in range(10):
        x = random_point(sphere2, rng)
        v = random_tangent(sphere2, 0.0, x, rng, scale=0.7)
        out = sphere2.exp(0.0, x, v)
        oracle = sphere_geodesic_rk4(x, v, 1.0)
        assert np.allclose(out, oracle, atol=1e-8)


def test_exp_rejects_non_finite(euclid2):
    p = Point(np.zeros(2), euclid2.model_id)
    with pytest.raises(InvalidInput):
        exp(euclid2, 0.0, p, np.array([np.nan, 0.0]))


def test_exp_rejects_mismatched_base(euclid2):
    p = Point(np.zeros(2), euclid2.model_id)
    q = Point(np.ones(2), euclid2.model_id)
    v = TangentVector(q, np.ones(2))
    with pytest.raises(InvalidInput):
        exp(euclid2, 0.0, p, v)


# ---------------------------------------------------------------------------
# minimal_geodesic
# ---------------------------------------------------------------------------

def test_minimal_geodesic_euclidean_345(euclid2):
    g = minimal_geodesic(euclid2, 0.0, np.zeros(2), np.array([3.0, 4.0]))
    assert g.length == pytest.approx(5.0, abs=1e-12)
    assert np.allclose(g.initial_velocity.components, [0.6, 0.8], atol=1e-12)


def test_minimal_geodesic_sphere_quarter(sphere2):
    g = minimal_geodesic(sphere2, 0.0, np.array([0.0, 0.0, 1.0]),
                         np.array([1.0, 0.0, 0.0]))
    assert g.length == pytest.approx(np.pi / 2, abs=1e-12)
    # shooting cross-check: exp of length * initial velocity hits the target
    shot = sphere_geodesic_rk4(np.array([0.0, 0.0, 1.0]),
                               g.length * g.initial_velocity.components, 1.0)
    assert np.allclose(shot, [1.0, 0.0, 0.0], atol=1e-9)


def test_minimal_geodesic_antipodal_tiebreak(sphere2):
    g = minimal_geodesic(sphere2, 0.0, np.array([0.0, 0.0, 1.0]),
                         np.array([0.0, 0.0, -1.0]))
    assert g.length == pytest.approx(np.pi, abs=1e-12)
    assert np.allclose(g.initial_velocity.components, [1.0, 0.0, 0.0],
                       atol=1e-12)


def test_minimal_geodesic_coincident_raises(sphere2):
    x = np.array([0.0, 0.0, 1.0])
    with pytest.raises(DegenerateGeodesic):
        minimal_geodesic(sphere2, 0.0, x, x)


@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_geodesic_symmetry(request, name, rng):
    """The reversed segment traces the same points: g_yx(u) = g_xy(L-u)."""
    model = request.getfixturevalue(name)
    t = model.time_window[0] + 0.2
    for _ in range(5):
        x = random_point(model, rng)
        y = model.exp(t, x, random_tangent(model, t, x, rng, scale=0.5))
        g = minimal_geodesic(model, t, x, y)
        rev = g.reversed()
        for u in np.linspace(0.0, g.length, 7):
            assert np.allclose(rev.sample_coords(u),
                               g.sample_coords(g.length - u), atol=1e-9)


def test_geodesic_endpoints_and_unit_speed(sphere2):
    g = minimal_geodesic(sphere2, 0.0, np.array([0.0, 0.0, 1.0]),
                         np.array([1.0, 0.0, 0.0]))
    assert np.allclose(g.sample(0.0).coords, g.start.coords, atol=1e-6)
    assert np.allclose(g.sample(g.length).coords, g.end.coords, atol=1e-6)
    for u in np.linspace(0, g.length, 9):
        vel = g.velocity_coords(float(u))
        assert sphere2.norm(0.0, g.sample_coords(float(u)), vel) \
            == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# parallel transport
# ---------------------------------------------------------------------------

def test_transport_euclidean_identity(euclid2):
    g = minimal_geodesic(euclid2, 0.0, np.zeros(2), np.array([2.0, 1.0]))
    v = TangentVector(g.start, np.array([1.0, 2.0]))
    out = parallel_transport(euclid2, g, v)
    assert np.allclose(out.components, [1.0, 2.0], atol=0)


@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_transport_of_velocity_is_final_tangent(request, name, rng):
    model = request.getfixturevalue(name)
    t = model.time_window[0]
    x = random_point(model, rng)
    y = model.exp(t, x, random_tangent(model, t, x, rng, scale=0.6))
    g = minimal_geodesic(model, t, x, y)
    out = parallel_transport(model, g, g.initial_velocity)
    assert np.allclose(out.components, g.velocity_coords(g.length), atol=1e-9)


def test_transport_sphere_orthogonal_fixed(sphere2):
    g = minimal_geodesic(sphere2, 0.0, np.array([0.0, 0.0, 1.0]),
                         np.array([1.0, 0.0, 0.0]))
    out = parallel_transport(sphere2, g,
                             TangentVector(g.start, np.array([0.0, 1.0, 0.0])))
    assert np.allclose(out.components, [0.0, 1.0, 0.0], atol=1e-12)
    oracle = sphere_transport_ode(np.array([0.0, 0.0, 1.0]),
                                  g.initial_velocity.components, g.length,
                                  np.array([0.0, 1.0, 0.0]), 1.0)
    assert np.allclose(out.components, oracle, atol=1e-9)


@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_transport_preserves_norm(request, name, rng):
    model = request.getfixturevalue(name)
    t = model.time_window[0] + 0.3
    for _ in range(40):
        x = random_point(model, rng)
        y = model.exp(t, x, random_tangent(model, t, x, rng, scale=0.8))
        g = minimal_geodesic(model, t, x, y)
        v = random_tangent(model, t, x, rng)
        out = g.transport_from_start(v, g.length)
        n0 = model.norm(t, x, v)
        n1 = model.norm(t, y, out)
        assert abs(n1 - n0) <= 1e-9 * max(1.0, n0)


def test_transport_base_mismatch_raises(euclid2):
    g = minimal_geodesic(euclid2, 0.0, np.zeros(2), np.ones(2))
    bad = TangentVector(Point(np.array([5.0, 5.0]), euclid2.model_id),
                        np.ones(2))
    with pytest.raises(InvalidInput):
        parallel_transport(euclid2, g, bad)


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------

def test_distance_examples(euclid2, sphere2):
    assert distance(euclid2, 0.0, np.zeros(2), np.array([3.0, 4.0])) \
        == pytest.approx(5.0)
    assert distance(sphere2, 0.0, np.array([0.0, 0.0, 1.0]),
                    np.array([1.0, 0.0, 0.0])) == pytest.approx(np.pi / 2)


def test_distance_scaled_metric():
    model = ScaledMetric(Euclidean(2), 2.0, (0.0, 2.0))
    d = distance(model, 1.0, np.zeros(2), np.array([1.0, 0.0]))
    assert d == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_distance_flow_sphere_scale(flow_sphere):
    x = np.array([0.0, 0.0, 1.0])
    y = np.array([1.0, 0.0, 0.0])
    d0 = distance(flow_sphere, 0.0, x, y)
    d1 = distance(flow_sphere, 0.7, x, y)
    c = flow_sphere.scale(0.7)
    assert d1 / d0 == pytest.approx(np.sqrt(c / 1.0), abs=1e-12)


@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_distance_symmetry_and_identity(request, name, rng):
    model = request.getfixturevalue(name)
    t = model.time_window[0] + 0.1
    x = random_point(model, rng)
    y = model.exp(t, x, random_tangent(model, t, x, rng, scale=0.5))
    assert model.distance(t, x, x) == pytest.approx(0.0, abs=1e-12)
    assert model.distance(t, x, y) == pytest.approx(
        float(model.distance(t, y, x)), abs=1e-12)


@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_triangle_inequality(request, name, rng):
    model = request.getfixturevalue(name)
    t = model.time_window[0] + 0.4
    for _ in range(500):
        x = random_point(model, rng)
        y = model.exp(t, x, random_tangent(model, t, x, rng, scale=0.7))
        z = model.exp(t, x, random_tangent(model, t, x, rng, scale=0.7))
        dxy = float(model.distance(t, x, y))
        dyz = float(model.distance(t, y, z))
        dxz = float(model.distance(t, x, z))
        assert dxz <= dxy + dyz + 1e-9


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

def test_frame_euclidean_is_standard_basis(euclid2):
    fr = frame_at(euclid2, 0.0, np.array([0.3, -0.7]))
    assert np.allclose(fr.matrix, np.eye(2), atol=0)


def test_frame_scaled_metric_rescales():
    model = ScaledMetric(Euclidean(2), 2.0, (0.0, 2.0))
    fr = model.frame(1.0, np.zeros(2))
    assert np.allclose(fr, np.eye(2) * np.exp(1.0), atol=1e-12)


@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_frame_gram_identity(request, name, rng):
    model = request.getfixturevalue(name)
    t1, t2 = model.time_window
    for _ in range(1000):
        t = float(rng.uniform(t1, t2))
        x = random_point(model, rng)
        fr = model.frame(t, x)
        gram = np.array([[float(model.inner(t, x, fr[i], fr[j]))
                          for j in range(model.dim)]
                         for i in range(model.dim)])
        assert np.allclose(gram, np.eye(model.dim), atol=1e-9)


# ---------------------------------------------------------------------------
# metric positivity, roundtrips, flow equality
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_metric_positive_on_random_tangents(request, name, rng):
    model = request.getfixturevalue(name)
    t1, t2 = model.time_window
    for _ in range(1000):
        t = float(rng.uniform(t1, t2))
        x = random_point(model, rng)
        v = random_tangent(model, t, x, rng)
        assert float(model.inner(t, x, v, v)) > 0.0


@pytest.mark.parametrize("name", ALL_MODEL_NAMES)
def test_exp_log_roundtrip(request, name, rng):
    model = request.getfixturevalue(name)
    t = model.time_window[0] + 0.25
    for _ in range(50):
        x = random_point(model, rng)
        v = random_tangent(model, t, x, rng, scale=0.4)
        if model.kind in ("sphere",):
            cap = np.pi * np.sqrt(model.scale(t)) * 0.9
            nv = float(model.norm(t, x, v))
            if nv > cap:
                v = v * (cap / nv)
        y = model.exp(t, x, v)
        g = minimal_geodesic(model, t, x, y)
        vrec = g.length * g.initial_velocity.components
        assert np.allclose(vrec, v, atol=1e-6)


def test_backward_flow_sphere_equality(flow_sphere, rng):
    """Metric growth equals the Ricci quadratic form pointwise."""
    for _ in range(200):
        t = float(rng.uniform(0.0, 1.0))
        x = random_point(flow_sphere, rng)
        v = random_tangent(flow_sphere, t, x, rng)
        dtg = float(flow_sphere.metric_dt(t, x, v, v))
        ric = float(flow_sphere.ricci(t, x, v))
        assert abs(dtg - ric) <= 1e-8 * max(1.0, abs(ric))


# ---------------------------------------------------------------------------
# curvature condition residual
# ---------------------------------------------------------------------------

def test_residual_static_euclidean_zero(euclid2):
    val = curvature_condition_residual(euclid2, 0.0, np.zeros(2),
                                       np.array([1.0, 2.0]), 0.0)
    assert val == pytest.approx(0.0, abs=1e-15)


def test_residual_flow_sphere_zero(flow_sphere, rng):
    for _ in range(50):
        t = float(rng.uniform(0.0, 1.0))
        x = random_point(flow_sphere, rng)
        v = random_tangent(flow_sphere, t, x, rng)
        val = curvature_condition_residual(flow_sphere, t, x, v, 0.0)
        assert abs(val) <= 1e-8


def test_residual_scaled_metric():
    k = 2.0
    model = ScaledMetric(Euclidean(2), k, (0.0, 1.0))
    v = np.array([1.0, 1.0])
    t = 0.5
    val = curvature_condition_residual(model, t, np.zeros(2), v, k)
    gvv = float(model.inner(t, np.zeros(2), v, v))
    assert val == pytest.approx(2.0 * k * gvv, rel=1e-12)


def test_residual_with_drift_field():
    """Linear inward drift Z = -x contributes -2 (grad Z)^flat = +2 g."""
    model = Euclidean(2, drift=lambda t, x: -x)
    v = np.array([0.6, -0.8])
    val = curvature_condition_residual(model, 0.0, np.array([0.4, 0.1]), v, 0.0)
    assert val == pytest.approx(2.0 * float(v @ v), rel=1e-6)


def test_residual_rejects_zero_vector(euclid2):
    with pytest.raises(InvalidInput):
        curvature_condition_residual(euclid2, 0.0, np.zeros(2), np.zeros(2),
                                     0.0)


# ---------------------------------------------------------------------------
# estimate_kappa
# ---------------------------------------------------------------------------

def test_kappa_static_zero(sphere2, rng):
    pts = [random_point(sphere2, rng) for _ in range(20)]
    assert estimate_kappa(sphere2, 0.1, 0.9, pts) == 0.0 or \
        estimate_kappa(sphere2, 0.1, 0.9, pts) <= 1e-12


def test_kappa_scaled_exact(rng):
    for k in (0.5, 2.0, -1.5):
        model = ScaledMetric(Euclidean(2), k, (0.0, 1.0))
        pts = [random_point(model, rng) for _ in range(5)]
        assert estimate_kappa(model, 0.2, 0.7, pts) \
            == pytest.approx(abs(k) / 2.0, rel=1e-9)


def test_kappa_flow_sphere(flow_sphere, rng):
    t, s = 0.05, 0.1
    pts = [random_point(flow_sphere, rng) for _ in range(5)]
    got = estimate_kappa(flow_sphere, t, s, pts)
    expected = abs(np.log(flow_sphere.scale(t) / flow_sphere.scale(s))) \
        / (2.0 * abs(t - s))
    assert got == pytest.approx(expected, rel=1e-9)
    mid_c = flow_sphere.scale(0.5 * (t + s))
    assert got == pytest.approx((flow_sphere.dim - 1) / (2.0 * mid_c),
                                rel=0.02)


def test_kappa_equal_times(euclid2):
    assert estimate_kappa(euclid2, 0.3, 0.3, [np.zeros(2)]) == 0.0


# ---------------------------------------------------------------------------
# typed wrappers and factory
# ---------------------------------------------------------------------------

def test_point_invariants(sphere2):
    ok = Point(np.array([0.0, 0.0, 1.0]), sphere2.model_id)
    assert float(sphere2.constraint_residual(ok.coords)) <= 1e-9
    with pytest.raises(InvalidInput):
        Point(np.array([np.inf, 0.0, 0.0]), sphere2.model_id)


def test_tangency_residual(sphere2):
    x = np.array([0.0, 0.0, 1.0])
    assert float(sphere2.tangency_residual(x, np.array([1.0, 0.0, 0.0]))) \
        <= 1e-9
    assert float(sphere2.tangency_residual(x, np.array([0.0, 0.0, 1.0]))) \
        == pytest.approx(1.0)


def test_make_model_descriptors():
    m1 = make_model({"kind": "euclidean", "dim": 3}, (0.0, 1.0))
    assert m1.dim == 3
    m2 = make_model({"kind": "sphere", "dim": 2, "radius_c0": 4.0,
                     "flow": True}, (0.0, 1.0))
    assert m2.radius == 2.0 and m2.flow
    m3 = make_model({"kind": "scaled", "k": 1.0,
                     "base": {"kind": "euclidean", "dim": 2}}, (0.0, 1.0))
    assert m3.k == 1.0
    m4 = make_model({"kind": "hyperbolic", "dim": 2}, (0.0, 1.0))
    assert m4.ambient_dim == 3
    with pytest.raises(InvalidInput):
        make_model({"kind": "torus", "dim": 2}, (0.0, 1.0))
    with pytest.raises(InvalidInput):
        make_model({"kind": "sphere", "dim": 2, "bogus": 1}, (0.0, 1.0))


def test_hyperbolic_green_identities(hyperbolic2, rng):
    """Curvature -1: Ric(v,v) = -(m-1)|v|^2 and distances via arccosh."""
    x = random_point(hyperbolic2, rng)
    v = random_tangent(hyperbolic2, 0.0, x, rng)
    assert float(hyperbolic2.ricci(0.0, x, v)) == pytest.approx(
        -(hyperbolic2.dim - 1) * float(hyperbolic2.inner(0.0, x, v, v)),
        rel=1e-12)
