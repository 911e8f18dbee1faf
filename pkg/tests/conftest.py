import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gtwalk.manifolds import Euclidean, Hyperbolic, RoundSphere, ScaledMetric


@pytest.fixture(scope="session")
def euclid1():
    return Euclidean(1)


@pytest.fixture(scope="session")
def euclid2():
    return Euclidean(2)


@pytest.fixture(scope="session")
def sphere2():
    return RoundSphere(2, 1.0)


@pytest.fixture(scope="session")
def flow_sphere():
    return RoundSphere(2, 1.0, flow=True, time_window=(0.0, 1.0))


@pytest.fixture(scope="session")
def circle():
    return RoundSphere(1, 1.0)


@pytest.fixture(scope="session")
def hyperbolic2():
    return Hyperbolic(2)


@pytest.fixture(scope="session")
def scaled_euclid2():
    return ScaledMetric(Euclidean(2), 1.0, (0.0, 1.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_point(model, rng, spread=1.0):
    """A valid random point on the model."""
    kind = model.kind
    if kind == "euclidean" or kind == "numeric-chart":
        return rng.normal(size=model.ambient_dim) * spread
    if kind == "sphere":
        z = rng.normal(size=model.ambient_dim)
        return model.radius * z / np.linalg.norm(z)
    if kind == "hyperbolic":
        spatial = rng.normal(size=model.dim) * spread
        return np.concatenate([[np.sqrt(1.0 + spatial @ spatial)], spatial])
    if kind == "scaled":
        return random_point(model.base, rng, spread)
    raise ValueError(kind)


def random_tangent(model, t, x, rng, scale=1.0):
    fr = model.frame(t, x)
    z = rng.normal(size=model.dim) * scale
    return np.einsum("j,jd->d", z, fr)
