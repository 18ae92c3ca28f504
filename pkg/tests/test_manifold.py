"""Ball-geometry kernel: closed-form oracle values, metric axioms,
inverse maps, Möbius identities, and the flat-space limit."""

import numpy as np
import pytest

from geoplan import gradengine as ge
from geoplan import manifold as mf
from geoplan.manifold import Curvature

CURVATURES = [0.1, 1.0, 4.0, 10.0]
DIMS = [2, 8, 32]


def _pt(x, n=2):
    v = np.zeros(n)
    v[: len(x)] = x
    return v


def _rand_ball(rng, c, n, rmax=0.9):
    """Uniform-direction point with sqrt(c)*|x| <= rmax."""
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    r = rng.uniform(0.0, rmax) / np.sqrt(c)
    return r * v


# ---------------------------------------------------------------------------
# closed-form oracle values

def test_distance_closed_forms():
    # d((0.5,0), 0, c=1) = 2*artanh(0.5) = ln 3
    d = mf.distance(_pt([0.5]), _pt([0.0]), 1.0)
    assert float(d) == pytest.approx(np.log(3.0), abs=1e-9)
    assert float(d) == pytest.approx(1.098612, abs=1e-6)
    # scaling: d((0.25,0), 0, c=4) = (2/2)*artanh(2*0.25)
    d4 = mf.distance(_pt([0.25]), _pt([0.0]), 4.0)
    assert float(d4) == pytest.approx(0.549306, abs=1e-6)


def test_exp_origin_values():
    out = mf.exp_origin(_pt([1.0]), 1.0)
    assert float(out[0]) == pytest.approx(np.tanh(1.0), abs=1e-9)
    assert float(out[0]) == pytest.approx(0.761594, abs=1e-6)
    out = mf.exp_origin(_pt([1.0]), 4.0)
    assert float(out[0]) == pytest.approx(np.tanh(2.0) / 2.0, abs=1e-9)
    assert float(out[0]) == pytest.approx(0.482014, abs=1e-6)


def test_log_origin_values():
    out = mf.log_origin(_pt([0.5]), 1.0)
    assert float(out[0]) == pytest.approx(np.arctanh(0.5), abs=1e-9)
    assert float(out[0]) == pytest.approx(0.549306, abs=1e-6)


def test_mobius_add_collinear_value():
    out = mf.mobius_add(_pt([0.5]), _pt([0.3]), 1.0)
    assert float(out[0]) == pytest.approx(0.8 / 1.15, abs=1e-9)
    assert float(out[0]) == pytest.approx(0.695652, abs=1e-6)
    assert float(out[1]) == pytest.approx(0.0, abs=1e-12)


def test_conformal_values():
    assert float(mf.conformal(_pt([0.5]), 1.0)) == pytest.approx(8.0 / 3.0,
                                                                 abs=1e-12)
    assert float(mf.conformal(_pt([0.25]), 4.0)) == pytest.approx(
        2.0 / (1.0 - 4.0 * 0.0625), abs=1e-9)


def test_clamp_to_ball():
    out = mf.clamp_to_ball(_pt([2.0]), 1.0)
    assert float(out[0]) == pytest.approx(0.99999, abs=1e-9)
    # idempotent and identity inside the ball
    np.testing.assert_allclose(np.asarray(mf.clamp_to_ball(out, 1.0)), out)
    inside = _pt([0.3, 0.1])
    np.testing.assert_allclose(np.asarray(mf.clamp_to_ball(inside, 1.0)),
                               inside)


def test_curvature_type():
    c = Curvature.from_c(4.0)
    assert c.c == pytest.approx(4.0)
    assert Curvature.from_c(50.0).clamped().c == pytest.approx(mf.MAX_C)
    assert Curvature.from_c(1e-3).clamped().c == pytest.approx(mf.MIN_C)
    with pytest.raises(ValueError):
        Curvature.from_c(-1.0)


def test_check_in_ball_rejects_outside():
    with pytest.raises(mf.ManifoldDomainError):
        mf.check_in_ball(_pt([1.5]), 1.0)
    mf.check_in_ball(_pt([0.9]), 1.0)   # no raise


# ---------------------------------------------------------------------------
# metric axioms, seeded sweeps over curvature and dimension

@pytest.mark.parametrize("c", CURVATURES)
def test_metric_axioms(c):
    rng = np.random.default_rng(int(c * 10))
    for n in DIMS:
        for _ in range(84):   # ~1000 triples per curvature across dims
            u, v, w = (_rand_ball(rng, c, n) for _ in range(3))
            duv = float(mf.distance(u, v, c))
            dvu = float(mf.distance(v, u, c))
            assert abs(duv - dvu) < 1e-12
            assert duv >= 0.0
            assert float(mf.distance(u, u, c)) == 0.0
            duw = float(mf.distance(u, w, c))
            dwv = float(mf.distance(w, v, c))
            assert duv <= duw + dwv + 1e-9


@pytest.mark.parametrize("c", CURVATURES)
def test_radial_additivity(c):
    # distances add along a radial geodesic through the origin
    rng = np.random.default_rng(int(c * 100) + 1)
    for n in DIMS:
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        r1, r2 = 0.2, 0.55
        p0 = np.zeros(n)
        p1 = np.asarray(mf.exp_origin(r1 * direction, c))
        p2 = np.asarray(mf.exp_origin(r2 * direction, c))
        d01 = float(mf.distance(p0, p1, c))
        d12 = float(mf.distance(p1, p2, c))
        d02 = float(mf.distance(p0, p2, c))
        assert abs(d01 + d12 - d02) < 1e-9


def test_euclidean_limit():
    # c -> 0: the geodesic distance approaches 2|u - v|
    rng = np.random.default_rng(7)
    c = 1e-4
    for n in DIMS:
        u = 0.3 * rng.standard_normal(n) / np.sqrt(n)
        v = 0.3 * rng.standard_normal(n) / np.sqrt(n)
        d = float(mf.distance(u, v, c))
        ref = 2.0 * np.linalg.norm(u - v)
        assert abs(d - ref) / ref < 0.01


# ---------------------------------------------------------------------------
# Möbius identities and inverse maps

@pytest.mark.parametrize("c", CURVATURES)
def test_mobius_identities(c):
    rng = np.random.default_rng(int(c * 10) + 2)
    for n in DIMS:
        x = _rand_ball(rng, c, n)
        zero = np.zeros(n)
        np.testing.assert_allclose(np.asarray(mf.mobius_add(zero, x, c)), x,
                                   atol=1e-12)
        np.testing.assert_allclose(np.asarray(mf.mobius_add(x, zero, c)), x,
                                   atol=1e-12)
        np.testing.assert_allclose(np.asarray(mf.mobius_add(-x, x, c)), zero,
                                   atol=1e-12)


@pytest.mark.parametrize("c", CURVATURES)
def test_origin_maps_inverse(c):
    rng = np.random.default_rng(int(c * 10) + 3)
    # tangent norms above artanh(1-eps)/sqrt(c) land on the ball clamp and
    # cannot invert; stay strictly inside that radius
    vmax = min(3.0, 0.95 * np.arctanh(1.0 - mf.BALL_EPS) / np.sqrt(c))
    for n in DIMS:
        for scale in (1e-6, 0.1, min(1.0, vmax), vmax):
            v = rng.standard_normal(n)
            v *= scale / np.linalg.norm(v)
            back = np.asarray(mf.log_origin(mf.exp_origin(v, c), c))
            tol = 1e-6 if scale <= 1e-6 else 1e-5 * np.linalg.norm(v)
            assert np.linalg.norm(back - v) <= tol


@pytest.mark.parametrize("c", CURVATURES)
def test_base_point_maps_inverse(c):
    rng = np.random.default_rng(int(c * 10) + 4)
    for n in DIMS:
        x = _rand_ball(rng, c, n, rmax=0.5)
        y = _rand_ball(rng, c, n, rmax=0.5)
        v = np.asarray(mf.log_at(x, y, c))
        y2 = np.asarray(mf.exp_at(x, v, c))
        assert np.linalg.norm(y2 - y) < 1e-8
        back = np.asarray(mf.log_at(x, mf.exp_at(x, v, c), c))
        assert np.linalg.norm(back - v) < 1e-8


def test_distance_is_mobius_gyrodistance():
    # d(u,v) = (2/sqrt(c)) * artanh(sqrt(c) |(-u) (+) v|)
    rng = np.random.default_rng(11)
    for c in CURVATURES:
        u = _rand_ball(rng, c, 8)
        v = _rand_ball(rng, c, 8)
        w = np.asarray(mf.mobius_add(-u, v, c))
        ref = 2.0 / np.sqrt(c) * np.arctanh(np.sqrt(c) * np.linalg.norm(w))
        assert float(mf.distance(u, v, c)) == pytest.approx(ref, rel=1e-9)


def test_batched_inputs():
    rng = np.random.default_rng(12)
    u = 0.4 * rng.standard_normal((5, 3)) / np.sqrt(3)
    v = 0.4 * rng.standard_normal((5, 3)) / np.sqrt(3)
    d = np.asarray(mf.distance(u, v, 1.0))
    assert d.shape == (5,)
    for i in range(5):
        assert d[i] == pytest.approx(float(mf.distance(u[i], v[i], 1.0)))


def test_gradients_flow_through_maps():
    rng = np.random.default_rng(13)
    v0 = 0.5 * rng.standard_normal(4)
    target = 0.3 * rng.standard_normal(4)

    def fn(v):
        return mf.distance(mf.exp_origin(v, 1.0), target, 1.0)

    rep = ge.finite_diff_check(fn, v0)
    assert rep.max_rel_err < 1e-6
