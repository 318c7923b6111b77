import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkcmap.errors import ChartExitError, EvaluationError
from rkcmap.geometry import (
    ball_convexity_check,
    christoffel_a,
    contraction_map,
    exp_map,
    flat_metric,
    gauss_curvature,
    geodesic_distance,
    geodesic_shoot,
    hyperbolic_metric,
    increasing_distance_check,
    lipschitz_quotients,
    log_map,
    make_geodesic_ball,
    make_metric,
    sphere_metric,
    tangent_geodesic_check,
)


def test_curvature_presets():
    assert gauss_curvature(flat_metric(), 0.3 + 0.2j) == 0
    assert gauss_curvature(sphere_metric(), 0j) == pytest.approx(1.0, abs=1e-12)
    assert gauss_curvature(hyperbolic_metric(), 0j) == pytest.approx(-1.0, abs=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=50, deadline=None)
def test_sphere_curvature_is_constant(x, y):
    assert gauss_curvature(sphere_metric(), complex(x, y)) == pytest.approx(1.0, rel=1e-10)


def test_christoffel_values():
    assert christoffel_a(flat_metric(), 0.4j) == 0
    assert christoffel_a(sphere_metric(), 0j) == 0
    assert christoffel_a(sphere_metric(), 1 + 0j) == pytest.approx(-1.0)


def test_metric_evaluation_outside_chart():
    with pytest.raises(EvaluationError):
        hyperbolic_metric().eval(1.0 + 0j)


def test_make_metric_custom_and_unknown():
    m = make_metric("custom", preset="sphere", curvature=4.0)
    assert gauss_curvature(m, 0.1j) == pytest.approx(4.0, rel=1e-10)
    with pytest.raises(ValueError):
        make_metric("torus")


def test_shoot_flat_and_sphere():
    assert geodesic_shoot(flat_metric(), 0j, 1 + 0j).endpoint == pytest.approx(1.0)
    for t in (0.3, 1.0, 2.0):
        end = geodesic_shoot(sphere_metric(), 0j, 0.5 + 0j, t_end=t, steps=1024).endpoint
        assert end == pytest.approx(math.tan(t / 2), abs=1e-9)
    path = geodesic_shoot(sphere_metric(), 0.2j, 0j)
    assert np.all(path.positions == 0.2j)


def test_shoot_reports_chart_exit():
    bounded = replace(flat_metric(), chart_radius=1.0)
    with pytest.raises(ChartExitError) as err:
        exp_map(bounded, 0j, 4 + 0j)
    assert err.value.exit_time == pytest.approx(0.25, abs=0.01)


def test_unit_speed_is_preserved():
    path = geodesic_shoot(sphere_metric(), 0.3 + 0.1j, 0.7 - 0.2j)
    speeds = path.speeds()
    assert np.ptp(speeds) < 1e-8 * speeds[0]


def test_distances():
    assert geodesic_distance(flat_metric(), 0j, 3 + 4j) == pytest.approx(5.0)
    assert geodesic_distance(sphere_metric(), 0j, 1 + 0j) == pytest.approx(math.pi / 2, abs=1e-6)
    assert log_map(sphere_metric(), 0.2 + 0.1j, 0.2 + 0.1j) == 0


@given(st.complex_numbers(max_magnitude=0.6), st.complex_numbers(max_magnitude=0.8))
@settings(max_examples=30, deadline=None)
def test_exp_log_round_trip(q, v):
    m = sphere_metric()
    q1 = exp_map(m, q, v)
    assert abs(log_map(m, q, q1) - v) <= 1e-8


def test_ball_convexity_flat_and_sphere():
    flat = flat_metric()
    rep = ball_convexity_check(flat, make_geodesic_ball(flat, 0j, 1.0), trials=30)
    assert rep["passed"] and rep["max_gauss_bonnet_residual"] < 1e-10
    sph = sphere_metric()
    assert ball_convexity_check(sph, make_geodesic_ball(sph, 0j, 0.1), trials=30)["passed"]


def test_ball_convexity_flags_collinear_triangles():
    m = sphere_metric()
    verts = np.array([[0j], [0.1 + 0j], [0.2 + 0j]])
    rep = ball_convexity_check(m, make_geodesic_ball(m, 0j, 0.3), vertices=verts)
    assert rep["degenerate"] == 1 and rep["tested"] == 0


def test_tangent_geodesics_stay_outside():
    flat = flat_metric()
    ball = make_geodesic_ball(flat, 0j, 0.5)
    rep = tangent_geodesic_check(flat, ball, samples=[0.0, 0.3])
    assert rep["contact_residual"] < 1e-12
    assert rep["min_margin"] == pytest.approx(math.sqrt(0.25 + 0.09) - 0.5, abs=1e-9)
    sph = sphere_metric()
    rep = tangent_geodesic_check(sph, make_geodesic_ball(sph, 0j, 0.2))
    assert rep["passed"] and rep["min_margin"] > 0


def test_increasing_distance():
    rep = increasing_distance_check(flat_metric(), 0j, 1 + 0j, 1j, 1.0, steps=4)
    assert rep["passed"]
    assert rep["distances"] == pytest.approx([0, 0.25 * math.sqrt(2), 0.5 * math.sqrt(2),
                                              0.75 * math.sqrt(2), math.sqrt(2)], abs=1e-9)
    assert increasing_distance_check(sphere_metric(), 0j, 1 + 0j, np.exp(1j * math.pi / 3), 0.3)["passed"]
    same = increasing_distance_check(sphere_metric(), 0j, 1j, 1j, 0.3)
    assert same["excluded"] == 1 and same["passed"] is None


def test_contraction_map():
    flat = flat_metric()
    b1, b2 = make_geodesic_ball(flat, 0j, 1.0), make_geodesic_ball(flat, 0j, 3.0)
    assert contraction_map(flat, b1, b2, 0.3 + 0.2j)[0] == 0.3 + 0.2j
    assert contraction_map(flat, b1, b2, 2 + 0j)[0] == pytest.approx(1.0)
    sph = sphere_metric()
    r, r0 = make_geodesic_ball(sph, 0j, 0.1), make_geodesic_ball(sph, 0j, 0.3)
    rng = np.random.default_rng(0)

    def annulus(k):
        d = rng.uniform(0.11, 0.29, k) * np.exp(1j * rng.uniform(0, 2 * np.pi, k)) / 2
        return exp_map(sph, np.zeros(k, complex), d)

    assert np.max(lipschitz_quotients(sph, r, r0, annulus(200), annulus(200))) < 1
    with pytest.raises(ValueError):
        contraction_map(sph, r0, r, 0j)
