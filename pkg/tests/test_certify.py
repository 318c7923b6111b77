import numpy as np
import pytest

from rkcmap.certify import (
    C_TOL,
    ConvexGauge,
    PreconditionError,
    boundary_jacobian_check,
    certify,
    convex_composition_check,
    decreasing_with_slack,
    epsilon_sweep,
    gauge_convexity_check,
    harmonic_series,
    make_gauge,
    max_principle_check,
    minimum_principle_check,
    superharmonicity_check,
)
from rkcmap.energy import EnergyParams
from rkcmap.grid import INTERIOR, MapField
from rkcmap.solver import solve_dirichlet
from rkcmap.targets import DiscTarget, EllipseTarget, make_loop


@pytest.fixture(scope="module")
def ellipse_p3(grid32, flat):
    loop = make_loop(EllipseTarget(1.0, 0.6), grid32.boundary_s, "warped", 0.3)
    return solve_dirichlet(grid32, flat, flat, EnergyParams(3), loop).field


def test_max_principle_identity(grid32):
    gauge = make_gauge(DiscTarget(1.0))
    rep = max_principle_check(MapField(grid32.nodes, grid32), gauge)
    assert rep["boundarySup"] == pytest.approx(0, abs=1e-12) and rep["interiorSup"] < 0 and rep["passed"]


def test_max_principle_constant_field(grid32):
    rep = max_principle_check(MapField(np.full(grid32.size, 0.2 + 0.1j), grid32), make_gauge(DiscTarget(1.0)))
    assert rep["boundarySup"] == rep["interiorSup"] and rep["passed"]


def test_max_principle_poisson(grid32, flat):
    g = np.exp(1j * (grid32.boundary_s + 0.3 * np.sin(grid32.boundary_s)))
    u = solve_dirichlet(grid32, flat, flat, EnergyParams(2), g).field
    assert np.max(np.abs(u.values[grid32.kind == INTERIOR])) < 1


def test_gauges():
    pts = 0.5 * np.exp(1j * np.linspace(0, 6, 40))
    assert gauge_convexity_check(make_gauge(EllipseTarget(1, 0.6)), pts)["passed"]
    assert gauge_convexity_check(make_gauge(kind="distance-to-ball-center"), pts)["passed"]
    bad = ConvexGauge("negative", lambda w: -np.abs(w) ** 2)
    assert not gauge_convexity_check(bad, pts)["passed"]
    with pytest.raises(ValueError):
        make_gauge(kind="level-set")


def test_convex_composition(ellipse_p3, flat):
    params = EnergyParams(3)
    good = convex_composition_check(ellipse_p3, params, flat, flat, make_gauge(kind="distance-to-ball-center"))
    assert good["passed"]
    bad = convex_composition_check(ellipse_p3, params, flat, flat, ConvexGauge("neg", lambda w: -np.abs(w) ** 2))
    assert not bad["passed"]


def test_boundary_jacobian(grid32, flat, ellipse_p3):
    assert boundary_jacobian_check(MapField(grid32.nodes, grid32), flat, flat)["min"] == pytest.approx(1)
    flipped = boundary_jacobian_check(MapField(np.conj(grid32.nodes), grid32), flat, flat)
    assert flipped["min"] == pytest.approx(-1) and not flipped["passed"]
    assert boundary_jacobian_check(ellipse_p3, flat, flat)["min"] > 0


def test_superharmonicity(grid32, flat, ellipse_p3):
    ident = MapField(grid32.nodes, grid32)
    rep = superharmonicity_check(ident, EnergyParams(4), flat, flat)
    assert abs(rep["worst"]) < 1e-9 and rep["passed"]
    assert superharmonicity_check(ellipse_p3, EnergyParams(3), flat, flat)["passed"]
    with pytest.raises(PreconditionError) as err:
        superharmonicity_check(MapField(np.conj(grid32.nodes), grid32), EnergyParams(4), flat, flat)
    assert err.value.node is not None


def test_minimum_principle(grid32, flat, ellipse_p3):
    const = minimum_principle_check(MapField(grid32.nodes, grid32), EnergyParams(4), flat, flat)
    assert all(abs(r["margin"]) < 1e-12 for r in const["levels"])
    rep = minimum_principle_check(ellipse_p3, EnergyParams(3), flat, flat)
    assert [r["radius"] for r in rep["levels"]] == [1.0, 0.9, 0.7, 0.5, 0.3] and rep["passed"]


def test_certificate_identity(grid32, flat):
    rep = certify(MapField(grid32.nodes, grid32), EnergyParams(4, 0.3), flat, flat, DiscTarget(1.0))
    assert rep.all_passed and rep.to_dict()["allPassed"]


def test_certificate_flags_reflection(grid32, flat):
    rep = certify(MapField(np.conj(grid32.nodes), grid32), EnergyParams(4), flat, flat, DiscTarget(1.0))
    assert not rep.all_passed and rep.superharmonicityWorst is None


def test_sweep_single_entry(grid16, flat):
    loop = make_loop(EllipseTarget(1, 0.6), grid16.boundary_s)
    rep = epsilon_sweep(grid16, flat, flat, 3, loop, [0.0])
    assert rep["entries"] == [] and rep["allConverged"]
    with pytest.raises(ValueError):
        epsilon_sweep(grid16, flat, flat, 3, loop, [0.1])


def test_decreasing_with_slack():
    assert decreasing_with_slack([1.0, 0.5, 0.52, 0.1])
    assert not decreasing_with_slack([1.0, 1.2])


def test_harmonic_series_recovers_polynomials():
    u, uz, uzb = harmonic_series(lambda t: np.exp(2j * t) + 0.5 * np.exp(-1j * t), modes=16)
    z = np.array([0.3 + 0.2j, -0.1j])
    assert np.allclose(u(z), z**2 + 0.5 * np.conj(z))
    assert np.allclose(uz(z), 2 * z) and np.allclose(uzb(z), 0.5)


def test_tolerance_constant_is_positive():
    assert 0 < C_TOL < 10
