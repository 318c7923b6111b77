import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkcmap.energy import (
    EnergyModel,
    EnergyParams,
    alpha_bounds,
    derived_fields,
    du_norm_sq,
    el_residual,
    energy_gradient,
    energy_value,
    jacobian,
    lambda_field,
    monotonicity_gap,
    subharmonicity_exponent,
    t_field,
    v_field,
)
from rkcmap.grid import INTERIOR, MapField


def field(grid, fn):
    return MapField.from_function(grid, fn)


def test_params_validation():
    with pytest.raises(ValueError):
        EnergyParams(1.5)
    with pytest.raises(ValueError):
        EnergyParams(3, 1.0)
    with pytest.raises(ValueError):
        EnergyParams(3, -0.1)


def test_du_norm_and_jacobian_examples(grid32, flat, sphere):
    ident = field(grid32, lambda z: z)
    assert np.allclose(du_norm_sq(ident, flat, flat), 1)
    k0 = np.argmin(np.abs(grid32.nodes))
    assert du_norm_sq(ident, flat, sphere)[k0] == pytest.approx(4.0)
    mixed = field(grid32, lambda z: z + 0.5 * np.conj(z))
    assert np.allclose(du_norm_sq(mixed, flat, flat), 1.25)
    assert np.allclose(jacobian(ident, flat, flat), 1)
    assert np.allclose(jacobian(field(grid32, np.conj), flat, flat), -1)
    assert np.allclose(jacobian(mixed, flat, flat), 0.75)


def test_lambda_examples(grid32, flat):
    z2 = field(grid32, lambda z: z**2)
    assert np.allclose(lambda_field(z2, EnergyParams(2), flat, flat), 1)
    assert np.allclose(lambda_field(field(grid32, lambda z: 2 * z), EnergyParams(4), flat, flat), 4)
    const = field(grid32, lambda z: 0 * z + 0.3)
    assert np.allclose(lambda_field(const, EnergyParams(3, 0.5), flat, flat), math.sqrt(0.5**2))


def test_energy_examples(grid64, flat):
    ident = field(grid64, lambda z: z)
    h = grid64.h
    assert energy_value(ident, EnergyParams(2), flat, flat) == pytest.approx(math.pi, abs=3 * h)
    assert energy_value(ident, EnergyParams(4), flat, flat) == pytest.approx(math.pi, abs=3 * h)
    assert energy_value(ident, EnergyParams(2, 0.5), flat, flat) == pytest.approx(1.25 * math.pi, abs=4 * h)


def test_t_and_v_examples(grid32, flat):
    mixed = field(grid32, lambda z: z + 0.5 * np.conj(z))
    d = derived_fields(mixed, EnergyParams(4), flat, flat)
    assert np.allclose(d.lam, 1.25) and np.allclose(d.jacobian, 0.75) and np.allclose(d.T, 0.9375)
    z2 = field(grid32, lambda z: z**2 + 0.1 * np.conj(z))
    assert np.allclose(t_field(z2, EnergyParams(2), flat, flat), jacobian(z2, flat, flat))
    v1, v2 = v_field(field(grid32, lambda z: z), EnergyParams(4), flat, flat)
    assert np.allclose(v1, 1) and np.allclose(v2, 0)
    uz_like = v_field(z2, EnergyParams(2), flat, flat)
    assert np.allclose(uz_like[0], 2 * grid32.nodes, atol=1e-9)


@pytest.mark.parametrize("p,eps", [(2, 0.0), (3, 0.2), (4, 0.0), (5, 0.5)])
def test_el_residual_vanishes_on_affine_maps(grid32, flat, p, eps):
    u = field(grid32, lambda z: (1.2 + 0.3j) * z + 0.4 * np.conj(z) + 0.1)
    res = el_residual(u, EnergyParams(p, eps), flat, flat)
    inner = grid32.kind == INTERIOR
    assert np.nanmax(np.abs(res[inner])) < 1e-9
    assert np.all(np.isnan(res[~inner]))


def test_el_residual_conformal_into_sphere(grid32, flat, sphere):
    res = el_residual(field(grid32, lambda z: 0.5 * z), EnergyParams(2), flat, sphere)
    assert np.nanmax(np.abs(res)) < 1e-9


def test_el_residual_matches_symbolic(grid64, flat):
    res = el_residual(field(grid64, lambda z: z**2), EnergyParams(4), flat, flat)
    ok = grid64.full_stencil & (grid64.kind == INTERIOR)
    assert np.max(np.abs(res[ok] - 8 * grid64.nodes[ok] ** 2)) < 1e-8


def test_gradient_of_identity_is_zero(grid32, flat):
    g = energy_gradient(field(grid32, lambda z: z), EnergyParams(2), flat, flat)
    assert np.max(np.abs(g)) < 1e-12


@pytest.mark.parametrize("p,eps", [(2, 0.0), (3, 0.3), (4, 0.1)])
def test_gradient_matches_finite_differences(grid16, flat, sphere, p, eps, rng):
    params = EnergyParams(p, eps)
    model = EnergyModel(grid16, params, flat, sphere)
    u = 0.4 * grid16.nodes + 0.05 * grid16.nodes**2 + 0.02 * np.conj(grid16.nodes)
    g = model.gradient(u)
    k = rng.choice(np.flatnonzero(model.free), 5, replace=False)
    for node in k:
        for direction, part in ((1.0, "real"), (1j, "imag")):
            step = 1e-6
            up, dn = u.copy(), u.copy()
            up[node] += direction * step
            dn[node] -= direction * step
            fd = (model.value(up) - model.value(dn)) / (2 * step)
            assert getattr(g[node], part) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_hessian_is_symmetric(grid16, flat):
    model = EnergyModel(grid16, EnergyParams(4, 0.2), flat, flat)
    H = model.hessian(grid16.nodes + 0.1 * grid16.nodes**2)
    assert abs(H - H.T).max() < 1e-10


def test_subharmonicity_exponent():
    assert subharmonicity_exponent(EnergyParams(2)) == 1
    n = subharmonicity_exponent(EnergyParams(4))
    assert n == 2
    c = 1 / 3
    assert c**2 - n < 0 and c**2 - 1 <= c**4 / (c**2 - n)
    assert alpha_bounds(EnergyParams(4, 0.1)) == (0.0, 1.0)
    assert subharmonicity_exponent(EnergyParams(2), alpha_lo=-0.45, alpha_hi=0) == 2
    assert subharmonicity_exponent(EnergyParams(2), alpha_lo=-0.49, alpha_hi=0) == 7
    with pytest.raises(ValueError):
        subharmonicity_exponent(EnergyParams(2), alpha_lo=-0.5, alpha_hi=0)
    with pytest.raises(ValueError):
        subharmonicity_exponent(EnergyParams(2), alpha_lo=-0.495, alpha_hi=0)


def test_monotonicity_equal_pairs():
    X = np.array([[1 + 2j, 0.5j]])
    m = monotonicity_gap(X, X, EnergyParams(3, 0.1))
    assert m.lhs[0] == 0 and m.rhs[0] == 0 and m.quotient[0] == 0


vec = st.lists(st.floats(-10, 10), min_size=4, max_size=4)


@given(vec, vec, st.sampled_from([2.0, 2.5, 3.0, 4.0, 6.0]), st.sampled_from([0.0, 0.1, 0.5]))
@settings(max_examples=200, deadline=None)
def test_monotonicity_properties(x, y, p, eps):
    m = monotonicity_gap(np.array(x), np.array(y), EnergyParams(p, eps))
    assert m.lhs >= -1e-9 * (1 + m.rhs)
    # the monotonicity constant stays above a p-dependent floor
    if m.rhs > 1e-12:
        assert m.lhs >= 0.5 * 2 ** ((2 - p) / 2) * m.rhs - 1e-9
    # mean value bound with q = (p - 2) / 4
    assert m.quotient <= 1 + (p - 2) / 2 + 1e-9
