import numpy as np
import pytest

from anisokpp.anisotropy import asym1d, certify, ellipse, euclidean
from anisokpp.errors import InvalidDomainError
from anisokpp.grid import (GridFunction, build_grid, distance_to_dirichlet,
                           energy, energy_gradient, mass_integral,
                           poincare_constant)

from conftest import DD, DN, ND, SQUARE_LEFT_D, grid_1d, grid_2d, smooth_field


def test_build_1d_nodes_and_mask():
    g = grid_1d(4)
    assert g.node_count == 5
    np.testing.assert_array_equal(g.dirichlet_mask,
                                  [True, False, False, False, False])


def test_build_2d_nodes_and_mask():
    g = build_grid(2, (4, 4), SQUARE_LEFT_D)
    assert g.node_count == 25
    assert int(g.dirichlet_mask.sum()) == 5
    assert np.all(g.coords[g.dirichlet_mask, 0] == 0.0)


def test_all_neumann_rejected():
    with pytest.raises(InvalidDomainError):
        build_grid(1, 8, {"left": "neumann", "right": "neumann"})


def test_labels_must_cover_all_pieces():
    with pytest.raises(InvalidDomainError):
        build_grid(2, (4, 4), {"left": "dirichlet", "right": "neumann"})


def test_too_few_cells_rejected():
    with pytest.raises(ValueError):
        build_grid(1, 1, DN)


def test_lumped_weights_sum_to_measure():
    for g in (grid_1d(7), grid_2d(5)):
        assert g.weights.sum() == pytest.approx(g.measure, rel=1e-14)


def test_energy_linear_two_slope():
    g = grid_1d(16)
    norm = asym1d(2.0, 1.0)
    up = GridFunction.from_callable(g, lambda x: x)
    assert energy(norm, up) == pytest.approx(4.0, rel=1e-13)
    g2 = grid_1d(16, {"left": "neumann", "right": "dirichlet"})
    down = GridFunction.from_callable(g2, lambda x: 1.0 - x)
    assert energy(norm, down) == pytest.approx(1.0, rel=1e-13)


def test_energy_sine_quadrature():
    # exact integral of (pi/2 cos(pi x / 2))^2 over (0,1) is pi^2/8
    g = grid_1d(1024)
    u = GridFunction.from_callable(g, lambda x: np.sin(np.pi * x / 2.0))
    exact = np.pi ** 2 / 8.0
    assert energy(euclidean(1), u) == pytest.approx(exact, rel=1e-5)


def test_energy_two_homogeneous(rng):
    g = grid_1d(64)
    u = GridFunction(g, smooth_field(g, rng))
    e = energy(euclidean(1), u)
    for t in (0.5, 2.0, 7.0):
        scaled = GridFunction(g, t * u.values)
        assert energy(euclidean(1), scaled) == pytest.approx(t ** 2 * e, rel=1e-12)


def test_energy_growth_sandwich(rng):
    norm = asym1d(2.0, 1.0)
    c = certify(norm, 64)
    g = grid_1d(64)
    u = GridFunction(g, smooth_field(g, rng))
    dirichlet_energy = energy(euclidean(1), u)
    e = energy(norm, u)
    assert c.alpha_lo ** 2 * dirichlet_energy <= e + 1e-12
    assert e <= c.alpha_hi ** 2 * dirichlet_energy + 1e-12


def test_mass_integral_total_measure():
    g = grid_1d(32)
    one = GridFunction.full(g, 1.0)
    assert mass_integral(one, one, 2) == pytest.approx(1.0, rel=1e-14)


def test_mass_integral_sine():
    g = grid_1d(1024)
    one = GridFunction.full(g, 1.0)
    u = GridFunction.from_callable(g, lambda x: np.sin(np.pi * x / 2.0))
    assert mass_integral(one, u, 2) == pytest.approx(0.5, abs=1e-5)


def test_mass_integral_signed():
    g = grid_1d(32)
    m = GridFunction.full(g, -3.0)
    u = GridFunction.full(g, 1.0)
    assert mass_integral(m, u, 2) == pytest.approx(-3.0)


def test_mass_integral_exact_for_linear_power_one():
    g = grid_1d(8)
    m = GridFunction.full(g, 2.0)
    u = GridFunction.from_callable(g, lambda x: 3.0 * x + 1.0)
    # trapezoid is exact on piecewise-linear integrands: 2 * (3/2 + 1)
    assert mass_integral(m, u, 1) == pytest.approx(5.0, rel=1e-14)


def test_mass_integral_bilinear(rng):
    g = grid_1d(32)
    m1 = GridFunction(g, rng.normal(size=g.node_count))
    m2 = GridFunction(g, rng.normal(size=g.node_count))
    u = GridFunction(g, rng.normal(size=g.node_count))
    lhs = mass_integral(GridFunction(g, 2.0 * m1.values + m2.values), u, 2)
    assert lhs == pytest.approx(2.0 * mass_integral(m1, u, 2)
                                + mass_integral(m2, u, 2), rel=1e-12)


def test_mass_integral_grid_mismatch():
    m = GridFunction.full(grid_1d(8), 1.0)
    u = GridFunction.full(grid_1d(16), 1.0)
    with pytest.raises(ValueError):
        mass_integral(m, u, 2)


def test_gradient_of_zero_field():
    g = grid_1d(16)
    grad = energy_gradient(euclidean(1), GridFunction.zeros(g))
    assert np.all(grad.values == 0.0)


def test_gradient_constant_flux_interior():
    g = grid_1d(16)
    u = GridFunction.from_callable(g, lambda x: x)
    grad = energy_gradient(asym1d(2.0, 1.0), u)
    np.testing.assert_allclose(grad.values[1:-1], 0.0, atol=1e-13)


@pytest.mark.parametrize("make_grid,norm", [
    (lambda: grid_1d(48), euclidean(1)),
    (lambda: grid_1d(48), asym1d(2.0, 1.0)),
    (lambda: grid_2d(12), euclidean(2)),
    (lambda: grid_2d(12), ellipse([[3.0, 0.4], [0.4, 1.0]])),
], ids=["1d-euclid", "1d-two-slope", "2d-euclid", "2d-ellipse"])
def test_gradient_matches_central_differences(make_grid, norm, rng):
    g = make_grid()
    eps = 1e-6
    for _ in range(10):
        u = GridFunction(g, smooth_field(g, rng))
        phi = GridFunction(g, smooth_field(g, rng))
        grad = energy_gradient(norm, u).values
        up = GridFunction(g, u.values + eps * phi.values)
        dn = GridFunction(g, u.values - eps * phi.values)
        fd = (energy(norm, up) - energy(norm, dn)) / (2.0 * eps)
        pairing = float(grad @ phi.values)
        assert fd == pytest.approx(pairing, rel=1e-6, abs=1e-10)


def test_poincare_dirichlet_neumann():
    g = grid_1d(512)
    assert poincare_constant(g) == pytest.approx(2.0 / np.pi, abs=1e-3)


def test_poincare_dirichlet_both_ends():
    g = grid_1d(512, DD)
    assert poincare_constant(g) == pytest.approx(1.0 / np.pi, abs=1e-3)


def test_poincare_square_left_dirichlet():
    g = grid_2d(48)
    assert poincare_constant(g) == pytest.approx(2.0 / np.pi, abs=1e-2)


def test_discrete_poincare_inequality(rng):
    g = grid_1d(128)
    c = poincare_constant(g)
    one = GridFunction.full(g, 1.0)
    for _ in range(20):
        u = GridFunction(g, smooth_field(g, rng))
        lhs = mass_integral(one, u, 2)
        rhs = c ** 2 * energy(euclidean(1), u)
        assert lhs <= rhs * (1.0 + 1e-6) + 1e-12


def test_distance_interpolant():
    g = grid_1d(10, ND)
    np.testing.assert_allclose(distance_to_dirichlet(g).values, 1.0 - g.coords)
    g2 = grid_1d(10, DD)
    d = distance_to_dirichlet(g2).values
    assert d[0] == 0.0 and d[-1] == 0.0 and d.max() == pytest.approx(0.5)
