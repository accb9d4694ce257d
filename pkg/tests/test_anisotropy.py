import numpy as np
import pytest

from anisokpp.anisotropy import (asym1d, certify, custom, ellipse, euclidean,
                                 flux, h_eval, unit_sphere_sample)
from anisokpp.errors import InvalidNormError


def test_h_eval_euclidean():
    assert h_eval(euclidean(2), (3.0, 4.0)) == pytest.approx(5.0, abs=0.0)


def test_h_eval_two_slope_branches():
    norm = asym1d(3.0, 1.0)
    assert h_eval(norm, 2.0) == pytest.approx(6.0)
    assert h_eval(norm, -2.0) == pytest.approx(2.0)


def test_h_zero_iff_origin():
    for norm in (euclidean(2), asym1d(2.0, 1.0), ellipse([[4.0, 0.0], [0.0, 1.0]])):
        zero = np.zeros(norm.dim)
        assert h_eval(norm, zero) == 0.0
        assert h_eval(norm, zero + 0.3) > 0.0


def test_flux_at_origin_is_zero():
    for norm in (euclidean(2), asym1d(2.0, 1.0), ellipse([[2.0, 0.5], [0.5, 1.0]])):
        assert np.all(flux(norm, np.zeros(norm.dim)) == 0.0)


def test_flux_two_slope_value():
    assert flux(asym1d(3.0, 1.0), 2.0)[0] == pytest.approx(18.0)


def test_flux_euclidean_is_identity():
    np.testing.assert_allclose(flux(euclidean(2), (3.0, 4.0)), [3.0, 4.0])


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        h_eval(euclidean(2), (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        flux(asym1d(2.0, 1.0), (1.0, 2.0))


def test_invalid_two_slope_parameters():
    with pytest.raises(ValueError):
        asym1d(1.0, 1.0)
    with pytest.raises(ValueError):
        asym1d(-1.0, 2.0)


def test_certify_euclidean():
    c = certify(euclidean(2), 256)
    assert c.alpha_lo == pytest.approx(1.0, abs=1e-12)
    assert c.alpha_hi == pytest.approx(1.0, abs=1e-12)
    assert c.grad_bound == pytest.approx(1.0, abs=1e-12)
    assert c.convexity == pytest.approx(1.0, abs=1e-12)


def test_certify_two_slope():
    c = certify(asym1d(2.0, 1.0), 64)
    assert c.alpha_lo == pytest.approx(1.0)
    assert c.alpha_hi == pytest.approx(2.0)
    assert c.convexity == pytest.approx(1.0)


def test_certify_ellipse_matches_singular_values():
    a = np.array([[4.0, 0.0], [0.0, 1.0]])
    c = certify(ellipse(a), 4096)
    # extremal values of H on the sphere are the singular values of A^(1/2)
    sv = np.sqrt(np.linalg.eigvalsh(a))
    assert c.alpha_lo == pytest.approx(sv.min(), rel=1e-6)
    assert c.alpha_hi == pytest.approx(sv.max(), rel=1e-6)
    assert c.convexity == pytest.approx(1.0)


def test_certify_requires_enough_samples():
    with pytest.raises(ValueError):
        certify(euclidean(2), 32)


def test_certify_rejects_non_homogeneous_custom():
    bad = custom(2, lambda xi: np.linalg.norm(xi, axis=-1) ** 2,
                 lambda xi: 2.0 * xi)
    with pytest.raises(InvalidNormError):
        certify(bad, 128)


def test_certify_custom_matches_ellipse():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])

    def value(xi):
        return np.sqrt(np.einsum("...i,ij,...j->...", xi, a, xi))

    def gradient(xi):
        return np.einsum("ij,...j->...i", a, xi) / value(xi)[..., None]

    c_custom = certify(custom(2, value, gradient), 512)
    c_exact = certify(ellipse(a), 512)
    assert c_custom.alpha_lo == pytest.approx(c_exact.alpha_lo, rel=1e-8)
    assert c_custom.alpha_hi == pytest.approx(c_exact.alpha_hi, rel=1e-8)
    assert c_custom.convexity == pytest.approx(c_exact.convexity, rel=1e-4)


NORMS = [euclidean(1), euclidean(2), asym1d(2.0, 1.0), asym1d(0.5, 3.0),
         ellipse([[4.0, 1.0], [1.0, 2.0]])]


@pytest.mark.parametrize("norm", NORMS, ids=lambda n: f"{n.kind}{n.dim}d")
def test_homogeneity_euler_growth_monotonicity(norm, rng):
    constants = certify(norm, 256)
    for _ in range(200):
        xi = rng.standard_normal(norm.dim)
        while np.linalg.norm(xi) < 1e-6:
            xi = rng.standard_normal(norm.dim)
        t = rng.uniform(1e-3, 10.0)
        h = norm.h(xi)
        # positive 1-homogeneity of H
        assert abs(norm.h(t * xi) - t * h) <= 1e-12 * t * h
        # Euler identity
        assert abs(float(norm.gradient(xi) @ xi) - h) <= 1e-10 * h
        # 1-homogeneity of the flux
        np.testing.assert_allclose(norm.flux(t * xi), t * norm.flux(xi),
                                   rtol=1e-12, atol=1e-300)
        # growth sandwich
        nx = np.linalg.norm(xi)
        assert constants.alpha_lo * nx <= h + 1e-12 * nx
        assert h <= constants.alpha_hi * nx + 1e-12 * nx
        # strict monotonicity of the flux with the certified constant
        eta = rng.standard_normal(norm.dim)
        gap = norm.flux(xi) - norm.flux(eta)
        assert float(gap @ (xi - eta)) >= \
            constants.convexity * np.linalg.norm(xi - eta) ** 2 - 1e-9


def test_sphere_sample_shapes():
    assert unit_sphere_sample(1, 100).shape == (2, 1)
    s2 = unit_sphere_sample(2, 128)
    np.testing.assert_allclose(np.linalg.norm(s2, axis=1), 1.0)
    s3 = unit_sphere_sample(3, 64)
    np.testing.assert_allclose(np.linalg.norm(s3, axis=1), 1.0)
