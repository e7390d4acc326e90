import numpy as np
import pytest
from scipy.integrate import quad

from bcwave import lightray as lr


@pytest.fixture(scope="module")
def bump33():
    return lr.SpacetimePotential.sample(lr.bump_phantom((1.0, 0.0, 0.0), 0.6), 2.0, 1.0, 33, 33)


@pytest.fixture(scope="module")
def small():
    return lr.SpacetimePotential.sample(lr.bump_phantom((1.0, 0.1, -0.1), 0.6), 2.0, 1.0, 17, 17)


def test_potential_validation():
    with pytest.raises(ValueError):
        lr.SpacetimePotential(np.ones((9, 9, 9)), 1.0, 1.0)
    with pytest.raises(ValueError):
        lr.SpacetimePotential(np.zeros((9, 9)), 1.0, 1.0)
    bad = np.zeros((9, 9, 9))
    bad[4, 4, 4] = np.nan
    with pytest.raises(ValueError):
        lr.SpacetimePotential(bad, 1.0, 1.0)


def test_non_unit_direction_rejected(bump33):
    with pytest.raises(ValueError):
        lr.light_ray_transform(bump33, (0, 0), (1.0, 1.0))


def test_zero_potential():
    q = lr.SpacetimePotential(np.zeros((17, 17, 17)), 2.0, 1.0)
    assert lr.light_ray_transform(q, (0.1, 0.2), (0.6, 0.8)) == 0
    rec = lr.invert_on_cone(q)
    assert not rec.q_cone.any() and not rec.q_cone_ref.any()


def test_direction_examples():
    v = lr.direction_for(0.5, (2.0, 0.0))
    np.testing.assert_allclose(v, [-0.5, np.sqrt(0.75)], atol=1e-15)
    assert -np.dot((2.0, 0.0), v) == pytest.approx(1.0)
    np.testing.assert_allclose(lr.direction_for(0.0, (0.0, 3.0)), [-1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(lr.direction_for(1.0, (3.0, 4.0)), [-0.6, -0.8])
    with pytest.raises(ValueError):
        lr.direction_for(0.3, (0.0, 0.0))


def test_rays_are_null(rng):
    for _ in range(50):
        eta = rng.normal(size=2)
        v = lr.direction_for(rng.uniform(-1, 1), eta)
        assert lr.minkowski_norm(np.r_[1.0, v]) == pytest.approx(0, abs=1e-14)
        assert abs(-eta @ v) <= np.hypot(*eta) + 1e-12


def test_translation_equivariance(bump33, rng):
    moved = bump33.shifted(2, -3)
    delta = np.array([2, -3]) * bump33.dx
    v = lr.direction_for(0.3, (1.0, 2.0))
    y = rng.uniform(-1.5, 1.5, (20, 2))
    a = lr.light_ray_transform(bump33, y, v)
    b = lr.light_ray_transform(moved, y + delta, v)
    assert np.abs(a - b).max() < 1e-12 * np.abs(a).max()


def test_center_ray_matches_quadrature():
    fn = lr.bump_phantom((1.0, 0.0, 0.0), 0.6)
    v = np.array([0.6, 0.8])
    ref = quad(lambda s: fn(s, (s - 1) * v[0], (s - 1) * v[1]), 0.0, 2.0, epsabs=1e-13, points=[0.4, 1.6])[0]
    q = lr.SpacetimePotential.sample(fn, 2.0, 1.0, 257, 257)
    val = float(lr.light_ray_transform(q, -v, v))
    assert abs(val - ref) < 1e-4 * ref


def test_null_separable_vanishes_in_one_dimension():
    odd = lambda z: z * np.exp(-4 * z * z)
    even = lambda z: np.exp(-4 * z * z)
    y = np.linspace(-1, 1, 9)
    # zero mean along the direction each ray travels
    for v, q in ((1, lr.null_separable(odd, even)), (-1, lr.null_separable(even, odd))):
        assert np.abs(lr.light_ray_transform_1d(q, y, v, (-8, 8))).max() < 1e-12
    # but not in general
    q = lr.null_separable(even, even)
    assert np.abs(lr.light_ray_transform_1d(q, y, 1, (-8, 8))).min() > 0.1
    with pytest.raises(ValueError):
        lr.light_ray_transform_1d(q, y, 0, (-8, 8))


def test_slice_matches_direct_transform(bump33, rng):
    nyq = np.pi / bump33.dx
    scale = abs(lr.direct_transform(bump33, 0.0, (0.0, 0.0)))
    for _ in range(6):
        eta = rng.uniform(-nyq / 2, nyq / 2, 2) / np.sqrt(2)
        v = lr.direction_for(rng.uniform(-1, 1), eta)
        smp = lr.fourier_slice(*lr.ray_data(bump33, v), v, eta)
        assert abs(smp.tau) <= np.hypot(*eta)
        assert abs(smp.value - lr.direct_transform(bump33, smp.tau, eta)) < 0.01 * scale


def test_spacelike_orthogonal_slice_is_time_integral(bump33):
    eta = np.array([3.0, -1.5])
    v = lr.direction_for(0.0, eta)
    smp = lr.fourier_slice(*lr.ray_data(bump33, v), v, eta)
    assert smp.tau == pytest.approx(0, abs=1e-14)
    qt = np.trapezoid(bump33.q, bump33.t, axis=0)
    x = bump33.x
    ref = np.exp(-1j * eta[0] * x) @ qt @ np.exp(-1j * eta[1] * x) * bump33.dx**2
    assert abs(smp.value - ref) < 0.01 * abs(qt.sum() * bump33.dx**2)


def test_coverage_error(bump33):
    with pytest.raises(lr.CoverageError):
        lr.ray_data(bump33, (1.0, 0.0), y_grid=np.linspace(-0.3, 0.3, 7))


def test_cone_mask_shape(small):
    m = lr.cone_mask(small, 0.5)
    tau, eta = lr.frequency_grid(small)
    assert m[0, 0, 0]
    k, i, j = np.nonzero(m)
    assert np.all(np.abs(tau[k]) <= np.hypot(eta[i], eta[j]) + 1e-12)


def test_hermitian_halving_agrees_with_full_sweep(small):
    half = lr.invert_on_cone(small)
    full = lr.invert_on_cone(small, hermitian=False)
    assert len(half.samples) < len(full.samples)
    # conjugate slices use the reversed ray, so they agree up to interpolation error
    assert np.linalg.norm(half.q_cone - full.q_cone) < 0.02 * np.linalg.norm(full.q_cone)
    assert half.rel_error < 0.05 and full.rel_error < 0.05
    assert all(abs(s.tau) <= np.hypot(*s.eta) + 1e-12 for s in full.samples)
    rows = half.residual_rows(small)
    assert len(rows) == half.mask.sum()


def test_static_phantom_spectrum_sits_in_cone():
    q = lr.SpacetimePotential.sample(lr.static_phantom(), 2.0, 1.0, 33, 33)
    F = np.fft.fftn(q.q)
    m = lr.cone_mask(q, 0.5)
    assert np.sum(np.abs(F[m]) ** 2) / np.sum(np.abs(F) ** 2) > 0.9
