import numpy as np
import pytest

from bcwave import geomoptics as go
from bcwave.wave1d import SpatialGrid, bump

Q = lambda x: 5 * bump(x, 0.2, 0.8)
ZERO = lambda *x: np.zeros_like(x[0])
CHI = lambda tau: bump(tau, 0.1, 0.7)


@pytest.mark.parametrize("angle", np.linspace(0, 2 * np.pi, 13))
def test_eikonal_vanishes_for_unit_directions(angle):
    assert go.PlaneWavePhase((np.cos(angle), np.sin(angle))).eikonal_residual() == pytest.approx(0, abs=1e-15)


def test_non_unit_direction_rejected():
    with pytest.raises(ValueError):
        go.PlaneWavePhase((1.0, 1.0))
    assert go.PlaneWavePhase((-1.0,)).eikonal_residual() == 0.0


@pytest.mark.parametrize("v", [(-1.0, 0.0), (0.6, 0.8)])
def test_conjugation_identity(rng, v):
    grid = go.SpaceTimeBox(0.01, 0.4, 0.0, 0.4, 0.0, 0.4)
    t, x, y = grid.mesh()
    c = rng.normal(size=4)
    a = np.exp(-((x - 0.2) ** 2 + (y - 0.2) ** 2) / 0.02) * (c[0] + c[1] * t + c[2] * np.sin(3 * x) + c[3] * y * t)
    assert go.conjugation_defect(a, go.PlaneWavePhase(v), 6.0, grid) < 1e-3


def test_first_amplitude_for_constant_potential():
    """With q = c0 and a_0 = chi(t - x), a_1 = (i c0 / 2) t chi(t - x)."""
    grid = go.SpaceTimeBox(0.005, 1.0, -0.8, 1.0)
    c0 = 3.0
    a0, a1 = go.amplitude_stack(CHI, lambda x: np.full_like(x, c0), 1, grid)
    t, x = grid.mesh()
    exact = 0.5j * c0 * t * CHI(t - x)
    assert np.abs(a1 - exact).max() < 1e-6 * np.abs(exact).max()
    assert not a1[0].any()


def test_amplitudes_vanish_at_time_zero():
    grid = go.SpaceTimeBox(0.005, 1.0, -0.1, 1.2)
    for a in go.amplitude_stack(CHI, Q, 3, grid)[1:]:
        assert not a[0].any()


def test_zero_potential_gives_zero_corrections():
    grid = go.SpaceTimeBox(0.005, 1.0, -0.8, 1.0)
    stack = go.amplitude_stack(CHI, ZERO, 2, grid)
    # roundoff of the 1/h^2 stencil only
    assert max(np.abs(a).max() for a in stack[1:]) < 1e-8


def test_transport_identity_holds_pointwise():
    grid = go.SpaceTimeBox(0.005, 1.0, -0.1, 1.2)
    stack = go.amplitude_stack(CHI, Q, 2, grid)
    t, x = grid.mesh()
    qv = Q(x)
    for j in (1, 2):
        lhs = go.transport_derivative(stack[j], grid.h)
        rhs = 0.5j * (go.box_operator(stack[j - 1], grid.h) + qv * stack[j - 1])
        sl = (slice(6, -6), slice(6, -6))
        assert np.abs(lhs - rhs)[sl].max() < 1e-2 * np.abs(rhs[sl]).max()


def test_ansatz_degenerate_cases():
    grid = go.SpaceTimeBox(0.01, 1.0, -0.1, 1.2)
    stack = go.amplitude_stack(CHI, Q, 2, grid)
    a = go.build_ansatz(16, 0, CHI, Q, grid, stack=stack)
    np.testing.assert_array_equal(a.envelope(), stack[0])
    z = go.build_ansatz(0, 2, CHI, Q, grid, stack=stack)
    np.testing.assert_allclose(z.envelope(), stack[0] + stack[1] + stack[2])
    assert np.isfinite(go.build_ansatz(32, 2, CHI, Q, grid, stack=stack).field()).all()
    with pytest.raises(ValueError):
        go.amplitude_stack(CHI, Q, 5, grid)


@pytest.fixture(scope="module")
def slope_grid():
    return go.SpaceTimeBox(0.005, 1.2, -0.1, 1.3)


@pytest.mark.parametrize("N", [0, 1, 2])
def test_residual_slopes(slope_grid, N):
    rep = go.residual_scaling(CHI, Q, N, [8, 16, 32, 64, 128], slope_grid)
    assert rep.slope == pytest.approx(-N, abs=0.3)
    assert np.all(np.diff(rep.norms) < 0) or N == 0


def test_free_plane_wave_residual_at_noise_floor(slope_grid):
    rep = go.residual_scaling(CHI, ZERO, 1, [8, 32, 128], slope_grid)
    assert rep.norms.max() < 1e-9


def test_two_dimensional_ansatz():
    grid = go.SpaceTimeBox(0.01, 0.8, -0.1, 1.0, -0.5, 0.5)
    eta = lambda y: bump(y, -0.4, 0.4)
    qxy = lambda x, y: 5 * bump(x, 0.2, 0.8) * bump(y, -0.3, 0.3)
    norms = [go.residual_norm(go.build_ansatz(s, 1, CHI, qxy, grid, eta), qxy) for s in (8, 16, 32)]
    assert go.loglog_slope([8, 16, 32], norms) == pytest.approx(-1, abs=0.3)


def test_resolution_checks():
    with pytest.raises(go.ResolutionError):
        go.check_resolution(0.3, 0.05, 2)
    go.check_resolution(0.3, 0.005, 2)
    with pytest.raises(go.ResolutionError):
        go.transport_step(np.ones((5, 20)), np.ones((5, 20)), 0.1)


def test_certified_for_bump_potential():
    cert = go.certify_nonvanishing(0.5, 1.2, Q)
    assert cert.certified and cert.sigma <= 128
    assert abs(cert.value) > 0.5 * abs(cert.amplitude)
    assert cert.trace_t.shape == cert.trace.shape and cert.trace_t[0] == 0
    # the boundary source starts at rest
    assert abs(cert.trace[0]) < 1e-12


def test_free_certificate_reproduces_profile():
    cert = go.certify_nonvanishing(0.5, 1.2, lambda x: np.zeros_like(x))
    assert cert.certified and cert.sigma == 8
    assert abs(cert.value) == pytest.approx(abs(cert.amplitude), rel=2e-2)


def test_certificate_fails_off_profile():
    cert = go.certify_nonvanishing(0.5, 1.2, Q, offset=0.3)
    assert not cert.certified
    assert cert.amplitude == 0
    assert len(cert.history) == 7


def test_remainder_decays():
    grid = go.SpaceTimeBox(0.0025, 1.2 + 0.02, -0.1, 1.1)
    chi = go.ray_profile(0.5, 1.2)
    qx = lambda x: np.where((x >= 0) & (x <= 1), Q(np.clip(x, 0, 1)), 0.0)
    stack = go.amplitude_stack(chi, qx, 1, grid)
    sg = SpatialGrid(401)
    sig = [16, 32, 64, 128]
    r = [go.remainder_norm(go.build_ansatz(s, 1, chi, qx, grid, stack=stack), qx, sg, 1.2) for s in sig]
    assert go.loglog_slope(sig, r) <= -1 + 0.3
