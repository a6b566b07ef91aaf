import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_pml.grid import Boundary, make_grid
from maxwell_pml.maxwell import (MaxwellState, VariationalPair, build_structure_matrices,
                                 classical_yee_step, curl_rhs, discrete_omega, discrete_two_form,
                                 field_energy, gaussian_pulse_z, plane_wave, random_state,
                                 rate_energy, residual_multisymplectic_form, te_mode_embed)


def test_structure_matrices_are_skew():
    m = build_structure_matrices(2.0, 3.0)
    assert np.array_equal(m.M.T, -m.M)
    for K in m.K:
        assert np.array_equal(K.T, -K)
    assert m.K[0][1, 2] == pytest.approx(-0.5) and m.K[0][4, 5] == pytest.approx(-1 / 3)
    with pytest.raises(ValueError):
        build_structure_matrices(0.0, 1.0)


def test_curl_rhs_plane_wave_matches_discrete_symbol():
    n = 16
    g = make_grid(n, 4, 4, 1 / n, 1 / n, 1 / n)
    t = 0.3
    s = plane_wave(g, t, staggered=False)
    d = curl_rhs(s)
    k = 2 * math.pi
    sym = 2.0 / g.dx * math.sin(0.5 * k * g.dx)
    x_int = g.coords((0, 0, 0))[0]
    x_half = g.coords((1, 0, 0))[0]
    ey_rate = np.broadcast_to(sym * np.sin(k * x_int - k * t), g.shape)
    hz_rate = np.broadcast_to(sym * np.sin(k * x_half - k * t), g.shape)
    assert np.max(np.abs(d.ey - ey_rate)) < 1e-12
    assert np.max(np.abs(d.hz - hz_rate)) < 1e-12
    for c in ("ex", "ez", "hx", "hy"):
        assert np.max(np.abs(getattr(d, c))) < 1e-12


def test_multisymplectic_residual_of_scheme_rhs(grid8, rng):
    s = random_state(grid8, rng)
    assert residual_multisymplectic_form(s, curl_rhs(s)) < 1e-12
    wrong = curl_rhs(s)
    wrong.ex = wrong.ex + 1e-3
    assert residual_multisymplectic_form(s, wrong) > 1e-4


def test_field_energy_of_plane_wave_is_one():
    g = make_grid(8, 3, 5, 1 / 8, 1 / 3, 1 / 5)
    assert field_energy(plane_wave(g, 0.17, staggered=False)) == pytest.approx(1.0, rel=1e-13)


def test_rate_energy_static_and_linear(grid8, rng):
    s = random_state(grid8, rng)
    assert rate_energy(s, s.copy()) == 0.0
    t = s.map(lambda a: 2 * a)
    assert rate_energy(s, t) == pytest.approx(field_energy(s) / grid8.dt ** 2, rel=1e-13)


def test_te_embedding_keeps_tm_fields_zero(rng):
    g = make_grid(6, 5, 4, 1, 1, 1)
    s = te_mode_embed(*(rng.standard_normal((6, 5)) for _ in range(3)), g)
    for _ in range(20):
        s = classical_yee_step(s)
    for c in ("ez", "hx", "hy"):
        assert np.all(getattr(s, c) == 0.0)
    assert np.all(s.ex == s.ex[:, :, :1])
    with pytest.raises(ValueError):
        te_mode_embed(np.zeros((5, 5)), np.zeros((6, 5)), np.zeros((6, 5)), g)


def test_plane_wave_needs_periodic_grid():
    g = make_grid(4, 4, 4, 1, 1, 1, boundary=Boundary.PEC_WITH_PML)
    with pytest.raises(ValueError):
        plane_wave(g, 0.0)


def test_classical_step_follows_discrete_dispersion():
    g = make_grid(16, 2, 2, 1 / 16, 1 / 16, 1 / 16, 0.9)
    s = plane_wave(g, 0.0, discrete=True)
    for n in range(1, 11):
        s = classical_yee_step(s)
        exact = plane_wave(g, n * g.dt, discrete=True)
        assert max(np.max(np.abs(getattr(s, c) - getattr(exact, c))) for c in ("ey", "hz")) < 1e-12


def test_discrete_omega_small_step_limit():
    g = make_grid(400, 2, 2, 1 / 400, 1, 1, 0.01)
    assert discrete_omega(g) == pytest.approx(2 * math.pi, rel=1e-4)


def test_two_form_is_antisymmetric_and_bilinear(grid8, rng):
    a = [random_state(grid8, rng) for _ in range(2)]
    b = [random_state(grid8, rng) for _ in range(2)]
    w_ab = discrete_two_form(VariationalPair(tuple(a), tuple(b)))
    w_ba = discrete_two_form(VariationalPair(tuple(b), tuple(a)))
    assert w_ab == pytest.approx(-w_ba, rel=1e-13)
    assert abs(discrete_two_form(VariationalPair(tuple(a), tuple(a)))) < 1e-12 * abs(w_ab)
    a3 = tuple(x.map(lambda v: 3 * v) for x in a)
    assert discrete_two_form(VariationalPair(a3, tuple(b))) == pytest.approx(3 * w_ab, rel=1e-13)


def test_two_form_misaligned_pair_rejected(rng):
    g1 = make_grid(4, 4, 4, 1, 1, 1)
    g2 = make_grid(4, 4, 5, 1, 1, 1)
    with pytest.raises(ValueError):
        VariationalPair((MaxwellState.zeros(g1),) * 2, (MaxwellState.zeros(g2),) * 2)


def test_pulse_moves_along_plus_z():
    g = make_grid(2, 2, 64, 1, 1, 1, 0.9)
    s = gaussian_pulse_z(g, 20.0, 3.0)
    z = np.arange(64.0)

    def centre(st):
        w = np.sum(st.ex ** 2, axis=(0, 1))
        return float(np.sum(w * z) / np.sum(w))

    c0 = centre(s)
    steps = 30
    for _ in range(steps):
        s = classical_yee_step(s)
    assert centre(s) - c0 == pytest.approx(steps * g.dt, abs=0.2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 10))
def test_classical_step_is_linear(seed, scale):
    g = make_grid(4, 4, 4, 1, 1, 1)
    r = np.random.default_rng(seed)
    s = random_state(g, r)
    a = classical_yee_step(s.map(lambda v: scale * v))
    b = classical_yee_step(s).map(lambda v: scale * v)
    for c in a.arrays():
        assert np.allclose(getattr(a, c), getattr(b, c), rtol=1e-13, atol=1e-13 * scale)
