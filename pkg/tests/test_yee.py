import numpy as np
import pytest

from maxwell_pml.errors import HistoryError, NumericalDivergence
from maxwell_pml.grid import StaggeredGrid3, make_grid
from maxwell_pml.harness.experiments import convergence_study
from maxwell_pml.maxwell import MaxwellState, classical_yee_step, plane_wave, random_state
from maxwell_pml.pml import PmlConfig, init_unsplit_from_fields
from maxwell_pml.yee import YeeRun, energy_breakdown, modified_energy, step, unstep

RATIO = 0.95 / 1.05


def run_for(grid, sigma, rng, steps):
    run = YeeRun(random_state(grid, rng), PmlConfig(sigma))
    run.step(steps)
    return run


def test_zero_sigma_step_is_classical_bitwise(grid8, rng):
    f = random_state(grid8, rng)
    u = init_unsplit_from_fields(f, PmlConfig(0.0))
    c = f.copy()
    for _ in range(30):
        u = step(u, PmlConfig(0.0))
        c = classical_yee_step(c)
    for name in ("ex", "ey", "ez", "hx", "hy", "hz"):
        assert np.array_equal(getattr(u, name), getattr(c, name))
    assert np.array_equal(u.ez_aux, u.ez) and np.array_equal(u.hz_aux, u.hz)


def test_plane_wave_follows_discrete_dispersion():
    g = make_grid(16, 4, 4, 1 / 16, 1 / 16, 1 / 16, 0.9)
    cfg = PmlConfig(0.0)
    u = init_unsplit_from_fields(plane_wave(g, 0.0, discrete=True), cfg)
    for n in range(1, 11):
        u = step(u, cfg)
        exact = plane_wave(g, n * g.dt, discrete=True)
        err = max(np.max(np.abs(getattr(u, c) - getattr(exact, c))) for c in exact.arrays())
        assert err < 1e-12


def test_uniform_fields_decay_by_closed_form_ratio():
    g = StaggeredGrid3(4, 4, 4, 1.0, 1.0, 1.0, 0.1)
    f = MaxwellState(*(np.full(g.shape, v) for v in (1.0, -2.0, 0.5, 3.0, 4.0, 5.0)), grid=g)
    u = init_unsplit_from_fields(f, PmlConfig(1.0))
    for k in range(1, 8):
        u = step(u, PmlConfig(1.0))
        assert np.allclose(u.ex, RATIO ** k, rtol=1e-15, atol=0)
        assert np.allclose(u.hy, 4.0 * RATIO ** k, rtol=1e-15, atol=0)
        assert np.all(u.ez == 0.5) and np.all(u.hz == 5.0)


def test_zero_state_has_zero_energy_terms(grid8):
    run = YeeRun(MaxwellState.zeros(grid8), PmlConfig(0.5))
    run.step(3)
    b = run.energy_residual()
    assert b.residual == 0.0 and b.parts_sum == 0.0 and b.mod_upper == 0.0
    assert run.modified_energy() == 0.0


def test_static_state_has_zero_modified_energy():
    g = make_grid(4, 4, 4, 1, 1, 1)
    f = MaxwellState(*(np.full(g.shape, float(i + 1)) for i in range(6)), grid=g)
    run = YeeRun(f, PmlConfig(0.0))
    run.step(2)
    assert run.modified_energy() == 0.0


@pytest.mark.parametrize("sigma", [0.0, 0.5, 2.0])
def test_energy_law_closes(grid8, rng, sigma):
    run = run_for(grid8, sigma, rng, 3)
    for _ in range(30):
        b = run.energy_residual()
        assert abs(b.residual) <= 1e-12 * b.scale
        assert abs(b.parts_sum) <= 1e-12 * b.scale
        assert b.mod_upper - b.mod_lower == pytest.approx(-b.dissipation, abs=1e-12 * b.scale)
        run.step()


def test_energy_parts_match_independent_telescoped_forms(grid8, rng):
    sigma = 0.8
    run = run_for(grid8, sigma, rng, 3)
    s0, s1, s2, s3 = run.history
    dt, vol = grid8.dt, grid8.cell_volume

    def ip(a, b):
        return float(np.sum(a * b)) * vol

    # ex equation: half-level energies of D_t Ex and sigma * avg Ex, plus 2 sigma |c|^2
    a_hi, a_lo = (s2.ex - s1.ex) / dt, (s1.ex - s0.ex) / dt
    m_hi, m_lo = sigma * (s2.ex + s1.ex) / 2, sigma * (s1.ex + s0.ex) / 2
    c = (s2.ex - s0.ex) / (2 * dt)
    ex_form = (ip(a_hi, a_hi) + ip(m_hi, m_hi) - ip(a_lo, a_lo) - ip(m_lo, m_lo)) / (2 * dt) \
        + 2 * sigma * ip(c, c)
    # hz equation: cross products of D_t Hz plus the sigma coupling with both Hz fields
    w = [(s1.hz - s0.hz) / dt, (s2.hz - s1.hz) / dt, (s3.hz - s2.hz) / dt]
    v = (w[2] - w[0]) / (2 * dt)
    avg = (s2.hz + s1.hz) / 2 + (s2.hz_aux + s1.hz_aux) / 2
    hz_form = (ip(w[2], w[1]) - ip(w[1], w[0])) / (2 * dt) + sigma * ip(avg, v)

    b = run.energy_residual()
    assert b.part_ex == pytest.approx(ex_form, rel=1e-12, abs=1e-12 * b.scale)
    assert b.part_hz == pytest.approx(hz_form, rel=1e-12, abs=1e-12 * b.scale)


def test_uncorrected_variant_does_not_close(grid8, rng):
    for sigma in (0.0, 0.5):
        b = run_for(grid8, sigma, rng, 4).energy_residual()
        assert abs(b.uncorrected_residual) > 1e-6 * b.scale


def test_modified_energy_conserved_without_damping(grid8, rng):
    run = run_for(grid8, 0.0, rng, 2)
    e0 = run.modified_energy()
    for _ in range(200):
        run.step()
        assert run.modified_energy() == pytest.approx(e0, rel=1e-12)


def test_modified_energy_of_plane_wave_constant():
    g = make_grid(16, 4, 4, 1 / 16, 1 / 16, 1 / 16)
    run = YeeRun(plane_wave(g, 0.0), PmlConfig(0.0))
    run.step(2)
    e0 = run.modified_energy()
    for _ in range(40):
        run.step()
        assert run.modified_energy() == pytest.approx(e0, rel=1e-12)


def test_dissipation_rate_properties(grid8, rng):
    assert run_for(grid8, 0.0, rng, 4).dissipation_rate() == 0.0
    run = run_for(grid8, 1.5, rng, 4)
    s0, _, s2, _ = run.history
    c = [(getattr(s2, n) - getattr(s0, n)) / (2 * grid8.dt) for n in ("ex", "ey")]
    assert all(2 * 1.5 * np.sum(x * x) >= 0 for x in c)
    b = run.energy_residual()
    assert b.mod_upper - b.mod_lower == pytest.approx(-run.dissipation_rate(), abs=1e-12 * b.scale)


def test_insufficient_history(grid8, rng):
    run = YeeRun(random_state(grid8, rng), PmlConfig(0.0))
    with pytest.raises(HistoryError):
        run.energy_residual()
    with pytest.raises(HistoryError):
        run.modified_energy()
    run.step(2)
    run.modified_energy()
    with pytest.raises(HistoryError):
        energy_breakdown(list(run.history)[::-1] + [run.state], PmlConfig(0.0))


def test_unstep_inverts_step(grid8, rng):
    cfg = PmlConfig(0.7)
    u = init_unsplit_from_fields(random_state(grid8, rng), cfg)
    for _ in range(3):
        u = step(u, cfg)
    v = unstep(step(u, cfg), cfg)
    for name, arr in u.arrays().items():
        assert np.max(np.abs(arr - getattr(v, name))) < 1e-12


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_field_aborts(grid8, rng):
    cfg = PmlConfig(0.0)
    u = init_unsplit_from_fields(random_state(grid8, rng), cfg)
    u.hy[2, 2, 2] = np.inf
    with pytest.raises(NumericalDivergence, match="step 1"):
        step(u, cfg)


def test_halving_steps_quarters_plane_wave_error():
    rows = convergence_study([8, 16, 32], 0.9, 1.0)
    for lo, hi in zip(rows, rows[1:]):
        assert lo["error"] / hi["error"] == pytest.approx(4.0, abs=0.3)
