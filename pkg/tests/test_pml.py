import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_pml.errors import PmlError
from maxwell_pml.grid import SPLIT_NAMES, Boundary, StaggeredGrid3, make_grid
from maxwell_pml.maxwell import MaxwellState, classical_yee_step, random_state
from maxwell_pml.pml import (PAIRS, PmlConfig, SplitState, init_unsplit_from_fields,
                             make_layer_config, split_compatible, split_first_listed,
                             split_to_unsplit, step_split_yee)
from maxwell_pml.yee import step as unsplit_step

RATIO = 0.95 / 1.05


def parents_equal(split, fields):
    return all(np.array_equal(split.parent[p], getattr(fields, p)) for p in PAIRS)


def test_config_validation():
    with pytest.raises(PmlError):
        PmlConfig(sigma=-0.1)
    with pytest.raises(PmlError):
        PmlConfig(sigma=1.0, sigma_star=float("nan"))
    with pytest.raises(PmlError):
        PmlConfig(axes=("w",))
    g = make_grid(4, 4, 16, 1, 1, 1)
    with pytest.raises(PmlError):
        make_layer_config(g, 0, 1.0)
    with pytest.raises(PmlError, match="nz/2"):
        make_layer_config(g, 8, 1.0)
    assert make_layer_config(g, 7, 1.0).thickness == 7


def test_layer_profile_marks_outer_cells():
    g = make_grid(2, 2, 12, 1, 1, 1, boundary=Boundary.PEC_WITH_PML, pec_axes=("z",))
    cfg = make_layer_config(g, 3, 2.0)
    s_int = np.ravel(cfg.sigma_along(g, "z", (0, 0, 0), False))
    s_half = np.ravel(cfg.sigma_along(g, "z", (0, 0, 1), True))
    assert list(s_int) == [2.0] * 3 + [0.0] * 7 + [2.0] * 2
    assert list(s_half) == [2.0] * 3 + [0.0] * 6 + [2.0] * 3
    assert cfg.sigma_along(g, "x", (0, 0, 0), False) == 0.0


def test_uniform_damped_subcomponent_decays_geometrically():
    g = StaggeredGrid3(4, 4, 4, 1.0, 1.0, 1.0, 0.1)
    sub = {k: np.zeros(g.shape) for k in SPLIT_NAMES}
    sub["exz"] = np.full(g.shape, 3.0)
    sub["hyz"] = np.full(g.shape, -2.0)
    s = SplitState.from_subcomponents(sub, g)
    cfg = PmlConfig(sigma=1.0)
    for k in range(1, 6):
        s = step_split_yee(s, cfg)
        assert np.allclose(s.sub["exz"], 3.0 * RATIO ** k, rtol=1e-15, atol=0)
        assert np.allclose(s.sub["hyz"], -2.0 * RATIO ** k, rtol=1e-15, atol=0)
        assert np.all(s.sub["exy"] == 0.0)


def test_zero_state_stays_zero(grid8):
    s = split_first_listed(MaxwellState.zeros(grid8))
    for _ in range(3):
        s = step_split_yee(s, PmlConfig(sigma=0.7, axes=("x", "y", "z")))
    assert all(np.all(v == 0.0) for v in s.sub.values())


@pytest.mark.parametrize("splitter", ["first", "compatible"])
def test_zero_sigma_split_is_classical_yee_bitwise(grid8, rng, splitter):
    f = random_state(grid8, rng)
    cfg = PmlConfig(0.0, axes=("x", "y", "z"))
    s = split_first_listed(f) if splitter == "first" else split_compatible(f, PmlConfig(0.0))
    c = f.copy()
    for _ in range(25):
        s = step_split_yee(s, cfg)
        c = classical_yee_step(c)
        assert parents_equal(s, c)


def test_unsplit_and_split_views_coincide_at_start(grid8, rng):
    f = random_state(grid8, rng)
    cfg = PmlConfig(0.5)
    a = split_to_unsplit(split_compatible(f, cfg))
    b = init_unsplit_from_fields(f, cfg)
    for name, arr in b.arrays().items():
        assert np.array_equal(arr, getattr(a, name)), name


def test_zero_sigma_aux_equals_physical(grid8, rng):
    cfg = PmlConfig(0.0)
    u = init_unsplit_from_fields(random_state(grid8, rng), cfg)
    s = split_compatible(random_state(grid8, rng), cfg)
    for _ in range(10):
        u = unsplit_step(u, cfg)
        s = step_split_yee(s, cfg)
    v = split_to_unsplit(s)
    assert np.array_equal(u.ez, u.ez_aux) and np.array_equal(u.hz, u.hz_aux)
    assert np.array_equal(v.ez, v.ez_aux) and np.array_equal(v.hz, v.hz_aux)


def test_split_and_unsplit_agree_with_damping(grid8, rng):
    cfg = PmlConfig(0.5)
    f = random_state(grid8, rng)
    s, u = split_compatible(f, cfg), init_unsplit_from_fields(f, cfg)
    for _ in range(20):
        s, u = step_split_yee(s, cfg), unsplit_step(u, cfg)
    v = split_to_unsplit(s)
    scale = max(np.max(np.abs(a)) for a in u.arrays().values())
    for name, arr in u.arrays().items():
        assert np.max(np.abs(arr - getattr(v, name))) <= 1e-12 * scale, name


def test_first_listed_split_is_not_equivalent_when_damped(grid8, rng):
    # any split sums to the parent, but only the compatible one matches the
    # zero-initialised auxiliary fields of the unsplit form
    cfg = PmlConfig(0.5)
    f = random_state(grid8, rng)
    s, u = split_first_listed(f), init_unsplit_from_fields(f, cfg)
    for _ in range(20):
        s, u = step_split_yee(s, cfg), unsplit_step(u, cfg)
    gap = max(np.max(np.abs(s.parent[p] - getattr(u, p))) for p in PAIRS)
    assert gap > 1e-3


def test_unsplit_requires_z_specialisation(grid8):
    f = MaxwellState.zeros(grid8)
    with pytest.raises(PmlError):
        init_unsplit_from_fields(f, PmlConfig(1.0, sigma_star=2.0))
    with pytest.raises(PmlError):
        init_unsplit_from_fields(f, PmlConfig(1.0, axes=("x", "z")))
    with pytest.raises(PmlError):
        split_compatible(f, PmlConfig(1.0, axes=("y",)))


def test_inert_layer_matches_plain_pec_yee(rng):
    g = make_grid(4, 4, 12, 1, 1, 1, boundary=Boundary.PEC_WITH_PML, pec_axes=("z",))
    f = random_state(g, rng)
    s = split_first_listed(f)
    c = f.copy()
    cfg = make_layer_config(g, 3, 0.0)
    for _ in range(15):
        s = step_split_yee(s, cfg)
        c = classical_yee_step(c)
    assert parents_equal(s, c)
    assert np.all(c.ex[:, :, 0] == 0) and np.all(c.ey[:, :, 0] == 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sigma=st.floats(0.0, 3.0),
       axes=st.sets(st.sampled_from("xyz"), min_size=1))
def test_subcomponents_sum_to_parents(seed, sigma, axes):
    g = make_grid(4, 4, 4, 1, 1, 1, 0.9)
    r = np.random.default_rng(seed)
    sub = {k: r.standard_normal(g.shape) for k in SPLIT_NAMES}
    s = SplitState.from_subcomponents(sub, g)
    cfg = PmlConfig(sigma, axes=tuple(axes))
    for _ in range(5):
        s = step_split_yee(s, cfg)
    for p, (a, b) in PAIRS.items():
        scale = 1 + np.max(np.abs(s.parent[p]))
        assert np.max(np.abs(s.sub[a] + s.sub[b] - s.parent[p])) <= 1e-14 * scale


def test_split_energy_does_not_grow_in_uniform_absorber(rng):
    # sigma = sigma_star on all three axes damps every subcomponent equally
    g = make_grid(6, 6, 6, 1, 1, 1, 0.9)
    sub = {k: rng.standard_normal(g.shape) for k in SPLIT_NAMES}
    s = SplitState.from_subcomponents(sub, g)
    cfg = PmlConfig(1.0, axes=("x", "y", "z"))
    e0 = sum(float(np.sum(v ** 2)) for v in s.sub.values())
    for _ in range(40):
        s = step_split_yee(s, cfg)
    e1 = sum(float(np.sum(v ** 2)) for v in s.sub.values())
    assert e1 < 1e-3 * e0
