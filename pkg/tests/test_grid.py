import math

import numpy as np
import pytest

from maxwell_pml.grid import (Boundary, BoundaryError, GridError, StaggeredGrid3, make_grid,
                              site, wrap_index)


def test_make_grid_uses_3d_yee_limit():
    g = make_grid(4, 5, 6, 0.5, 1.0, 2.0, cfl_fraction=0.8)
    assert g.dt == pytest.approx(0.8 / math.sqrt(4.0 + 1.0 + 0.25), rel=1e-15)
    assert g.shape == (4, 5, 6)
    assert g.cell_volume == 1.0


def test_cfl_zero_rejected():
    with pytest.raises(GridError, match="cfl_fraction out of range"):
        make_grid(2, 2, 2, 1, 1, 1, cfl_fraction=0)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_bad_spacing_rejected(bad):
    with pytest.raises(GridError):
        make_grid(4, 4, 4, bad, 1, 1)


def test_small_counts_rejected():
    with pytest.raises(GridError):
        StaggeredGrid3(1, 4, 4, 1, 1, 1, 0.1)


def test_sites_of_split_and_aux_follow_parent():
    assert site("exz").offset == site("ex").offset == (1, 0, 0)
    assert site("hz_aux").offset == (1, 1, 0)
    assert site("hyx").half_time and not site("ezy").half_time
    with pytest.raises(GridError):
        site("qx")


def test_wrap_index_periodic_and_pec():
    g = make_grid(5, 5, 5, 1, 1, 1)
    assert wrap_index(g, "x", -1) == 4
    assert wrap_index(g, "y", 7) == 2
    p = make_grid(5, 5, 5, 1, 1, 1, boundary=Boundary.PEC_WITH_PML)
    assert wrap_index(p, "z", 3) == 3
    with pytest.raises(BoundaryError):
        wrap_index(p, "z", 5)


def test_pec_pins_only_tangential_e():
    g = make_grid(4, 4, 4, 1, 1, 1, boundary=Boundary.PEC_WITH_PML, pec_axes=("z",))
    f = {n: np.ones(g.shape) for n in ("ex", "ey", "ez", "hx")}
    g.pin_pec(f)
    assert np.all(f["ex"][:, :, 0] == 0) and np.all(f["ey"][:, :, 0] == 0)
    assert np.all(f["ex"][:, :, 1:] == 1)
    assert np.all(f["ez"] == 1) and np.all(f["hx"] == 1)


def test_coords_are_half_cell_offsets():
    g = make_grid(4, 4, 4, 0.25, 0.25, 0.25)
    x, y, z = g.coords((1, 0, 1))
    assert np.allclose(x.ravel(), (np.arange(4) + 0.5) * 0.25)
    assert np.allclose(y.ravel(), np.arange(4) * 0.25)
    assert np.allclose(z.ravel(), (np.arange(4) + 0.5) * 0.25)
