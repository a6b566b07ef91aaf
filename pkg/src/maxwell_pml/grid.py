"""Staggered space-time lattice for the Yee family of schemes.

Every field component is stored as one dense ``(nx, ny, nz)`` array. The
physical position of entry ``[i, j, k]`` is ``((i + ox/2) dx, (j + oy/2) dy,
(k + oz/2) dz)`` where ``(ox, oy, oz)`` is the component's offset in half
cells. Electric components live at integer time levels, magnetic ones at
half-integer levels.

In ``PEC_WITH_PML`` mode the index-0 plane normal to each PEC axis is a
perfect conductor. Because arrays still wrap, the wall at index 0 doubles as
the wall at index ``n``: the tangential electric field is pinned to zero there
after every update, so nothing couples across it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

AXES = ("x", "y", "z")
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


class Boundary(enum.Enum):
    PERIODIC = "periodic"
    PEC_WITH_PML = "pec_with_pml"


class GridError(ValueError):
    pass


class BoundaryError(GridError):
    pass


@dataclass(frozen=True)
class StaggerSite:
    component: str
    offset: tuple[int, int, int]
    half_time: bool

    def shifted(self, axis: str) -> tuple[int, int, int]:
        """Offset obtained by differencing along ``axis``."""
        o = list(self.offset)
        a = AXIS_INDEX[axis]
        o[a] = 1 - o[a]
        return tuple(o)


_PARENT_OFFSETS = {
    "ex": (1, 0, 0),
    "ey": (0, 1, 0),
    "ez": (0, 0, 1),
    "hx": (0, 1, 1),
    "hy": (1, 0, 1),
    "hz": (1, 1, 0),
}

SPLIT_NAMES = (
    "exy", "exz", "eyz", "eyx", "ezx", "ezy",
    "hxy", "hxz", "hyz", "hyx", "hzx", "hzy",
)


def site(component: str) -> StaggerSite:
    """Yee site of a parent, split or auxiliary component.

    Split subcomponents (``exy``) and auxiliary fields (``ez_aux``) share the
    site of their parent.
    """
    name = component.lower()
    parent = name[:2]
    if parent not in _PARENT_OFFSETS:
        raise GridError(f"unknown field component {component!r}")
    return StaggerSite(name, _PARENT_OFFSETS[parent], parent.startswith("h"))


def _positive_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise GridError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class StaggeredGrid3:
    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float
    dt: float
    boundary: Boundary = Boundary.PERIODIC
    pec_axes: tuple[str, ...] = field(default=AXES)

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            n = getattr(self, name)
            if int(n) != n or n < 2:
                raise GridError(f"{name} must be an integer >= 2, got {n!r}")
        for name in ("dx", "dy", "dz", "dt"):
            _positive_finite(name, getattr(self, name))
        if not isinstance(self.boundary, Boundary):
            object.__setattr__(self, "boundary", Boundary(self.boundary))
        bad = set(self.pec_axes) - set(AXES)
        if bad:
            raise GridError(f"unknown PEC axes {sorted(bad)}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    def n(self, axis: str) -> int:
        return self.shape[AXIS_INDEX[axis]]

    def h(self, axis: str) -> float:
        return self.spacing[AXIS_INDEX[axis]]

    def length(self, axis: str) -> float:
        return self.n(axis) * self.h(axis)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, order="F")

    def coords(self, offset: tuple[int, int, int]):
        """Broadcastable coordinate arrays ``(x, y, z)`` of a staggered site."""
        out = []
        for a, axis in enumerate(AXES):
            pos = (np.arange(self.n(axis)) + 0.5 * offset[a]) * self.h(axis)
            shape = [1, 1, 1]
            shape[a] = -1
            out.append(pos.reshape(shape))
        return tuple(out)

    def with_dt(self, dt: float) -> "StaggeredGrid3":
        return StaggeredGrid3(self.nx, self.ny, self.nz, self.dx, self.dy, self.dz,
                              dt, self.boundary, self.pec_axes)

    def pec_planes(self, component: str):
        """Index expressions of the PEC planes on which ``component`` is tangential."""
        if self.periodic:
            return []
        s = site(component)
        if s.half_time:
            return []
        normal = AXIS_INDEX[s.component[1]]
        planes = []
        for axis in self.pec_axes:
            a = AXIS_INDEX[axis]
            if a == normal:
                continue
            idx = [slice(None)] * 3
            idx[a] = 0
            planes.append(tuple(idx))
        return planes

    def pin_pec(self, fields: dict[str, np.ndarray]) -> None:
        """Zero tangential electric field on the PEC planes, in place."""
        if self.periodic:
            return
        for name, values in fields.items():
            for plane in self.pec_planes(name):
                values[plane] = 0.0


def cfl_dt(dx: float, dy: float, dz: float, cfl_fraction: float) -> float:
    return cfl_fraction / math.sqrt(1.0 / dx**2 + 1.0 / dy**2 + 1.0 / dz**2)


def make_grid(nx, ny, nz, dx, dy, dz, cfl_fraction=0.9,
              boundary=Boundary.PERIODIC, pec_axes=AXES) -> StaggeredGrid3:
    """Build a grid whose time step is ``cfl_fraction`` of the 3D Yee limit.

    Wave speed is one, so the limit is ``1 / sqrt(dx^-2 + dy^-2 + dz^-2)``.
    """
    for name, value in (("dx", dx), ("dy", dy), ("dz", dz)):
        _positive_finite(name, value)
    cfl_fraction = float(cfl_fraction)
    if not math.isfinite(cfl_fraction) or not 0.0 < cfl_fraction <= 1.0:
        raise GridError(f"cfl_fraction out of range (0, 1]: {cfl_fraction!r}")
    dt = cfl_dt(float(dx), float(dy), float(dz), cfl_fraction)
    return StaggeredGrid3(nx, ny, nz, float(dx), float(dy), float(dz), dt,
                          Boundary(boundary), tuple(pec_axes))


def wrap_index(grid: StaggeredGrid3, axis: str, raw: int) -> int:
    n = grid.n(axis)
    if not grid.periodic:
        if not 0 <= raw < n:
            raise BoundaryError(
                f"index {raw} outside [0, {n}) on axis {axis!r} of a non-periodic grid")
        return int(raw)
    return int(raw) % n
