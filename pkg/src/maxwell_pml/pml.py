"""Berenger split-field PML, its z-face unsplit reformulation, and the maps between them.

The twelve subcomponents pair up as ``ex = exy + exz``, ``ey = eyz + eyx``,
``ez = ezx + ezy`` and likewise for H. Subcomponent ``e_ab`` is damped by the
electric conductivity of axis ``b``, ``h_ab`` by the magnetic one.

The unsplit form handles a z-only layer with ``sigma_star == sigma``. It keeps
the six physical fields plus two auxiliary fields ``ez_aux`` and ``hz_aux``
that satisfy ``D_t aux = D_sigma(physical)``; they coincide with the physical
fields whenever sigma is zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalDivergence, PmlError
from .grid import AXES, AXIS_INDEX, SPLIT_NAMES, StaggeredGrid3, site
from .maxwell import MaxwellState
from .ops import damped_update, diff

PAIRS = {
    "ex": ("exy", "exz"),
    "ey": ("eyz", "eyx"),
    "ez": ("ezx", "ezy"),
    "hx": ("hxy", "hxz"),
    "hy": ("hyz", "hyx"),
    "hz": ("hzx", "hzy"),
}

# subcomponent -> (sign, parent field differenced, axis)
SPLIT_RHS = {
    "exy": (1.0, "hz", "y"), "exz": (-1.0, "hy", "z"),
    "eyz": (1.0, "hx", "z"), "eyx": (-1.0, "hz", "x"),
    "ezx": (1.0, "hy", "x"), "ezy": (-1.0, "hx", "y"),
    "hxy": (-1.0, "ez", "y"), "hxz": (1.0, "ey", "z"),
    "hyz": (-1.0, "ex", "z"), "hyx": (1.0, "ez", "x"),
    "hzx": (-1.0, "ey", "x"), "hzy": (1.0, "ex", "y"),
}


@dataclass(frozen=True)
class PmlConfig:
    """Constant conductivities on a set of axes.

    ``thickness=None`` applies sigma on the whole grid (periodic verification
    runs); an integer confines it to that many cells next to both faces of
    every active axis.
    """

    sigma: float = 0.0
    sigma_star: float | None = None
    axes: tuple[str, ...] = ("z",)
    thickness: int | None = None

    def __post_init__(self):
        for name in ("sigma", "sigma_star"):
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v) or v < 0.0:
                raise PmlError(f"{name} must be a finite non-negative conductivity, got {v!r}")
        if set(self.axes) - set(AXES):
            raise PmlError(f"unknown PML axes {self.axes!r}")
        object.__setattr__(self, "axes", tuple(a for a in AXES if a in self.axes))
        if self.thickness is not None and (int(self.thickness) != self.thickness
                                           or self.thickness < 1):
            raise PmlError(f"layer thickness must be a positive cell count, got {self.thickness!r}")

    @property
    def magnetic_sigma(self) -> float:
        return self.sigma if self.sigma_star is None else self.sigma_star

    @property
    def is_z_specialization(self) -> bool:
        return self.axes == ("z",) and self.magnetic_sigma == self.sigma

    def validate_for(self, grid: StaggeredGrid3) -> None:
        if self.thickness is None:
            return
        for axis in self.axes:
            if 2 * self.thickness >= grid.n(axis):
                raise PmlError(
                    f"thickness {self.thickness} >= n{axis}/2 = {grid.n(axis) / 2:g}")

    def sigma_along(self, grid: StaggeredGrid3, axis: str, offset, magnetic: bool):
        """Conductivity of ``axis`` sampled at a site; scalar or broadcastable array."""
        value = self.magnetic_sigma if magnetic else self.sigma
        if axis not in self.axes or value == 0.0:
            return 0.0
        if self.thickness is None:
            return value
        a = AXIS_INDEX[axis]
        n = grid.n(axis)
        pos = np.arange(n) + 0.5 * offset[a]
        inside = (pos < self.thickness) | (pos > n - self.thickness)
        shape = [1, 1, 1]
        shape[a] = n
        return np.where(inside, value, 0.0).reshape(shape)

    def sigma_of(self, grid: StaggeredGrid3, name: str):
        """Damping of a split subcomponent such as ``exz``."""
        s = site(name)
        return self.sigma_along(grid, name[2], s.offset, s.half_time)

    def z_sigma_at(self, grid: StaggeredGrid3, name: str):
        """z-conductivity at the site of a parent field (unsplit form)."""
        s = site(name)
        return self.sigma_along(grid, "z", s.offset, s.half_time)


def make_layer_config(grid: StaggeredGrid3, thickness: int, sigma: float) -> PmlConfig:
    """z-face layer of ``thickness`` cells on both ends, constant ``sigma``."""
    cfg = PmlConfig(sigma=float(sigma), sigma_star=float(sigma), axes=("z",),
                    thickness=int(thickness) if int(thickness) == thickness else thickness)
    cfg.validate_for(grid)
    return cfg


def _d(grid: StaggeredGrid3, values: np.ndarray, name: str, axis: str) -> np.ndarray:
    return diff(values, axis, grid.h(axis), from_half=bool(site(name).offset[AXIS_INDEX[axis]]))


def _check_finite(arrays, what: str, step: int | None) -> None:
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            raise NumericalDivergence(f"non-finite {what} field {name}", step)


# ---------------------------------------------------------------------------
# split form


@dataclass
class SplitState:
    """Twelve subcomponents plus their parent sums and the auxiliary offsets.

    ``parent`` is authoritative; the subcomponents sum to it up to one rounding.
    ``ez_shift`` and ``hz_shift`` carry ``aux - physical`` for the z fields so
    that the unsplit view can be reconstructed at any step.
    """

    sub: dict[str, np.ndarray]
    parent: dict[str, np.ndarray]
    grid: StaggeredGrid3
    ez_shift: np.ndarray
    hz_shift: np.ndarray
    n: int = 0

    @classmethod
    def from_subcomponents(cls, sub: dict[str, np.ndarray], grid: StaggeredGrid3,
                           n: int = 0) -> "SplitState":
        missing = set(SPLIT_NAMES) - set(sub)
        if missing:
            raise PmlError(f"missing subcomponents {sorted(missing)}")
        sub = {k: np.asarray(sub[k], dtype=float) for k in SPLIT_NAMES}
        for k, v in sub.items():
            if v.shape != grid.shape:
                raise PmlError(f"{k} has shape {v.shape}, grid is {grid.shape}")
        parent = {p: sub[a] + sub[b] for p, (a, b) in PAIRS.items()}
        return cls(sub, parent, grid, grid.zeros(), grid.zeros(), n)

    def copy(self) -> "SplitState":
        return SplitState({k: v.copy() for k, v in self.sub.items()},
                          {k: v.copy() for k, v in self.parent.items()},
                          self.grid, self.ez_shift.copy(), self.hz_shift.copy(), self.n)

    def fields(self) -> MaxwellState:
        return MaxwellState(*(self.parent[p].copy() for p in ("ex", "ey", "ez", "hx", "hy", "hz")),
                            grid=self.grid)


def split_first_listed(fields: MaxwellState) -> SplitState:
    """Whole parent into the first subcomponent of each pair, zero in the second."""
    sub = {k: fields.grid.zeros() for k in SPLIT_NAMES}
    for p, (a, _) in PAIRS.items():
        sub[a] = getattr(fields, p).copy()
    state = SplitState.from_subcomponents(sub, fields.grid)
    for p in PAIRS:
        state.parent[p] = getattr(fields, p).copy()
    return state


def split_compatible(fields: MaxwellState, cfg: PmlConfig) -> SplitState:
    """Split leapfrog data so the split run matches the unsplit one from step 0.

    The undamped subcomponents of ex, ey, hx and hy are set to half a step of
    their own equation. Their time average over the first update then equals
    what the zero-initialised auxiliary offsets require, which is the discrete
    form of the initial compatibility condition. Ez and Hz stay whole in their
    first subcomponent, whose partner is undamped in a z-only layer anyway.
    """
    if not cfg.is_z_specialization:
        raise PmlError("compatible split data is defined for a z-only layer with sigma_star == sigma")
    g = fields.grid
    half = 0.5 * g.dt
    sub = {k: g.zeros() for k in SPLIT_NAMES}
    sub["exy"] = half * _d(g, fields.hz, "hz", "y")
    sub["eyx"] = -half * _d(g, fields.hz, "hz", "x")
    sub["hxy"] = half * _d(g, fields.ez, "ez", "y")
    sub["hyx"] = -half * _d(g, fields.ez, "ez", "x")
    sub["exz"] = fields.ex - sub["exy"]
    sub["eyz"] = fields.ey - sub["eyx"]
    sub["hxz"] = fields.hx - sub["hxy"]
    sub["hyz"] = fields.hy - sub["hyx"]
    sub["ezx"] = fields.ez.copy()
    sub["hzx"] = fields.hz.copy()
    state = SplitState.from_subcomponents(sub, g)
    for p in PAIRS:
        state.parent[p] = getattr(fields, p).copy()
    return state


def _advance_pair(state: SplitState, p: str, cfg: PmlConfig, source: dict) -> None:
    g = state.grid
    dt = g.dt
    rhs = {}
    sig = {}
    for name in PAIRS[p]:
        sign, field, axis = SPLIT_RHS[name]
        d = _d(g, source[field], field, axis)
        rhs[name] = d if sign > 0 else -d
        sig[name] = cfg.sigma_of(g, name)
    a, b = PAIRS[p]
    new_a = damped_update(state.sub[a], rhs[a], sig[a], dt)
    new_b = damped_update(state.sub[b], rhs[b], sig[b], dt)
    free = np.broadcast_to((np.asarray(sig[a]) == 0.0) & (np.asarray(sig[b]) == 0.0), g.shape)
    if free.all():
        # undamped pair: advance the parent by the summed equation
        new_p = state.parent[p] + dt * (rhs[a] + rhs[b])
        new_b = new_p - new_a
    elif free.any():
        new_p = np.where(free, state.parent[p] + dt * (rhs[a] + rhs[b]), new_a + new_b)
        new_b = np.where(free, new_p - new_a, new_b)
    else:
        new_p = new_a + new_b
    state.sub[a], state.sub[b], state.parent[p] = new_a, new_b, new_p


def step_split_yee(state: SplitState, cfg: PmlConfig) -> SplitState:
    """One leapfrog step of the twelve split equations; returns a new state."""
    g = state.grid
    cfg.validate_for(g)
    out = state.copy()
    hz_old, ez_old = out.parent["hz"], out.parent["ez"]
    e_src = {p: out.parent[p] for p in ("ex", "ey", "ez")}
    for p in ("hx", "hy", "hz"):
        _advance_pair(out, p, cfg, e_src)
    h_src = {p: out.parent[p] for p in ("hx", "hy", "hz")}
    for p in ("ex", "ey", "ez"):
        _advance_pair(out, p, cfg, h_src)
    pinned = {n: out.sub[n] for n in SPLIT_NAMES if n[0] == "e"}
    pinned.update({p: out.parent[p] for p in ("ex", "ey", "ez")})
    g.pin_pec(pinned)
    s_h = cfg.z_sigma_at(g, "hz")
    s_e = cfg.z_sigma_at(g, "ez")
    out.hz_shift = out.hz_shift + s_h * g.dt * 0.5 * (out.parent["hz"] + hz_old)
    out.ez_shift = out.ez_shift + s_e * g.dt * 0.5 * (out.parent["ez"] + ez_old)
    out.n = state.n + 1
    _check_finite(out.parent, "split", out.n)
    return out


# ---------------------------------------------------------------------------
# unsplit form

UNSPLIT_NAMES = ("ex", "ey", "ez", "ez_aux", "hx", "hy", "hz", "hz_aux")


@dataclass
class UnsplitState:
    """Physical fields plus the auxiliary z fields. E at level n, H at n - 1/2."""

    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    ez_aux: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    hz_aux: np.ndarray
    grid: StaggeredGrid3
    n: int = 0

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in UNSPLIT_NAMES}

    def fields(self) -> MaxwellState:
        return MaxwellState(self.ex, self.ey, self.ez, self.hx, self.hy, self.hz, grid=self.grid)

    def copy(self) -> "UnsplitState":
        return UnsplitState(*(a.copy() for a in self.arrays().values()), grid=self.grid, n=self.n)


def init_unsplit_from_fields(fields: MaxwellState, cfg: PmlConfig) -> UnsplitState:
    """Leapfrog initial data (E at 0, H at -dt/2) with aux fields equal to physical ones.

    The time derivative of E at t = 0 enters only through the staggered H
    level, which is how leapfrog data encodes it.
    """
    if not cfg.is_z_specialization:
        raise PmlError("the unsplit form needs a z-only layer with sigma_star == sigma")
    cfg.validate_for(fields.grid)
    f = fields.copy()
    return UnsplitState(f.ex, f.ey, f.ez, f.ez.copy(), f.hx, f.hy, f.hz, f.hz.copy(),
                        grid=fields.grid)


def split_to_unsplit(state: SplitState) -> UnsplitState:
    p = state.parent
    return UnsplitState(p["ex"].copy(), p["ey"].copy(), p["ez"].copy(), p["ez"] + state.ez_shift,
                        p["hx"].copy(), p["hy"].copy(), p["hz"].copy(), p["hz"] + state.hz_shift,
                        grid=state.grid, n=state.n)
