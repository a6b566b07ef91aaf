"""Leapfrog Yee scheme for the unsplit z-layer PML system and its energy law.

Each step advances H from n - 1/2 to n + 1/2 and then E from n to n + 1. The
damped equations are solved in closed form by :func:`ops.damped_update`. The
auxiliary z fields advance through their offset from the physical field,
``aux' - phys' = (aux - phys) + sigma dt avg(phys)``, so they stay bitwise
equal to the physical field when sigma is zero.

Energy law (constant sigma, periodic grid). Write ``c`` for the centred
difference ``(E^{n+1} - E^{n-1}) / 2dt``, ``g`` for ``D_sigma H`` at integer
levels and ``w`` for ``D_t Hz`` at integer levels. Then::

    mod(n+1/2) - mod(n-1/2)
        + 2 sigma (|c_x|^2 + |c_y|^2)
        + sigma (avg Hz + avg Hz_aux, (w^{n+1} - w^{n-1}) / 2dt) = 0

with the modified energy::

    mod(n+1/2) = (|D_t Ex|^2 + |D_t Ey|^2 + |D_t Ez_aux|^2
                  + |sigma avg Ex|^2 + |sigma avg Ey|^2
                  + (g_x^{n+1}, g_x^n) + (g_y^{n+1}, g_y^n) + (w^{n+1}, w^n)) / 2dt
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import HistoryError, NumericalDivergence
from .grid import AXIS_INDEX, StaggeredGrid3, site
from .maxwell import MaxwellState
from .ops import damped_revert, damped_update, diff, dot_h
from .pml import PmlConfig, UnsplitState, init_unsplit_from_fields


def _d(grid: StaggeredGrid3, values, name: str, axis: str):
    return diff(values, axis, grid.h(axis), from_half=bool(site(name).offset[AXIS_INDEX[axis]]))


def _sigmas(cfg: PmlConfig, grid: StaggeredGrid3) -> dict:
    return {n: cfg.z_sigma_at(grid, n) for n in ("ex", "ey", "ez", "hx", "hy", "hz")}


def step(state: UnsplitState, cfg: PmlConfig) -> UnsplitState:
    """Advance one full leapfrog step; returns a new state."""
    g = state.grid
    dt = g.dt
    s = _sigmas(cfg, g)
    hx = damped_update(state.hx, _d(g, state.ey, "ey", "z") - _d(g, state.ez_aux, "ez", "y"),
                       s["hx"], dt)
    hy = damped_update(state.hy, _d(g, state.ez_aux, "ez", "x") - _d(g, state.ex, "ex", "z"),
                       s["hy"], dt)
    hz = state.hz + dt * (_d(g, state.ex, "ex", "y") - _d(g, state.ey, "ey", "x"))
    hz_aux = hz + ((state.hz_aux - state.hz) + s["hz"] * dt * 0.5 * (hz + state.hz))

    ex = damped_update(state.ex, _d(g, hz_aux, "hz", "y") - _d(g, hy, "hy", "z"), s["ex"], dt)
    ey = damped_update(state.ey, _d(g, hx, "hx", "z") - _d(g, hz_aux, "hz", "x"), s["ey"], dt)
    ez = state.ez + dt * (_d(g, hy, "hy", "x") - _d(g, hx, "hx", "y"))
    g.pin_pec({"ex": ex, "ey": ey, "ez": ez})
    ez_aux = ez + ((state.ez_aux - state.ez) + s["ez"] * dt * 0.5 * (ez + state.ez))
    g.pin_pec({"ez_aux": ez_aux})

    out = UnsplitState(ex, ey, ez, ez_aux, hx, hy, hz, hz_aux, grid=g, n=state.n + 1)
    for name, a in out.arrays().items():
        if not np.all(np.isfinite(a)):
            raise NumericalDivergence(f"non-finite {name}", out.n)
    return out


def unstep(state: UnsplitState, cfg: PmlConfig) -> UnsplitState:
    """Exact algebraic inverse of :func:`step` (up to rounding)."""
    g = state.grid
    dt = g.dt
    s = _sigmas(cfg, g)
    hx, hy, hz_aux = state.hx, state.hy, state.hz_aux
    ez = state.ez - dt * (_d(g, hy, "hy", "x") - _d(g, hx, "hx", "y"))
    w = state.ez_aux - state.ez
    ez_aux = ez + (w - s["ez"] * dt * 0.5 * (state.ez + ez))
    ex = damped_revert(state.ex, _d(g, hz_aux, "hz", "y") - _d(g, hy, "hy", "z"), s["ex"], dt)
    ey = damped_revert(state.ey, _d(g, hx, "hx", "z") - _d(g, hz_aux, "hz", "x"), s["ey"], dt)

    hz = state.hz - dt * (_d(g, ex, "ex", "y") - _d(g, ey, "ey", "x"))
    w = state.hz_aux - state.hz
    hz_aux = hz + (w - s["hz"] * dt * 0.5 * (state.hz + hz))
    hx = damped_revert(state.hx, _d(g, ey, "ey", "z") - _d(g, ez_aux, "ez", "y"), s["hx"], dt)
    hy = damped_revert(state.hy, _d(g, ez_aux, "ez", "x") - _d(g, ex, "ex", "z"), s["hy"], dt)
    return UnsplitState(ex, ey, ez, ez_aux, hx, hy, hz, hz_aux, grid=g, n=state.n - 1)


# ---------------------------------------------------------------------------
# energy law


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy-law terms at integer level ``n``.

    ``part_*`` are the six direct products (one per field equation) whose sum
    vanishes by summation by parts. ``residual`` is the energy law itself,
    ``mod_upper - mod_lower + dissipation``. The ``uncorrected_*`` entries evaluate
    the variant without the ``w`` term whose coupling uses double time
    averages of ``Dx Ey - Dy Ex``; it does not close and is kept for comparison.
    """

    n: int
    part_ex: float
    part_ey: float
    part_ez: float
    part_hx: float
    part_hy: float
    part_hz: float
    mod_upper: float
    mod_lower: float
    dissipation: float
    residual: float
    uncorrected_mod_upper: float
    uncorrected_mod_lower: float
    uncorrected_residual: float

    @property
    def parts_sum(self) -> float:
        return (self.part_ex + self.part_ey + self.part_ez
                + self.part_hx + self.part_hy + self.part_hz)

    @property
    def scale(self) -> float:
        return abs(self.mod_upper) + abs(self.mod_lower) + 1.0


class _Levels:
    """Accessors over consecutive states ``[s_{n-1}, s_n, s_{n+1}, s_{n+2}]``."""

    def __init__(self, states, cfg: PmlConfig):
        self.s = {states[0].n + i: st for i, st in enumerate(states)}
        g = states[0].grid
        self.g = g
        self.dt = g.dt
        self.vol = g.cell_volume
        self.sig = _sigmas(cfg, g)

    def E(self, k, c):
        return getattr(self.s[k], c)

    def H(self, m, c):
        """H at level m + 1/2."""
        return getattr(self.s[m + 1], c)

    def dtE(self, k, c):
        """D_t E at k + 1/2."""
        return (self.E(k + 1, c) - self.E(k, c)) / self.dt

    def avgE(self, k, c):
        return 0.5 * (self.E(k + 1, c) + self.E(k, c))

    def cE(self, n, c):
        return (self.E(n + 1, c) - self.E(n - 1, c)) / (2.0 * self.dt)

    def gH(self, m, c):
        """D_sigma H at integer level m."""
        lo, hi = self.H(m - 1, c), self.H(m, c)
        return (hi - lo) / self.dt + self.sig[c[:2]] * 0.5 * (hi + lo)

    def dtH(self, m, c):
        return (self.H(m, c) - self.H(m - 1, c)) / self.dt

    def avgH(self, m, c):
        return 0.5 * (self.H(m, c) + self.H(m - 1, c))

    def ip(self, u, v):
        return dot_h(u, v, self.vol)

    def modified(self, k, uncorrected=False):
        """Modified energy at k + 1/2."""
        sx, sy = self.sig["ex"], self.sig["ey"]
        tot = 0.0
        for c in ("ex", "ey", "ez_aux"):
            d = self.dtE(k, c)
            tot += self.ip(d, d)
        for c, s in (("ex", sx), ("ey", sy)):
            a = s * self.avgE(k, c)
            tot += self.ip(a, a)
        for c in ("hx", "hy"):
            tot += self.ip(self.gH(k + 1, c), self.gH(k, c))
        if not uncorrected:
            tot += self.ip(self.dtH(k + 1, "hz"), self.dtH(k, "hz"))
        return tot / (2.0 * self.dt)


def energy_breakdown(states, cfg: PmlConfig) -> EnergyBreakdown:
    """Energy-law terms centred on the second of four consecutive states."""
    if len(states) < 4:
        raise HistoryError(f"energy law needs 4 consecutive levels, have {len(states)}")
    states = list(states)[-4:]
    for a, b in zip(states, states[1:]):
        if b.n != a.n + 1:
            raise HistoryError("history levels are not consecutive")
    L = _Levels(states, cfg)
    g, dt = L.g, L.dt
    n = states[1].n
    sig = L.sig

    cx, cy = L.cE(n, "ex"), L.cE(n, "ey")
    ebar = L.cE(n, "ez_aux")
    gx, gy = L.gH(n, "hx"), L.gH(n, "hy")
    v = (L.dtH(n + 1, "hz") - L.dtH(n - 1, "hz")) / (2.0 * dt)

    def dd_sigma_e(c):
        lo = L.dtE(n - 1, c) + sig[c] * L.avgE(n - 1, c)
        hi = L.dtE(n, c) + sig[c] * L.avgE(n, c)
        return (hi - lo) / dt + sig[c] * 0.5 * (hi + lo)

    dd_ez_aux = (L.dtE(n, "ez_aux") - L.dtE(n - 1, "ez_aux")) / dt
    hz_aux_lo, hz_aux_hi = L.H(n - 1, "hz_aux"), L.H(n, "hz_aux")
    dsig_hz_aux = (hz_aux_hi - hz_aux_lo) / dt + sig["hz"] * 0.5 * (hz_aux_hi + hz_aux_lo)

    part_ex = L.ip(dd_sigma_e("ex"), cx)
    part_ey = L.ip(dd_sigma_e("ey"), cy)
    part_ez = L.ip(dd_ez_aux, ebar)
    part_hx = L.ip(gx, (L.gH(n + 1, "hx") - L.gH(n - 1, "hx")) / (2.0 * dt))
    part_hy = L.ip(gy, (L.gH(n + 1, "hy") - L.gH(n - 1, "hy")) / (2.0 * dt))
    part_hz = L.ip(dsig_hz_aux, v)

    up, low = L.modified(n), L.modified(n - 1)
    dissipation = (2.0 * L.ip(sig["ex"] * cx, cx) + 2.0 * L.ip(sig["ey"] * cy, cy)
                   + L.ip(sig["hz"] * (L.avgH(n, "hz") + L.avgH(n, "hz_aux")), v))

    p_up, p_low = L.modified(n, uncorrected=True), L.modified(n - 1, uncorrected=True)

    def dd(c):
        return 0.25 * (L.E(n + 1, c) + 2.0 * L.E(n, c) + L.E(n - 1, c))

    coupling = _d(g, dd("ey"), "ey", "x") - _d(g, dd("ex"), "ex", "y")
    uncorrected_diss = (2.0 * L.ip(sig["ex"] * cx, cx) + 2.0 * L.ip(sig["ey"] * cy, cy)
                    + L.ip(sig["hz"] * coupling, dsig_hz_aux))

    return EnergyBreakdown(
        n=n, part_ex=part_ex, part_ey=part_ey, part_ez=part_ez,
        part_hx=part_hx, part_hy=part_hy, part_hz=part_hz,
        mod_upper=up, mod_lower=low, dissipation=dissipation,
        residual=up - low + dissipation,
        uncorrected_mod_upper=p_up, uncorrected_mod_lower=p_low,
        uncorrected_residual=p_up - p_low + uncorrected_diss,
    )


def modified_energy(states, cfg: PmlConfig) -> float:
    """Modified energy at ``n + 1/2`` from three consecutive states ``s_n .. s_{n+2}``."""
    if len(states) < 3:
        raise HistoryError(f"modified energy needs 3 consecutive levels, have {len(states)}")
    states = list(states)[-3:]
    return _Levels(states, cfg).modified(states[0].n)


# ---------------------------------------------------------------------------
# run driver


class YeeRun:
    """A stepping session that retains the last four states for energy diagnostics."""

    HISTORY = 4

    def __init__(self, initial: UnsplitState | MaxwellState, cfg: PmlConfig):
        if isinstance(initial, MaxwellState):
            initial = init_unsplit_from_fields(initial, cfg)
        cfg.validate_for(initial.grid)
        self.cfg = cfg
        self.history: deque[UnsplitState] = deque([initial], maxlen=self.HISTORY)

    @property
    def state(self) -> UnsplitState:
        return self.history[-1]

    @property
    def grid(self) -> StaggeredGrid3:
        return self.state.grid

    def step(self, count: int = 1) -> UnsplitState:
        for _ in range(count):
            self.history.append(step(self.state, self.cfg))
        return self.state

    def modified_energy(self) -> float:
        """Latest available modified energy (at ``n_latest - 3/2``)."""
        return modified_energy(self.history, self.cfg)

    def energy_residual(self) -> EnergyBreakdown:
        """Energy law centred on ``n_latest - 2``."""
        return energy_breakdown(self.history, self.cfg)

    def dissipation_rate(self) -> float:
        return self.energy_residual().dissipation
