"""Continuous-model structures of the 3D Maxwell system on the Yee lattice.

Holds the multi-symplectic structure matrices, the Yee discretization of the
curl right-hand side, the two quadratic invariants, the TE reduction, the
exact plane-wave oracle, and the totalized discrete 2-form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ops
from .grid import AXES, AXIS_INDEX, StaggeredGrid3, site

E_NAMES = ("ex", "ey", "ez")
H_NAMES = ("hx", "hy", "hz")


@dataclass
class MaxwellState:
    """Six Yee arrays. ``e*`` at time level n, ``h*`` at n - 1/2 by convention."""

    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    grid: StaggeredGrid3

    def __post_init__(self):
        for name in E_NAMES + H_NAMES:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ops.SiteMismatch(f"{name} has shape {arr.shape}, grid is {self.grid.shape}")
            setattr(self, name, arr)

    @classmethod
    def zeros(cls, grid: StaggeredGrid3) -> "MaxwellState":
        return cls(*(grid.zeros() for _ in range(6)), grid=grid)

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in E_NAMES + H_NAMES}

    def z_vector(self) -> tuple[np.ndarray, ...]:
        """Components in the order (Hx, Hy, Hz, Ex, Ey, Ez)."""
        return tuple(getattr(self, n) for n in H_NAMES + E_NAMES)

    def copy(self) -> "MaxwellState":
        return MaxwellState(*(a.copy() for a in self.arrays().values()), grid=self.grid)

    def map(self, fn) -> "MaxwellState":
        return MaxwellState(*(fn(a) for a in self.arrays().values()), grid=self.grid)

    def slice(self, name: str) -> ops.FieldSlice:
        return ops.FieldSlice(getattr(self, name), site(name).offset, self.grid)


# ---------------------------------------------------------------------------
# structure matrices

R_MATRICES = (
    np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float),
    np.array([[0, 0, 1], [0, 0, 0], [-1, 0, 0]], dtype=float),
    np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]], dtype=float),
)


@dataclass(frozen=True, eq=False)
class StructureMatrices:
    M: np.ndarray
    K: tuple[np.ndarray, np.ndarray, np.ndarray]
    R: tuple[np.ndarray, np.ndarray, np.ndarray]
    epsilon: float
    mu: float


def build_structure_matrices(epsilon: float = 1.0, mu: float = 1.0) -> StructureMatrices:
    if not (epsilon > 0 and mu > 0 and math.isfinite(epsilon) and math.isfinite(mu)):
        raise ValueError("epsilon and mu must be positive and finite")
    eye, zero = np.eye(3), np.zeros((3, 3))
    M = np.block([[zero, -eye], [eye, zero]])
    K = tuple(np.block([[r / epsilon, zero], [zero, r / mu]]) for r in R_MATRICES)
    return StructureMatrices(M, K, R_MATRICES, float(epsilon), float(mu))


# ---------------------------------------------------------------------------
# curl right-hand side


def _d(grid, values, name, axis):
    a = AXIS_INDEX[axis]
    return ops.diff(values, axis, grid.h(axis), from_half=bool(site(name).offset[a]))


def curl_h(grid, hx, hy, hz):
    """Discrete curl of H, landing on the three E sites."""
    return (
        _d(grid, hz, "hz", "y") - _d(grid, hy, "hy", "z"),
        _d(grid, hx, "hx", "z") - _d(grid, hz, "hz", "x"),
        _d(grid, hy, "hy", "x") - _d(grid, hx, "hx", "y"),
    )


def curl_e(grid, ex, ey, ez):
    """Discrete curl of E, landing on the three H sites."""
    return (
        _d(grid, ez, "ez", "y") - _d(grid, ey, "ey", "z"),
        _d(grid, ex, "ex", "z") - _d(grid, ez, "ez", "x"),
        _d(grid, ey, "ey", "x") - _d(grid, ex, "ex", "y"),
    )


def curl_rhs(state: MaxwellState) -> MaxwellState:
    """Time derivative of every component, with unit material constants."""
    g = state.grid
    # d/dt H = -curl E, written as the row differences in their natural order
    dhx = _d(g, state.ey, "ey", "z") - _d(g, state.ez, "ez", "y")
    dhy = _d(g, state.ez, "ez", "x") - _d(g, state.ex, "ex", "z")
    dhz = _d(g, state.ex, "ex", "y") - _d(g, state.ey, "ey", "x")
    return MaxwellState(*curl_h(g, state.hx, state.hy, state.hz), dhx, dhy, dhz, grid=g)


def classical_yee_step(state: MaxwellState) -> MaxwellState:
    """One leapfrog step: H from n-1/2 to n+1/2, then E from n to n+1."""
    g = state.grid
    dh = curl_rhs(state)
    hx = state.hx + g.dt * dh.hx
    hy = state.hy + g.dt * dh.hy
    hz = state.hz + g.dt * dh.hz
    de = curl_rhs(MaxwellState(state.ex, state.ey, state.ez, hx, hy, hz, grid=g))
    new = MaxwellState(state.ex + g.dt * de.ex, state.ey + g.dt * de.ey,
                       state.ez + g.dt * de.ez, hx, hy, hz, grid=g)
    g.pin_pec({"ex": new.ex, "ey": new.ey, "ez": new.ez})
    return new


def residual_multisymplectic_form(state: MaxwellState, zt: MaxwellState,
                                  matrices: StructureMatrices | None = None) -> float:
    """Max-norm of ``M Z_t + sum_p K_p Z_{x_p}`` built from the Yee differences.

    Only the non-zero entries of each ``K_p`` produce a difference. Each one is
    checked to land on the site of the time derivative its row carries.
    """
    mats = matrices or build_structure_matrices()
    z = state.z_vector()
    dz = zt.z_vector()
    names = H_NAMES + E_NAMES
    worst = 0.0
    for row in range(6):
        # each row holds one time derivative; it lives on that field's site
        target = site(names[int(np.flatnonzero(mats.M[row])[0])]).offset
        acc = sum(mats.M[row, col] * dz[col] for col in range(6) if mats.M[row, col] != 0.0)
        for p, axis in enumerate(AXES):
            K = mats.K[p]
            for col in range(6):
                coef = K[row, col]
                if coef == 0.0:
                    continue
                deriv = ops.d_space(ops.FieldSlice(z[col], site(names[col]).offset, state.grid),
                                    axis, expect_offset=target)
                acc = acc + coef * deriv.values
        worst = max(worst, float(np.max(np.abs(acc))))
    return worst


# ---------------------------------------------------------------------------
# invariants


def field_energy(state: MaxwellState) -> float:
    """Cell-weighted ``sum |E|^2 + |H|^2`` (the Poynting invariant)."""
    v = state.grid.cell_volume
    return sum(ops.dot_h(a, a, v) for a in state.arrays().values())


def rate_energy(lo: MaxwellState, hi: MaxwellState) -> float:
    """Field energy of the time differences between two consecutive levels."""
    if lo.grid != hi.grid:
        raise ops.SiteMismatch("levels live on different grids")
    dt = lo.grid.dt
    return field_energy(MaxwellState(*((b - a) / dt for a, b in zip(
        lo.arrays().values(), hi.arrays().values())), grid=lo.grid))


# ---------------------------------------------------------------------------
# TE reduction and exact solutions


def te_mode_embed(ex2d, ey2d, hz2d, grid: StaggeredGrid3) -> MaxwellState:
    """Extrude 2D TE data (Ex, Ey, Hz) uniformly along z.

    Ez, Hx and Hy are zero and stay exactly zero under Yee stepping, since every
    z-difference of z-constant data vanishes.
    """
    if not grid.periodic:
        raise ValueError("TE embedding needs a periodic grid")
    planes = [np.asarray(a, dtype=float) for a in (ex2d, ey2d, hz2d)]
    for a in planes:
        if a.shape != (grid.nx, grid.ny):
            raise ops.SiteMismatch(f"2D field shape {a.shape} != {(grid.nx, grid.ny)}")
    ex, ey, hz = (np.repeat(a[:, :, None], grid.nz, axis=2) for a in planes)
    return MaxwellState(ex, ey, grid.zeros(), grid.zeros(), grid.zeros(), hz, grid=grid)


def discrete_omega(grid: StaggeredGrid3) -> float:
    """Frequency of the lowest x-mode that the Yee scheme propagates exactly.

    Solves ``sin(w dt/2)/dt = sin(k dx/2)/dx`` with ``k = 2 pi / Lx``.
    """
    k = 2.0 * math.pi / grid.length("x")
    s = grid.dt * math.sin(0.5 * k * grid.dx) / grid.dx
    return 2.0 * math.asin(s) / grid.dt


def plane_wave(grid: StaggeredGrid3, t: float, discrete: bool = False,
               staggered: bool = True) -> MaxwellState:
    """Unit-amplitude wave ``Ey = Hz = cos(k x - w t)`` travelling along +x.

    E is sampled at time ``t`` and, when ``staggered``, H at ``t - dt/2``.
    ``discrete`` selects the Yee dispersion frequency, which the scheme
    reproduces to rounding; otherwise ``w = k`` (the continuum solution).
    """
    if not grid.periodic:
        raise ValueError("plane_wave needs a periodic grid")
    k = 2.0 * math.pi / grid.length("x")
    w = discrete_omega(grid) if discrete else k
    th = t - 0.5 * grid.dt if staggered else t
    state = MaxwellState.zeros(grid)
    x_ey = grid.coords(site("ey").offset)[0]
    x_hz = grid.coords(site("hz").offset)[0]
    state.ey = np.broadcast_to(np.cos(k * x_ey - w * t), grid.shape).copy(order="F")
    state.hz = np.broadcast_to(np.cos(k * x_hz - w * th), grid.shape).copy(order="F")
    return state


# ---------------------------------------------------------------------------
# discrete 2-form


@dataclass
class VariationalPair:
    """Two perturbations, each given at consecutive states ``(lo, hi)``."""

    a: tuple[MaxwellState, MaxwellState]
    b: tuple[MaxwellState, MaxwellState]

    def __post_init__(self):
        grids = {s.grid for s in (*self.a, *self.b)}
        if len(grids) != 1:
            raise ops.SiteMismatch("variational pair spans several grids")


def discrete_two_form(pair: VariationalPair) -> float:
    """Totalized ``sum dZ_a^T M dZ_b`` with E at level n and H averaged to n.

    The magnetic slot carries the discrete curl of the averaged H, which moves
    it onto the electric sites; with this pairing the Yee leapfrog conserves the
    form exactly on a periodic grid.
    """
    g = pair.a[0].grid
    if not g.periodic:
        raise ValueError("the totalized 2-form is defined on periodic grids")
    M = build_structure_matrices().M

    def zvec(lo: MaxwellState, hi: MaxwellState):
        hbar = [0.5 * (getattr(lo, n) + getattr(hi, n)) for n in H_NAMES]
        return (*curl_h(g, *hbar), lo.ex, lo.ey, lo.ez)

    za, zb = zvec(*pair.a), zvec(*pair.b)
    total = 0.0
    for r in range(6):
        for c in range(6):
            if M[r, c] != 0.0:
                total += M[r, c] * ops.dot_h(za[r], zb[c], g.cell_volume)
    return total


def gaussian_pulse_z(grid: StaggeredGrid3, z0: float, width: float, t: float = 0.0) -> MaxwellState:
    """Pulse ``Ex = Hy = exp(-((z - z0 - t) / width)^2)`` travelling along +z.

    E is sampled at ``t`` and H at ``t - dt/2``, each at its own z offset.
    """
    if width <= 0:
        raise ValueError("pulse width must be positive")
    state = MaxwellState.zeros(grid)
    z_ex = grid.coords(site("ex").offset)[2]
    z_hy = grid.coords(site("hy").offset)[2]
    th = t - 0.5 * grid.dt
    state.ex = np.broadcast_to(np.exp(-((z_ex - z0 - t) / width) ** 2), grid.shape).copy(order="F")
    state.hy = np.broadcast_to(np.exp(-((z_hy - z0 - th) / width) ** 2), grid.shape).copy(order="F")
    grid.pin_pec({"ex": state.ex})
    return state


def random_state(grid: StaggeredGrid3, rng: np.random.Generator, amplitude: float = 1.0) -> MaxwellState:
    """Standard-normal data on every component, tangential E pinned on PEC planes."""
    state = MaxwellState(*(amplitude * rng.standard_normal(grid.shape) for _ in range(6)), grid=grid)
    grid.pin_pec({"ex": state.ex, "ey": state.ey, "ez": state.ez})
    return state


__all__ = [
    "MaxwellState", "StructureMatrices", "VariationalPair", "build_structure_matrices",
    "curl_rhs", "curl_e", "curl_h", "classical_yee_step", "residual_multisymplectic_form",
    "field_energy", "rate_energy", "te_mode_embed", "plane_wave", "discrete_omega",
    "discrete_two_form", "gaussian_pulse_z", "random_state",
]
