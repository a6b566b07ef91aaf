"""Symplectic Runge-Kutta time stepping of the split PML system.

The twelve subcomponents are stacked as
``U = (exy, exz, eyz, eyx, ezx, ezy, hxy, hxz, hyz, hyx, hzx, hzy)`` and evolve by
``dU/dt = -S U + P U``. Here ``S`` damps the z-split entries
``{exz, eyz, hxz, hyz}`` and ``P`` applies Yee differences of the parent sums.

Stages are solved by fixed-point iteration. The energy law is checked in the
parent metric ``|E|^2 + |H|^2`` of the summed fields, where ``P`` is
skew-adjoint, so only the damping produces a net change.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalDivergence
from .grid import SPLIT_NAMES, StaggeredGrid3
from .pml import PAIRS, SPLIT_RHS, PmlConfig, SplitState, _d

EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# tableaus


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    name: str
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape != (b.size, b.size):
            raise ValueError(f"tableau {self.name}: a is {a.shape}, b has {b.size} entries")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def c(self) -> np.ndarray:
        return self.a.sum(axis=1)

    @property
    def explicit(self) -> bool:
        return bool(np.all(np.triu(self.a) == 0.0))


def _gauss3() -> ButcherTableau:
    r = math.sqrt(15.0)
    a = [[5 / 36, 2 / 9 - r / 15, 5 / 36 - r / 30],
         [5 / 36 + r / 24, 2 / 9, 5 / 36 - r / 24],
         [5 / 36 + r / 30, 2 / 9 + r / 15, 5 / 36]]
    return ButcherTableau("gauss3", a, [5 / 18, 4 / 9, 5 / 18])


def _gauss2() -> ButcherTableau:
    r = math.sqrt(3.0)
    return ButcherTableau("gauss2", [[0.25, 0.25 - r / 6], [0.25 + r / 6, 0.25]], [0.5, 0.5])


TABLEAUS = {
    "midpoint": ButcherTableau("midpoint", [[0.5]], [1.0]),
    "gauss2": _gauss2(),
    "gauss3": _gauss3(),
    # explicit trapezoid: second order but not symplectic, used as a negative control
    "heun-nonsymplectic": ButcherTableau("heun-nonsymplectic", [[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5]),
}


def get_tableau(name: str) -> ButcherTableau:
    try:
        return TABLEAUS[name]
    except KeyError:
        raise ValueError(f"unknown tableau {name!r}; known: {sorted(TABLEAUS)}") from None


def symplectic_defect(t: ButcherTableau) -> np.ndarray:
    """Matrix ``b_m b_n - b_m a_mn - b_n a_nm``."""
    b, a = t.b, t.a
    return np.outer(b, b) - b[:, None] * a - (b[:, None] * a).T


def check_symplectic_conditions(t: ButcherTableau) -> float:
    return float(np.max(np.abs(symplectic_defect(t))))


def partitioned_defect(t1: ButcherTableau, t2: ButcherTableau) -> float:
    """Max of ``|b_m b2_n - b_m a2_mn - b2_n a_nm|`` and ``|b_m - b2_m|``."""
    if t1.stages != t2.stages:
        raise ValueError("partitioned pair needs equal stage counts")
    m = np.outer(t1.b, t2.b) - t1.b[:, None] * t2.a - (t2.b[:, None] * t1.a).T
    return float(max(np.max(np.abs(m)), np.max(np.abs(t1.b - t2.b))))


def lobatto_iiia_iiib() -> tuple[ButcherTableau, ButcherTableau]:
    """Two-stage Lobatto IIIA / IIIB pair (trapezoid / leapfrog)."""
    b = [0.5, 0.5]
    return (ButcherTableau("lobatto-iiia", [[0.0, 0.0], [0.5, 0.5]], b),
            ButcherTableau("lobatto-iiib", [[0.5, 0.0], [0.5, 0.0]], b))


def box_tableau() -> ButcherTableau:
    """One-stage box rule: what a centred staggered difference is along each axis."""
    return ButcherTableau("box", [[0.5]], [1.0])


@dataclass(frozen=True)
class AxisTableauSet:
    time: ButcherTableau
    x: ButcherTableau = field(default_factory=box_tableau)
    y: ButcherTableau = field(default_factory=box_tableau)
    z: ButcherTableau = field(default_factory=box_tableau)


def check_axis_conditions(s: AxisTableauSet) -> dict[str, float]:
    return {axis: check_symplectic_conditions(getattr(s, axis)) for axis in ("time", "x", "y", "z")}


# ---------------------------------------------------------------------------
# evolution operator on stacked states

INDEX = {n: i for i, n in enumerate(SPLIT_NAMES)}
PARENT_PAIRS = {p: (INDEX[a], INDEX[b]) for p, (a, b) in PAIRS.items()}
DAMPED = ("exz", "eyz", "hxz", "hyz")


def stack(state: SplitState) -> np.ndarray:
    return np.stack([state.sub[n] for n in SPLIT_NAMES])


def unstack(u: np.ndarray, grid: StaggeredGrid3, n: int = 0) -> SplitState:
    return SplitState.from_subcomponents({k: u[i] for k, i in INDEX.items()}, grid, n)


def parents(u: np.ndarray) -> dict[str, np.ndarray]:
    return {p: u[i] + u[j] for p, (i, j) in PARENT_PAIRS.items()}


class PmlOperator:
    """``-S U + P U`` for a z-only layer, with per-site conductivities."""

    def __init__(self, grid: StaggeredGrid3, cfg: PmlConfig):
        if not cfg.is_z_specialization:
            raise ValueError("the Runge-Kutta path supports a z-only layer with sigma_star == sigma")
        cfg.validate_for(grid)
        self.grid = grid
        self.cfg = cfg
        self.sigma = {n: cfg.sigma_of(grid, n) for n in SPLIT_NAMES}

    def coupling(self, u: np.ndarray) -> np.ndarray:
        g = self.grid
        par = parents(u)
        out = np.empty_like(u)
        for name, i in INDEX.items():
            sign, src, axis = SPLIT_RHS[name]
            d = _d(g, par[src], src, axis)
            out[i] = d if sign > 0 else -d
        return out

    def damping(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        for name in DAMPED:
            i = INDEX[name]
            out[i] = self.sigma[name] * u[i]
        return out

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.coupling(u) - self.damping(u)

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.sum(u * u) * self.grid.cell_volume))

    def parent_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        pu, pv = parents(u), parents(v)
        return sum(float(np.sum(pu[k] * pv[k])) for k in pu) * self.grid.cell_volume

    def dissipation(self, u: np.ndarray) -> float:
        """``(C U, C S U)`` in the parent metric."""
        return self.parent_inner(u, self.damping(u))


def apply_ptilde(state: SplitState, cfg: PmlConfig | None = None) -> SplitState:
    """Yee-difference coupling ``P U`` returned in split layout."""
    op = PmlOperator(state.grid, cfg or PmlConfig(0.0))
    return unstack(op.coupling(stack(state)), state.grid, state.n)


# ---------------------------------------------------------------------------
# stepping


@dataclass(frozen=True)
class StageSolveConfig:
    tolerance: float = 1e-13
    max_iterations: int = 200

    def __post_init__(self):
        if not (self.tolerance > 0 and math.isfinite(self.tolerance)):
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


class StageSolveError(RuntimeError):
    """Fixed-point stage iteration failed; usually the step is too large."""

    def __init__(self, message: str, last_residual: float, iterations: int):
        super().__init__(f"{message} (last residual {last_residual:.3e} after {iterations} iterations)")
        self.last_residual = last_residual
        self.iterations = iterations


@dataclass
class RKStep:
    u0: np.ndarray
    u1: np.ndarray
    stages: np.ndarray        # (s, 12, nx, ny, nz) stage values
    slopes: np.ndarray        # F evaluated at each stage
    iterations: int
    stage_residual: float     # max h-norm of the stage equations at the returned stages
    stage_scale: float

    def state(self, grid: StaggeredGrid3, n: int = 0) -> SplitState:
        return unstack(self.u1, grid, n)


def rk_step(u: SplitState | np.ndarray, tableau: ButcherTableau, op: PmlOperator,
            cfg: StageSolveConfig = StageSolveConfig()) -> RKStep:
    """One Runge-Kutta step with stages solved by fixed-point iteration.

    Iterates ``U_m <- u0 + dt sum_n a_mn F(U_n)`` until the update falls below
    ``tolerance * (|u0| + dt |F(u0)|)`` in the h-norm, or stops changing.
    """
    u0 = stack(u) if isinstance(u, SplitState) else np.asarray(u, dtype=float)
    dt = op.grid.dt
    s = tableau.stages
    a = tableau.a
    f0 = op(u0)
    scale = op.norm(u0) + dt * op.norm(f0)
    target = cfg.tolerance * scale

    stages = np.repeat(u0[None], s, axis=0)
    slopes = np.repeat(f0[None], s, axis=0)
    iterations = 0
    if tableau.explicit:
        for m in range(s):
            stages[m] = u0 + dt * np.tensordot(a[m, :m], slopes[:m], axes=1) if m else u0
            slopes[m] = op(stages[m])
        iterations = 1
    else:
        prev = math.inf
        while True:
            iterations += 1
            new = u0[None] + dt * np.tensordot(a, slopes, axes=1)
            change = max(op.norm(new[m] - stages[m]) for m in range(s))
            stages = new
            if not math.isfinite(change):
                raise StageSolveError("stage iteration produced non-finite values", change, iterations)
            slopes = np.stack([op(stages[m]) for m in range(s)])
            if change <= target or change == 0.0:
                break
            if iterations >= cfg.max_iterations:
                raise StageSolveError("stage iteration did not converge", change, iterations)
            if iterations > 20 and change > 1e3 * prev:
                raise StageSolveError("stage iteration diverges", change, iterations)
            prev = min(prev, change)

    residual = max(op.norm(stages[m] - u0 - dt * np.tensordot(a[m], slopes, axes=1))
                   for m in range(s))
    u1 = u0 + dt * np.tensordot(tableau.b, slopes, axes=1)
    if not np.all(np.isfinite(u1)):
        raise NumericalDivergence("non-finite Runge-Kutta update")
    return RKStep(u0, u1, stages, slopes, iterations, residual, scale)


@dataclass(frozen=True)
class RKEnergyLaw:
    residual: float          # parent-metric law: should vanish up to the stage error
    bound: float             # tolerance-propagated bound for a symplectic tableau
    energy_before: float
    energy_after: float
    dissipation: float       # 2 dt sum_m b_m (C U_m, C S U_m)
    split_residual: float    # same law in the plain 12-component metric, for comparison


def energy_law_residual(result: RKStep, tableau: ButcherTableau, op: PmlOperator,
                        tolerance: float | None = None) -> RKEnergyLaw:
    """Check ``|C u1|^2 - |C u0|^2 + 2 dt sum_m b_m (C U_m, C S U_m) = 0``.

    ``C`` maps subcomponents to their parent sums. The bound allows for stage
    equations satisfied only to ``tolerance * stage_scale``. It also adds a
    rounding allowance. The tableau's symplectic defect is deliberately
    excluded from it.
    """
    if result.stages.shape[0] != tableau.stages or result.slopes.shape[0] != tableau.stages:
        raise ValueError("recorded stages do not match the tableau")
    dt = op.grid.dt
    b = tableau.b
    q0 = op.parent_inner(result.u0, result.u0)
    q1 = op.parent_inner(result.u1, result.u1)
    diss = 2.0 * dt * sum(b[m] * op.dissipation(result.stages[m]) for m in range(tableau.stages))
    residual = q1 - q0 + diss

    tol = result.stage_residual if tolerance is None else max(tolerance * result.stage_scale,
                                                              result.stage_residual)
    slope_norms = [math.sqrt(max(op.parent_inner(k, k), 0.0)) for k in result.slopes]
    stage_term = 2.0 * dt * sum(abs(b[m]) * math.sqrt(2.0) * tol * slope_norms[m]
                                for m in range(tableau.stages))
    magnitude = q0 + q1 + abs(diss) + dt * sum(abs(b[m]) * slope_norms[m] ** 2
                                               for m in range(tableau.stages))
    bound = stage_term + 1e3 * EPS * magnitude

    e0 = float(np.sum(result.u0 ** 2)) * op.grid.cell_volume
    e1 = float(np.sum(result.u1 ** 2)) * op.grid.cell_volume
    split_diss = 2.0 * dt * sum(
        b[m] * float(np.sum(result.stages[m] * op.damping(result.stages[m]))) * op.grid.cell_volume
        for m in range(tableau.stages))
    return RKEnergyLaw(residual, bound, q0, q1, diss, e1 - e0 + split_diss)


class MsrkRun:
    """Repeated Runge-Kutta steps over a split state."""

    def __init__(self, initial: SplitState, tableau: ButcherTableau | str, cfg: PmlConfig,
                 solve: StageSolveConfig = StageSolveConfig()):
        self.tableau = get_tableau(tableau) if isinstance(tableau, str) else tableau
        self.op = PmlOperator(initial.grid, cfg)
        self.solve = solve
        self.u = stack(initial)
        self.n = initial.n
        self.last: RKStep | None = None

    def step(self) -> RKEnergyLaw:
        self.last = rk_step(self.u, self.tableau, self.op, self.solve)
        self.u = self.last.u1
        self.n += 1
        return energy_law_residual(self.last, self.tableau, self.op, self.solve.tolerance)

    @property
    def state(self) -> SplitState:
        return unstack(self.u, self.op.grid, self.n)
