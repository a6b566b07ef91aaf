"""Discrete calculus on the staggered lattice.

Staggered first differences, time differences and averages, the damped
time difference ``D_sigma = D_t + sigma * average``, the cell-weighted scalar
product, and numerical checks of the summation-by-parts, time-product and
commutation identities the energy proofs rely on.

The array kernels (:func:`diff`, :func:`damped_update`) are what the solvers
call; the :class:`FieldSlice` layer adds site bookkeeping on top.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import AXIS_INDEX, StaggeredGrid3


class SiteMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# array kernels


def diff(values: np.ndarray, axis: str, h: float, from_half: bool) -> np.ndarray:
    """Centered staggered difference along ``axis`` with periodic wrap.

    Data at half offsets lands on integer offsets (``out[i] = u[i] - u[i-1]``)
    and integer data lands on half offsets (``out[i] = u[i+1] - u[i]``).
    """
    a = AXIS_INDEX[axis]
    if from_half:
        return (values - np.roll(values, 1, axis=a)) / h
    return (np.roll(values, -1, axis=a) - values) / h


def damped_update(old, rhs, sigma, dt):
    """Solve ``(new - old)/dt + sigma (new + old)/2 = rhs`` for ``new``."""
    return ((1.0 - 0.5 * sigma * dt) * old + dt * rhs) / (1.0 + 0.5 * sigma * dt)


def damped_revert(new, rhs, sigma, dt):
    """Inverse of :func:`damped_update`: recover ``old`` from ``new``."""
    return ((1.0 + 0.5 * sigma * dt) * new - dt * rhs) / (1.0 - 0.5 * sigma * dt)


def dot_h(u: np.ndarray, v: np.ndarray, volume: float) -> float:
    if u.shape != v.shape:
        raise SiteMismatch(f"shape mismatch {u.shape} vs {v.shape}")
    return float(np.sum(u * v)) * volume


# ---------------------------------------------------------------------------
# site-aware layer


@dataclass(frozen=True, eq=False)
class FieldSlice:
    values: np.ndarray
    offset: tuple[int, int, int]
    grid: StaggeredGrid3

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise SiteMismatch(
                f"field of shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "offset", tuple(int(o) for o in self.offset))

    def like(self, values, offset=None) -> "FieldSlice":
        return FieldSlice(values, self.offset if offset is None else offset, self.grid)


@dataclass(frozen=True, eq=False)
class TimePair:
    """One field at two adjacent time levels, ``lo`` earlier than ``hi``."""

    lo: FieldSlice
    hi: FieldSlice

    def __post_init__(self):
        _check_same_site(self.lo, self.hi)


def _check_same_site(u: FieldSlice, v: FieldSlice) -> None:
    if u.grid != v.grid:
        raise SiteMismatch("fields live on different grids")
    if u.offset != v.offset:
        raise SiteMismatch(f"site mismatch {u.offset} vs {v.offset}")


def d_time(p: TimePair) -> FieldSlice:
    return p.lo.like((p.hi.values - p.lo.values) / p.lo.grid.dt)


def avg_time(p: TimePair) -> FieldSlice:
    return p.lo.like(0.5 * (p.hi.values + p.lo.values))


def _check_sigma(sigma):
    s = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("sigma must be finite")
    if np.any(s < 0.0):
        raise ValueError("sigma must be non-negative (it is a conductivity)")
    return sigma


def d_sigma_time(p: TimePair, sigma) -> FieldSlice:
    _check_sigma(sigma)
    return p.lo.like(d_time(p).values + sigma * avg_time(p).values)


def d_space(u: FieldSlice, axis: str, expect_offset=None) -> FieldSlice:
    """Staggered difference along ``axis``; the output sits on the flipped offset."""
    a = AXIS_INDEX[axis]
    out_offset = list(u.offset)
    out_offset[a] = 1 - out_offset[a]
    out_offset = tuple(out_offset)
    if expect_offset is not None and tuple(expect_offset) != out_offset:
        raise SiteMismatch(
            f"difference along {axis} of a field at {u.offset} lands on {out_offset}, "
            f"not {tuple(expect_offset)}")
    values = diff(u.values, axis, u.grid.h(axis), from_half=bool(u.offset[a]))
    return u.like(values, out_offset)


def inner_h(u: FieldSlice, v: FieldSlice) -> float:
    _check_same_site(u, v)
    return dot_h(u.values, v.values, u.grid.cell_volume)


def norm_h(u: FieldSlice) -> float:
    return float(np.sqrt(inner_h(u, u)))


# ---------------------------------------------------------------------------
# identity checks


def _require_periodic(grid: StaggeredGrid3) -> None:
    if not grid.periodic:
        raise ValueError("discrete identities are only checked on periodic grids")


def verify_summation_by_parts(axis: str, u: FieldSlice, v: FieldSlice) -> float:
    """``|(D u, v) + (u, D v)|`` for ``u``, ``v`` on complementary staggers."""
    _require_periodic(u.grid)
    a = AXIS_INDEX[axis]
    if u.offset[a] == v.offset[a] or any(
            u.offset[b] != v.offset[b] for b in range(3) if b != a):
        raise SiteMismatch(f"u and v must be complementary along {axis} only")
    return abs(inner_h(d_space(u, axis), v) + inner_h(u, d_space(v, axis)))


def sbp_scale(u: FieldSlice, v: FieldSlice) -> float:
    return norm_h(u) * norm_h(v) + 1.0


def verify_time_product_identity(p: TimePair) -> float:
    """Compare ``(D_t U, (U0 + U1)/2)`` with ``(|U1|^2 - |U0|^2) / (2 dt)``."""
    dt = p.lo.grid.dt
    lhs = inner_h(d_time(p), avg_time(p))
    rhs = (inner_h(p.hi, p.hi) - inner_h(p.lo, p.lo)) / (2.0 * dt)
    return abs(lhs - rhs)


def time_product_scale(p: TimePair) -> float:
    return (inner_h(p.hi, p.hi) + inner_h(p.lo, p.lo)) / p.lo.grid.dt + 1.0


def verify_commutation(sigma, axis: str, p: TimePair) -> float:
    """Max-norm of ``D_sigma D_axis U - D_axis D_sigma U`` over a time pair."""
    _check_sigma(sigma)
    spatial_first = d_sigma_time(TimePair(d_space(p.lo, axis), d_space(p.hi, axis)), sigma)
    damped_first = d_space(d_sigma_time(p, sigma), axis)
    return float(np.max(np.abs(spatial_first.values - damped_first.values)))


def verify_time_commutation(sigma, levels) -> float:
    """Max-norm of ``D_sigma D_t U - D_t D_sigma U`` over three consecutive levels."""
    _check_sigma(sigma)
    u0, u1, u2 = levels
    a, b = TimePair(u0, u1), TimePair(u1, u2)
    dt_first = d_sigma_time(TimePair(d_time(a), d_time(b)), sigma)
    damped_first = d_time(TimePair(d_sigma_time(a, sigma), d_sigma_time(b, sigma)))
    return float(np.max(np.abs(dt_first.values - damped_first.values)))


def commutation_scale(sigma, p: TimePair, axis: str) -> float:
    g = p.lo.grid
    amp = max(float(np.max(np.abs(p.lo.values))), float(np.max(np.abs(p.hi.values))))
    return amp * (2.0 / g.dt + float(np.max(sigma))) * (2.0 / g.h(axis)) + 1.0
