"""1D compressible flow with degenerate viscosity rho**alpha, solved in the
effective-velocity variables (rho, rho*v):

    d_t rho - (1/alpha) d_xx rho**alpha + d_x(rho v) = 0
    d_t(rho v) + d_x(rho u v) + eps * d_x rho**gamma = 0
    u = v - d_x phi(rho),  phi'(rho) = rho**(alpha-2)

The parabolic term in the continuity equation is the system's own
regularization, so no degenerate viscous stress has to be discretized near
vacuum.  Advective fluxes are first-order upwind, diffusion and the
pressure source are second-order central; the continuity diffusion reuses
the limit solver's flux routine so the eps = 0, v = 0 reduction is exact at
the bit level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import Field, check_support_margin, derivative, _fmt
from .params import PhysParams
from .pme import diffusive_face_flux

__all__ = [
    "CnsState",
    "well_prepared_init",
    "init_with_velocity",
    "velocity",
    "dx_phi",
    "recover_u",
    "advective_face_flux",
    "cfl_dt",
    "cns_step",
    "cns_solve_to",
    "write_cns_snapshot",
]

CFL = 0.4
DEFAULT_FLOOR_FRAC = 1e-10


@dataclass(frozen=True)
class CnsState:
    """Density (kept above a small positive floor) and effective momentum
    rho*v at time t.  floored_mass accumulates the mass added whenever the
    update dips below the floor and is clipped back."""

    t: float
    rho: Field
    momentum_v: Field
    rho_floor: float
    floored_mass: float = 0.0

    def __post_init__(self) -> None:
        if self.rho.grid != self.momentum_v.grid:
            raise ValueError("rho and momentum_v must share a grid")
        if not self.rho_floor > 0.0:
            raise ValueError("rho_floor must be positive")
        if float(self.rho.values.min()) < self.rho_floor * (1.0 - 1e-12):
            raise ValueError("density below the vacuum floor")


def well_prepared_init(rho0: Field, params: PhysParams,
                       floor_frac: float = DEFAULT_FLOOR_FRAC) -> CnsState:
    """State with v = 0, i.e. initial velocity u0 = -d_x phi(rho0).

    The initial momentum then cancels the density-gradient part exactly,
    which is the preparation that makes the effective momentum stay small
    uniformly in eps.
    """
    return init_with_velocity(rho0, None, params, floor_frac)


def init_with_velocity(rho0: Field, v0: Field | None, params: PhysParams,
                       floor_frac: float = DEFAULT_FLOOR_FRAC) -> CnsState:
    if float(rho0.values.min()) < 0.0:
        raise ValueError("initial density must be nonnegative")
    rho_max = float(rho0.values.max())
    if rho_max <= 0.0:
        raise ValueError("initial density is identically zero")
    floor = floor_frac * rho_max
    check_support_margin(rho0.values, rho0.grid, lo=floor, strict=True)
    rho = Field(rho0.grid, np.maximum(rho0.values, floor))
    if v0 is None:
        mom = np.zeros(rho0.grid.n_cells)
    else:
        if v0.grid != rho0.grid:
            raise ValueError("v0 must live on the same grid as rho0")
        mom = rho.values * v0.values
    return CnsState(t=0.0, rho=rho, momentum_v=Field(rho0.grid, mom),
                    rho_floor=floor)


def velocity(state: CnsState) -> Field:
    """Effective velocity v = momentum / rho, set to 0 on floor cells."""
    rho = state.rho.values
    v = np.where(rho > state.rho_floor, state.momentum_v.values / rho, 0.0)
    return Field(state.rho.grid, v)


def dx_phi(state: CnsState, params: PhysParams) -> Field:
    """d_x phi(rho) computed as d_x(rho**(alpha-1)) / (alpha-1).

    Equivalent to rho**(alpha-2) d_x rho but stays bounded where rho
    degenerates, because rho**(alpha-1) -> 0 there.
    """
    a = params.alpha
    powered = Field(state.rho.grid, state.rho.values ** (a - 1.0))
    return Field(state.rho.grid, derivative(powered).values / (a - 1.0))


def recover_u(state: CnsState, params: PhysParams) -> Field:
    """Physical velocity u = v - d_x phi(rho)."""
    return Field(state.rho.grid,
                 velocity(state).values - dx_phi(state, params).values)


def advective_face_flux(q: np.ndarray, vel: np.ndarray) -> np.ndarray:
    """Upwind face flux of the cell quantity q, with the upwind side chosen
    by the sign of the face-averaged velocity; zero at the domain faces."""
    flux = np.zeros(q.size + 1)
    vface = 0.5 * (vel[:-1] + vel[1:])
    flux[1:-1] = np.where(vface >= 0.0, q[:-1], q[1:])
    return flux


def cfl_dt(state: CnsState, params: PhysParams) -> float:
    """Step size 0.4 * min(diffusive, advective, pressure-wave candidates)."""
    grid = state.rho.grid
    dx = grid.dx
    rho = state.rho.values
    rho_max = float(rho.max())
    diff_cand = dx * dx * params.alpha / (2.0 * rho_max ** (params.alpha - 1.0))
    v = velocity(state).values
    u = v - dx_phi(state, params).values
    speed = max(float(np.abs(u).max()), float(np.abs(v).max()), 1e-14)
    adv_cand = dx / speed
    wave = math.sqrt(params.epsilon * params.gamma
                     * rho_max ** (params.gamma - 1.0))
    wave_cand = dx / wave if wave > 0.0 else math.inf
    return CFL * min(diff_cand, adv_cand, wave_cand)


def cns_step(state: CnsState, params: PhysParams, dt: float) -> CnsState:
    """One explicit conservative update of both equations at the same time
    level.  Mass is conserved exactly by the flux form; re-flooring adds
    back a logged (tiny) amount."""
    if dt > cfl_dt(state, params) * (1.0 + 1e-9):
        raise ValueError(f"dt={dt} exceeds the CFL step")
    grid = state.rho.grid
    dx = grid.dx
    rho = state.rho.values
    mom = state.momentum_v.values
    v = velocity(state).values
    u = v - dx_phi(state, params).values
    w = rho ** params.alpha

    # continuity: upwind transport of rho*v plus the density diffusion
    flux_rho = advective_face_flux(mom, v) + diffusive_face_flux(w, dx, 1.0 / params.alpha)
    rho_new = rho - (dt / dx) * np.diff(flux_rho)

    # effective momentum: upwind transport of rho*u*v, central pressure source
    flux_mom = advective_face_flux(mom * u, u)
    pressure_grad = derivative(Field(grid, rho ** params.gamma)).values
    mom_new = mom - (dt / dx) * np.diff(flux_mom) - dt * params.epsilon * pressure_grad

    floored = state.floored_mass
    low = float(rho_new.min())
    if low < -1000.0 * state.rho_floor:
        raise RuntimeError(
            f"density went negative ({low}) at t={state.t}; the run is unstable"
        )
    if low < state.rho_floor:
        deficit = np.maximum(state.rho_floor - rho_new, 0.0)
        floored += dx * float(deficit.sum())
        rho_new = np.maximum(rho_new, state.rho_floor)

    return CnsState(t=state.t + dt, rho=Field(grid, rho_new),
                    momentum_v=Field(grid, mom_new),
                    rho_floor=state.rho_floor, floored_mass=floored)


def cns_solve_to(state: CnsState, params: PhysParams, t_end: float,
                 snapshot_times: tuple[float, ...] = (),
                 on_step=None) -> tuple[CnsState, list[CnsState]]:
    """Advance to t_end with adaptive CFL steps, landing exactly on every
    snapshot time and on t_end.  on_step(state, dt) is called after each
    accepted step."""
    if t_end < state.t:
        raise ValueError(f"t_end={t_end} is before state.t={state.t}")
    targets = sorted(set(snapshot_times) | {t_end})
    if targets and (targets[0] < state.t or targets[-1] > t_end):
        raise ValueError("snapshot times must lie within [state.t, t_end]")
    snapshots: list[CnsState] = []
    for target in targets:
        if target == state.t:
            if target in snapshot_times:
                snapshots.append(state)
            continue
        while state.t < target:
            dt = cfl_dt(state, params)
            remaining = target - state.t
            last = dt >= remaining
            new = cns_step(state, params, min(dt, remaining))
            state = replace(new, t=target) if last else new
            vals = state.rho.values
            check_support_margin(vals, state.rho.grid,
                                 lo=1e-6 * float(vals.max()))
            if on_step is not None:
                on_step(state, min(dt, remaining))
        if target in snapshot_times:
            snapshots.append(state)
    return state, snapshots


def write_cns_snapshot(state: CnsState, params: PhysParams, path,
                       extra_comments: tuple[str, ...] = ()) -> None:
    v = velocity(state)
    u = recover_u(state, params)
    with open(path, "w") as fh:
        fh.write(f"# t={_fmt(state.t)}\n")
        fh.write(f"# alpha={_fmt(params.alpha)} gamma={_fmt(params.gamma)} "
                 f"epsilon={_fmt(params.epsilon)} pme_coeff={_fmt(params.pme_coeff)}\n")
        for line in extra_comments:
            fh.write(f"# {line}\n")
        fh.write("x,rho,v,u\n")
        for x, r, vv, uu in zip(state.rho.grid.centers, state.rho.values,
                                v.values, u.values):
            fh.write(f"{_fmt(x)},{_fmt(r)},{_fmt(vv)},{_fmt(uu)}\n")
