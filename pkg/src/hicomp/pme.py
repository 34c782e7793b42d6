"""Explicit conservative finite-volume solver for the degenerate diffusion
equation d_t rho = c * d_xx rho**alpha, plus the self-similar analytic
solution used as an oracle and the interface tracker.

The scheme differences rho**alpha directly in flux form with zero-flux
boundary faces.  At CFL 0.4 the one-step map is monotone, so mass
conservation, the comparison principle, the maximum principle and L1
contraction all hold at the discrete level (the last two only when two
states are advanced with a shared dt sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize as sp_optimize

from .grid import Field, Grid, check_support_margin, _fmt
from .params import PhysParams

__all__ = [
    "PmeState",
    "BarenblattParams",
    "barenblatt_params",
    "barenblatt_eval",
    "barenblatt_field",
    "diffusive_face_flux",
    "stability_limit",
    "pme_step",
    "pme_solve_to",
    "evolve_pair",
    "pme_pressure",
    "interface_positions",
    "write_pme_snapshot",
]

CFL = 0.4


@dataclass(frozen=True)
class PmeState:
    """Nonnegative density at time t; clipped_mass accumulates the (tiny)
    mass added when round-off undershoots are clipped back to zero."""

    t: float
    rho: Field
    clipped_mass: float = 0.0

    def __post_init__(self) -> None:
        if float(self.rho.values.min()) < 0.0:
            raise ValueError("density must be nonnegative")


# ---------------------------------------------------------------------------
# Self-similar solution


@dataclass(frozen=True)
class BarenblattParams:
    """Parameters of the compactly supported self-similar solution
    rho(t, x) = s**(-1/(alpha+1)) * (C - kappa*xi**2)_+**(1/(alpha-1)),
    xi = x * s**(-1/(alpha+1)), s = pme_coeff * t."""

    alpha: float
    mass: float
    kappa: float
    c_const: float
    pme_coeff: float


def _profile_mass(c_const: float, alpha: float, kappa: float) -> float:
    """Integral of (C - kappa*xi^2)_+^{1/(alpha-1)} over the line."""
    edge = math.sqrt(c_const / kappa)
    p = 1.0 / (alpha - 1.0)

    def f(xi):
        return max(c_const - kappa * xi * xi, 0.0) ** p

    val, _ = sp_integrate.quad(f, -edge, edge, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def barenblatt_params(alpha: float, mass: float,
                      pme_coeff: float | None = None) -> BarenblattParams:
    """Fix the free constant C so the profile carries the requested mass.

    The map C -> mass is strictly increasing, so a bracketed root search on
    [1e-8, 1e8] is unconditionally safe.
    """
    if not alpha > 1.0:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if not mass > 0.0:
        raise ValueError(f"mass must be positive, got {mass}")
    if pme_coeff is None:
        pme_coeff = 1.0 / alpha
    kappa = (alpha - 1.0) / (2.0 * alpha * (alpha + 1.0))

    def g(c):
        return _profile_mass(c, alpha, kappa) - mass

    lo, hi = 1e-8, 1e8
    if not (g(lo) < 0.0 < g(hi)):
        raise ValueError(
            f"mass {mass} cannot be bracketed by C in [{lo}, {hi}]"
        )
    c_const = sp_optimize.brentq(g, lo, hi, rtol=1e-14, maxiter=200)
    return BarenblattParams(alpha=alpha, mass=mass, kappa=kappa,
                            c_const=float(c_const), pme_coeff=pme_coeff)


def barenblatt_eval(p: BarenblattParams, t: float, x) -> float | np.ndarray:
    """Evaluate the self-similar solution at physical time t > 0.

    Both the prefactor and the argument carry the exponent -1/(alpha+1) in
    rescaled time s = pme_coeff * t, which is the mass-conserving form.
    """
    if not t > 0.0:
        raise ValueError(f"self-similar solution needs t > 0, got {t}")
    s = p.pme_coeff * t
    lam = s ** (-1.0 / (p.alpha + 1.0))
    xi = np.asarray(x, dtype=float) * lam
    prof = np.maximum(p.c_const - p.kappa * xi * xi, 0.0) ** (1.0 / (p.alpha - 1.0))
    out = lam * prof
    return float(out) if np.isscalar(x) else out


def barenblatt_field(p: BarenblattParams, t: float, grid: Grid) -> Field:
    return Field(grid, barenblatt_eval(p, t, grid.centers))


# ---------------------------------------------------------------------------
# Explicit conservative stepping


def diffusive_face_flux(w: np.ndarray, dx: float, coeff: float) -> np.ndarray:
    """Face fluxes -coeff * dw/dx with zero flux at the two domain faces.

    Shared by the flow solver so that its pressureless limit reproduces this
    scheme bit for bit.
    """
    flux = np.zeros(w.size + 1)
    flux[1:-1] = -coeff * (w[1:] - w[:-1]) / dx
    return flux


def stability_limit(state: PmeState, params: PhysParams) -> float:
    """Largest stable explicit step, dx^2 / (2 c alpha max(rho)^(alpha-1))."""
    rho_max = float(state.rho.values.max())
    if rho_max <= 0.0:
        return math.inf
    dx = state.rho.grid.dx
    return dx * dx / (2.0 * params.pme_coeff * params.alpha
                      * rho_max ** (params.alpha - 1.0))


def pme_step(state: PmeState, params: PhysParams, dt: float) -> PmeState:
    """One explicit conservative update of size dt <= stability limit."""
    limit = stability_limit(state, params)
    if dt > limit * (1.0 + 1e-9):
        raise ValueError(f"dt={dt} exceeds the stability limit {limit}")
    grid = state.rho.grid
    rho = state.rho.values
    w = rho ** params.alpha
    flux = diffusive_face_flux(w, grid.dx, params.pme_coeff)
    rho_new = rho - (dt / grid.dx) * np.diff(flux)
    clipped = state.clipped_mass
    if float(rho_new.min()) < 0.0:
        neg = np.minimum(rho_new, 0.0)
        clipped -= grid.dx * float(neg.sum())
        rho_new = np.maximum(rho_new, 0.0)
    return PmeState(t=state.t + dt, rho=Field(grid, rho_new), clipped_mass=clipped)


def pme_solve_to(state: PmeState, params: PhysParams, t_end: float,
                 dt_max: float | None = None) -> PmeState:
    """Advance to t_end with dt = CFL * stability limit, landing exactly.

    dt_max caps every step; passing the same cap to two runs on the same
    grid makes their step sequences identical, which is what the discrete
    comparison and contraction properties require.
    """
    if t_end < state.t:
        raise ValueError(f"t_end={t_end} is before state.t={state.t}")
    if t_end == state.t:
        return state
    while state.t < t_end:
        dt = CFL * stability_limit(state, params)
        if dt_max is not None:
            dt = min(dt, dt_max)
        remaining = t_end - state.t
        last = dt >= remaining
        new = pme_step(state, params, min(dt, remaining))
        state = replace(new, t=t_end) if last else new
        vals = state.rho.values
        check_support_margin(vals, state.rho.grid, lo=1e-6 * float(vals.max()))
    return state


def evolve_pair(s1: PmeState, s2: PmeState, params: PhysParams,
                t_end: float) -> tuple[PmeState, PmeState]:
    """Advance two states on the same grid with a shared dt sequence."""
    if s1.rho.grid != s2.rho.grid:
        raise ValueError("paired states must share a grid")
    if s1.t != s2.t:
        raise ValueError("paired states must share a time")
    while s1.t < t_end:
        dt = CFL * min(stability_limit(s1, params), stability_limit(s2, params))
        remaining = t_end - s1.t
        last = dt >= remaining
        dt = min(dt, remaining)
        n1, n2 = pme_step(s1, params, dt), pme_step(s2, params, dt)
        if last:
            n1, n2 = replace(n1, t=t_end), replace(n2, t=t_end)
        s1, s2 = n1, n2
    return s1, s2


# ---------------------------------------------------------------------------
# Derived quantities


def pme_pressure(state: PmeState, params: PhysParams) -> Field:
    """Pressure variable alpha/(alpha-1) * rho**(alpha-1)."""
    a = params.alpha
    return Field(state.rho.grid, a / (a - 1.0) * state.rho.values ** (a - 1.0))


def interface_positions(state: PmeState, threshold: float = 1e-6) -> tuple[float, float]:
    """Left and right support edges, located where the density first exceeds
    threshold * max(rho), widened by half a cell on each side."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    vals = state.rho.values
    vmax = float(vals.max())
    if vmax <= 0.0:
        raise ValueError("field has no support above the threshold")
    idx = np.nonzero(vals > threshold * vmax)[0]
    grid = state.rho.grid
    centers = grid.centers
    half = grid.dx / 2.0
    return float(centers[idx[0]] - half), float(centers[idx[-1]] + half)


def write_pme_snapshot(state: PmeState, params: PhysParams, path,
                       extra_comments: tuple[str, ...] = ()) -> None:
    pressure = pme_pressure(state, params)
    with open(path, "w") as fh:
        fh.write(f"# t={_fmt(state.t)}\n")
        for line in extra_comments:
            fh.write(f"# {line}\n")
        fh.write("x,rho,pressure\n")
        for x, r, p in zip(state.rho.grid.centers, state.rho.values, pressure.values):
            fh.write(f"{_fmt(x)},{_fmt(r)},{_fmt(p)}\n")
