"""Built-in invariant suite: quick seeded checks of the solver guarantees
(analytic oracle, contraction, comparison, maximum principle, conservation,
pressureless reduction)."""

from __future__ import annotations

import numpy as np

from .cns import cfl_dt, cns_solve_to, cns_step, well_prepared_init
from .grid import Field, Grid, integrate, lp_norm
from .params import PhysParams
from .pme import (
    CFL,
    PmeState,
    barenblatt_field,
    barenblatt_params,
    pme_solve_to,
    pme_step,
    stability_limit,
)

__all__ = ["random_compact_density", "pair_property_drifts", "run_validation"]


def random_compact_density(rng: np.random.Generator, grid: Grid,
                           max_height: float = 1.0) -> Field:
    """Sum of 1-3 random nonnegative parabolic bumps supported well inside
    the domain."""
    x = grid.centers
    span = grid.x_max - grid.x_min
    vals = np.zeros(grid.n_cells)
    for _ in range(int(rng.integers(1, 4))):
        center = rng.uniform(grid.x_min + 0.35 * span, grid.x_max - 0.35 * span)
        width = rng.uniform(0.05 * span, 0.15 * span)
        height = rng.uniform(0.2, 1.0) * max_height
        vals += height * np.maximum(1.0 - ((x - center) / width) ** 2, 0.0)
    if vals.max() > max_height:
        vals *= max_height / vals.max()
    return Field(grid, vals)


def pair_property_drifts(rho1: Field, rho2: Field, params: PhysParams,
                         t_end: float) -> tuple[float, float, float, float]:
    """Evolve two densities with a shared dt sequence and track the discrete
    structure: returns (contraction drift, comparison violation, max-principle
    violation, relative mass drift), each maximized over the whole run.

    The comparison number is only meaningful when rho1 <= rho2 initially.
    """
    s1 = PmeState(t=0.0, rho=rho1)
    s2 = PmeState(t=0.0, rho=rho2)
    dx = rho1.grid.dx
    pos_part = dx * float(np.maximum(s1.rho.values - s2.rho.values, 0.0).sum())
    max1 = float(s1.rho.values.max())
    mass1 = integrate(s1.rho)
    contraction = 0.0
    comparison = 0.0
    max_violation = 0.0
    while s1.t < t_end:
        dt = CFL * min(stability_limit(s1, params), stability_limit(s2, params))
        dt = min(dt, t_end - s1.t)
        s1 = pme_step(s1, params, dt)
        s2 = pme_step(s2, params, dt)
        new_pos = dx * float(np.maximum(s1.rho.values - s2.rho.values, 0.0).sum())
        contraction = max(contraction, new_pos - pos_part)
        pos_part = new_pos
        comparison = max(comparison, new_pos)
        max_violation = max(max_violation, float(s1.rho.values.max()) - max1)
    mass_drift = abs(integrate(s1.rho) - mass1) / mass1
    return contraction, comparison, max_violation, mass_drift


def run_validation(seed: int = 0, n_pairs: int = 4) -> list[tuple[str, bool, str]]:
    """Run every built-in check; returns (name, passed, detail) rows."""
    rows: list[tuple[str, bool, str]] = []
    rng = np.random.default_rng(seed)

    # analytic self-similar oracle
    grid = Grid(-8.0, 8.0, 1024)
    params2 = PhysParams(alpha=2.0, gamma=2.0, epsilon=0.0)
    bb = barenblatt_params(2.0, 1.0, params2.pme_coeff)
    state = PmeState(t=0.5, rho=barenblatt_field(bb, 0.5, grid))
    state = pme_solve_to(state, params2, 1.0)
    exact = barenblatt_field(bb, 1.0, grid)
    rel_l1 = lp_norm(Field(grid, state.rho.values - exact.values), 1) / lp_norm(exact, 1)
    rows.append(("barenblatt-oracle", rel_l1 <= 2e-2, f"rel L1 error {rel_l1:.2e}"))

    # monotone-scheme structure on seeded pairs
    small = Grid(-8.0, 8.0, 256)
    worst = [0.0, 0.0, 0.0, 0.0]
    for _ in range(n_pairs):
        alpha = float(rng.uniform(1.2, 2.2))
        params = PhysParams(alpha=alpha, gamma=2.0, epsilon=0.0)
        r1 = random_compact_density(rng, small)
        bump = random_compact_density(rng, small, max_height=0.5)
        r2 = Field(small, r1.values + bump.values)
        drifts = pair_property_drifts(r1, r2, params, t_end=0.05)
        worst = [max(w, d) for w, d in zip(worst, drifts)]
    rows.append(("l1-contraction", worst[0] <= 1e-10, f"max drift {worst[0]:.2e}"))
    rows.append(("comparison-principle", worst[1] <= 1e-10, f"max violation {worst[1]:.2e}"))
    rows.append(("max-principle", worst[2] <= 1e-12, f"max violation {worst[2]:.2e}"))
    rows.append(("pme-mass-conservation", worst[3] <= 1e-12, f"max rel drift {worst[3]:.2e}"))

    # flow solver conservation
    params = PhysParams(alpha=1.25, gamma=2.0, epsilon=1e-2)
    rho0 = random_compact_density(rng, small)
    cns = well_prepared_init(rho0, params)
    mass0 = integrate(cns.rho)
    cns, _ = cns_solve_to(cns, params, 0.05)
    drift = abs(integrate(cns.rho) - mass0) / mass0
    rows.append(("cns-mass-conservation", drift <= 1e-10, f"rel drift {drift:.2e}"))

    # pressureless reduction: flow density must equal the limit path exactly
    params0 = PhysParams(alpha=1.5, gamma=2.0, epsilon=0.0)
    rho0 = random_compact_density(rng, small)
    cns = well_prepared_init(rho0, params0)
    pme = PmeState(t=0.0, rho=cns.rho)
    identical = True
    for _ in range(200):
        dt = min(CFL * stability_limit(pme, params0), cfl_dt(cns, params0))
        cns = cns_step(cns, params0, dt)
        pme = pme_step(pme, params0, dt)
        if not np.array_equal(cns.rho.values, pme.rho.values):
            identical = False
            break
    rows.append(("pressureless-reduction", identical,
                 "bitwise equal for 200 steps" if identical else "paths diverged"))
    return rows
