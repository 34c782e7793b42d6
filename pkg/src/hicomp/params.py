"""Model constants shared by the flow solver, the limit equation and the
measurement code."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysParams:
    """Physical parameters.

    alpha      exponent of the density-dependent viscosity mu(rho) = rho**alpha
    gamma      pressure exponent, P(rho) = rho**gamma
    epsilon    scaling of the pressure term (0 switches pressure off entirely)
    pme_coeff  diffusion normalization c in d_t rho = c * d_xx rho**alpha;
               defaults to 1/alpha, which is the normalization the flow
               solver's continuity equation reduces to
    """

    alpha: float
    gamma: float = 2.0
    epsilon: float = 1.0
    pme_coeff: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha > 1.0):
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if not (math.isfinite(self.gamma) and self.gamma > 1.0):
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        # epsilon = 0 is allowed: it is the exact limit system, used both as a
        # diagnostic (pressureless reduction) and in tests.
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.pme_coeff is None:
            object.__setattr__(self, "pme_coeff", 1.0 / self.alpha)
        if not (math.isfinite(self.pme_coeff) and self.pme_coeff > 0.0):
            raise ValueError(f"pme_coeff must be positive, got {self.pme_coeff}")
