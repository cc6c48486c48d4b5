"""Physical parameters shared by the linear and nonlinear solvers."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalParams:
    """Transport coefficients of the normalized fluid (C_v = R = 1).

    mu1: shear viscosity, mu2: second viscosity, kappa: heat conduction.
    """

    mu1: float = 1.0
    mu2: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if not self.mu1 > 0:
            raise ValueError(f"mu1 must be positive, got {self.mu1}")
        if not self.mu2 + 2.0 * self.mu1 / 3.0 >= 0:
            raise ValueError(f"need mu2 + 2 mu1 / 3 >= 0, got mu1={self.mu1}, mu2={self.mu2}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
