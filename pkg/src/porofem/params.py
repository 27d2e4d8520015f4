"""Physical and discretization parameters for the poroelastic model."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalParams:
    """Material and time-stepping constants.

    lam, mu    Lame parameters of the drained skeleton
    alpha      Biot-Willis coupling coefficient
    M          Biot modulus
    K          scalar permeability (kappa = K * identity)
    tau        backward-Euler time step
    """

    lam: float
    mu: float
    alpha: float
    M: float
    K: float
    tau: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"shear modulus must be positive, got {self.mu}")
        if self.lam < 0.0:
            raise ValueError(f"first Lame parameter must be nonnegative, got {self.lam}")
        if self.M <= 0.0:
            raise ValueError(f"Biot modulus must be positive, got {self.M}")
        if self.K <= 0.0:
            raise ValueError(f"permeability must be positive, got {self.K}")
        if self.tau <= 0.0:
            raise ValueError(f"time step must be positive, got {self.tau}")

    @classmethod
    def from_young_poisson(
        cls, E: float, nu: float, *, alpha: float, M: float, K: float, tau: float
    ) -> "PhysicalParams":
        """Build from Young modulus / Poisson ratio.

        Uses the benchmark convention mu = E / (1 + 2 nu) together with the
        standard lam = E nu / ((1 - 2 nu)(1 + nu)); all iteration-count and
        error tables in this package assume exactly this parameterization.
        """
        if not 0.0 <= nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
        if E <= 0.0:
            raise ValueError(f"Young modulus must be positive, got {E}")
        lam = E * nu / ((1.0 - 2.0 * nu) * (1.0 + nu))
        mu = E / (1.0 + 2.0 * nu)
        return cls(lam=lam, mu=mu, alpha=alpha, M=M, K=K, tau=tau)

    @property
    def zeta(self) -> float:
        """Elastic scaling sqrt(lam + 2 mu / d) in d = 2 space dimensions."""
        return math.sqrt(self.lam + self.mu)

    @property
    def delta(self) -> float:
        """Storage-like coefficient alpha^2 / zeta^2 + 1/M used by the preconditioners."""
        return self.alpha**2 / (self.lam + self.mu) + 1.0 / self.M
