"""Run parameters shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Params:
    """Physical and truncation parameters.

    epsilon : Rossby number, in (0, 1].
    nu      : vertical viscosity, in (0, 1].
    beta    : surface stress amplitude, >= 0.
    N       : horizontal wavenumber cutoff, >= 1.
    M0      : finite set of forcing frequencies mu.
    """

    epsilon: float
    nu: float
    beta: float = 0.0
    N: int = 4
    M0: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not (0.0 < self.nu <= 1.0):
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        object.__setattr__(self, "M0", tuple(float(m) for m in self.M0))

    @property
    def eps_nu(self) -> float:
        """Product epsilon*nu, the squared Ekman layer thickness."""
        return self.epsilon * self.nu

    @property
    def layer_scale(self) -> float:
        """Classical layer thickness sqrt(epsilon*nu)."""
        return (self.epsilon * self.nu) ** 0.5

    @property
    def nu_prime(self) -> float:
        """Vertical diffusion coefficient of the eigenbasis, pi^2 * nu."""
        import math

        return math.pi ** 2 * self.nu
