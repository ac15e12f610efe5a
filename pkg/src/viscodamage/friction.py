"""Friction pseudopotential ``j(xi) = bound * |xi|`` on the contact boundary."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# rho continuation used by the velocity solver
DEFAULT_RHO_SCHEDULE = tuple(10.0 ** -e for e in range(2, 9))


@dataclass(frozen=True)
class FrictionModel:
    bound: float = 20.0
    rho: float = 1e-2

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError(f"friction bound must be >= 0, got {self.bound}")
        if not self.rho > 0:
            raise ValueError(f"regularization rho must be > 0, got {self.rho}")

    def j_value(self, xi) -> np.ndarray:
        return self.bound * np.linalg.norm(np.asarray(xi, dtype=float), axis=-1)

    def j0_dir(self, xi, eta) -> np.ndarray:
        """Clarke derivative; equals the one-sided directional derivative for the norm."""
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        nxi = np.linalg.norm(xi, axis=-1)
        neta = np.linalg.norm(eta, axis=-1)
        safe = np.where(nxi > 0, nxi, 1.0)
        smooth = np.sum(xi * eta, axis=-1) / safe
        return self.bound * np.where(nxi > 0, smooth, neta)

    def j_reg(self, xi, rho: float | None = None):
        """Smoothed value ``bound (sqrt(|xi|^2 + rho^2) - rho)`` and its gradient."""
        rho = self.rho if rho is None else rho
        if not rho > 0:
            raise ValueError("rho must be > 0")
        xi = np.asarray(xi, dtype=float)
        r = np.sqrt(np.sum(xi * xi, axis=-1) + rho * rho)
        value = self.bound * (r - rho)
        grad = self.bound * xi / r[..., None]
        return value, grad

    # scalar tangential forms used on axis-aligned contact edges
    def reg_scalar(self, s, rho):
        """Value, first and second derivative of the smoothed ``bound*|s|``."""
        r = np.sqrt(s * s + rho * rho)
        return self.bound * (r - rho), self.bound * s / r, self.bound * rho * rho / r**3
