"""Constitutive operators for the damaged Kelvin-Voigt material in 2-D.

Symmetric tensors are stored as trailing-axis component arrays ``[xx, yy, xy]``
(the off-diagonal entry once). All operators broadcast over leading axes so
they can be applied to one tensor or to a whole mesh at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# tau : sigma = xx*xx + yy*yy + 2*xy*xy
WEIGHTS = np.array([1.0, 1.0, 2.0])
IDENTITY = np.array([1.0, 1.0, 0.0])


@dataclass(frozen=True)
class SymTensor2:
    xx: float
    yy: float
    xy: float

    def __array__(self, dtype=None, copy=None):
        return np.array([self.xx, self.yy, self.xy], dtype=dtype)

    @classmethod
    def from_array(cls, a) -> "SymTensor2":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @property
    def norm(self) -> float:
        return float(norm(np.asarray(self)))

    @property
    def trace(self) -> float:
        return self.xx + self.yy


@dataclass(frozen=True)
class MaterialParams:
    visc_shear: float = 2.0
    visc_bulk: float = 2.0
    lame_mu: float = 4.0
    lame_lambda: float = 4.0
    kappa: float = 0.5
    # von Mises variant only; no values come with the reference experiments
    yield_sigma: float = 1.0
    eta: float = 1.0
    source_floor: float = 0.2
    source_scale: float = 2.0
    strain_weight: float = 20.0

    def __post_init__(self):
        for name in ("visc_shear", "visc_bulk", "lame_mu", "lame_lambda", "kappa"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.source_floor <= 1.0:
            raise ValueError("source_floor must lie in (0, 1]")

    @property
    def m_A(self) -> float:
        return 2.0 * self.visc_shear

    def viscosity_matrix(self) -> np.ndarray:
        """3x3 matrix of ``A`` acting on ``[xx, yy, xy]`` components."""
        return _isotropic_matrix(self.visc_shear, self.visc_bulk)

    def elasticity_matrix(self) -> np.ndarray:
        return _isotropic_matrix(self.lame_mu, self.lame_lambda)


def _isotropic_matrix(shear, bulk):
    return np.array([
        [2 * shear + bulk, bulk, 0.0],
        [bulk, 2 * shear + bulk, 0.0],
        [0.0, 0.0, 2 * shear],
    ])


def _components(tau):
    if isinstance(tau, SymTensor2):
        return np.asarray(tau), True
    return np.asarray(tau, dtype=float), False


def _wrap(result, scalar):
    return SymTensor2.from_array(result) if scalar else result


def trace(tau) -> np.ndarray:
    t, _ = _components(tau)
    return t[..., 0] + t[..., 1]


def inner(sigma, tau) -> np.ndarray:
    s, _ = _components(sigma)
    t, _ = _components(tau)
    return np.sum(s * t * WEIGHTS, axis=-1)


def norm(tau) -> np.ndarray:
    return np.sqrt(inner(tau, tau))


def deviator(tau):
    t, scalar = _components(tau)
    return _wrap(t - 0.5 * trace(t)[..., None] * IDENTITY, scalar)


def apply_viscosity_A(tau, params: MaterialParams):
    t, scalar = _components(tau)
    out = 2.0 * params.visc_shear * t + params.visc_bulk * trace(t)[..., None] * IDENTITY
    return _wrap(out, scalar)


def check_damage(zeta, tol=1e-12):
    z = np.asarray(zeta, dtype=float)
    if np.any(z < -tol) or np.any(z > 1.0 + tol):
        raise ValueError(f"damage value outside [0, 1]: min {z.min():.3e}, max {z.max():.3e}")
    return np.clip(z, 0.0, 1.0)


def apply_elasticity_B(tau, zeta, params: MaterialParams):
    """``zeta * (2 mu tau + lambda tr(tau) I)``."""
    t, scalar = _components(tau)
    z = check_damage(zeta)
    out = 2.0 * params.lame_mu * t + params.lame_lambda * trace(t)[..., None] * IDENTITY
    return _wrap(z[..., None] * out, scalar)


def damage_source(tau, zeta, params: MaterialParams | None = None):
    """Mechanical damage source ``2 (1 - z)/z - 20 |tau|^2``, frozen below ``z = 0.2``."""
    p = params or MaterialParams()
    t, _ = _components(tau)
    z = np.asarray(zeta, dtype=float)
    zc = np.maximum(z, p.source_floor)
    out = p.source_scale * (1.0 - zc) / zc - p.strain_weight * inner(t, t)
    return out if np.ndim(out) else float(out)


def project_von_mises(tau, zeta, params: MaterialParams):
    """Projection onto ``{tau : |dev tau| <= zeta * yield_sigma}``."""
    t, scalar = _components(tau)
    z = np.asarray(zeta, dtype=float)
    dev = t - 0.5 * trace(t)[..., None] * IDENTITY
    dn = norm(dev)
    radius = z * params.yield_sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(dn > radius, radius / np.where(dn > 0, dn, 1.0), 1.0)
    out = t - dev + scale[..., None] * dev
    return _wrap(out, scalar)


def apply_von_mises_B(tau, zeta, params: MaterialParams):
    """Elasticity operator ``eta * (tau - P_K(zeta) tau)``."""
    t, scalar = _components(tau)
    out = params.eta * (t - project_von_mises(t, check_damage(zeta), params))
    return _wrap(out, scalar)


ELASTICITY = {
    "linear": apply_elasticity_B,
    "von_mises": apply_von_mises_B,
}
