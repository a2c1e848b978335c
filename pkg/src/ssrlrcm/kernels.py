"""Isotropic similarity kernels and dense similarity-matrix assembly.

The Matérn family is normalised as

    W(h) = sigma2 / (2**(nu-1) * Gamma(nu)) * (h/ell)**nu * K_nu(h/ell)

i.e. *without* the sqrt(2 nu) factor inside the argument that many
Gaussian-process texts use. Under this convention nu=3/2 is
``sigma2 * (1 + h/ell) * exp(-h/ell)`` and nu=5/2 is
``sigma2 * (1 + h/ell + (h/ell)**2 / 3) * exp(-h/ell)``. Only the
half-integer closed forms and the nu -> inf (Gaussian) limit are provided.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionMismatch


class Family(enum.IntEnum):
    EXPONENTIAL = 0  # Matérn nu = 1/2
    MATERN32 = 1
    MATERN52 = 2
    GAUSSIAN = 3  # Matérn nu = inf
    RBF = 4  # Gaussian with the variance pinned to 1

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        aliases = {
            "exponential": cls.EXPONENTIAL,
            "matern12": cls.EXPONENTIAL,
            "matern32": cls.MATERN32,
            "matern1.5": cls.MATERN32,
            "matern52": cls.MATERN52,
            "matern2.5": cls.MATERN52,
            "gaussian": cls.GAUSSIAN,
            "rbf": cls.RBF,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown kernel family {name!r}") from None


@dataclass(frozen=True)
class KernelParams:
    family: Family = Family.RBF
    lengthscale: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if self.family is Family.RBF and self.variance != 1.0:
            raise ValueError("the RBF kernel has its variance fixed at 1")

    @property
    def nu(self):
        return {
            Family.EXPONENTIAL: 0.5,
            Family.MATERN32: 1.5,
            Family.MATERN52: 2.5,
            Family.GAUSSIAN: np.inf,
            Family.RBF: np.inf,
        }[self.family]

    def as_dict(self):
        return {"family": self.family.name.lower(), "lengthscale": self.lengthscale, "variance": self.variance}


def matern(nu, lengthscale=1.0, variance=1.0):
    """KernelParams for one of the supported smoothness values."""
    table = {0.5: Family.EXPONENTIAL, 1.5: Family.MATERN32, 2.5: Family.MATERN52, np.inf: Family.GAUSSIAN}
    if nu not in table:
        raise ValueError(f"only nu in {{1/2, 3/2, 5/2, inf}} is supported, got {nu}")
    return KernelParams(table[nu], lengthscale, variance)


def kernel_value(h, p):
    """Kernel evaluated at distance(s) ``h >= 0``; scalar in, scalar out."""
    arr = np.asarray(h, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("distances must be nonnegative")
    out = _backend.kernels.kernel_values(np.ascontiguousarray(arr.ravel()), int(p.family), p.lengthscale, p.variance)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _points(X):
    try:
        X = np.asarray(X, dtype=np.float64)
    except ValueError:
        raise DimensionMismatch("points have differing dimensions") from None
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatch(f"point set must be 2-D, got shape {X.shape}")
    return np.ascontiguousarray(X)


def similarity_matrix(X, p):
    """Dense symmetric ``n x n`` matrix ``w_ij = W(||x_i - x_j||_2)``."""
    X = _points(X)
    if X.shape[0] < 1:
        raise DimensionMismatch("need at least one point")
    return _backend.kernels.kernel_matrix(X, int(p.family), p.lengthscale, p.variance)


def kernel_block(XR, XC, p):
    """Rectangular block ``W(||xr_i - xc_j||)``."""
    XR, XC = _points(XR), _points(XC)
    if XR.shape[1] != XC.shape[1]:
        raise DimensionMismatch(f"row points have dimension {XR.shape[1]}, column points {XC.shape[1]}")
    return _backend.kernels.kernel_block(XR, XC, int(p.family), p.lengthscale, p.variance)
