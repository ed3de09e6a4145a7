"""The nonlinearity ``lam |u| u`` and its harmonic split along the profile phase."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .final_data import FinalState
from .profile import ProfileParams, local_profile
from .spectral import RealField


def n_values(u: np.ndarray, lam: float) -> np.ndarray:
    return lam * np.abs(u) * u


def apply_n(u: RealField, lam: float) -> RealField:
    return RealField(u.grid, n_values(u.values, lam))


@dataclass(frozen=True)
class QuadraticNonlinearity:
    """``F(u) = c_even u^2 + c_odd |u| u``, any real degree-2 homogeneous map."""

    c_even: float
    c_odd: float

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.c_even * u * u + self.c_odd * np.abs(u) * u


def split_quadratic(f_plus: float, f_minus: float) -> QuadraticNonlinearity:
    """Recover the even/odd coefficients from ``F(1)`` and ``F(-1)``."""
    return QuadraticNonlinearity(0.5 * (f_plus + f_minus), 0.5 * (f_plus - f_minus))


def resonant_part(fs: FinalState, pp: ProfileParams, t: float, x) -> np.ndarray:
    """First-harmonic piece ``c_1 lam R^2 cos(theta) / t^2``; zero outside the cone."""
    inside, lp = local_profile(fs, pp, t, x)
    out = np.zeros(inside.shape)
    out[inside] = lp.n_r()
    return out


def nonresonant_part(fs: FinalState, pp: ProfileParams, t: float, x) -> np.ndarray:
    """Harmonics ``3 <= n <= n_max`` of ``N(u_ap)``; even harmonics vanish identically."""
    inside, lp = local_profile(fs, pp, t, x)
    out = np.zeros(inside.shape)
    out[inside] = lp.n_nr()
    return out


def fourier_coeff_quadrature(n: int) -> float:
    """``(1/pi) int_0^{2 pi} |cos t| cos t cos(n t) dt`` by adaptive quadrature.

    The period is split where ``cos`` changes sign so each piece is smooth.
    """
    def piece(a, b, sgn):
        val, _ = quad(lambda t: sgn * np.cos(t) ** 2, a, b, weight="cos", wvar=n, epsabs=1e-14, limit=200)
        return val

    return (piece(-np.pi / 2, np.pi / 2, 1.0) + piece(np.pi / 2, 3 * np.pi / 2, -1.0)) / np.pi
