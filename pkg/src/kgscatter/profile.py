"""Corrected asymptotic profile ``A = u_ap + v_ap`` in hyperbolic coordinates.

Inside the light cone every profile quantity is a function of
``mu = x / sqrt(t^2 - |x|^2)``.  With ``R = sqrt(P1^2 + Q1^2)`` and
``theta = alpha - beta`` the two pieces of the profile are

    u_ap = R cos(theta) / t
    v_ap = lam R^2 / t^2 * sum_{odd n >= 3} c_n / (1 - n^2) cos(n theta)

which is the same as the ``P_n cos(n alpha) + Q_n sin(n alpha)`` form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .final_data import FinalState, ft_phi, ft_phi_with_gradient
from .spectral import Grid2D

RESONANT_COEFF = 8.0 / (3.0 * math.pi)
PSI_PREFACTOR = -4.0 / (3.0 * math.pi)
PSI_MODES = ("literal", "lambda")


@dataclass(frozen=True)
class ProfileParams:
    """Coupling, target decay, series truncation and cone cutoff.

    ``psi_mode='literal'`` uses the printed phase formula unchanged;
    ``psi_mode='lambda'`` multiplies it by ``lam``.  The two agree for ``lam = 1``.
    ``delta_cone=None`` means "choose from the data" (see :func:`auto_delta_cone`).
    """

    lam: float = 1.0
    d: float = 0.75
    n_max: int = 41
    delta_cone: float | None = None
    psi_mode: str = "lambda"
    ablate_psi: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam != 0):
            raise ValueError("lam must be finite and non-zero")
        if not 0.5 < self.d < 1:
            raise ValueError("d must lie in (1/2, 1)")
        if int(self.n_max) != self.n_max or self.n_max < 3 or self.n_max % 2 == 0:
            raise ValueError("n_max must be an odd integer >= 3")
        if self.delta_cone is not None and not 0 < self.delta_cone < 1:
            raise ValueError("delta_cone must lie in (0, 1)")
        if self.psi_mode not in PSI_MODES:
            raise ValueError(f"psi_mode must be one of {PSI_MODES}")

    def resolved(self, fs: FinalState) -> "ProfileParams":
        if self.delta_cone is not None:
            return self
        return replace(self, delta_cone=auto_delta_cone(fs))

    @property
    def psi_factor(self) -> float:
        if self.ablate_psi:
            return 0.0
        return self.lam if self.psi_mode == "lambda" else 1.0

    def to_dict(self) -> dict:
        return {"lam": self.lam, "d": self.d, "n_max": self.n_max, "delta_cone": self.delta_cone,
                "psi_mode": self.psi_mode, "ablate_psi": self.ablate_psi}


@dataclass(frozen=True)
class HyperbolicCoords:
    mu: np.ndarray
    bracket: np.ndarray
    inside: np.ndarray


def _bracket(mu: np.ndarray) -> np.ndarray:
    return np.sqrt(1.0 + mu[..., 0] ** 2 + mu[..., 1] ** 2)


def hyperbolic(t: float, x, delta_cone: float = 0.0) -> HyperbolicCoords:
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    inside = r2 < (t * (1.0 - delta_cone)) ** 2
    s = np.sqrt(np.where(inside, t * t - r2, 1.0))
    mu = np.where(inside[..., None], x / s[..., None], 0.0)
    return HyperbolicCoords(mu, _bracket(mu), inside)


def p1_q1(fs: FinalState, mu) -> tuple[np.ndarray, np.ndarray]:
    mu = np.asarray(mu, dtype=float)
    b = _bracket(mu)
    f0 = ft_phi(fs, 0, mu)
    f1 = ft_phi(fs, 1, mu)
    return -b * b * f0.imag - b * f1.real, b * b * f0.real - b * f1.imag


def psi(fs: FinalState, mu) -> np.ndarray:
    """Phase correction exactly as printed: ``-4/(3 pi) <mu> |phi0_hat + i phi1_hat / <mu>|``."""
    mu = np.asarray(mu, dtype=float)
    b = _bracket(mu)
    return PSI_PREFACTOR * b * np.abs(ft_phi(fs, 0, mu) + 1j * ft_phi(fs, 1, mu) / b)


def beta(P, Q) -> np.ndarray:
    """Angle in ``(0, 2 pi]`` with ``cos = P / R`` and ``sin = Q / R``."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if np.any(P * P + Q * Q == 0):
        raise ValueError("beta undefined where P1^2 + Q1^2 = 0")
    b = np.arctan2(Q, P)
    return np.where(b <= 0, b + 2 * np.pi, b)


def fourier_coeff(n):
    """Cosine coefficients of ``|cos t| cos t``; zero for even ``n``."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise ValueError("n must be non-negative")
    nf = n_arr.astype(float)
    odd = n_arr % 2 == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -(8.0 / np.pi) * np.sin(nf * np.pi / 2) / (nf * (nf * nf - 4.0))
    out = np.where(odd, val, 0.0)
    return float(out) if out.ndim == 0 else out


def corrector_coeff(n):
    """``c_n / (1 - n^2)``: the n-th corrector weight per unit ``lam R^2``."""
    n_arr = np.asarray(n)
    nf = n_arr.astype(float)
    odd = n_arr % 2 == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 8.0 * np.sin(nf * np.pi / 2) / (np.pi * nf * (nf * nf - 1.0) * (nf * nf - 4.0))
    out = np.where(odd & (n_arr >= 3), val, 0.0)
    return float(out) if out.ndim == 0 else out


def pn_qn(n: int, fs: FinalState, mu, lam: float) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ValueError("corrector index starts at n = 2")
    P, Q = p1_q1(fs, mu)
    amp2 = P * P + Q * Q
    if n % 2 == 0:
        return np.zeros_like(amp2), np.zeros_like(amp2)
    g = corrector_coeff(n) * lam * amp2
    safe = amp2 > 0
    b = np.where(safe, np.arctan2(Q, np.where(safe, P, 1.0)), 0.0)
    b = np.where(b <= 0, b + 2 * np.pi, b)
    return np.where(safe, g * np.cos(n * b), 0.0), np.where(safe, g * np.sin(n * b), 0.0)


def amplitude_bound(fs: FinalState, rho) -> np.ndarray:
    """Radial upper bound for ``sqrt(P1^2 + Q1^2)`` at ``|mu| = rho``."""
    rho = np.asarray(rho, dtype=float)
    b = np.sqrt(1 + rho * rho)
    out = np.zeros_like(rho)
    for which, power in ((0, 2), (1, 1)):
        for at in fs.atoms(which):
            out = out + b**power * abs(fs.kappa * at.a) * 2 * math.pi * at.sigma**2 * np.exp(
                -0.5 * at.sigma**2 * rho * rho)
    return out


def auto_delta_cone(fs: FinalState, rel: float = 1e-12) -> float:
    """Cone cutoff below which the amplitude has fallen under ``rel`` of its peak."""
    if fs.is_zero:
        return 0.05
    rho = np.linspace(0, 60, 24001)
    bound = amplitude_bound(fs, rho)
    # actual peak on a polar sample; the bound only controls the tail
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    rr = np.linspace(0, rho[np.argmax(bound)] + 3.0 / min(a.sigma for a in fs.atoms0 + fs.atoms1), 200)
    pts = np.stack([np.outer(rr, np.cos(th)), np.outer(rr, np.sin(th))], axis=-1)
    P, Q = p1_q1(fs, pts)
    peak = float(np.sqrt(np.max(P * P + Q * Q)))
    above = np.nonzero(bound >= rel * peak)[0]
    rc = rho[above[-1] + 1] if above.size and above[-1] + 1 < rho.size else rho[-1]
    return float(min(max(1.0 - rc / math.sqrt(1 + rc * rc), 1e-4), 0.5))


def _odd_chebyshev_sums(c: np.ndarray, coeff_sets, n_max: int, sine: bool = False):
    """``sum_n w[n] T_n(c)`` (or ``U_{n-1}(c)`` when ``sine``) over odd ``3 <= n <= n_max``."""
    t2 = 2.0 * c * c - 1.0
    if sine:
        prev, cur = np.ones_like(c), 4.0 * c * c - 1.0  # U_0, U_2
    else:
        prev, cur = c, c * (2.0 * t2 - 1.0)  # T_1, T_3
    sums = [np.zeros_like(c) for _ in coeff_sets]
    for n in range(3, n_max + 1, 2):
        for acc, w in zip(sums, coeff_sets):
            wn = w(n)
            if wn != 0.0:
                acc += wn * cur
        prev, cur = cur, 2.0 * t2 * cur - prev
    return sums


def chebyshev_t(c: np.ndarray, n: int) -> np.ndarray:
    return np.polynomial.chebyshev.chebval(c, np.eye(n + 1)[n])


@dataclass
class LocalProfile:
    """Profile ingredients at the points strictly inside the cutoff cone."""

    fs: FinalState
    pp: ProfileParams
    t: float
    x: np.ndarray  # (M, 2)
    t_base: float

    @cached_property
    def _geom(self):
        x1, x2 = self.x[:, 0], self.x[:, 1]
        r2 = x1 * x1 + x2 * x2
        s = np.sqrt(self.t * self.t - r2)
        s0 = np.sqrt(np.maximum(self.t_base * self.t_base - r2, 0.0))
        dt = self.t - self.t_base
        delta = (2 * self.t_base * dt + dt * dt) / (s + s0) if dt != 0 else np.zeros_like(s)
        return s, s0, delta

    @cached_property
    def mu(self) -> np.ndarray:
        return self.x / self._geom[0][:, None]

    @cached_property
    def bracket(self) -> np.ndarray:
        return self.t / self._geom[0]

    @cached_property
    def _ft(self):
        return (ft_phi_with_gradient(self.fs, 0, self.mu), ft_phi_with_gradient(self.fs, 1, self.mu))

    @cached_property
    def PQ(self):
        (f0, _, _), (f1, _, _) = self._ft
        b = self.bracket
        return -b * b * f0.imag - b * f1.real, b * b * f0.real - b * f1.imag

    @cached_property
    def R(self) -> np.ndarray:
        P, Q = self.PQ
        return np.hypot(P, Q)

    @cached_property
    def psi(self) -> np.ndarray:
        fac = self.pp.psi_factor
        if fac == 0.0:
            return np.zeros_like(self.bracket)
        (f0, _, _), (f1, _, _) = self._ft
        b = self.bracket
        return fac * PSI_PREFACTOR * b * np.abs(f0 + 1j * f1 / b)

    @cached_property
    def beta(self) -> np.ndarray:
        P, Q = self.PQ
        safe = self.R > 0
        b = np.arctan2(Q, np.where(safe, P, 1.0))
        return np.where(b <= 0, b + 2 * np.pi, b)

    @cached_property
    def cos_sin_theta(self):
        _, s0, delta = self._geom
        phi = delta + self.psi * math.log(self.t) - self.beta
        c0, sn0 = np.cos(s0), np.sin(s0)
        cp, sp = np.cos(phi), np.sin(phi)
        return c0 * cp - sn0 * sp, sn0 * cp + c0 * sp

    # field pieces --------------------------------------------------------
    def u(self) -> np.ndarray:
        return self.R * self.cos_sin_theta[0] / self.t

    def _series(self, which: str) -> np.ndarray:
        c = self.cos_sin_theta[0]
        w = corrector_coeff if which == "v" else fourier_coeff
        return _odd_chebyshev_sums(c, [w], self.pp.n_max)[0]

    def v(self) -> np.ndarray:
        return self.pp.lam * self.R**2 * self._series("v") / self.t**2

    def both(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.cos_sin_theta[0]
        hv, = _odd_chebyshev_sums(c, [corrector_coeff], self.pp.n_max)
        return self.R * c / self.t, self.pp.lam * self.R**2 * hv / self.t**2

    def n_r(self) -> np.ndarray:
        return RESONANT_COEFF * self.pp.lam * self.R**2 * self.cos_sin_theta[0] / self.t**2

    def n_nr(self) -> np.ndarray:
        return self.pp.lam * self.R**2 * self._series("n") / self.t**2

    def v_harmonic(self, n: int) -> np.ndarray:
        return self.pp.lam * corrector_coeff(n) * self.R**2 * chebyshev_t(self.cos_sin_theta[0], n) / self.t**2

    def n_nr_harmonic(self, n: int) -> np.ndarray:
        return self.pp.lam * fourier_coeff(n) * self.R**2 * chebyshev_t(self.cos_sin_theta[0], n) / self.t**2

    # analytic time derivative ----------------------------------------------
    def _gradients(self):
        (f0, a1, a2), (f1, b1, b2) = self._ft
        b = self.bracket
        m1, m2 = self.mu[:, 0], self.mu[:, 1]
        P, Q = self.PQ
        dP = [-2 * m * f0.imag - b * b * g0.imag - (m / b) * f1.real - b * g1.real
              for m, g0, g1 in ((m1, a1, b1), (m2, a2, b2))]
        dQ = [2 * m * f0.real + b * b * g0.real - (m / b) * f1.imag - b * g1.imag
              for m, g0, g1 in ((m1, a1, b1), (m2, a2, b2))]
        R = self.R
        safe = R > 0
        Rs = np.where(safe, R, 1.0)
        dR = [np.where(safe, (P * p + Q * q) / Rs, 0.0) for p, q in zip(dP, dQ)]
        dbeta = [np.where(safe, (P * q - Q * p) / Rs**2, 0.0) for p, q in zip(dP, dQ)]
        fac = self.pp.psi_factor * PSI_PREFACTOR
        dpsi = [fac * (g / b - R * m / b**3) for g, m in zip(dR, (m1, m2))]
        return dR, dbeta, dpsi

    def dt_u_v(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact ``(d/dt u_ap, d/dt v_ap)`` by the chain rule through ``mu(t, x)``."""
        t = self.t
        b = self.bracket
        dR, dbeta, dpsi = self._gradients()
        mdot = [-self.mu[:, j] * b * b / t for j in range(2)]
        Rdot = dR[0] * mdot[0] + dR[1] * mdot[1]
        betadot = dbeta[0] * mdot[0] + dbeta[1] * mdot[1]
        psidot = dpsi[0] * mdot[0] + dpsi[1] * mdot[1]
        thdot = b + self.psi / t + math.log(t) * psidot - betadot
        c, s = self.cos_sin_theta
        R = self.R
        du = -R * c / t**2 + (Rdot * c - R * s * thdot) / t
        lam = self.pp.lam
        H, = _odd_chebyshev_sums(c, [corrector_coeff], self.pp.n_max)
        Us, = _odd_chebyshev_sums(c, [lambda n: n * corrector_coeff(n)], self.pp.n_max, sine=True)
        Hp = -s * Us
        dv = lam * (-2 * R * R * H / t**3 + (2 * R * Rdot * H + R * R * Hp * thdot) / t**2)
        return du, dv


def local_profile(fs: FinalState, pp: ProfileParams, t: float, x, t_base: float | None = None):
    """Return ``(inside_mask, LocalProfile)`` for points ``x`` (trailing axis 2)."""
    if not t > 1:
        raise ValueError("profile is defined for t > 1")
    pp = pp.resolved(fs)
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    inside = r2 < (t * (1.0 - pp.delta_cone)) ** 2
    return inside, LocalProfile(fs, pp, float(t), x[inside], float(t if t_base is None else t_base))


def _scatter(inside: np.ndarray, vals: np.ndarray) -> np.ndarray:
    out = np.zeros(inside.shape)
    out[inside] = vals
    return out


def u_ap_eval(fs: FinalState, pp: ProfileParams, t: float, x) -> np.ndarray:
    inside, lp = local_profile(fs, pp, t, x)
    return _scatter(inside, lp.u())


def v_ap_eval(fs: FinalState, pp: ProfileParams, t: float, x) -> np.ndarray:
    inside, lp = local_profile(fs, pp, t, x)
    return _scatter(inside, lp.v())


def a_eval(fs: FinalState, pp: ProfileParams, t: float, x) -> np.ndarray:
    inside, lp = local_profile(fs, pp, t, x)
    u, v = lp.both()
    return _scatter(inside, u + v)


class ProfileSampler:
    """Evaluates profile fields on a fixed grid, reusing the coordinate mesh."""

    def __init__(self, fs: FinalState, pp: ProfileParams, grid: Grid2D):
        self.fs = fs
        self.pp = pp.resolved(fs)
        self.grid = grid
        X, Y = grid.mesh()
        self._r2 = X * X + Y * Y
        self._X = X
        self._Y = Y

    def at(self, t: float, t_base: float | None = None) -> "GridProfile":
        if not t > 1:
            raise ValueError("profile is defined for t > 1")
        mask = self._r2 < (t * (1.0 - self.pp.delta_cone)) ** 2
        idx = np.flatnonzero(mask)
        pts = np.stack([self._X.ravel()[idx], self._Y.ravel()[idx]], axis=-1)
        lp = LocalProfile(self.fs, self.pp, float(t), pts, float(t if t_base is None else t_base))
        return GridProfile(self.grid, idx, lp)

    def with_params(self, pp: ProfileParams) -> "ProfileSampler":
        new = object.__new__(ProfileSampler)
        new.__dict__.update(self.__dict__)
        new.pp = pp.resolved(self.fs)
        return new


@dataclass
class GridProfile:
    grid: Grid2D
    idx: np.ndarray
    local: LocalProfile

    def full(self, vals: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.n * self.grid.n)
        out[self.idx] = vals
        return out.reshape(self.grid.n, self.grid.n)

    def u(self) -> np.ndarray:
        return self.full(self.local.u())

    def v(self) -> np.ndarray:
        return self.full(self.local.v())

    def u_v(self) -> tuple[np.ndarray, np.ndarray]:
        u, v = self.local.both()
        return self.full(u), self.full(v)

    def A(self) -> np.ndarray:
        u, v = self.local.both()
        return self.full(u + v)

    def n_r(self) -> np.ndarray:
        return self.full(self.local.n_r())

    def n_nr(self) -> np.ndarray:
        return self.full(self.local.n_nr())

    def dt_A(self) -> np.ndarray:
        du, dv = self.local.dt_u_v()
        return self.full(du + dv)
