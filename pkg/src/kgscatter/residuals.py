"""Residuals of the profile against the equation and power-law rate fits.

Every residual is a discrete ``(box + 1)`` of a profile piece minus the matching
part of the nonlinearity.  The three time slices ``t - h_t, t, t + h_t`` share
one rounded phase base (see :class:`kgscatter.profile.LocalProfile`), so the
second difference in time does not inherit the round-off of phases of size ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .decomposition import n_values
from .final_data import FinalState
from .profile import ProfileParams, ProfileSampler
from .spectral import Grid2D, NumericalAbort, RealField, dalembertian_values, make_grid, top_octave_fraction

VARIANTS = ("full_A", "uap_vs_Nr", "vap_vs_Nnr", "cross_term", "uap_vs_fullN", "no_psi")
DEFAULT_LADDER = (50.0, 71.0, 100.0, 141.0, 200.0, 283.0, 400.0)
DEFAULT_H_T = 5e-4
ALIAS_TOL = 1e-6


class AliasingError(NumericalAbort):
    """Raised when a sampled field carries visible energy near the Nyquist limit."""


@dataclass(frozen=True)
class GridPolicy:
    """Box side ``L_factor * t``; ``n`` is the smallest power of two reaching ``h_target``, capped."""

    n_cap: int = 2048
    L_factor: float = 2.5
    h_target: float = 0.5
    n_min: int = 64

    def __post_init__(self):
        if self.L_factor <= 2.0:
            raise ValueError("L_factor must exceed 2 so the light cone fits in the box")
        if self.h_target <= 0:
            raise ValueError("h_target must be positive")
        if self.n_cap < 8 or self.n_cap & (self.n_cap - 1):
            raise ValueError("n_cap must be a power of two >= 8")

    def grid_for(self, t: float) -> Grid2D:
        L = self.L_factor * t
        n = max(self.n_min, 1 << math.ceil(math.log2(L / self.h_target)))
        return make_grid(min(n, self.n_cap), L)


@dataclass(frozen=True)
class ResidualSample:
    t: float
    variant: str
    l2: float
    linf: float
    grid_n: int = 0
    box_L: float = 0.0
    h_t: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS and not self.variant.startswith("n="):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.l2 < 0 or self.linf < 0:
            raise ValueError("norms must be non-negative")
        if not self.t > 1:
            raise ValueError("t must exceed 1")


@dataclass(frozen=True)
class RateFit:
    """``norm ~ C t^-p (log t)^q`` fitted by least squares in log space."""

    p: float
    q: int
    C: float
    rms: float
    window: tuple[float, float]

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "C": self.C, "rms": self.rms, "window": list(self.window)}


def rate_fit(samples: Sequence[tuple[float, float]], q: int = 0) -> RateFit:
    """Fit ``log(norm) - q log log t = log C - p log t``.

    The log-power ``q`` is held fixed rather than fitted; with only a decade
    of ``t`` the two regressors are too collinear to separate.
    """
    if q not in (0, 1, 2):
        raise ValueError("q must be 0, 1 or 2")
    if len(samples) < 4:
        raise ValueError("rate_fit needs at least 4 samples")
    t = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("norms must be positive and finite")
    if np.any(t <= 1):
        raise ValueError("sample times must exceed 1")
    lt = np.log(t)
    rhs = np.log(y) - q * np.log(lt)
    M = np.stack([np.ones_like(lt), -lt], axis=1)
    coef, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    resid = rhs - M @ coef
    return RateFit(float(coef[1]), q, float(math.exp(coef[0])), float(np.sqrt(np.mean(resid**2))),
                   (float(t[0]), float(t[-1])))


def power_exponent(ns: Sequence[float], values: Sequence[float]) -> float:
    """Slope ``p`` of ``values ~ ns^-p`` in log-log least squares."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(-np.polyfit(x, y, 1)[0])


def _norms(vals: np.ndarray, grid: Grid2D) -> tuple[float, float]:
    return float(np.sqrt(np.sum(vals * vals)) * grid.h), float(np.max(np.abs(vals)))


class Snapshot:
    """All profile slices needed for the residuals at one time ``t``."""

    def __init__(self, fs: FinalState, pp: ProfileParams, t: float, grid: Grid2D, h_t: float = DEFAULT_H_T,
                 check_alias: bool = True, sampler: ProfileSampler | None = None):
        if not h_t > 0:
            raise ValueError("h_t must be positive")
        if not t - h_t > 1:
            raise ValueError("t - h_t must exceed 1")
        self.fs = fs
        self.pp = pp.resolved(fs)
        self.t = float(t)
        self.grid = grid
        self.h_t = float(h_t)
        if sampler is not None and (sampler.grid != grid or sampler.pp != self.pp):
            raise ValueError("sampler does not match grid and parameters")
        self.sampler = sampler or ProfileSampler(fs, self.pp, grid)
        self._slices = [self.sampler.at(self.t + s * self.h_t, t_base=self.t) for s in (-1, 0, 1)]
        if check_alias and not fs.is_zero:
            frac = top_octave_fraction(self.u_v[1][0] + self.u_v[1][1], grid)
            if frac > ALIAS_TOL:
                raise AliasingError(f"top-octave energy fraction {frac:.2e} at t={t:g} with n={grid.n}")

    @cached_property
    def u_v(self):
        return [sl.u_v() for sl in self._slices]

    def box(self, fields) -> np.ndarray:
        fm, f0, fp = fields
        return dalembertian_values(fm, f0, fp, self.h_t, self.grid)

    @property
    def u0(self) -> np.ndarray:
        return self.u_v[1][0]

    @property
    def A0(self) -> np.ndarray:
        u, v = self.u_v[1]
        return u + v

    @cached_property
    def box_u(self) -> np.ndarray:
        return self.box([uv[0] for uv in self.u_v])

    @cached_property
    def box_v(self) -> np.ndarray:
        return self.box([uv[1] for uv in self.u_v])

    @cached_property
    def n_r(self) -> np.ndarray:
        return self._slices[1].n_r()

    @cached_property
    def n_nr(self) -> np.ndarray:
        return self._slices[1].n_nr()

    def error_function(self) -> np.ndarray:
        if "box_u" in self.__dict__ and "box_v" in self.__dict__:
            boxed = self.box_u + self.box_v
        else:
            boxed = self.box([u + v for u, v in self.u_v])
        return boxed - n_values(self.A0, self.pp.lam)

    def lemma42(self) -> np.ndarray:
        return self.box_u - self.n_r

    def lemma43(self) -> np.ndarray:
        return self.box_v - self.n_nr

    def uap_vs_full_n(self) -> np.ndarray:
        return self.box_u - n_values(self.u0, self.pp.lam)

    def cross(self) -> np.ndarray:
        return n_values(self.A0, self.pp.lam) - n_values(self.u0, self.pp.lam)

    def truncation(self) -> np.ndarray:
        """``N_r + N_nr - N(u_ap)``: the part of the series beyond ``n_max``."""
        return self.n_r + self.n_nr - n_values(self.u0, self.pp.lam)

    def harmonic_remainder(self, n: int, include_corrector: bool = True) -> np.ndarray:
        """``(box + 1) v_n - N_nr,n`` for a single odd harmonic ``n``."""
        nn = self._slices[1].full(self._slices[1].local.n_nr_harmonic(n))
        if not include_corrector:
            return -nn
        vn = [sl.full(sl.local.v_harmonic(n)) for sl in self._slices]
        return self.box(vn) - nn

    def no_psi(self) -> np.ndarray:
        pp0 = replace(self.pp, ablate_psi=True)
        sampler = self.sampler.with_params(pp0)
        us = [sampler.at(self.t + s * self.h_t, t_base=self.t).u() for s in (-1, 0, 1)]
        return self.box(us) - n_values(us[1], self.pp.lam)

    def variant(self, name: str) -> np.ndarray:
        return {
            "full_A": self.error_function,
            "uap_vs_Nr": self.lemma42,
            "vap_vs_Nnr": self.lemma43,
            "cross_term": self.cross,
            "uap_vs_fullN": self.uap_vs_full_n,
            "no_psi": self.no_psi,
        }[name]()

    def sample(self, name: str) -> ResidualSample:
        l2, linf = _norms(self.variant(name), self.grid)
        return ResidualSample(self.t, name, l2, linf, self.grid.n, self.grid.L, self.h_t)


def error_function(fs: FinalState, pp: ProfileParams, t: float, h_t: float, grid: Grid2D) -> RealField:
    """``F = (box + 1) A - N(A)`` on ``grid`` at time ``t``."""
    return RealField(grid, Snapshot(fs, pp, t, grid, h_t).error_function())


def lemma42_residual(fs: FinalState, pp: ProfileParams, t: float, h_t: float, grid: Grid2D) -> RealField:
    return RealField(grid, Snapshot(fs, pp, t, grid, h_t).lemma42())


def lemma43_residual(fs: FinalState, pp: ProfileParams, t: float, h_t: float, grid: Grid2D) -> RealField:
    return RealField(grid, Snapshot(fs, pp, t, grid, h_t).lemma43())


def cross_term(fs: FinalState, pp: ProfileParams, t: float, grid: Grid2D) -> float:
    """``||N(u_ap + v_ap) - N(u_ap)||_{L2}``."""
    sn = Snapshot(fs, pp, t, grid, DEFAULT_H_T, check_alias=False)
    return _norms(sn.cross(), grid)[0]


def per_harmonic_norms(fs: FinalState, pp: ProfileParams, t: float, grid: Grid2D, ns: Iterable[int],
                       h_t: float = DEFAULT_H_T) -> dict[int, tuple[float, float]]:
    """``{n: (||R_n|| with corrector, ||N_nr,n|| without)}`` in L2."""
    sn = Snapshot(fs, pp, t, grid, h_t)
    out = {}
    for n in ns:
        if n < 3 or n % 2 == 0:
            raise ValueError("harmonics are odd n >= 3")
        out[n] = (_norms(sn.harmonic_remainder(n), grid)[0],
                  _norms(sn.harmonic_remainder(n, include_corrector=False), grid)[0])
    return out


@dataclass
class LadderResult:
    samples: list[ResidualSample] = field(default_factory=list)

    def series(self, variant: str) -> list[tuple[float, float]]:
        return sorted((s.t, s.l2) for s in self.samples if s.variant == variant)

    def fit(self, variant: str, q: int = 0) -> RateFit:
        return rate_fit(self.series(variant), q)

    def fits(self) -> dict:
        out = {}
        for v in dict.fromkeys(s.variant for s in self.samples):
            ser = self.series(v)
            if len(ser) >= 4 and all(y > 0 for _, y in ser):
                out[v] = {f"q={q}": rate_fit(ser, q).to_dict() for q in (0, 2)}
        return out

    def eta(self, d: float) -> float:
        """Smallest ``eta`` with ``||F(t)|| <= eta t^(-1-d)`` on every sample."""
        return max((y * t ** (1 + d) for t, y in self.series("full_A")), default=0.0)


def residual_ladder(fs: FinalState, pp: ProfileParams, times: Sequence[float] = DEFAULT_LADDER,
                    variants: Sequence[str] = VARIANTS, policy: GridPolicy | None = None,
                    h_t: float = DEFAULT_H_T) -> LadderResult:
    policy = policy or GridPolicy()
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
    res = LadderResult()
    for t in sorted(times):
        grid = policy.grid_for(t)
        sn = Snapshot(fs, pp, t, grid, h_t)
        for v in variants:
            res.samples.append(sn.sample(v))
        del sn
    return res
