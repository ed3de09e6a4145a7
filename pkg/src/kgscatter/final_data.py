"""Final states ``(phi0, phi1)`` built from Gaussian atoms.

The Fourier transform convention is ``phi_hat(xi) = kappa * int exp(-i x.xi) phi(x) dx``
with ``kappa`` stored on the state.  The sign of ``kappa`` is not fixed a priori;
``scattering.calibrate_kappa`` measures it against the free evolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .spectral import Grid2D, RealField, make_grid, norm_hs

PROVISIONAL_KAPPA = 1.0 / (2.0 * math.pi)
CALIBRATED_KAPPA = -1.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class GaussianAtom:
    """``a * exp(-|x - x0|^2 / (2 sigma^2))``."""

    a: float
    x0: tuple[float, float] = (0.0, 0.0)
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "x0", (float(self.x0[0]), float(self.x0[1])))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not math.isfinite(self.a):
            raise ValueError("atom amplitude must be finite")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("atom width must be positive")

    def scaled(self, c: float) -> "GaussianAtom":
        return replace(self, a=self.a * c)


@dataclass(frozen=True)
class FinalState:
    atoms0: tuple[GaussianAtom, ...] = ()
    atoms1: tuple[GaussianAtom, ...] = ()
    kappa: float = PROVISIONAL_KAPPA

    def __post_init__(self):
        object.__setattr__(self, "atoms0", tuple(self.atoms0))
        object.__setattr__(self, "atoms1", tuple(self.atoms1))
        if not (math.isfinite(self.kappa) and self.kappa != 0):
            raise ValueError("kappa must be finite and non-zero")

    def atoms(self, which: int) -> tuple[GaussianAtom, ...]:
        if which == 0:
            return self.atoms0
        if which == 1:
            return self.atoms1
        raise ValueError("which must be 0 or 1")

    @property
    def is_zero(self) -> bool:
        return all(a.a == 0 for a in self.atoms0 + self.atoms1)

    def scaled(self, c: float) -> "FinalState":
        return replace(self, atoms0=tuple(a.scaled(c) for a in self.atoms0),
                       atoms1=tuple(a.scaled(c) for a in self.atoms1))

    def with_kappa(self, kappa: float) -> "FinalState":
        return replace(self, kappa=float(kappa))

    def to_dict(self) -> dict:
        def enc(atoms):
            return [[a.a, [a.x0[0], a.x0[1]], a.sigma] for a in atoms]
        return {"phi0": enc(self.atoms0), "phi1": enc(self.atoms1), "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d: dict) -> "FinalState":
        unknown = set(d) - {"phi0", "phi1", "kappa"}
        if unknown:
            raise ValueError(f"unknown final_state keys: {sorted(unknown)}")

        def dec(items) -> tuple[GaussianAtom, ...]:
            out = []
            for it in items or ():
                if len(it) != 3 or len(it[1]) != 2:
                    raise ValueError(f"atom must be [a, [x, y], sigma], got {it!r}")
                out.append(GaussianAtom(it[0], tuple(it[1]), it[2]))
            return tuple(out)

        return cls(dec(d.get("phi0")), dec(d.get("phi1")), float(d.get("kappa", PROVISIONAL_KAPPA)))


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    return x


def eval_phi(fs: FinalState, which: int, x) -> np.ndarray:
    x = _as_points(x)
    out = np.zeros(x.shape[:-1])
    for at in fs.atoms(which):
        r2 = (x[..., 0] - at.x0[0]) ** 2 + (x[..., 1] - at.x0[1]) ** 2
        out = out + at.a * np.exp(-r2 / (2 * at.sigma**2))
    return out


def _ft_parts(fs: FinalState, which: int, xi: np.ndarray, grad: bool):
    xi1, xi2 = xi[..., 0], xi[..., 1]
    q = xi1 * xi1 + xi2 * xi2
    val = np.zeros(xi.shape[:-1], dtype=complex)
    g1 = np.zeros_like(val) if grad else None
    g2 = np.zeros_like(val) if grad else None
    for at in fs.atoms(which):
        s2 = at.sigma**2
        term = (fs.kappa * at.a * 2 * math.pi * s2) * np.exp(-0.5 * s2 * q)
        if at.x0 != (0.0, 0.0):
            term = term * np.exp(-1j * (at.x0[0] * xi1 + at.x0[1] * xi2))
        val += term
        if grad:
            g1 += term * (-s2 * xi1 - 1j * at.x0[0])
            g2 += term * (-s2 * xi2 - 1j * at.x0[1])
    return val, g1, g2


def ft_phi(fs: FinalState, which: int, xi) -> np.ndarray:
    """Closed-form transform of ``phi_which`` at frequencies ``xi`` (trailing axis 2)."""
    return _ft_parts(fs, which, _as_points(xi), grad=False)[0]


def ft_phi_with_gradient(fs: FinalState, which: int, xi):
    """``(phi_hat, d phi_hat / d xi1, d phi_hat / d xi2)``."""
    return _ft_parts(fs, which, _as_points(xi), grad=True)


def sample(fs: FinalState, which: int, grid: Grid2D) -> RealField:
    X, Y = grid.mesh()
    return RealField(grid, eval_phi(fs, which, np.stack([X, Y], axis=-1)))


def sampled_transform(f: RealField, kappa: float) -> np.ndarray:
    """Riemann-sum transform ``kappa h^2 sum f(x_j) exp(-i k.x_j)`` on the rfft half-plane."""
    g = f.grid
    spec = g.rfft(f.values)
    # grid starts at -L/2 rather than 0
    shift = np.exp(0.5j * g.L * (g.frequencies[:, None] + (2 * np.pi * np.fft.rfftfreq(g.n, d=g.h))[None, :]))
    return kappa * g.h**2 * spec * shift


def _weighted_norms(f: np.ndarray, X, Y, grid: Grid2D, s: float) -> tuple[float, float, float]:
    n0 = norm_hs(RealField(grid, f), s)
    n1 = math.hypot(norm_hs(RealField(grid, X * f), s + 1), norm_hs(RealField(grid, Y * f), s + 1))
    n2 = norm_hs(RealField(grid, (X * X + Y * Y) * f), s + 2)
    return n0, n1, n2


def y_norm_terms(fs: FinalState, grid: Grid2D) -> list[float]:
    """The six weighted Sobolev terms, ``phi0`` (H2, H3, H4) then ``phi1`` (H1, H2, H3)."""
    X, Y = grid.mesh()
    pts = np.stack([X, Y], axis=-1)
    out: list[float] = []
    for which, s in ((0, 2.0), (1, 1.0)):
        out.extend(_weighted_norms(eval_phi(fs, which, pts), X, Y, grid, s))
    return out


def _y_grid(fs: FinalState, n: int) -> Grid2D:
    atoms = fs.atoms0 + fs.atoms1
    reach = max(math.hypot(*a.x0) + 12 * a.sigma for a in atoms)
    return make_grid(n, 2 * reach)


def y_norm(fs: FinalState, rtol: float = 0.01, n_start: int | None = None, n_max: int = 2048) -> float:
    """Sum of the six weighted Sobolev norms defining the final-data space.

    ``x phi`` is measured as the vector norm of ``(x1 phi, x2 phi)`` and ``x^2 phi``
    as ``|x|^2 phi``.  The grid is doubled until the value changes by less than
    ``rtol``; failure to converge below ``n_max`` raises ``RuntimeError``.
    """
    atoms = fs.atoms0 + fs.atoms1
    if not atoms or fs.is_zero:
        return 0.0
    if n_start is None:
        L = _y_grid(fs, 8).L
        h_target = min(a.sigma for a in atoms) / 3
        n_start = max(64, 1 << math.ceil(math.log2(L / h_target)))
    n = n_start
    prev = sum(y_norm_terms(fs, _y_grid(fs, n)))
    while n * 2 <= n_max:
        n *= 2
        cur = sum(y_norm_terms(fs, _y_grid(fs, n)))
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise RuntimeError("y_norm grid under-resolved; increase n_max")


def atoms_from_triples(triples: Iterable[Sequence]) -> tuple[GaussianAtom, ...]:
    return tuple(GaussianAtom(a, tuple(x0), s) for a, x0, s in triples)
