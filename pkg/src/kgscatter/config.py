"""Run configuration: YAML in, validated objects out.

Unknown keys anywhere are rejected.  Every module precondition that can be
checked without computing is checked here, so a bad config fails before any
numerical work starts.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .final_data import CALIBRATED_KAPPA, PROVISIONAL_KAPPA, FinalState, y_norm
from .profile import ProfileParams, p1_q1
from .residuals import DEFAULT_H_T, DEFAULT_LADDER, VARIANTS, GridPolicy
from .spectral import make_grid

EXPERIMENTS = ("coeffs", "residuals", "scatter", "calibrate-kappa", "evolve-free")
ROUTES = ("picard", "evolve")


class ConfigError(ValueError):
    pass


def _check_keys(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _kappa(value) -> float:
    if value is None or value == "calibrated":
        return CALIBRATED_KAPPA
    if value == "provisional":
        return PROVISIONAL_KAPPA
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"kappa must be a number, 'calibrated' or 'provisional', got {value!r}") from None


@dataclass(frozen=True)
class ResidualSettings:
    h_t: float = DEFAULT_H_T
    variants: tuple[str, ...] = tuple(v for v in VARIANTS if v != "no_psi")
    per_n_t: float = 50.0
    per_n_grid: int = 1024
    per_n_ns: tuple[int, ...] = tuple(range(3, 22, 2))
    compare_psi_modes: bool = True


@dataclass(frozen=True)
class SolverSettings:
    T: float = 50.0
    T_end: float = 400.0
    n_tau: int = 1401
    dt: float = 0.1
    max_iter: int = 4
    routes: tuple[str, ...] = ROUTES
    grid_n: int = 1024
    grid_L: float = 1000.0


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    final_state: FinalState
    profile: ProfileParams
    grid_policy: GridPolicy = GridPolicy()
    ladder: tuple[float, ...] = DEFAULT_LADDER
    residuals: ResidualSettings = ResidualSettings()
    solver: SolverSettings = SolverSettings()
    coeffs_n_max: int = 201
    free_times: tuple[float, ...] = (50.0, 100.0, 200.0)
    output_dir: str = "out"
    seed: int = 0
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def sha256(self) -> str:
        """Hash of the canonical config; ``output_dir`` is left out so moving the output keeps it."""
        body = {k: v for k, v in self.raw.items() if k != "output_dir"}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()

    @property
    def kappa(self) -> float:
        return self.final_state.kappa

    def with_overrides(self, *, ablate_psi: bool = False, variants: list[str] | None = None,
                       output_dir: str | None = None) -> "RunConfig":
        raw = json.loads(json.dumps(self.raw))
        if output_dir is not None:
            raw["output_dir"] = output_dir
        if ablate_psi:
            raw["ablate_psi"] = True
        if variants is not None:
            if self.experiment == "scatter":
                raw.setdefault("solver", {})["routes"] = list(variants)
            else:
                raw.setdefault("residuals", {})["variants"] = list(variants)
        return RunConfig.from_dict(raw)

    @property
    def ablate_psi(self) -> bool:
        return bool(self.raw.get("ablate_psi", False))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = json.loads(json.dumps(d))  # plain types only, detached copy
        _check_keys(d, {"experiment", "final_state", "profile", "grid", "ladder", "residuals", "solver", "coeffs",
                        "free", "output_dir", "seed", "ablate_psi"}, "config")
        exp = d.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")

        fsd = d.get("final_state", {}) or {}
        _check_keys(fsd, {"phi0", "phi1", "kappa", "normalize_y_norm", "normalize_amplitude"}, "final_state")
        try:
            fs = FinalState.from_dict({"phi0": fsd.get("phi0", []), "phi1": fsd.get("phi1", []),
                                       "kappa": _kappa(fsd.get("kappa"))})
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"final_state: {exc}") from None
        if "normalize_y_norm" in fsd and "normalize_amplitude" in fsd:
            raise ConfigError("final_state: give at most one of normalize_y_norm, normalize_amplitude")
        if "normalize_y_norm" in fsd or "normalize_amplitude" in fsd:
            if fs.is_zero:
                raise ConfigError("final_state: cannot normalize zero data")
            if "normalize_y_norm" in fsd:
                target = float(fsd["normalize_y_norm"])
                current = y_norm(fs)
            else:
                target = float(fsd["normalize_amplitude"])
                P, Q = p1_q1(fs, np.zeros((1, 2)))
                current = float(np.hypot(P, Q)[0])
            if not target > 0 or not current > 0:
                raise ConfigError("final_state: normalization target and current value must be positive")
            fs = fs.scaled(target / current)

        prd = d.get("profile", {}) or {}
        _check_keys(prd, {"lam", "d", "n_max", "delta_cone", "psi_mode", "ablate_psi"}, "profile")
        try:
            pp = ProfileParams(**prd)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"profile: {exc}") from None

        gd = d.get("grid", {}) or {}
        _check_keys(gd, {"n_cap", "L_factor", "h_target"}, "grid")
        try:
            policy = GridPolicy(**gd)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"grid: {exc}") from None

        try:
            ladder = tuple(float(t) for t in d.get("ladder", DEFAULT_LADDER))
            free_times = tuple(float(t) for t in (d.get("free", {}) or {}).get("times", (50.0, 100.0, 200.0)))
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"times must be numbers: {exc}") from None
        if any(b <= a for a, b in zip(ladder, ladder[1:])) or not ladder or ladder[0] <= 1:
            raise ConfigError("ladder must be strictly increasing times > 1")

        rd = d.get("residuals", {}) or {}
        _check_keys(rd, {"h_t", "variants", "per_n", "compare_psi_modes"}, "residuals")
        variants = tuple(rd.get("variants", ResidualSettings.variants))
        if not isinstance(d.get("ablate_psi", False), bool):
            raise ConfigError("ablate_psi must be true or false")
        if d.get("ablate_psi") and "no_psi" not in variants:
            variants = variants + ("no_psi",)
        for v in variants:
            if v not in VARIANTS:
                raise ConfigError(f"residuals: unknown variant {v!r}; choose from {VARIANTS}")
        pn = rd.get("per_n", {}) or {}
        _check_keys(pn, {"t", "grid_n", "ns"}, "residuals.per_n")
        ns = tuple(int(n) for n in pn.get("ns", ResidualSettings.per_n_ns))
        if any(n < 3 or n % 2 == 0 for n in ns):
            raise ConfigError("residuals.per_n.ns must be odd integers >= 3")
        h_t = float(rd.get("h_t", DEFAULT_H_T))
        if not h_t > 0:
            raise ConfigError("residuals.h_t must be positive")
        try:
            make_grid(int(pn.get("grid_n", 1024)), 1.0)
        except ValueError as exc:
            raise ConfigError(f"residuals.per_n.grid_n: {exc}") from None
        res = ResidualSettings(h_t, variants, float(pn.get("t", 50.0)), int(pn.get("grid_n", 1024)), ns,
                               bool(rd.get("compare_psi_modes", True)))

        sd = d.get("solver", {}) or {}
        _check_keys(sd, {"T", "T_end", "n_tau", "dt", "max_iter", "routes", "grid_n", "grid_L"}, "solver")
        try:
            sol = SolverSettings(**{k: (tuple(v) if k == "routes" else v) for k, v in sd.items()})
            sol = SolverSettings(float(sol.T), float(sol.T_end), int(sol.n_tau), float(sol.dt), int(sol.max_iter),
                                 tuple(str(r) for r in sol.routes), int(sol.grid_n), float(sol.grid_L))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from None
        if not math.e < sol.T < sol.T_end:
            raise ConfigError("solver: need e < T < T_end")
        if int(sol.n_tau) < 16:
            raise ConfigError("solver: n_tau must be >= 16")
        if not sol.dt > 0 or abs(round((sol.T_end - sol.T) / sol.dt) * sol.dt - (sol.T_end - sol.T)) > 1e-9 * sol.T_end:
            raise ConfigError("solver: dt must be positive and divide T_end - T")
        if int(sol.max_iter) < 1:
            raise ConfigError("solver: max_iter must be >= 1")
        for r in sol.routes:
            if r not in ROUTES:
                raise ConfigError(f"solver: unknown route {r!r}; choose from {ROUTES}")
        try:
            make_grid(int(sol.grid_n), float(sol.grid_L))
        except ValueError as exc:
            raise ConfigError(f"solver grid: {exc}") from None
        if sol.grid_L <= 2 * sol.T_end * (1 - (pp.resolved(fs).delta_cone if not fs.is_zero else 0.0)):
            raise ConfigError("solver: grid_L must exceed the light-cone diameter at T_end")

        cd = d.get("coeffs", {}) or {}
        _check_keys(cd, {"n_max"}, "coeffs")
        fd = d.get("free", {}) or {}
        _check_keys(fd, {"times"}, "free")
        if len(free_times) < 2 or any(t <= 1 for t in free_times):
            raise ConfigError("free.times needs at least two times > 1")
        n_coef = int(cd.get("n_max", 201))
        if n_coef < 5:
            raise ConfigError("coeffs.n_max must be >= 5")

        return cls(exp, fs, pp, policy, ladder, res, sol, n_coef, free_times, str(d.get("output_dir", "out")),
                   int(d.get("seed", 0)), raw=d)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return RunConfig.from_dict(data)
