"""Command-line entry point: ``kgscatter <subcommand> --config run.yaml``.

Exit codes: 0 success, 2 invalid config or arguments, 3 numerical-quality abort
(aliasing, blow-up, Picard divergence), 4 file-system errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .decomposition import fourier_coeff_quadrature
from .fieldio import dumps_json, save_field
from .profile import corrector_coeff, fourier_coeff
from .residuals import LadderResult, per_harmonic_norms, power_exponent, residual_ladder
from .scattering import (add_profile, backward_evolve, calibrate_kappa, convergence_report, evolve_free,
                         free_asymptotic_error, leading_term, picard_solve, two_route_agreement)
from .spectral import NumericalAbort, make_grid, set_threads

log = logging.getLogger("kgscatter")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, cfg: RunConfig, columns: list[str], rows: list[list]) -> None:
    lines = [f"# config_sha256={cfg.sha256}", f"# kappa={cfg.kappa!r}", ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, cfg: RunConfig, payload: dict) -> None:
    body = {"config_sha256": cfg.sha256, "kappa": cfg.kappa}
    body.update(payload)
    path.write_text(dumps_json(body))


def _manifest_base(cfg: RunConfig) -> dict:
    pp = cfg.profile.resolved(cfg.final_state) if not cfg.final_state.is_zero else cfg.profile
    return {"experiment": cfg.experiment, "profile": pp.to_dict(), "final_state": cfg.final_state.to_dict()}


# --- subcommands ------------------------------------------------------------------

def cmd_coeffs(cfg: RunConfig, out: Path) -> int:
    rows, partial = [], 0.0
    for n in range(cfg.coeffs_n_max + 1):
        c = fourier_coeff(n)
        cq = fourier_coeff_quadrature(n)
        partial += c * c if n >= 1 else 0.0
        rows.append([n, c, cq, abs(c - cq), partial, corrector_coeff(n)])
    write_csv(out / "coeffs.csv", cfg, ["n", "c_closed", "c_quadrature", "abs_diff", "parseval_partial", "g_unit"],
              rows)
    ns = [n for n in range(5, min(101, cfg.coeffs_n_max) + 1, 2)]
    write_json(out / "coeffs.json", cfg, {
        "max_abs_diff": max(r[3] for r in rows),
        "parseval_sum": partial,
        "parseval_target": 0.75,
        "g_decay_exponent": power_exponent(ns, [abs(corrector_coeff(n)) for n in ns]),
        "g_decay_window": [ns[0], ns[-1]],
    })
    return EXIT_OK


def _zero_ladder(cfg: RunConfig) -> LadderResult:
    from .residuals import ResidualSample
    res = LadderResult()
    for t in cfg.ladder:
        g = cfg.grid_policy.grid_for(t)
        for v in cfg.residuals.variants:
            res.samples.append(ResidualSample(t, v, 0.0, 0.0, g.n, g.L, cfg.residuals.h_t))
    return res


def _psi_mode_comparison(cfg: RunConfig, pp) -> dict:
    """Resonant residual ``(box+1) u_ap - N_r`` under both phase conventions.

    The convention that cancels the resonant term shows the faster decay.
    """
    modes = {}
    for mode in ("literal", "lambda"):
        alt = residual_ladder(cfg.final_state, replace(pp, psi_mode=mode), cfg.ladder, ("uap_vs_Nr",),
                              cfg.grid_policy, cfg.residuals.h_t)
        ser = alt.series("uap_vs_Nr")
        modes[mode] = {"l2": [y for _, y in ser],
                       "fit_q0": alt.fit("uap_vs_Nr", 0).to_dict() if len(ser) >= 4 else None}
    return {"times": list(cfg.ladder), "lam": pp.lam, "in_use": pp.psi_mode, **modes}


def cmd_residuals(cfg: RunConfig, out: Path) -> int:
    fs, rs = cfg.final_state, cfg.residuals
    if fs.is_zero:
        res = _zero_ladder(cfg)
        extra = {}
    else:
        pp = cfg.profile.resolved(fs)
        res = residual_ladder(fs, pp, cfg.ladder, rs.variants, cfg.grid_policy, rs.h_t)
        extra = {"eta": res.eta(pp.d), "d": pp.d}
        if rs.per_n_ns:
            t = rs.per_n_t
            grid = make_grid(rs.per_n_grid, cfg.grid_policy.L_factor * t)
            table = per_harmonic_norms(fs, pp, t, grid, rs.per_n_ns, rs.h_t)
            ns = sorted(table)
            extra["per_n"] = {
                "t": t, "grid_n": grid.n, "box_L": grid.L,
                "rows": [{"n": n, "with_corrector": table[n][0], "without_corrector": table[n][1],
                          "reduction": table[n][1] / table[n][0]} for n in ns],
                "decay_exponent": power_exponent(ns, [table[n][0] for n in ns]) if len(ns) >= 2 else None,
            }
        if rs.compare_psi_modes:
            extra["psi_modes"] = _psi_mode_comparison(cfg, pp)
    rows = [[s.variant, s.t, s.l2, s.linf, s.grid_n, s.box_L, s.h_t]
            for s in sorted(res.samples, key=lambda s: (s.variant, s.t))]
    write_csv(out / "residuals.csv", cfg, ["variant", "t", "l2", "linf", "grid_n", "box_L", "h_t"], rows)
    manifest = _manifest_base(cfg)
    manifest.update({"fits": res.fits(), "variants": list(rs.variants), "ladder": list(cfg.ladder), **extra})
    write_json(out / "residuals.json", cfg, manifest)
    return EXIT_OK


def cmd_scatter(cfg: RunConfig, out: Path) -> int:
    fs, sol = cfg.final_state, cfg.solver
    pp = cfg.profile.resolved(fs)
    grid = make_grid(sol.grid_n, sol.grid_L)
    ladder = [t for t in cfg.ladder if sol.T <= t <= sol.T_end]
    payload = _manifest_base(cfg)
    payload["grid"] = {"n": grid.n, "L": grid.L}
    status = EXIT_OK
    u_ev = u_pic = None
    if "evolve" in sol.routes:
        u_ev = backward_evolve(fs, pp, sol.T_end, sol.T, sol.dt, grid, ladder)
        payload["evolve"] = convergence_report(u_ev, fs, pp).to_dict()
        if cfg.ablate_psi:
            payload["evolve_no_psi"] = convergence_report(u_ev, fs, replace(pp, ablate_psi=True)).to_dict()
    if "picard" in sol.routes:
        v, rep = picard_solve(fs, pp, sol.T, sol.T_end, sol.n_tau, sol.max_iter, grid, ladder)
        u_pic = add_profile(v, fs, pp)
        payload["picard"] = rep.to_dict()
        payload["picard_convergence"] = convergence_report(u_pic, fs, pp).to_dict()
        if rep.diverged:
            status = EXIT_NUMERICAL
    if pp.lam < 0 and not fs.is_zero:
        payload["psi_modes"] = _psi_mode_comparison(cfg, pp)
        for mode in ("literal", "lambda"):
            fit = payload["psi_modes"][mode]["fit_q0"]
            log.info("lam < 0, psi_mode=%s: resonant residual exponent %s", mode, fit and round(fit["p"], 3))
    rows = []
    if u_ev is not None and u_pic is not None:
        agree = two_route_agreement(u_pic, u_ev, fs, pp)
        rows = [[r["t"], r["diff_l2"], r["ref_l2"], r["rel"]] for r in agree]
        payload["agreement"] = agree
    write_csv(out / "agreement.csv", cfg, ["t", "diff_l2", "ref_l2", "rel"], rows)
    write_json(out / "scatter.json", cfg, payload)
    if status != EXIT_OK:
        log.error("Picard iteration diverged; see scatter.json")
    return status


def cmd_calibrate_kappa(cfg: RunConfig, out: Path) -> int:
    if cfg.final_state.is_zero:
        raise ConfigError("calibrate-kappa needs non-zero data")
    cal = calibrate_kappa(cfg.final_state, cfg.free_times, cfg.grid_policy)
    write_json(out / "kappa.json", cfg, {"calibration": cal.to_dict()})
    return EXIT_OK


def cmd_evolve_free(cfg: RunConfig, out: Path) -> int:
    fs = cfg.final_state
    rows = []
    for t in cfg.free_times:
        grid = cfg.grid_policy.grid_for(t)
        err = free_asymptotic_error(fs, t, grid) if not fs.is_zero else 0.0
        lead = leading_term(fs, t, grid) if not fs.is_zero else None
        ref = float(np.sqrt(np.sum(lead.values**2)) * grid.h) if lead is not None else 0.0
        rows.append([t, err, t * err, ref, grid.n, grid.L])
        save_field(out / f"free_t{t:g}.kgf", evolve_free(fs, t, grid),
                   {"t": t, "kind": "free_evolution", "config_sha256": cfg.sha256, "kappa": cfg.kappa})
    write_csv(out / "free.csv", cfg, ["t", "l2_error", "t_times_error", "leading_l2", "grid_n", "box_L"], rows)
    return EXIT_OK


COMMANDS = {
    "coeffs": cmd_coeffs,
    "residuals": cmd_residuals,
    "scatter": cmd_scatter,
    "calibrate-kappa": cmd_calibrate_kappa,
    "evolve-free": cmd_evolve_free,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgscatter", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--threads", type=int, default=1, help="FFT worker threads")
        sp.add_argument("--ablate-psi", action="store_true", help="add the phase-free ablation")
        sp.add_argument("--variant", help="comma-separated residual variants (or routes for scatter)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        set_threads(args.threads)
        cfg = load_config(args.config)
        variants = [v.strip() for v in args.variant.split(",") if v.strip()] if args.variant else None
        cfg = cfg.with_overrides(ablate_psi=args.ablate_psi, variants=variants, output_dir=args.out)
        if cfg.experiment != args.command:
            cfg = RunConfig.from_dict({**cfg.raw, "experiment": args.command})
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read configuration: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("invalid arguments: %s", exc)
        return EXIT_CONFIG
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except NumericalAbort as exc:
        log.error("numerical abort: %s", exc)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
