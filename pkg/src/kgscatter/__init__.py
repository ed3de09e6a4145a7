"""Numerical laboratory for modified scattering of the 2D quadratic Klein-Gordon equation.

``(box + 1) u = lam |u| u`` with final data given as Gaussian atoms.  The
package builds the corrected asymptotic profile ``A = u_ap + v_ap``, measures
its residuals against the equation, and solves the final value problem by a
Picard sweep and by backward time stepping.
"""
from .decomposition import QuadraticNonlinearity, apply_n, nonresonant_part, resonant_part, split_quadratic
from .final_data import CALIBRATED_KAPPA, PROVISIONAL_KAPPA, FinalState, GaussianAtom, y_norm
from .profile import (HyperbolicCoords, ProfileParams, ProfileSampler, a_eval, beta, fourier_coeff, hyperbolic,
                      p1_q1, pn_qn, psi, u_ap_eval, v_ap_eval)
from .residuals import (AliasingError, GridPolicy, RateFit, ResidualSample, cross_term, error_function,
                        lemma42_residual, lemma43_residual, rate_fit, residual_ladder)
from .scattering import (ConvergenceReport, PicardReport, TimeSampledField, backward_evolve, calibrate_kappa,
                         convergence_report, g_apply, picard_solve, strichartz_diagnostic)
from .spectral import Grid2D, NumericalAbort, RealField, SpectralMultiplier, make_grid, set_threads

__version__ = "0.1.0"

__all__ = [
    "AliasingError", "CALIBRATED_KAPPA", "ConvergenceReport", "FinalState", "GaussianAtom", "Grid2D", "GridPolicy",
    "HyperbolicCoords", "NumericalAbort", "PROVISIONAL_KAPPA", "PicardReport", "ProfileParams", "ProfileSampler",
    "QuadraticNonlinearity", "RateFit", "RealField", "ResidualSample", "SpectralMultiplier", "TimeSampledField",
    "a_eval", "apply_n", "backward_evolve", "beta", "calibrate_kappa", "convergence_report", "cross_term",
    "error_function", "fourier_coeff", "g_apply", "hyperbolic", "lemma42_residual", "lemma43_residual", "make_grid",
    "nonresonant_part", "p1_q1", "picard_solve", "pn_qn", "psi", "rate_fit", "residual_ladder", "resonant_part",
    "set_threads", "split_quadratic", "strichartz_diagnostic", "u_ap_eval", "v_ap_eval", "y_norm",
]
