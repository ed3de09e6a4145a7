import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgscatter.decomposition import fourier_coeff_quadrature
from kgscatter.final_data import FinalState, atoms_from_triples, ft_phi
from kgscatter.profile import (ProfileParams, ProfileSampler, a_eval, amplitude_bound, auto_delta_cone, beta,
                               corrector_coeff, fourier_coeff, hyperbolic, local_profile, p1_q1, pn_qn, psi,
                               u_ap_eval, v_ap_eval)
from kgscatter.residuals import power_exponent
from kgscatter.spectral import make_grid

PP = ProfileParams()


def random_points(t, n=400, seed=0, frac=0.9):
    r = np.random.default_rng(seed)
    rad = frac * t * np.sqrt(r.random(n))
    th = 2 * np.pi * r.random(n)
    return np.stack([rad * np.cos(th), rad * np.sin(th)], axis=-1)


# --- parameters ---------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(lam=0.0), dict(d=0.5), dict(d=1.0), dict(n_max=4), dict(n_max=1),
                                dict(delta_cone=0.0), dict(delta_cone=1.0), dict(psi_mode="other")])
def test_params_reject(kw):
    with pytest.raises(ValueError):
        ProfileParams(**kw)


def test_psi_factor_modes():
    assert ProfileParams(lam=-1.0, psi_mode="literal").psi_factor == 1.0
    assert ProfileParams(lam=-1.0, psi_mode="lambda").psi_factor == -1.0
    assert ProfileParams(lam=1.0, psi_mode="lambda").psi_factor == ProfileParams(psi_mode="literal").psi_factor
    assert ProfileParams(ablate_psi=True).psi_factor == 0.0


# --- hyperbolic coordinates ---------------------------------------------------------

def test_hyperbolic_examples():
    h = hyperbolic(5.0, [3.0, 0.0])
    np.testing.assert_allclose(h.mu, [0.75, 0.0])
    assert h.bracket == pytest.approx(1.25)
    h0 = hyperbolic(1.0, [0.0, 0.0])
    assert np.all(h0.mu == 0) and h0.bracket == 1.0
    assert not hyperbolic(1.0, [2.0, 0.0]).inside


def test_hyperbolic_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        hyperbolic(0.0, [0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1.5, 500), u=st.floats(0, 0.95), th=st.floats(0, 2 * math.pi))
def test_bracket_identity(t, u, th):
    x = [u * t * math.cos(th), u * t * math.sin(th)]
    h = hyperbolic(t, x)
    mu2 = float(np.sum(h.mu**2))
    assert h.inside
    assert h.bracket**2 - mu2 == pytest.approx(1.0, abs=1e-14 * h.bracket**2)
    assert h.bracket == pytest.approx(t / math.sqrt(t * t - u * u * t * t), rel=1e-12)


# --- amplitude and phase ------------------------------------------------------------

def test_p1_q1_symmetry_cases():
    mu = np.random.default_rng(1).normal(size=(20, 2))
    b2 = 1 + np.sum(mu**2, axis=-1)
    only0 = FinalState(atoms_from_triples([(1.0, (0, 0), 1.5)]), (), 0.2)
    P, Q = p1_q1(only0, mu)
    assert np.all(P == 0)
    np.testing.assert_allclose(Q, b2 * ft_phi(only0, 0, mu).real)
    only1 = FinalState((), atoms_from_triples([(1.0, (0, 0), 1.5)]), 0.2)
    P, Q = p1_q1(only1, mu)
    np.testing.assert_allclose(P, -np.sqrt(b2) * ft_phi(only1, 1, mu).real)
    assert np.all(Q == 0)
    P, Q = p1_q1(FinalState(), mu)
    assert np.all(P == 0) and np.all(Q == 0)


def test_psi_examples():
    assert np.all(psi(FinalState(), np.zeros((3, 2))) == 0)
    a, s = 1.0, 1.3
    fs = FinalState(atoms_from_triples([(a, (0, 0), s)]), (), 1.0 / (2 * math.pi * a * s * s))
    assert float(psi(fs, [0.0, 0.0])) == pytest.approx(-0.424413, abs=1e-6)


def test_psi_square_expansion(offset_state):
    mu = np.random.default_rng(2).normal(scale=0.4, size=(100, 2))
    b = np.sqrt(1 + np.sum(mu**2, axis=-1))
    f0, f1 = ft_phi(offset_state, 0, mu), ft_phi(offset_state, 1, mu)
    expanded = (16 / (9 * math.pi**2)) * b**2 * (np.abs(f0) ** 2 + np.abs(f1) ** 2 / b**2
                                                 + (2 / b) * np.imag(f0 * np.conj(f1)))
    np.testing.assert_allclose(psi(offset_state, mu) ** 2, expanded, rtol=1e-12)


def test_beta_branch():
    assert float(beta(1.0, 0.0)) == pytest.approx(2 * math.pi)
    assert float(beta(0.0, 1.0)) == pytest.approx(math.pi / 2)
    assert float(beta(-1.0, -1.0)) == pytest.approx(5 * math.pi / 4)
    with pytest.raises(ValueError):
        beta(0.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(P=st.floats(-10, 10), Q=st.floats(-10, 10))
def test_beta_reproduces_direction(P, Q):
    R = math.hypot(P, Q)
    if R < 1e-6:
        return
    b = float(beta(P, Q))
    assert 0 < b <= 2 * math.pi
    assert math.cos(b) == pytest.approx(P / R, abs=1e-12)
    assert math.sin(b) == pytest.approx(Q / R, abs=1e-12)


# --- Fourier coefficients -----------------------------------------------------------

def test_fourier_coeff_values():
    assert fourier_coeff(1) == pytest.approx(8 / (3 * math.pi), rel=1e-15)
    assert fourier_coeff(1) == pytest.approx(0.848826, abs=1e-6)
    assert fourier_coeff(2) == 0.0 and fourier_coeff(0) == 0.0
    assert fourier_coeff(3) == pytest.approx(0.169765, abs=1e-6)
    assert fourier_coeff(5) == pytest.approx(-8 / (105 * math.pi), rel=1e-15)
    assert fourier_coeff(5) == pytest.approx(fourier_coeff_quadrature(5), abs=1e-12)
    with pytest.raises(ValueError):
        fourier_coeff(-1)


def test_parseval():
    n = np.arange(1, 202)
    assert np.sum(fourier_coeff(n) ** 2) == pytest.approx(0.75, abs=1e-4)


def test_series_reconstruction_tail_halves():
    th = np.linspace(0, 2 * np.pi, 4001)
    exact = np.abs(np.cos(th)) * np.cos(th)

    def sup_err(N):
        n = np.arange(1, N + 1)
        return np.max(np.abs(np.cos(np.outer(th, n)) @ fourier_coeff(n) - exact))

    errs = {N: sup_err(N) for N in (5, 11, 21, 41, 81)}
    for N, half in ((11, 5), (21, 11), (41, 21), (81, 41)):
        assert errs[N] <= 0.5 * errs[half]


def test_corrector_coeff_decay():
    ns = np.arange(5, 102, 2)
    assert power_exponent(ns, np.abs(corrector_coeff(ns))) >= 4.8
    ratio = np.abs(corrector_coeff(ns)) * ns**5.0 * math.pi / 8
    assert np.all(np.diff(ratio) < 0) and ratio[0] < 1.25 and ratio[-1] == pytest.approx(1.0, abs=1e-3)


def test_pn_qn_examples():
    mu = np.zeros((1, 2))
    for n in (2, 4, 10):
        P, Q = pn_qn(n, FinalState(atoms_from_triples([(1.0, (0, 0), 1.0)]), (), 0.3), mu, 1.0)
        assert np.all(P == 0) and np.all(Q == 0)
    # phi1 chosen so P1 = 1, Q1 = 0 at mu = 0: beta = 2 pi
    s = 1.0
    fs = FinalState((), atoms_from_triples([(1.0, (0, 0), s)]), -1.0 / (2 * math.pi * s * s))
    P1, Q1 = p1_q1(fs, mu)
    assert P1.item() == pytest.approx(1.0) and Q1.item() == 0.0
    P3, Q3 = pn_qn(3, fs, mu, 1.0)
    assert P3.item() == pytest.approx(-1 / (15 * math.pi), rel=1e-12)
    assert P3.item() == pytest.approx(-0.0212207, abs=1e-7)
    assert Q3.item() == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        pn_qn(1, fs, mu, 1.0)


def test_pn_qn_modulus_is_g_n(offset_state):
    mu = np.random.default_rng(3).normal(scale=0.3, size=(50, 2))
    P1, Q1 = p1_q1(offset_state, mu)
    for n in (3, 5, 9):
        P, Q = pn_qn(n, offset_state, mu, -1.0)
        np.testing.assert_allclose(np.hypot(P, Q), abs(corrector_coeff(n)) * (P1**2 + Q1**2), rtol=1e-12)


def test_pn_qn_degenerate_amplitude_is_zero():
    P, Q = pn_qn(3, FinalState(), np.zeros((2, 2)), 1.0)
    assert np.all(P == 0) and np.all(Q == 0)


# --- evaluators ---------------------------------------------------------------------

def direct_profile(fs, pp, t, x):
    """``(u_ap, v_ap)`` summed literally as ``P_n cos(n alpha) + Q_n sin(n alpha)``."""
    h = hyperbolic(t, x, pp.delta_cone)
    mu, b = h.mu[h.inside], h.bracket[h.inside]
    alpha = t / b + pp.psi_factor * psi(fs, mu) * math.log(t)
    P1, Q1 = p1_q1(fs, mu)
    u = (P1 * np.cos(alpha) + Q1 * np.sin(alpha)) / t
    v = np.zeros_like(u)
    for n in range(2, pp.n_max + 1):
        Pn, Qn = pn_qn(n, fs, mu, pp.lam)
        v += Pn * np.cos(n * alpha) + Qn * np.sin(n * alpha)
    return h.inside, u, v / t**2


@pytest.mark.parametrize("lam,mode", [(1.0, "lambda"), (-1.0, "literal"), (-1.0, "lambda"), (0.5, "lambda")])
def test_evaluators_match_direct_summation(offset_state, lam, mode):
    pp = ProfileParams(lam=lam, psi_mode=mode).resolved(offset_state)
    t = 60.0
    x = random_points(t)
    inside, u, v = direct_profile(offset_state, pp, t, x)
    scale = np.max(np.abs(u))
    np.testing.assert_allclose(u_ap_eval(offset_state, pp, t, x)[inside], u, atol=1e-12 * scale)
    np.testing.assert_allclose(v_ap_eval(offset_state, pp, t, x)[inside], v, atol=1e-12 * scale)
    assert np.all(u_ap_eval(offset_state, pp, t, x)[~inside] == 0)


def test_zero_data_gives_zero_fields():
    x = random_points(20.0, 50)
    for f in (u_ap_eval, v_ap_eval, a_eval):
        assert np.all(f(FinalState(), PP, 20.0, x) == 0)


def test_outside_cone_is_zero(offset_state):
    x = np.array([[30.0, 0.0], [0.0, -25.0], [40.0, 40.0]])
    assert np.all(u_ap_eval(offset_state, PP, 20.0, x) == 0)
    assert np.all(a_eval(offset_state, PP, 20.0, x) == 0)


def test_time_must_exceed_one(offset_state):
    with pytest.raises(ValueError):
        u_ap_eval(offset_state, PP, 1.0, [[0.0, 0.0]])


def test_envelope_bounds(offset_state):
    pp = PP.resolved(offset_state)
    t = 80.0
    x = random_points(t, 2000)
    inside, lp = local_profile(offset_state, pp, t, x)
    u = u_ap_eval(offset_state, pp, t, x)[inside]
    assert np.all(np.abs(u) <= lp.R / t * (1 + 1e-12))
    v = v_ap_eval(offset_state, pp, t, x)
    gsum = float(np.sum(np.abs(corrector_coeff(np.arange(3, pp.n_max + 1, 2)))))
    assert np.max(np.abs(v)) <= np.max(lp.R) ** 2 * gsum / t**2 * (1 + 1e-12)


def test_truncation_tail(offset_state):
    t = 50.0
    x = random_points(t, 2000)
    p41 = ProfileParams(n_max=41).resolved(offset_state)
    p81 = ProfileParams(n_max=81).resolved(offset_state)
    inside, lp = local_profile(offset_state, p41, t, x)
    diff = np.abs(v_ap_eval(offset_state, p41, t, x) - v_ap_eval(offset_state, p81, t, x))
    bound = (8 / math.pi) * 41.0**-4 * np.max(lp.R) ** 2 / t**2
    assert np.max(diff) < bound


def test_a_is_u_plus_v(offset_state):
    t = 70.0
    x = random_points(t, 500)
    pp = PP.resolved(offset_state)
    a = a_eval(offset_state, pp, t, x)
    np.testing.assert_allclose(a - u_ap_eval(offset_state, pp, t, x), v_ap_eval(offset_state, pp, t, x),
                               atol=1e-18)


def test_a_sup_decays_like_inverse_time(offset_state):
    pp = PP.resolved(offset_state)
    C = []
    for t in (50.0, 100.0, 200.0, 400.0):
        C.append(t * np.max(np.abs(a_eval(offset_state, pp, t, random_points(t, 4000, frac=0.3)))))
    assert max(C) / min(C) < 1.5


def test_continuity_at_cutoff(offset_state):
    pp = PP.resolved(offset_state)
    t = 100.0
    rc = t * (1 - pp.delta_cone)
    th = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    ring = np.stack([(rc - 1e-9) * np.cos(th), (rc - 1e-9) * np.sin(th)], axis=-1)
    peak = np.max(np.abs(u_ap_eval(offset_state, pp, t, random_points(t, 4000, frac=0.3))))
    assert np.max(np.abs(u_ap_eval(offset_state, pp, t, ring))) < 1e-8 * peak


def test_auto_delta_cone_bounds_amplitude(offset_state):
    dc = auto_delta_cone(offset_state)
    assert 0 < dc < 1
    rc = (1 - dc) / math.sqrt(1 - (1 - dc) ** 2)  # |mu| at the cutoff radius
    peak = np.max(np.hypot(*p1_q1(offset_state, random_points(1.0, 4000, frac=0.2))))
    assert float(amplitude_bound(offset_state, rc)) <= 1e-12 * peak * 1.01


def test_shared_phase_base_matches_direct(offset_state):
    pp = PP.resolved(offset_state)
    t = 123.0
    x = random_points(t, 300, frac=0.7)
    inside, direct = local_profile(offset_state, pp, t + 0.01, x)
    _, shared = local_profile(offset_state, pp, t + 0.01, x, t_base=t)
    np.testing.assert_allclose(shared.u(), direct.u(), atol=1e-13 * np.max(np.abs(direct.u())))


def test_analytic_time_derivative(offset_state):
    pp = ProfileParams(lam=1.0).resolved(offset_state)
    t, h = 75.0, 1e-3
    x = random_points(t, 300, frac=0.7)
    _, lp = local_profile(offset_state, pp, t, x)
    du, dv = lp.dt_u_v()
    _, lpp = local_profile(offset_state, pp, t + h, x, t_base=t)
    _, lpm = local_profile(offset_state, pp, t - h, x, t_base=t)
    fd_u = (lpp.u() - lpm.u()) / (2 * h)
    fd_v = (lpp.v() - lpm.v()) / (2 * h)
    assert np.max(np.abs(du - fd_u)) <= 1e-6 * np.max(np.abs(du))
    assert np.max(np.abs(dv - fd_v)) <= 1e-5 * np.max(np.abs(dv))


def test_sampler_matches_pointwise(offset_state):
    grid = make_grid(64, 150.0)
    pp = PP.resolved(offset_state)
    gp = ProfileSampler(offset_state, pp, grid).at(55.0)
    X, Y = grid.mesh()
    pts = np.stack([X, Y], axis=-1)
    np.testing.assert_allclose(gp.A(), a_eval(offset_state, pp, 55.0, pts), atol=1e-18)
    np.testing.assert_allclose(gp.u(), u_ap_eval(offset_state, pp, 55.0, pts), atol=1e-18)
