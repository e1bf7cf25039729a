import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from d2dcran.config import SystemConfig
from d2dcran.geometry import sample_ppp
from d2dcran.model import (
    band_intensities,
    beta_factor,
    cellular_log_margin,
    dvp_cellular_avg,
    dvp_cellular_conditional,
    dvp_outband_conditional,
    dvp_overlay_conditional,
    refined_intensities,
    refined_intensities_integrated,
    sinc_norm,
    sir_target,
    sir_targets,
)

ALPHA = st.floats(2.05, 6.0)


@pytest.mark.parametrize("x, expected", [(1e-9, 1.0), (0.5, 2 / math.pi), (2 / 3.5, 0.543076)])
def test_sinc_values(x, expected):
    assert sinc_norm(x) == pytest.approx(expected, abs=1e-5)


@pytest.mark.parametrize("x", [0.0, 1.0, -0.2, 1.3])
def test_sinc_domain(x):
    with pytest.raises(ValueError):
        sinc_norm(x)


@pytest.mark.parametrize("size, expected", [(0.0, 0.0), (2000.0, 1.0), (1000.0, math.sqrt(2) - 1), (6000.0, 7.0)])
def test_sir_target_values(size, expected):
    # 2 kHz for one second of budget
    assert sir_target(size, 2000.0, 1.5, 0.5) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_sir_target_small_exponent_keeps_precision():
    g = sir_target(1e-6, 1.0, 1.0, 0.0)
    assert g == pytest.approx(1e-6 * math.log(2), rel=1e-9)


def test_sir_target_rejects_empty_budget():
    with pytest.raises(ValueError):
        sir_target(1.0, 1.0, 0.1, 0.1)


def test_cellular_conditional_half_point():
    alpha, lam = 3.5, 1e-5
    k = 2 / alpha
    d = math.sqrt(math.log(2) * sinc_norm(k) / (math.pi * lam))
    assert dvp_cellular_conditional(d, 1.0, lam, alpha) == pytest.approx(0.5, rel=1e-12)
    assert dvp_cellular_conditional(0.0, 1.0, lam, alpha) == 0.0


def test_cellular_average_reference_value():
    assert dvp_cellular_avg(0.41421, 3.5) == pytest.approx(0.52669, abs=1e-4)
    assert dvp_cellular_avg(0.0, 3.5) == 0.0


def _average_by_quadrature(gamma, lam, alpha):
    # integrate the conditional DVP against the nearest-RRH distance density
    def integrand(r):
        return dvp_cellular_conditional(r, gamma, lam, alpha) * 2 * math.pi * lam * r * math.exp(-math.pi * lam * r * r)

    scale = 1.0 / math.sqrt(math.pi * lam)
    val, _ = integrate.quad(integrand, 0.0, 40 * scale, epsabs=1e-13, epsrel=1e-12, limit=200,
                            points=[scale])
    return val


def test_cellular_average_matches_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(20):
        gamma = 10 ** rng.uniform(-3, 2)
        lam = 10 ** rng.uniform(-7, -3)
        alpha = rng.uniform(2.2, 6.0)
        assert abs(dvp_cellular_avg(gamma, alpha) - _average_by_quadrature(gamma, lam, alpha)) < 1e-8


@given(st.floats(1e-6, 1e4), ALPHA)
def test_log_margin_matches_direct_form(gamma, alpha):
    t = dvp_cellular_avg(gamma, alpha)
    if t < 0.999:
        assert cellular_log_margin(gamma, alpha) == pytest.approx(-math.log1p(-t), rel=1e-9)


@given(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3), ALPHA)
def test_cellular_average_monotone_in_gamma(g1, g2, alpha):
    lo, hi = sorted((g1, g2))
    assert dvp_cellular_avg(lo, alpha) <= dvp_cellular_avg(hi, alpha)


def test_band_intensity_reference_value(cfg):
    lam = band_intensities(cfg, 20.0, 40.0)
    rate = cfg.chp * math.pi * cfg.lambda_dp
    assert lam.lambda_ou == pytest.approx(1e-3 * (1 - math.exp(-rate * 400)), rel=1e-12)
    assert lam.lambda_ol == pytest.approx(1e-3 * (math.exp(-rate * 400) - math.exp(-rate * 1600)), rel=1e-12)
    assert lam.total == pytest.approx(2.22232e-4, rel=1e-5)


def test_band_intensities_agree_with_void_probability():
    # P[no caching DP within d of the origin] from direct PPP draws
    cfg = SystemConfig(lambda_dp=1e-3, chp=0.5)
    d_ou, d_ol = 15.0, 30.0
    rng = np.random.default_rng(11)
    n, near, ring = 4000, 0, 0
    for _ in range(n):
        pts = sample_ppp(cfg.chp * cfg.lambda_dp, 60.0, rng).positions
        r = np.min(np.hypot(pts[:, 0], pts[:, 1])) if len(pts) else np.inf
        near += r <= d_ou
        ring += d_ou < r <= d_ol
    lam = band_intensities(cfg, d_ou, d_ol)
    for count, target in ((near, lam.lambda_ou), (ring, lam.lambda_ol)):
        p = target / cfg.lambda_dc
        assert abs(count / n - p) < 4 * math.sqrt(p * (1 - p) / n)


@given(st.floats(0, 500), st.floats(0, 500), st.floats(0, 500))
def test_band_intensities_monotone(a, b, c):
    cfg = SystemConfig()
    d_ou, d_mid, d_ol = sorted((a, b, c))
    lo, hi = band_intensities(cfg, d_ou, d_mid), band_intensities(cfg, d_ou, d_ol)
    assert lo.lambda_ou == hi.lambda_ou
    assert lo.lambda_ol <= hi.lambda_ol
    assert hi.total <= cfg.lambda_dc * (1 + 1e-12)


def test_band_intensities_reject_inverted_thresholds(cfg):
    with pytest.raises(ValueError):
        band_intensities(cfg, 5.0, 4.0)


def _simulated_dvp(d, p_tx, gamma, alpha, fields, n, rng, radius=2000.0):
    """Fraction of draws with SIR < gamma at a receiver at the origin."""
    fails = 0
    for _ in range(n):
        interference = 0.0
        for lam, power in fields:
            pts = sample_ppp(lam, radius, rng).positions
            r2 = np.einsum("ij,ij->i", pts, pts)
            interference += power * np.sum(rng.exponential(size=len(r2)) * r2 ** (-alpha / 2))
        signal = p_tx * rng.exponential() * d**-alpha
        fails += signal < gamma * interference
    return fails / n


def test_outband_dvp_against_simulated_sir():
    cfg = SystemConfig(d_max=0.5, proc_delay=0.1, lambda_ext=2e-4)
    gamma = sir_targets(cfg).gamma_ou
    rng = np.random.default_rng(5)
    lam_ou, d = 5e-5, 20.0
    n = 3000
    emp = _simulated_dvp(d, 2.0, gamma, cfg.alpha, [(lam_ou, cfg.p_max), (cfg.lambda_ext, cfg.p_ext)], n, rng)
    theory = dvp_outband_conditional(d, cfg, lam_ou, 2.0, cfg.p_max**cfg.exponent)
    assert abs(emp - theory) < 3 * math.sqrt(theory * (1 - theory) / n) + 0.005


def test_overlay_dvp_against_simulated_sir():
    cfg = SystemConfig(d_max=0.5, proc_delay=0.1)
    gamma = sir_targets(cfg).gamma_ol
    rng = np.random.default_rng(6)
    lam_ol, d = 2e-4, 30.0
    n = 3000
    emp = _simulated_dvp(d, 1.0, gamma, cfg.alpha, [(lam_ol, cfg.p_max)], n, rng)
    theory = dvp_overlay_conditional(d, cfg, lam_ol, 1.0, cfg.p_max**cfg.exponent)
    assert abs(emp - theory) < 3 * math.sqrt(theory * (1 - theory) / n) + 0.005


@given(st.floats(0.1, 1000), st.floats(0.1, 1000), st.floats(1e-7, 1e-3))
def test_d2d_dvp_increases_with_distance(d1, d2, lam):
    cfg = SystemConfig(d_max=0.5, proc_delay=0.1)
    lo, hi = sorted((d1, d2))
    m = cfg.p_max**cfg.exponent
    assert dvp_outband_conditional(lo, cfg, lam, 1.0, m) <= dvp_outband_conditional(hi, cfg, lam, 1.0, m)


def test_refined_intensities_follow_published_expression():
    cfg = SystemConfig(d_max=0.5, proc_delay=0.1, lambda_bs=1e-4)
    d_ou, d_ol = 27.0, 41.0
    lam = band_intensities(cfg, d_ou, d_ol)
    ref = refined_intensities(cfg, d_ou, d_ol, lam.lambda_ou, lam.lambda_ol)
    k = cfg.exponent
    reach = 12 / (math.pi**3 * cfg.lambda_bs**3) * (cfg.p_max / beta_factor(cfg, lam.lambda_ou)) ** k
    raw_ou = lam.lambda_ou * reach / d_ou**2
    raw_ol = lam.lambda_ol * (reach - d_ou**2) / (d_ol**2 - d_ou**2)
    assert ref.lambda_ou == pytest.approx(min(max(raw_ou, 0), lam.lambda_ou), rel=1e-12)
    assert ref.lambda_ol == pytest.approx(min(max(raw_ol, 0), lam.lambda_ol), rel=1e-12)


@pytest.mark.parametrize("variant", ["beta", "eta"])
def test_refined_intensities_stay_in_range(variant):
    rng = np.random.default_rng(3)
    for _ in range(200):
        cfg = SystemConfig(d_max=0.5, proc_delay=0.1, lambda_bs=10 ** rng.uniform(-6, -3),
                           p_max=10 ** rng.uniform(-2, 2))
        d_ou = rng.uniform(1, 50)
        d_ol = d_ou + rng.uniform(0.1, 50)
        lam = band_intensities(cfg, d_ou, d_ol)
        ref = refined_intensities(cfg, d_ou, d_ol, lam.lambda_ou, lam.lambda_ol, variant)
        assert 0 <= ref.lambda_ou <= lam.lambda_ou
        assert 0 <= ref.lambda_ol <= lam.lambda_ol


def test_refined_intensities_vanish_as_power_budget_vanishes():
    cfg = SystemConfig(d_max=0.5, proc_delay=0.1, lambda_bs=1e-4, p_max=1e-30)
    lam = band_intensities(cfg, 27.0, 41.0)
    ref = refined_intensities(cfg, 27.0, 41.0, lam.lambda_ou, lam.lambda_ol)
    assert ref.lambda_ou < 1e-6 * lam.lambda_ou
    assert ref.lambda_ol == 0.0
    integ = refined_intensities_integrated(cfg, 27.0, 41.0, lam.lambda_ou, lam.lambda_ol)
    assert integ.lambda_ou < 1e-6 * lam.lambda_ou


def test_refined_intensities_reject_empty_ring(cfg):
    with pytest.raises(ValueError):
        refined_intensities(cfg, 3.0, 3.0, 1e-4, 1e-4)


def test_integrated_refinement_matches_quadrature():
    cfg = SystemConfig(d_max=0.5, proc_delay=0.1, lambda_bs=1e-5)
    d_ou, d_ol = 27.0, 41.0
    lam = band_intensities(cfg, d_ou, d_ol)
    got = refined_intensities_integrated(cfg, d_ou, d_ol, lam.lambda_ou, lam.lambda_ol)
    k = cfg.exponent
    q_ou = (cfg.p_max / beta_factor(cfg, lam.lambda_ou)) ** k
    t = sir_targets(cfg)
    eta = (lam.lambda_ol * cfg.p_max**k / cfg.lambda_bs) ** (cfg.alpha / 2) * t.gamma_ol / t.gamma_bs
    q_ol = (cfg.p_max / eta) ** k
    lb = cfg.lambda_bs

    def density(r):
        return 2 * math.pi * lb * r * math.exp(-math.pi * lb * r * r)

    def p_ou(r):
        return min(q_ou * r * r / d_ou**2, 1.0)

    def p_ol(r):
        return min(max((q_ol * r * r - d_ou**2) / (d_ol**2 - d_ou**2), 0.0), 1.0)

    top = 40 / math.sqrt(math.pi * lb)
    for prob, lam_in, got_v in ((p_ou, lam.lambda_ou, got.lambda_ou), (p_ol, lam.lambda_ol, got.lambda_ol)):
        val, _ = integrate.quad(lambda r: prob(r) * density(r), 0, top, limit=400, epsabs=1e-14)
        assert got_v == pytest.approx(lam_in * val, rel=1e-7)


def test_cellular_conditional_against_unconditioned_interferers():
    # interferers form a PPP over the whole plane, independent of the serving distance
    cfg = SystemConfig(d_max=0.5, proc_delay=0.1)
    gamma = sir_targets(cfg).gamma_bs
    rng = np.random.default_rng(8)
    lam, d, n = 1e-5, 150.0, 3000
    emp = _simulated_dvp(d, cfg.p_bs, gamma, cfg.alpha, [(lam, cfg.p_bs)], n, rng, radius=6000.0)
    theory = dvp_cellular_conditional(d, gamma, lam, cfg.alpha)
    assert abs(emp - theory) < 3 * math.sqrt(theory * (1 - theory) / n) + 0.005


@pytest.mark.parametrize("size, expected", [(2000.0, 1.0), (1000.0, 0.41421356)])
def test_sir_target_at_reference_bandwidth_and_delays(size, expected):
    assert sir_target(size, 5e6, 0.5e-3, 0.1e-3) == pytest.approx(expected, rel=1e-8)
