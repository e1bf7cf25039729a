"""Closed-form delay-violation, SIR-target and intensity expressions.

All functions are pure and accept scalars or numpy arrays where that makes
sense. Probabilities use ``-expm1`` so that small exponents keep their
relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


@dataclass(frozen=True)
class SirTargets:
    gamma_bs: float
    gamma_ou: float
    gamma_ol: float


@dataclass(frozen=True)
class BandIntensities:
    """Intensities (per m^2) of DCs served in the outband and overlay bands.

    ``clamped`` is set when a refined-intensity formula had to be clipped
    into ``[0, input intensity]``.
    """

    lambda_ou: float
    lambda_ol: float
    clamped: bool = False

    @property
    def total(self) -> float:
        return self.lambda_ou + self.lambda_ol


def sinc_norm(x):
    """Normalized sinc ``sin(pi x) / (pi x)`` on the open interval (0, 1)."""
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) | (x >= 1)):
        raise ValueError(f"sinc_norm domain is (0, 1), got {x}")
    out = np.sinc(x)
    return float(out) if out.ndim == 0 else out


def sir_target(file_size, bandwidth, d_max, proc_delay):
    """SIR needed to push ``file_size`` bits through ``bandwidth`` within the delay budget."""
    if np.any(np.asarray(bandwidth) <= 0):
        raise ValueError("bandwidth must be positive")
    budget = np.asarray(d_max, dtype=float) - proc_delay
    if np.any(budget <= 0):
        raise ValueError(f"d_max must exceed proc_delay (budget {budget})")
    if np.any(np.asarray(file_size) < 0):
        raise ValueError("file_size must be non-negative")
    out = np.expm1(np.log(2.0) * np.asarray(file_size, dtype=float) / (bandwidth * budget))
    return float(out) if np.ndim(out) == 0 else out


def sir_targets(cfg: SystemConfig) -> SirTargets:
    def target(bw):
        return sir_target(cfg.file_size, bw, cfg.d_max, cfg.proc_delay)

    return SirTargets(target(cfg.bw_bs), target(cfg.bw_ou), target(cfg.bw_ol))


def _one_minus_exp(exponent):
    out = -np.expm1(-np.asarray(exponent, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def dvp_cellular_conditional(d_bs0, gamma_bs, lambda_bs, alpha):
    """Delay-violation probability of the cellular link given the RRH distance."""
    d_bs0 = np.asarray(d_bs0, dtype=float)
    gamma_bs = np.asarray(gamma_bs, dtype=float)
    if np.any(d_bs0 < 0) or np.any(gamma_bs < 0):
        raise ValueError("d_bs0 and gamma_bs must be non-negative")
    k = 2.0 / alpha
    expo = np.pi * lambda_bs * gamma_bs**k * d_bs0**2 / sinc_norm(k)
    return _one_minus_exp(expo)


def dvp_cellular_avg(gamma_bs, alpha):
    """Cellular DVP averaged over the nearest-RRH distance; does not depend on lambda_bs."""
    gamma_bs = np.asarray(gamma_bs, dtype=float)
    if np.any(gamma_bs < 0):
        raise ValueError("gamma_bs must be non-negative")
    k = 2.0 / alpha
    g = gamma_bs**k
    out = g / (g + sinc_norm(k))
    return float(out) if out.ndim == 0 else out


def cellular_log_margin(gamma_bs, alpha) -> float:
    """``|ln(1 - T_bs)|`` evaluated without forming ``1 - T_bs``."""
    k = 2.0 / alpha
    return math.log1p(float(gamma_bs) ** k / sinc_norm(k))


def band_intensities(cfg: SystemConfig, d_ou_star: float, d_ol_star: float) -> BandIntensities:
    """Thinned DC intensities served in each D2D band for the given thresholds."""
    if d_ou_star < 0 or d_ou_star > d_ol_star:
        raise ValueError(f"need 0 <= d_ou_star <= d_ol_star, got {d_ou_star}, {d_ol_star}")
    rate = cfg.chp * np.pi * cfg.lambda_dp
    near = -math.expm1(-rate * d_ou_star**2)
    # exp(-a) - exp(-b) = exp(-a) * (1 - exp(a - b))
    ring = math.exp(-rate * d_ou_star**2) * -math.expm1(-rate * (d_ol_star**2 - d_ou_star**2))
    return BandIntensities(cfg.lambda_dc * near, cfg.lambda_dc * ring)


def _d2d_dvp(d, p_tx, gamma, interference, alpha):
    d = np.asarray(d, dtype=float)
    p_tx = np.asarray(p_tx, dtype=float)
    if np.any(d < 0):
        raise ValueError("link distance must be non-negative")
    if np.any(p_tx <= 0):
        raise ValueError("transmit power must be positive")
    k = 2.0 / alpha
    expo = np.pi * interference * gamma**k * d**2 / (sinc_norm(k) * p_tx**k)
    return _one_minus_exp(expo)


def dvp_outband_conditional(d, cfg: SystemConfig, lambda_ou, p_tx, mean_pow_moment):
    """DVP of an outband link of length ``d``; ``mean_pow_moment`` is E[P^(2/alpha)] of the other outband DPs."""
    k = cfg.exponent
    interference = lambda_ou * mean_pow_moment + cfg.p_ext**k * cfg.lambda_ext
    return _d2d_dvp(d, p_tx, sir_targets(cfg).gamma_ou, interference, cfg.alpha)


def dvp_overlay_conditional(d, cfg: SystemConfig, lambda_ol, p_tx, mean_pow_moment):
    """DVP of an overlay link; only other overlay DPs interfere."""
    interference = lambda_ol * mean_pow_moment
    return _d2d_dvp(d, p_tx, sir_targets(cfg).gamma_ol, interference, cfg.alpha)


def _power_scale(interference, lambda_bs, gamma_band, gamma_bs, alpha):
    """Common factor ``[I / lambda_bs]^(alpha/2) * gamma_band / gamma_bs`` of the minimum-power rule."""
    return (interference / lambda_bs) ** (alpha / 2.0) * (gamma_band / gamma_bs)


def beta_factor(cfg: SystemConfig, lambda_ou: float) -> float:
    """Outband power scale with every interfering DP at full power."""
    k = cfg.exponent
    t = sir_targets(cfg)
    interference = lambda_ou * cfg.p_max**k + cfg.p_ext**k * cfg.lambda_ext
    return _power_scale(interference, cfg.lambda_bs, t.gamma_ou, t.gamma_bs, cfg.alpha)


def eta_factor(cfg: SystemConfig, lambda_ol: float) -> float:
    """Overlay counterpart of :func:`beta_factor`."""
    t = sir_targets(cfg)
    interference = lambda_ol * cfg.p_max**cfg.exponent
    return _power_scale(interference, cfg.lambda_bs, t.gamma_ol, t.gamma_bs, cfg.alpha)


def refined_intensities(
    cfg: SystemConfig,
    d_ou_star: float,
    d_ol_star: float,
    lambda_ou: float,
    lambda_ol: float,
    overlay_scale: str = "beta",
) -> BandIntensities:
    """Band intensities after dropping links whose minimum power exceeds ``p_max``.

    The closed forms use a linear-in-r^2 acceptance probability and the
    constant ``12 / (pi^3 lambda_bs^3)``, both reproduced as published.
    ``overlay_scale`` selects the power scale used in the overlay
    expression: ``"beta"`` (as printed) or ``"eta"`` (the overlay analogue).
    Results are clipped into ``[0, input intensity]``; ``clamped`` reports it.
    """
    if not d_ol_star > d_ou_star:
        raise ValueError(f"need d_ol_star > d_ou_star, got {d_ou_star}, {d_ol_star}")
    if overlay_scale not in ("beta", "eta"):
        raise ValueError(f"overlay_scale must be 'beta' or 'eta', got {overlay_scale!r}")
    k = cfg.exponent
    const = 12.0 / (np.pi**3 * cfg.lambda_bs**3)
    beta = beta_factor(cfg, lambda_ou)
    reach_ou = const * (cfg.p_max / beta) ** k

    if d_ou_star > 0:
        raw_ou = lambda_ou * reach_ou / d_ou_star**2
    else:
        raw_ou = 0.0

    scale = beta if overlay_scale == "beta" else eta_factor(cfg, lambda_ol)
    reach_ol = const * (cfg.p_max / scale) ** k
    raw_ol = lambda_ol / (d_ol_star**2 - d_ou_star**2) * (reach_ol - d_ou_star**2)

    ou = min(max(raw_ou, 0.0), lambda_ou)
    ol = min(max(raw_ol, 0.0), lambda_ol)
    return BandIntensities(ou, ol, clamped=(ou != raw_ou or ol != raw_ol))


def refined_intensities_integrated(
    cfg: SystemConfig, d_ou_star: float, d_ol_star: float, lambda_ou: float, lambda_ol: float
) -> BandIntensities:
    """Same acceptance integral, but with the probability capped at 1 and integrated exactly.

    With ``q = (p_max/scale)^(2/alpha)`` the acceptance probability at RRH
    distance r is ``min(q r^2 / d_ou^2, 1)`` for outband links and
    ``clip((q r^2 - d_ou^2) / (d_ol^2 - d_ou^2), 0, 1)`` for overlay links,
    averaged over the Rayleigh nearest-RRH distance.
    """
    k = cfg.exponent
    lam = cfg.lambda_bs
    q_ou = (cfg.p_max / beta_factor(cfg, lambda_ou)) ** k
    q_ol = (cfg.p_max / eta_factor(cfg, lambda_ol)) ** k if lambda_ol > 0 else math.inf

    def mean_ramp(q, lo, hi):
        # E[clip((q R^2 - lo) / (hi - lo), 0, 1)] with R^2 ~ Exp(pi lam)
        if q == math.inf:
            return 1.0
        rate = np.pi * lam / q  # q R^2 ~ Exp(rate)
        if hi <= lo:
            return math.exp(-rate * lo)
        # integral of the survival function of Exp(rate) over [lo, hi], normalized
        return (math.exp(-rate * lo) - math.exp(-rate * hi)) / (rate * (hi - lo))

    ou = lambda_ou * mean_ramp(q_ou, 0.0, d_ou_star**2)
    ol = lambda_ol * mean_ramp(q_ol, d_ou_star**2, d_ol_star**2)
    return BandIntensities(ou, ol)
