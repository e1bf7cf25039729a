"""Spectrum-selection distance thresholds and per-link minimum transmit powers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .model import cellular_log_margin, sinc_norm, sir_targets


class InfeasibleThresholds(ValueError):
    """The overlay threshold came out below the outband threshold."""


@dataclass(frozen=True)
class QuadCoefficients:
    """Coefficients of ``a x^2 + b x - c = 0`` (outband) and ``d x^2 + e x - c = 0`` (overlay), x = d^2."""

    a: float
    b: float
    c_term: float
    d_coef: float
    e_coef: float | None = None


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    d_ou_star: float
    d_ol_star: float
    mean_pow_moment_ou: float
    mean_pow_moment_ol: float
    lambda_ou_emp: float = math.nan
    lambda_ol_emp: float = math.nan
    rel_change: float = math.nan


@dataclass(frozen=True)
class Thresholds:
    d_ou_star: float
    d_ol_star: float
    mean_pow_moment_ou: float
    mean_pow_moment_ol: float
    iterations: int = 0
    converged: bool = True
    capped: bool = False
    trace: tuple[IterationRecord, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if not 0 <= self.d_ou_star <= self.d_ol_star:
            raise ValueError(f"need 0 <= d_ou_star <= d_ol_star, got {self.d_ou_star}, {self.d_ol_star}")


def worst_case_moment(cfg: SystemConfig) -> float:
    return cfg.p_max**cfg.exponent


def quad_coefficients(
    cfg: SystemConfig,
    mean_pow_moments: tuple[float, float] | None = None,
    d_ou_star_for_e: float | None = None,
) -> QuadCoefficients:
    """Coefficients of the linearized QoS inequalities for both bands.

    ``mean_pow_moments`` is ``(E[P_ou^(2/alpha)], E[P_ol^(2/alpha)])``;
    ``None`` means every interferer transmits at ``p_max``. The overlay
    ``e_coef`` needs the outband threshold and is ``None`` without it.
    """
    k = cfg.exponent
    if mean_pow_moments is None:
        mean_pow_moments = (worst_case_moment(cfg),) * 2
    m_ou, m_ol = mean_pow_moments
    s = sinc_norm(k)
    t = sir_targets(cfg)
    pk = cfg.p_max**k
    g_ou, g_ol = t.gamma_ou**k, t.gamma_ol**k

    c_term = cellular_log_margin(t.gamma_bs, cfg.alpha)
    if not math.isfinite(c_term):
        raise ValueError("cellular DVP is 1: no D2D link can match its QoS")

    a = np.pi**2 * cfg.chp * g_ou * cfg.lambda_dp * cfg.lambda_dc * m_ou / (s * pk)
    b = np.pi * g_ou * cfg.p_ext**k * cfg.lambda_ext / (s * pk)
    d_coef = np.pi**2 * cfg.chp * cfg.lambda_dc * cfg.lambda_dp * m_ol * g_ol / (s * pk)
    e_coef = None
    if d_ou_star_for_e is not None:
        lam = cfg.chp * cfg.lambda_dp if cfg.e_bracket_uses_chp else cfg.lambda_dp
        bracket = math.expm1(-np.pi * lam * d_ou_star_for_e**2)
        e_coef = np.pi * cfg.chp * cfg.lambda_dc * m_ol * g_ol * bracket / (s * pk)
    return QuadCoefficients(float(a), float(b), float(c_term), float(d_coef),
                            None if e_coef is None else float(e_coef))


def solve_threshold(a, b, c_term):
    """Positive root d of ``a d^4 + b d^2 - c = 0``.

    Uses whichever algebraic form of the quadratic root avoids cancellation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c_term = np.asarray(c_term, dtype=float)
    if np.any(a <= 0):
        raise ValueError("leading coefficient must be positive")
    if np.any(c_term < 0):
        raise ValueError("c_term must be non-negative")
    root = np.sqrt(b * b + 4.0 * a * c_term)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(b >= 0, 2.0 * c_term / (root + b), (root - b) / (2.0 * a))
    x = np.where(c_term == 0, 0.0, x)
    out = np.sqrt(x)
    return float(out) if out.ndim == 0 else out


def _solve_or_cap(a: float, b: float, c_term: float, cap: float) -> tuple[float, bool]:
    if a > 0:
        d = solve_threshold(a, b, c_term)
    elif b > 0:
        d = math.sqrt(c_term / b)
    else:
        return cap, True
    if d > cap:
        return cap, True
    return d, False


def thresholds_from_moments(cfg: SystemConfig, m_ou: float, m_ol: float) -> Thresholds:
    """Solve both thresholds for given interferer power moments.

    Thresholds are capped at the region radius; when no D2D interference
    term exists the cap is returned and ``capped`` is set.
    """
    cap = cfg.region_radius
    coeffs = quad_coefficients(cfg, (m_ou, m_ol))
    d_ou, cap_ou = _solve_or_cap(coeffs.a, coeffs.b, coeffs.c_term, cap)
    e_coef = quad_coefficients(cfg, (m_ou, m_ol), d_ou).e_coef
    if coeffs.d_coef > 0:
        d_ol, cap_ol = _solve_or_cap(coeffs.d_coef, e_coef, coeffs.c_term, cap)
    elif e_coef is not None and e_coef > 0:
        d_ol, cap_ol = _solve_or_cap(0.0, e_coef, coeffs.c_term, cap)
    else:
        d_ol, cap_ol = cap, True
    if d_ol < d_ou:
        raise InfeasibleThresholds(f"overlay threshold {d_ol:.6g} m < outband threshold {d_ou:.6g} m")
    return Thresholds(d_ou, d_ol, m_ou, m_ol, capped=cap_ou or cap_ol)


def thresholds_worst_case(cfg: SystemConfig) -> Thresholds:
    """Lower-bound thresholds with every interfering DP at ``p_max``."""
    m = worst_case_moment(cfg)
    return thresholds_from_moments(cfg, m, m)


def _check_link(d_link, d_bs0):
    d_link = np.asarray(d_link, dtype=float)
    d_bs0 = np.asarray(d_bs0, dtype=float)
    if np.any(d_bs0 <= 0):
        raise ValueError("d_bs0 must be positive")
    if np.any(d_link < 0):
        raise ValueError("d_link must be non-negative")
    return d_link, d_bs0


def _min_power(interference, gamma_band, cfg: SystemConfig, d_link, d_bs0):
    gamma_bs = sir_targets(cfg).gamma_bs
    scale = (interference / cfg.lambda_bs) ** (cfg.alpha / 2.0) * (gamma_band / gamma_bs)
    out = scale * (d_link / d_bs0) ** cfg.alpha
    return float(out) if np.ndim(out) == 0 else out


def min_power_outband(cfg: SystemConfig, d_link, d_bs0, lambda_ou, mean_pow_moment):
    """Smallest outband power whose DVP equals the cellular DVP at ``d_bs0`` (mW)."""
    d_link, d_bs0 = _check_link(d_link, d_bs0)
    interference = lambda_ou * mean_pow_moment + cfg.p_ext**cfg.exponent * cfg.lambda_ext
    return _min_power(interference, sir_targets(cfg).gamma_ou, cfg, d_link, d_bs0)


def min_power_overlay(cfg: SystemConfig, d_link, d_bs0, lambda_ol, mean_pow_moment):
    """Overlay counterpart of :func:`min_power_outband` (no external users)."""
    d_link, d_bs0 = _check_link(d_link, d_bs0)
    return _min_power(lambda_ol * mean_pow_moment, sir_targets(cfg).gamma_ol, cfg, d_link, d_bs0)


def iterate_thresholds(
    cfg: SystemConfig,
    tol: float = 1e-3,
    max_iter: int = 20,
    trials_per_iter: int = 200,
    seed: int = 0,
    workers: int = 1,
) -> Thresholds:
    """Refine the thresholds by re-estimating interferer power moments from simulation.

    Iteration 0 is the worst case. Each later iteration simulates the band-selection
    assignments under the previous thresholds, takes the sample mean of
    ``P^(2/alpha)`` per band (falling back to ``p_max^(2/alpha)`` for an empty
    band) and re-solves. Every iteration reuses the same realizations so the
    map being iterated is deterministic. Stops when the larger relative
    threshold change drops below ``tol``.
    """
    from .simulator import estimate_stats

    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    thr = thresholds_worst_case(cfg)
    trace = [IterationRecord(0, thr.d_ou_star, thr.d_ol_star,
                             thr.mean_pow_moment_ou, thr.mean_pow_moment_ol)]
    worst = worst_case_moment(cfg)
    converged = False
    for it in range(1, max_iter + 1):
        stats = estimate_stats(cfg, thr, trials_per_iter, seed, workers=workers, max_receivers=0)
        m_ou = stats.moment_ou if stats.n_links_ou > 0 else worst
        m_ol = stats.moment_ol if stats.n_links_ol > 0 else worst
        new = thresholds_from_moments(cfg, m_ou, m_ol)
        change = max(_rel_change(new.d_ou_star, thr.d_ou_star), _rel_change(new.d_ol_star, thr.d_ol_star))
        trace.append(IterationRecord(it, new.d_ou_star, new.d_ol_star, m_ou, m_ol,
                                     stats.lambda_ou_emp, stats.lambda_ol_emp, change))
        thr = new
        if change < tol:
            converged = True
            break
    return Thresholds(thr.d_ou_star, thr.d_ol_star, thr.mean_pow_moment_ou, thr.mean_pow_moment_ol,
                      iterations=len(trace) - 1, converged=converged, capped=thr.capped,
                      trace=tuple(trace))


def _rel_change(new: float, old: float) -> float:
    if new == old:
        return 0.0
    return abs(new - old) / max(abs(old), abs(new))



def thresholds_monolithic(cfg: SystemConfig, band: str) -> Thresholds:
    """Single-band baseline thresholds at worst-case moments.

    ``"overlay"``: the outband threshold is 0 and the overlay threshold is
    solved with an empty outband region. ``"outband"``: the outband
    threshold is solved as usual and the overlay ring is closed
    (``d_ol_star = d_ou_star``).
    """
    m = worst_case_moment(cfg)
    cap = cfg.region_radius
    if band == "overlay":
        coeffs = quad_coefficients(cfg, (m, m), 0.0)
        d_ol, capped = _solve_or_cap(coeffs.d_coef, coeffs.e_coef, coeffs.c_term, cap)
        return Thresholds(0.0, d_ol, m, m, capped=capped)
    if band == "outband":
        coeffs = quad_coefficients(cfg, (m, m))
        d_ou, capped = _solve_or_cap(coeffs.a, coeffs.b, coeffs.c_term, cap)
        return Thresholds(d_ou, d_ou, m, m, capped=capped)
    raise ValueError(f"band must be 'overlay' or 'outband', got {band!r}")
