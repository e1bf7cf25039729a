"""Monte Carlo engine: realize the network, select bands, evaluate SIRs, pool statistics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .config import SystemConfig
from .geometry import (
    Pairing,
    PointSet,
    nearest_neighbours,
    pair_requests,
    sample_ppp,
    stream,
)
from .model import band_intensities, sir_targets
from .threshold import Thresholds, min_power_outband, min_power_overlay

DEFAULT_SIR_DB = tuple(float(x) for x in np.arange(-10.0, 31.0, 2.0))
Z95 = 1.959963984540054
_CHUNK = 4_000_000  # max receiver x transmitter entries per SIR batch


class Mode(IntEnum):
    CELLULAR = 0
    OUTBAND = 1
    OVERLAY = 2


class Fallback(IntEnum):
    NONE = 0
    NO_DP = 1
    POWER_EXCEEDED = 2
    BEYOND_OVERLAY_THRESHOLD = 3


@dataclass(frozen=True)
class AssignmentOutcome:
    dc_index: int
    mode: Mode
    tx_power: float | None
    fallback_reason: Fallback


@dataclass
class Assignments:
    """Per-DC band decisions for one realization, stored as parallel arrays."""

    mode: np.ndarray  # int8, Mode values
    reason: np.ndarray  # int8, Fallback values
    dp_index: np.ndarray  # serving DP or -1
    link_distance: np.ndarray  # nan when unpaired
    tx_power: np.ndarray  # nan for cellular

    def outcomes(self) -> list[AssignmentOutcome]:
        out = []
        for i, (m, r, p) in enumerate(zip(self.mode, self.reason, self.tx_power)):
            mode = Mode(int(m))
            out.append(AssignmentOutcome(i, mode, None if mode == Mode.CELLULAR else float(p),
                                         Fallback(int(r))))
        return out

    def count(self, mode: Mode, mask: np.ndarray | None = None) -> int:
        sel = self.mode == mode
        if mask is not None:
            sel &= mask
        return int(np.count_nonzero(sel))


@dataclass
class NetworkRealization:
    rrhs: PointSet
    dcs: PointSet
    dps: PointSet
    eus: PointSet
    pairing: Pairing
    d_bs0: np.ndarray  # per DC, distance to the nearest RRH (inf if none)
    serving_rrh: np.ndarray  # per DC, -1 if no RRH
    seed: int
    trial: int
    fading: np.random.Generator = field(repr=False)
    inner_radius: float = math.inf  # receivers are only evaluated inside this radius

    @property
    def inner_mask(self) -> np.ndarray:
        r = np.hypot(self.dcs.positions[:, 0], self.dcs.positions[:, 1])
        return r <= self.inner_radius


def realize(cfg: SystemConfig, seed: int, trial: int, d_ou_star: float | None, d_ol_star: float) -> NetworkRealization:
    """Sample all four point processes and pair DCs with caching DPs."""
    R = cfg.region_radius
    rrhs = sample_ppp(cfg.lambda_bs, R, stream(seed, trial, "RRH"), "RRH")
    dcs = sample_ppp(cfg.lambda_dc, R, stream(seed, trial, "DC"), "DC")
    dps = sample_ppp(cfg.lambda_dp, R, stream(seed, trial, "DP"), "DP")
    eus = sample_ppp(cfg.lambda_ext, R, stream(seed, trial, "EU"), "EU")
    pairing = pair_requests(dcs, dps, cfg.chp, d_ol_star, stream(seed, trial, "PAIRING"), d_ou_star)
    if len(rrhs) and len(dcs):
        d_bs0, serving = nearest_neighbours(dcs.positions, rrhs)
    else:
        d_bs0 = np.full(len(dcs), np.inf)
        serving = np.full(len(dcs), -1, np.int64)
    return NetworkRealization(rrhs, dcs, dps, eus, pairing, d_bs0, serving.astype(np.int64),
                              seed, trial, stream(seed, trial, "FADING"), cfg.inner_radius)


def _empty_assignments(n: int) -> Assignments:
    return Assignments(
        mode=np.zeros(n, np.int8),
        reason=np.full(n, Fallback.NO_DP, np.int8),
        dp_index=np.full(n, -1, np.int64),
        link_distance=np.full(n, np.nan),
        tx_power=np.full(n, np.nan),
    )


def select_bands(realization: NetworkRealization, thr: Thresholds, cfg: SystemConfig) -> Assignments:
    """Apply the distance-threshold band selection with minimum-power control.

    A paired DC within ``d_ou_star`` goes outband, one within ``d_ol_star``
    goes overlay (ties go to the inner band), provided the required power
    does not exceed ``p_max``; everything else stays cellular.
    """
    n = len(realization.dcs)
    asg = _empty_assignments(n)
    pr = realization.pairing
    if len(pr) == 0:
        return asg
    dc, d = pr.dc_index, pr.link_distance
    asg.dp_index[dc] = pr.dp_index
    asg.link_distance[dc] = d
    asg.reason[dc] = Fallback.BEYOND_OVERLAY_THRESHOLD
    if not sir_targets(cfg).gamma_bs > 0 or len(realization.rrhs) == 0:
        asg.reason[dc] = Fallback.NONE
        return asg

    lam = band_intensities(cfg, thr.d_ou_star, thr.d_ol_star)
    d_bs0 = realization.d_bs0[dc]
    is_ou = d <= thr.d_ou_star
    is_ol = ~is_ou & (d <= thr.d_ol_star)
    power = np.full(len(dc), np.nan)
    power[is_ou] = min_power_outband(cfg, d[is_ou], d_bs0[is_ou], lam.lambda_ou, thr.mean_pow_moment_ou)
    power[is_ol] = min_power_overlay(cfg, d[is_ol], d_bs0[is_ol], lam.lambda_ol, thr.mean_pow_moment_ol)
    ok = power <= cfg.p_max

    for band_mask, mode in ((is_ou, Mode.OUTBAND), (is_ol, Mode.OVERLAY)):
        admit = band_mask & ok
        asg.mode[dc[admit]] = mode
        asg.reason[dc[admit]] = Fallback.NONE
        asg.tx_power[dc[admit]] = power[admit]
        asg.reason[dc[band_mask & ~ok]] = Fallback.POWER_EXCEEDED
    return asg


def fixed_power_assignments(realization: NetworkRealization, cfg: SystemConfig,
                            d_ou: float, d_ol: float) -> Assignments:
    """Split pairs at ``d_ou`` / ``d_ol`` with every D2D link at ``p_max`` and no power check."""
    n = len(realization.dcs)
    asg = _empty_assignments(n)
    pr = realization.pairing
    dc, d = pr.dc_index, pr.link_distance
    asg.dp_index[dc] = pr.dp_index
    asg.link_distance[dc] = d
    is_ou = d <= d_ou
    is_ol = ~is_ou & (d <= d_ol)
    for mask, mode in ((is_ou, Mode.OUTBAND), (is_ol, Mode.OVERLAY)):
        asg.mode[dc[mask]] = mode
        asg.reason[dc[mask]] = Fallback.NONE
        asg.tx_power[dc[mask]] = cfg.p_max
    asg.reason[dc[~(is_ou | is_ol)]] = Fallback.BEYOND_OVERLAY_THRESHOLD
    return asg


def _transmitters(realization: NetworkRealization, asg: Assignments, cfg: SystemConfig, mode: Mode):
    """Positions, powers and the DC->column map of every transmitter heard in ``mode``'s band."""
    if mode == Mode.CELLULAR:
        pos = realization.rrhs.positions
        power = np.full(len(pos), cfg.p_bs)
        return pos, power, realization.serving_rrh
    active = np.flatnonzero(asg.mode == mode)
    pos = realization.dps.positions[asg.dp_index[active]]
    power = np.full(len(active), cfg.p_max) if cfg.worst_case_interferers else asg.tx_power[active]
    own_col = np.full(len(asg.mode), -1, np.int64)
    own_col[active] = np.arange(len(active))
    if mode == Mode.OUTBAND and len(realization.eus):
        pos = np.vstack((pos, realization.eus.positions))
        power = np.concatenate((power, np.full(len(realization.eus), cfg.p_ext)))
    return pos, power, own_col


def _sir_batch(rx_pos, own_col, own_power, tx_pos, tx_power, alpha, rng):
    n_rx, n_tx = len(rx_pos), len(tx_pos)
    sir = np.empty(n_rx)
    step = max(1, _CHUNK // max(n_tx, 1))
    for lo in range(0, n_rx, step):
        sl = slice(lo, lo + step)
        diff = rx_pos[sl, None, :] - tx_pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        with np.errstate(divide="ignore"):
            gain = rng.exponential(size=d2.shape) * d2 ** (-alpha / 2.0)
        rows = np.arange(gain.shape[0])
        cols = own_col[sl]
        signal = own_power[sl] * gain[rows, cols]
        gain[rows, cols] = 0.0
        interference = gain @ tx_power
        with np.errstate(divide="ignore", invalid="ignore"):
            sir[sl] = np.where(interference > 0, signal / interference, np.inf)
    return sir


def evaluate_sirs(realization: NetworkRealization, asg: Assignments, cfg: SystemConfig,
                  dc_indices) -> np.ndarray:
    """Linear SIR of each listed DC in its assigned band; ``inf`` when nothing interferes.

    Cellular: every other RRH interferes. Outband: other outband DPs and all
    external users. Overlay: other overlay DPs. Fading is drawn afresh from
    the realization's fading stream on every call.
    """
    dc_indices = np.atleast_1d(np.asarray(dc_indices, dtype=np.int64))
    out = np.full(len(dc_indices), np.nan)
    for mode in Mode:
        sel = np.flatnonzero(asg.mode[dc_indices] == mode)
        if len(sel) == 0:
            continue
        dcs = dc_indices[sel]
        tx_pos, tx_power, own_map = _transmitters(realization, asg, cfg, mode)
        if mode == Mode.CELLULAR and len(tx_pos) == 0:
            out[sel] = 0.0
            continue
        own = own_map[dcs]
        own_power = tx_power[own] if mode == Mode.CELLULAR else asg.tx_power[dcs]
        out[sel] = _sir_batch(realization.dcs.positions[dcs], own, own_power,
                              tx_pos, tx_power, cfg.alpha, realization.fading)
    return out


def evaluate_sir(realization: NetworkRealization, asg: Assignments, cfg: SystemConfig, dc_index: int) -> float:
    return float(evaluate_sirs(realization, asg, cfg, [dc_index])[0])


def sample_receivers(realization: NetworkRealization, asg: Assignments, max_receivers: int | None,
                     rng: np.random.Generator) -> dict[Mode, np.ndarray]:
    """Up to ``max_receivers`` inner-disk DCs per band, sorted by index."""
    inner = realization.inner_mask
    picked = {}
    for mode in Mode:
        idx = np.flatnonzero(inner & (asg.mode == mode))
        if max_receivers is not None and len(idx) > max_receivers:
            idx = np.sort(rng.choice(idx, size=max_receivers, replace=False))
        picked[mode] = idx
    return picked


@dataclass
class TrialResult:
    n_inner: int
    mode_counts: np.ndarray  # inner-disk DCs per Mode
    reason_counts: np.ndarray  # inner-disk DCs per Fallback
    paired_ou: int  # inner-disk DCs paired within d_ou_star (before the power check)
    paired_ol: int
    powers_ou: np.ndarray  # every admitted outband power in the disk
    powers_ol: np.ndarray
    sir: dict  # Mode -> SIR samples


def simulate_trial(cfg: SystemConfig, thr: Thresholds, seed: int, trial: int,
                   max_receivers: int | None = 50) -> TrialResult:
    real = realize(cfg, seed, trial, thr.d_ou_star, thr.d_ol_star)
    asg = select_bands(real, thr, cfg)
    inner = real.inner_mask
    modes = asg.mode[inner]
    reasons = asg.reason[inner]
    d_in = asg.link_distance[inner]
    sir = {}
    if max_receivers != 0:
        rx = sample_receivers(real, asg, max_receivers, stream(seed, trial, "RECEIVERS"))
        for mode, idx in rx.items():
            sir[mode] = evaluate_sirs(real, asg, cfg, idx) if len(idx) else np.zeros(0)
    else:
        sir = {mode: np.zeros(0) for mode in Mode}
    return TrialResult(
        n_inner=int(inner.sum()),
        mode_counts=np.bincount(modes, minlength=3),
        reason_counts=np.bincount(reasons, minlength=4),
        paired_ou=int(np.count_nonzero(d_in <= thr.d_ou_star)),
        paired_ol=int(np.count_nonzero((d_in > thr.d_ou_star) & (d_in <= thr.d_ol_star))),
        powers_ou=asg.tx_power[asg.mode == Mode.OUTBAND],
        powers_ol=asg.tx_power[asg.mode == Mode.OVERLAY],
        sir=sir,
    )


def run_trials(fn, trials: int, workers: int = 1) -> list:
    """Evaluate ``fn(trial)`` for every trial; results come back in trial order."""
    if workers <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def binomial_half_width(p: float, n: int) -> float:
    if n == 0:
        return math.nan
    return Z95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass
class ModeSirStats:
    samples: int
    infinite: int
    dvp: float
    dvp_half_width: float
    coverage: np.ndarray  # P[SIR > theta] over the SIR grid, inf counted as covered


@dataclass
class SimulationStats:
    trials: int
    seed: int
    inner_area: float
    n_dc_inner: int
    mode_counts: np.ndarray
    reason_counts: np.ndarray
    paired_ou: int
    paired_ol: int
    n_links_ou: int
    n_links_ol: int
    moment_ou: float
    moment_ol: float
    mean_power_ou: float
    mean_power_ol: float
    mean_power_d2d: float
    sir_db: np.ndarray
    per_mode: dict = field(default_factory=dict)  # Mode -> ModeSirStats

    def _frac(self, count: int) -> float:
        return count / self.n_dc_inner if self.n_dc_inner else math.nan

    @property
    def frac_ou(self) -> float:
        return self._frac(int(self.mode_counts[Mode.OUTBAND]))

    @property
    def frac_ol(self) -> float:
        return self._frac(int(self.mode_counts[Mode.OVERLAY]))

    @property
    def frac_paired_ou(self) -> float:
        return self._frac(self.paired_ou)

    @property
    def frac_paired_ol(self) -> float:
        return self._frac(self.paired_ol)

    def _density(self, count: int) -> float:
        return count / (self.trials * self.inner_area)

    @property
    def lambda_ou_emp(self) -> float:
        return self._density(int(self.mode_counts[Mode.OUTBAND]))

    @property
    def lambda_ol_emp(self) -> float:
        return self._density(int(self.mode_counts[Mode.OVERLAY]))

    @property
    def lambda_d2d_emp(self) -> float:
        return self.lambda_ou_emp + self.lambda_ol_emp

    def density_half_width(self, frac: float) -> float:
        """95% half-width of a density estimated as ``frac * n_dc / area``."""
        hw = binomial_half_width(frac, self.n_dc_inner)
        return hw * self.n_dc_inner / (self.trials * self.inner_area)

    def rows(self) -> list[tuple[str, float, float]]:
        """``(metric, value, half_width)`` triples for CSV output."""
        nan = math.nan
        out = [
            ("dc_inner_count", float(self.n_dc_inner), nan),
            ("frac_outband", self.frac_ou, binomial_half_width(self.frac_ou, self.n_dc_inner)),
            ("frac_overlay", self.frac_ol, binomial_half_width(self.frac_ol, self.n_dc_inner)),
            ("frac_paired_outband", self.frac_paired_ou,
             binomial_half_width(self.frac_paired_ou, self.n_dc_inner)),
            ("frac_paired_overlay", self.frac_paired_ol,
             binomial_half_width(self.frac_paired_ol, self.n_dc_inner)),
            ("lambda_ou_emp", self.lambda_ou_emp, self.density_half_width(self.frac_ou)),
            ("lambda_ol_emp", self.lambda_ol_emp, self.density_half_width(self.frac_ol)),
            ("lambda_d2d_emp", self.lambda_d2d_emp,
             self.density_half_width(self.frac_ou + self.frac_ol)),
            ("mean_power_outband_mw", self.mean_power_ou, nan),
            ("mean_power_overlay_mw", self.mean_power_ol, nan),
            ("mean_power_d2d_mw", self.mean_power_d2d, nan),
            ("moment_outband", self.moment_ou, nan),
            ("moment_overlay", self.moment_ol, nan),
        ]
        for reason in Fallback:
            out.append((f"fallback_{reason.name.lower()}", float(self.reason_counts[reason]), nan))
        for mode, st in self.per_mode.items():
            name = mode.name.lower()
            out.append((f"dvp_{name}", st.dvp, st.dvp_half_width))
            out.append((f"sir_samples_{name}", float(st.samples), nan))
            out.append((f"sir_infinite_{name}", float(st.infinite), nan))
            for db, cov in zip(self.sir_db, st.coverage):
                out.append((f"coverage_{name}@{db:g}dB", float(cov),
                            binomial_half_width(float(cov), st.samples)))
        return out


def _mean(x: np.ndarray) -> float:
    return float(x.sum() / len(x)) if len(x) else math.nan


def pool_trials(cfg: SystemConfig, results: list[TrialResult], seed: int,
                sir_db=DEFAULT_SIR_DB) -> SimulationStats:
    """Merge per-trial results (given in trial order) into pooled statistics."""
    k = cfg.exponent
    p_ou = np.concatenate([r.powers_ou for r in results]) if results else np.zeros(0)
    p_ol = np.concatenate([r.powers_ol for r in results]) if results else np.zeros(0)
    p_all = np.concatenate((p_ou, p_ol))
    sir_db = np.asarray(sir_db, dtype=float)
    theta = 10.0 ** (sir_db / 10.0)
    targets = sir_targets(cfg)
    gamma = {Mode.CELLULAR: targets.gamma_bs, Mode.OUTBAND: targets.gamma_ou, Mode.OVERLAY: targets.gamma_ol}

    per_mode = {}
    for mode in Mode:
        s = np.concatenate([r.sir.get(mode, np.zeros(0)) for r in results]) if results else np.zeros(0)
        finite = s[np.isfinite(s)]
        dvp = float(np.count_nonzero(finite < gamma[mode]) / len(finite)) if len(finite) else math.nan
        cov = (np.count_nonzero(s[:, None] > theta[None, :], axis=0) / len(s)) if len(s) \
            else np.full(len(theta), math.nan)
        per_mode[mode] = ModeSirStats(len(s), int(len(s) - len(finite)), dvp,
                                      binomial_half_width(dvp, len(finite)), cov)

    return SimulationStats(
        trials=len(results),
        seed=seed,
        inner_area=np.pi * cfg.inner_radius**2,
        n_dc_inner=sum(r.n_inner for r in results),
        mode_counts=np.sum([r.mode_counts for r in results], axis=0),
        reason_counts=np.sum([r.reason_counts for r in results], axis=0),
        paired_ou=sum(r.paired_ou for r in results),
        paired_ol=sum(r.paired_ol for r in results),
        n_links_ou=len(p_ou),
        n_links_ol=len(p_ol),
        moment_ou=_mean(p_ou**k),
        moment_ol=_mean(p_ol**k),
        mean_power_ou=_mean(p_ou),
        mean_power_ol=_mean(p_ol),
        mean_power_d2d=_mean(p_all),
        sir_db=sir_db,
        per_mode=per_mode,
    )


def estimate_stats(cfg: SystemConfig, thr: Thresholds, trials: int, seed: int, workers: int = 1,
                   max_receivers: int | None = 50, sir_db=DEFAULT_SIR_DB) -> SimulationStats:
    """Pooled statistics over ``trials`` independent realizations.

    Trial ``t`` always uses the streams keyed on ``(seed, t)``, and results
    are merged in trial order, so the outcome does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    results = run_trials(lambda t: simulate_trial(cfg, thr, seed, t, max_receivers), trials, workers)
    return pool_trials(cfg, results, seed, sir_db)
