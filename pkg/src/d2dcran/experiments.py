"""Parameter sweeps, thinning validation and CSV datasets."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SWEEPABLE, SystemConfig, config_hash
from .geometry import stream
from .model import (
    band_intensities,
    refined_intensities,
    refined_intensities_integrated,
    sinc_norm,
)
from .simulator import (
    DEFAULT_SIR_DB,
    Mode,
    binomial_half_width,
    estimate_stats,
    evaluate_sirs,
    fixed_power_assignments,
    realize,
    run_trials,
    sample_receivers,
)
from .threshold import (
    InfeasibleThresholds,
    Thresholds,
    iterate_thresholds,
    thresholds_monolithic,
    thresholds_worst_case,
)

SCHEMA = 1
MODES = ("worst_case", "iterative", "monolithic_overlay", "monolithic_outband")
CLI_MODES = {"worst": "worst_case", "iter": "iterative", "mono-ol": "monolithic_overlay",
             "mono-ou": "monolithic_outband"}
DEFAULT_TRIALS = 2000

SWEEP_PRESETS = {
    # band intensities against the external-user intensity
    "ext-intensity": ("lambda_ext", tuple(float(x) for x in np.logspace(-4, -2.5, 7)), ("worst_case", "iterative")),
    # band intensities against the DP intensity
    "dp-intensity": ("lambda_dp", tuple(float(x) for x in np.logspace(-5, -2, 7)), ("worst_case", "iterative")),
    # mean D2D power, hybrid against the single-band baselines
    "power-vs-baselines": ("lambda_ext", (1e-3, 1.5e-3, 2e-3), ("worst_case", "monolithic_overlay", "monolithic_outband")),
}


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


@dataclass
class Dataset:
    """A CSV table with ``# key=value`` header comments."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    meta: dict[str, str] = field(default_factory=dict)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema={SCHEMA}\n")
        for key, value in self.meta.items():
            buf.write(f"# {key}={value}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def select(self, **match) -> list[dict]:
        out = []
        for row in self.rows:
            rec = dict(zip(self.columns, row))
            if all(rec[k] == v for k, v in match.items()):
                out.append(rec)
        return out


@dataclass(frozen=True)
class SweepSpec:
    param: str
    grid: tuple[float, ...]
    mode: str = "worst_case"
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    out: str | None = None

    def __post_init__(self) -> None:
        if self.param not in SWEEPABLE:
            raise ValueError(f"{self.param!r} is not a sweepable SystemConfig field")
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if list(self.grid) != sorted(self.grid):
            raise ValueError("sweep grid must be sorted")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def thresholds_for_mode(cfg: SystemConfig, mode: str, trials: int = 200, seed: int = 0,
                        workers: int = 1) -> Thresholds:
    if mode == "worst_case":
        return thresholds_worst_case(cfg)
    if mode == "iterative":
        return iterate_thresholds(cfg, trials_per_iter=trials, seed=seed, workers=workers)
    if mode == "monolithic_overlay":
        return thresholds_monolithic(cfg, "overlay")
    if mode == "monolithic_outband":
        return thresholds_monolithic(cfg, "outband")
    raise ValueError(f"unknown mode {mode!r}")


def analytic_rows(cfg: SystemConfig, thr: Thresholds) -> list[tuple[str, float]]:
    """Closed-form quantities at the given thresholds."""
    lam = band_intensities(cfg, thr.d_ou_star, thr.d_ol_star)
    rows = [
        ("d_ou_star", thr.d_ou_star),
        ("d_ol_star", thr.d_ol_star),
        ("threshold_capped", float(thr.capped)),
        ("iterations", float(thr.iterations)),
        ("converged", float(thr.converged)),
        ("lambda_ou_analytic", lam.lambda_ou),
        ("lambda_ol_analytic", lam.lambda_ol),
        ("lambda_d2d_analytic", lam.total),
    ]
    if thr.d_ol_star > thr.d_ou_star:
        for variant in ("beta", "eta"):
            ref = refined_intensities(cfg, thr.d_ou_star, thr.d_ol_star, lam.lambda_ou, lam.lambda_ol, variant)
            rows += [(f"lambda_ou_refined_{variant}", ref.lambda_ou),
                     (f"lambda_ol_refined_{variant}", ref.lambda_ol),
                     (f"refined_clamped_{variant}", float(ref.clamped))]
        integ = refined_intensities_integrated(cfg, thr.d_ou_star, thr.d_ol_star, lam.lambda_ou, lam.lambda_ol)
        rows += [("lambda_ou_refined_capped", integ.lambda_ou),
                 ("lambda_ol_refined_capped", integ.lambda_ol)]
    return rows


SWEEP_COLUMNS = ("sweep_param", "sweep_value", "mode", "metric", "value", "half_width",
                 "trials", "seed", "config_hash", "flag")


def dataset_meta(cfg: SystemConfig, command: str) -> dict[str, str]:
    return {"command": command, "file_size_unit": cfg.file_size_unit, "base_config_hash": config_hash(cfg)}


def sweep_point(cfg: SystemConfig, mode: str, trials: int, seed: int, workers: int = 1,
                max_receivers: int | None = 50, param: str = "", value: float = math.nan) -> list[tuple]:
    """Analytic and simulated metric rows for one configuration and mode."""
    h = config_hash(cfg)

    def row(metric, val, hw=math.nan, flag=""):
        return (param, value, mode, metric, val, hw, trials, seed, h, flag)

    try:
        thr = thresholds_for_mode(cfg, mode, trials=trials, seed=seed, workers=workers)
    except InfeasibleThresholds as exc:
        return [row("infeasible", 1.0, flag=f"infeasible: {exc}".replace(",", ";"))]
    flag = "capped" if thr.capped else ""
    rows = [row(m, v, flag=flag) for m, v in analytic_rows(cfg, thr)]
    stats = estimate_stats(cfg, thr, trials, seed, workers=workers, max_receivers=max_receivers)
    rows += [row(m, v, hw, flag) for m, v, hw in stats.rows()]
    return rows


def run_sweep(spec: SweepSpec, base: SystemConfig, workers: int = 1,
              max_receivers: int | None = 50) -> Dataset:
    """Sweep one config field; rows come out in grid order."""
    ds = Dataset(SWEEP_COLUMNS, meta=dataset_meta(base, "sweep"))
    for value in spec.grid:
        cfg = base.replace(**{spec.param: float(value)})
        ds.rows += sweep_point(cfg, spec.mode, spec.trials, spec.seed, workers, max_receivers,
                               spec.param, float(value))
    if spec.out:
        ds.write(spec.out)
    return ds


def simulate_dataset(cfg: SystemConfig, mode: str, trials: int, seed: int, workers: int = 1,
                     max_receivers: int | None = 50) -> Dataset:
    ds = Dataset(SWEEP_COLUMNS, meta=dataset_meta(cfg, "simulate"))
    ds.rows = sweep_point(cfg, mode, trials, seed, workers, max_receivers)
    return ds


ITERATION_COLUMNS = ("iteration", "d_ou_star", "d_ol_star", "moment_ou", "moment_ol",
                     "lambda_ou_emp", "lambda_ol_emp", "rel_change", "converged",
                     "trials", "seed", "config_hash")


def iteration_dataset(cfg: SystemConfig, trials: int, seed: int, tol: float = 1e-3,
                      max_iter: int = 20, workers: int = 1) -> tuple[Dataset, Thresholds]:
    thr = iterate_thresholds(cfg, tol=tol, max_iter=max_iter, trials_per_iter=trials, seed=seed,
                             workers=workers)
    ds = Dataset(ITERATION_COLUMNS, meta=dataset_meta(cfg, "iterate"))
    h = config_hash(cfg)
    for rec in thr.trace:
        ds.rows.append((rec.iteration, rec.d_ou_star, rec.d_ol_star, rec.mean_pow_moment_ou,
                        rec.mean_pow_moment_ol, rec.lambda_ou_emp, rec.lambda_ol_emp, rec.rel_change,
                        thr.converged, trials, seed, h))
    return ds, thr


THINNING_COLUMNS = ("d_ou", "d_ol", "band", "sir_db", "analytic", "analytic_closed_form",
                    "empirical", "half_width", "samples", "active_intensity", "trials", "seed",
                    "config_hash")


@dataclass
class ThinningCurve:
    d_ou: float
    d_ol: float
    band: str
    sir_db: np.ndarray
    analytic: np.ndarray  # homogeneous PPP with the measured active-transmitter intensity
    analytic_closed_form: np.ndarray  # homogeneous PPP with the closed-form thinned intensity
    empirical: np.ndarray
    samples: int
    active_intensity: float

    @property
    def max_gap(self) -> float:
        if self.samples == 0:
            return 0.0
        return float(np.max(np.abs(self.analytic - self.empirical)))

    @property
    def max_gap_closed_form(self) -> float:
        if self.samples == 0:
            return 0.0
        return float(np.max(np.abs(self.analytic_closed_form - self.empirical)))


def _thinning_trial(cfg: SystemConfig, d_ou: float, d_ol: float, seed: int, trial: int,
                    max_receivers: int | None):
    real = realize(cfg, seed, trial, d_ou, d_ol)
    asg = fixed_power_assignments(real, cfg, d_ou, d_ol)
    rx = sample_receivers(real, asg, max_receivers, stream(seed, trial, "RECEIVERS"))
    dp_pos = real.dps.positions[np.maximum(asg.dp_index, 0)]
    dp_inner = np.hypot(dp_pos[:, 0], dp_pos[:, 1]) <= cfg.inner_radius
    out = {}
    for mode in (Mode.OUTBAND, Mode.OVERLAY):
        idx = rx[mode]
        sir = evaluate_sirs(real, asg, cfg, idx) if len(idx) else np.zeros(0)
        active = int(np.count_nonzero((asg.mode == mode) & dp_inner))
        out[mode] = (sir, asg.link_distance[idx], active)
    return out


def _homogeneous_coverage(theta, link_d, interference, cfg: SystemConfig) -> np.ndarray:
    """Mean over links of P[SIR > theta] for a PPP interference field at p_max."""
    if len(link_d) == 0:
        return np.ones(len(theta))
    k = cfg.exponent
    scale = np.pi * interference / (sinc_norm(k) * cfg.p_max**k)
    return np.exp(-scale * theta[:, None] ** k * link_d[None, :] ** 2).mean(axis=1)


def thinning_curves(base: SystemConfig, d_grid, trials: int, seed: int, sir_db=DEFAULT_SIR_DB,
                    workers: int = 1, max_receivers: int | None = 50) -> list[ThinningCurve]:
    """Coverage of outband / overlay DCs, simulated against homogeneous-PPP predictions.

    Every D2D link transmits at ``p_max``. Pairs are split at ``d_ou``; pairs
    up to ``d_ol`` go overlay. The analytic curve averages the PPP coverage
    over the simulated link lengths, using the measured density of active
    transmitters; a second curve uses the closed-form thinned intensity.
    """
    sir_db = np.asarray(sir_db, dtype=float)
    theta = 10.0 ** (sir_db / 10.0)
    k = base.exponent
    area = np.pi * base.inner_radius**2
    curves = []
    for d_ou, d_ol in d_grid:
        results = run_trials(lambda t: _thinning_trial(base, d_ou, d_ol, seed, t, max_receivers),
                             trials, workers)
        lam = band_intensities(base, d_ou, d_ol)
        for mode, lam_cf in ((Mode.OUTBAND, lam.lambda_ou), (Mode.OVERLAY, lam.lambda_ol)):
            sir = np.concatenate([r[mode][0] for r in results])
            link_d = np.concatenate([r[mode][1] for r in results])
            active = sum(r[mode][2] for r in results) / (trials * area)
            ext = base.lambda_ext * base.p_ext**k if mode == Mode.OUTBAND else 0.0
            analytic = _homogeneous_coverage(theta, link_d, active * base.p_max**k + ext, base)
            closed = _homogeneous_coverage(theta, link_d, lam_cf * base.p_max**k + ext, base)
            if len(sir):
                empirical = np.count_nonzero(sir[:, None] > theta[None, :], axis=0) / len(sir)
            else:
                empirical = np.ones(len(theta))
            curves.append(ThinningCurve(d_ou, d_ol, mode.name.lower(), sir_db, analytic, closed,
                                        empirical, len(sir), active))
    return curves


def validate_thinning(base: SystemConfig, d_grid, trials: int, seed: int, sir_db=DEFAULT_SIR_DB,
                      workers: int = 1, max_receivers: int | None = 50) -> Dataset:
    curves = thinning_curves(base, d_grid, trials, seed, sir_db, workers, max_receivers)
    ds = Dataset(THINNING_COLUMNS, meta=dataset_meta(base, "validate"))
    h = config_hash(base)
    for c in curves:
        for i, db in enumerate(c.sir_db):
            emp = float(c.empirical[i])
            ds.rows.append((c.d_ou, c.d_ol, c.band, float(db), float(c.analytic[i]),
                            float(c.analytic_closed_form[i]), emp, binomial_half_width(emp, c.samples),
                            c.samples, c.active_intensity, trials, seed, h))
    return ds
