"""System parameters and the flat ``key=value`` config format."""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Raised for unparseable or invalid configuration input."""


@dataclass(frozen=True)
class SystemConfig:
    """Network, QoS and simulation-region parameters.

    Defaults are the reference evaluation setup
    (intensities in points per m^2, powers in mW, bandwidths in Hz, delays
    in seconds, file size in bits).
    """

    lambda_bs: float = 10 ** -5.5
    lambda_dc: float = 1e-3
    lambda_dp: float = 1e-4
    lambda_ext: float = 10 ** -3.5
    p_bs: float = 100.0
    p_max: float = 2.5
    p_ext: float = 2.0
    alpha: float = 3.5
    chp: float = 0.5
    file_size: float = 80e3
    bw_bs: float = 5e6
    bw_ou: float = 5e6
    bw_ol: float = 5e6
    d_max: float = 0.5e-3
    proc_delay: float = 0.1e-3
    region_radius: float = 3000.0
    # how the "80 kB" file size was read; recorded in every output file
    file_size_unit: str = "bits"
    # use p*lambda_dp (instead of lambda_dp) in the overlay E coefficient
    e_bracket_uses_chp: bool = False
    # interfering DPs transmit at p_max instead of their assigned power
    worst_case_interferers: bool = False
    # receivers are only evaluated inside radius inner_fraction * region_radius
    inner_fraction: float = 0.5

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def exponent(self) -> float:
        """The recurring power 2/alpha."""
        return 2.0 / self.alpha

    @property
    def inner_radius(self) -> float:
        return self.inner_fraction * self.region_radius

    def replace(self, **changes) -> SystemConfig:
        return dataclasses.replace(self, **changes)


_FLOAT_FIELDS = tuple(
    f.name for f in dataclasses.fields(SystemConfig) if f.type in ("float", float)
)
_BOOL_FIELDS = ("e_bracket_uses_chp", "worst_case_interferers")
SWEEPABLE = _FLOAT_FIELDS


def _validate(cfg: SystemConfig) -> None:
    for name in _FLOAT_FIELDS:
        value = getattr(cfg, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{name} must be a finite number, got {value!r}")
    if not cfg.alpha > 2:
        raise ConfigError(f"alpha > 2 required (interference integral diverges), got {cfg.alpha}")
    if not 0 <= cfg.chp <= 1:
        raise ConfigError(f"chp must lie in [0, 1], got {cfg.chp}")
    for name in ("lambda_bs", "lambda_dc", "lambda_dp", "lambda_ext"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{name} must be >= 0, got {getattr(cfg, name)}")
    for name in ("p_bs", "p_max", "p_ext", "bw_bs", "bw_ou", "bw_ol", "region_radius"):
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"{name} must be > 0, got {getattr(cfg, name)}")
    if cfg.file_size < 0:
        raise ConfigError(f"file_size must be >= 0, got {cfg.file_size}")
    if cfg.proc_delay < 0:
        raise ConfigError(f"proc_delay must be >= 0, got {cfg.proc_delay}")
    if not cfg.d_max > cfg.proc_delay:
        raise ConfigError(
            f"d_max > proc_delay required, got d_max={cfg.d_max}, proc_delay={cfg.proc_delay}"
        )
    if not 0 < cfg.inner_fraction <= 1:
        raise ConfigError(f"inner_fraction must lie in (0, 1], got {cfg.inner_fraction}")
    if cfg.file_size_unit not in ("bits", "bytes"):
        raise ConfigError(f"file_size_unit must be 'bits' or 'bytes', got {cfg.file_size_unit!r}")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str, source: str = "<string>") -> SystemConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Keys are the :class:`SystemConfig` field names, except that the file size
    is given as either ``file_size_bits`` or ``file_size_bytes`` (not both).
    """
    values: dict[str, object] = {}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first on line {seen[key]})")
        seen[key] = lineno
        try:
            if key in ("file_size_bits", "file_size_bytes"):
                values[key] = float(value)
            elif key in _BOOL_FIELDS:
                values[key] = _parse_bool(value)
            elif key in _FLOAT_FIELDS:
                values[key] = float(value)
            else:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None

    if "file_size_bits" in values and "file_size_bytes" in values:
        raise ConfigError(
            f"{source}: file size given twice (file_size_bits on line {seen['file_size_bits']}, "
            f"file_size_bytes on line {seen['file_size_bytes']})"
        )
    if "file_size_bits" in values:
        values["file_size"] = values.pop("file_size_bits")
        values["file_size_unit"] = "bits"
    elif "file_size_bytes" in values:
        values["file_size"] = 8.0 * values.pop("file_size_bytes")
        values["file_size_unit"] = "bytes"
    return SystemConfig(**values)


def load_config(path: str | Path) -> SystemConfig:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def config_lines(cfg: SystemConfig) -> list[str]:
    """Canonical ``key=value`` rendering, round-trippable through :func:`parse_config`."""
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if f.name == "file_size":
            if cfg.file_size_unit == "bytes":
                lines.append(f"file_size_bytes={cfg.file_size / 8.0!r}")
            else:
                lines.append(f"file_size_bits={value!r}")
        elif f.name == "file_size_unit":
            continue
        elif isinstance(value, bool):
            lines.append(f"{f.name}={'true' if value else 'false'}")
        else:
            lines.append(f"{f.name}={float(value)!r}")
    return lines


def config_hash(cfg: SystemConfig) -> str:
    digest = hashlib.sha256("\n".join(config_lines(cfg)).encode())
    return digest.hexdigest()[:12]
