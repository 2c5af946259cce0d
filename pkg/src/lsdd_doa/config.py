"""Pipeline configuration: defaults, flat key=value files, CLI overrides.

Every tunable of the estimation pipeline maps to exactly one key. Files
are plain text, one ``key = value`` per line, ``#`` comments allowed;
command-line flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError

WEIGHT_MODES = ("base", "new")
QUALITY_MODES = ("base", "new", "ideal")
RANK_SCOPES = ("global", "per_look")


@dataclass(frozen=True)
class PipelineConfig:
    """All estimation and evaluation parameters with their defaults."""

    dpd_threshold: float = 0.7  # key: lambda
    smoothing_rt: int = 3
    smoothing_rf: int = 7
    f_low_hz: float = 1500.0
    f_high_hz: float = 3500.0
    interval_ms: float = 500.0
    grid_resolution_deg: float = 1.0
    cluster_window_deg: int = 10
    delta_near_deg: float = 10.0
    delta_far_deg: float = 25.0
    udm_threshold: float = 0.85
    rank_scope: str = "global"
    weight_mode: str = "new"
    quality_mode: str = "new"
    zeta_deg: float = 3.0
    outlier_threshold_deg: float = 25.0
    low_error_threshold_deg: float = 10.0
    q_cap: float = 1e6
    speed_of_sound: float = 343.0
    chunk_frames: int = 256

    def __post_init__(self):
        if not 0.0 <= self.dpd_threshold <= 1.0:
            raise ConfigError("lambda must be in [0, 1]")
        for name in ("smoothing_rt", "smoothing_rf"):
            r = getattr(self, name)
            if r < 1 or r % 2 == 0:
                raise ConfigError(f"{name} must be an odd positive integer")
        if not 0.0 <= self.f_low_hz < self.f_high_hz:
            raise ConfigError("need 0 <= f_low_hz < f_high_hz")
        if self.interval_ms <= 0:
            raise ConfigError("interval_ms must be positive")
        if not 0.0 < self.grid_resolution_deg <= 90.0:
            raise ConfigError("grid_resolution_deg must be in (0, 90]")
        if not 1 <= self.cluster_window_deg <= 179:
            raise ConfigError("cluster_window_deg must be in [1, 179]")
        if not 0.0 < self.delta_near_deg < self.delta_far_deg:
            raise ConfigError("need 0 < delta_near_deg < delta_far_deg")
        if not 0.0 < self.udm_threshold < 1.0:
            raise ConfigError("udm_threshold must be in (0, 1)")
        if self.rank_scope not in RANK_SCOPES:
            raise ConfigError(f"rank_scope must be one of {RANK_SCOPES}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.quality_mode not in QUALITY_MODES:
            raise ConfigError(f"quality_mode must be one of {QUALITY_MODES}")
        if self.zeta_deg <= 0:
            raise ConfigError("zeta_deg must be positive")
        if self.outlier_threshold_deg <= 0 or self.low_error_threshold_deg <= 0:
            raise ConfigError("error thresholds must be positive")
        if self.q_cap < 1.0:
            raise ConfigError("q_cap must be at least 1")
        if self.speed_of_sound <= 0:
            raise ConfigError("speed_of_sound must be positive")
        if self.chunk_frames < 1:
            raise ConfigError("chunk_frames must be positive")


# config-file key <-> field name (identical except for the reserved word)
_KEY_TO_FIELD = {f.name: f.name for f in fields(PipelineConfig)}
_KEY_TO_FIELD["lambda"] = "dpd_threshold"
del _KEY_TO_FIELD["dpd_threshold"]
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}

_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(field_name: str, raw: str):
    kind = _FIELD_TYPES[field_name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {_FIELD_TO_KEY[field_name]}: {raw!r}") from exc


def config_from_items(items: dict[str, str], base: PipelineConfig | None = None) -> PipelineConfig:
    """Apply string-valued key overrides on top of ``base`` (or defaults)."""
    cfg = base or PipelineConfig()
    updates = {}
    for key, raw in items.items():
        if key not in _KEY_TO_FIELD:
            raise ConfigError(f"unknown config key {key!r}")
        field_name = _KEY_TO_FIELD[key]
        updates[field_name] = _coerce(field_name, raw)
    return replace(cfg, **updates)


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse a flat ``key = value`` file."""
    items: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            key, eq, value = text.partition("=")
            if not eq:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            items[key.strip()] = value.strip()
    return config_from_items(items, base)


def config_to_dict(cfg: PipelineConfig) -> dict:
    """Config echo with file keys, in declaration order."""
    return {_FIELD_TO_KEY[f.name]: getattr(cfg, f.name) for f in fields(PipelineConfig)}
