"""Model configuration and its key-value file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

__all__ = ["TrambaConfig", "load_config", "dump_config", "parse_config_text"]

DIRECTION_SHARING = ("shared", "per_direction")
DFVSS_BRANCHES = ("both", "high", "low", "none")


@dataclass(frozen=True)
class TrambaConfig:
    """Desk-scale defaults; the full model used 384x384 inputs with VMamba-B widths.

    The reference training recipe was Adam at lr 1e-4 for 60 epochs, then lr/5
    for 20 more; ``train_toy`` here uses fixed-step descent instead.
    """

    input_size: tuple[int, int] = (64, 64)
    base_channels: int = 16
    encoder_depths: tuple[int, int, int, int] = (1, 1, 1, 1)
    # ordered D3, D2, D1 (deepest decoder stage first)
    decoder_depths: tuple[int, int, int] = (1, 1, 1)
    d_state: int = 8
    window_size: int = 4
    dilation_rate: int = 2
    dct_cutoff: float = 0.5
    direction_sharing: str = "per_direction"
    ssm_expand: int = 1
    ffn_ratio: int = 2
    exact_zoh: bool = True
    dfvss_branches: str = "both"
    decoder_scans: tuple[str, ...] = ("helix", "cross")
    seed: int = 0

    def __post_init__(self):
        h, w = self.input_size
        if h % 32 or w % 32 or h <= 0 or w <= 0:
            raise ValueError(f"input size must be positive multiples of 32, got {self.input_size}")
        if len(self.encoder_depths) != 4 or len(self.decoder_depths) != 3:
            raise ValueError("need 4 encoder depths and 3 decoder depths")
        if min(self.encoder_depths + self.decoder_depths) < 1:
            raise ValueError("stage depths must be >= 1")
        for name in ("base_channels", "d_state", "window_size", "dilation_rate", "ssm_expand", "ffn_ratio"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.dct_cutoff <= 1.0:
            raise ValueError(f"dct_cutoff must lie in (0, 1], got {self.dct_cutoff}")
        if self.direction_sharing not in DIRECTION_SHARING:
            raise ValueError(f"direction_sharing must be one of {DIRECTION_SHARING}")
        if self.dfvss_branches not in DFVSS_BRANCHES:
            raise ValueError(f"dfvss_branches must be one of {DFVSS_BRANCHES}")
        if not self.decoder_scans:
            raise ValueError("decoder_scans must name at least one scan kind")

    @property
    def stage_channels(self) -> tuple[int, int, int, int]:
        c = self.base_channels
        return (c, 2 * c, 4 * c, 8 * c)

    def stage_sizes(self) -> list[tuple[int, int]]:
        h, w = self.input_size
        return [(h // f, w // f) for f in (4, 8, 16, 32)]

    def replace(self, **kw) -> "TrambaConfig":
        return dataclasses.replace(self, **kw)


_TUPLE_INT = {"input_size", "encoder_depths", "decoder_depths"}


def _coerce(name: str, raw: str, default):
    raw = raw.strip()
    if name in _TUPLE_INT:
        return tuple(int(v) for v in raw.replace("x", ",").split(",") if v.strip())
    if name == "decoder_scans":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config_text(text: str, base: TrambaConfig | None = None) -> TrambaConfig:
    """Parse ``key = value`` lines (``#`` comments) over ``base`` defaults."""
    base = base or TrambaConfig()
    fields = {f.name: getattr(base, f.name) for f in dataclasses.fields(TrambaConfig)}
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in fields:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        updates[key] = _coerce(key, value, fields[key])
    return base.replace(**updates)


def load_config(path, base: TrambaConfig | None = None) -> TrambaConfig:
    return parse_config_text(Path(path).read_text(), base)


def dump_config(cfg: TrambaConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(i) for i in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
