from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidInputError
from .se_backbone import BackboneConfig, validate_dilations

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class TrackerConfig:
    template_size: int = 127
    search_size: int = 287
    context_margin: float = 0.5
    window_influence: float = 0.40
    size_smoothing: float = 0.30
    enable_psan: bool = True
    enable_sa_apn: bool = True
    seed: int = 0
    scale_dilations: tuple = (1, 2, 3)
    inter_scale: int = 1

    def __post_init__(self):
        if self.template_size <= 0 or self.search_size <= self.template_size:
            raise InvalidInputError(
                f"need 0 < template_size < search_size, got {self.template_size}, {self.search_size}"
            )
        if self.context_margin < 0:
            raise InvalidInputError("context_margin must be non-negative")
        for name in ("window_influence", "size_smoothing"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1], got {value}")
        object.__setattr__(self, "scale_dilations", tuple(int(d) for d in self.scale_dilations))
        validate_dilations(self.scale_dilations)
        if self.inter_scale < 1 or self.inter_scale % 2 == 0 or self.inter_scale > len(self.scale_dilations):
            raise InvalidInputError(
                f"inter_scale must be odd and at most {len(self.scale_dilations)}, got {self.inter_scale}"
            )

    @property
    def backbone(self):
        return BackboneConfig(
            template_size=self.template_size, search_size=self.search_size, rng_seed=self.seed
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["scale_dilations"] = list(self.scale_dilations)
        return d


def _parse_value(kind, text, key):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind is tuple:
            return tuple(int(p) for p in text.replace(" ", "").split(",") if p)
        return kind(text)
    except ValueError:
        raise InvalidInputError(f"config key {key!r}: cannot parse {text!r}") from None


def parse_config(text):
    """Parse ``key = value`` lines (``#`` starts a comment) into a TrackerConfig."""
    kinds = {f.name: type(f.default) for f in dataclasses.fields(TrackerConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else (":" if ":" in line else None)
        if sep is None:
            raise InvalidInputError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split(sep, 1))
        if key not in kinds:
            raise InvalidInputError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(kinds[key], value, key)
    return TrackerConfig(**values)


def load_config(path):
    return parse_config(Path(path).read_text())


def format_config(cfg):
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
