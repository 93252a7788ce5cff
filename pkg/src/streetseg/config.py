"""Flat ``key = value`` text configs with optional repeated ``[section]`` stanzas.

configparser merges repeated sections, which scene files rely on, so this
keeps its own tiny reader.  ``#`` starts a comment anywhere on a line.
"""
from dataclasses import asdict, dataclass, fields
from importlib import resources


class ConfigError(ValueError):
    pass


def parse_text(text):
    """Return ``(top, stanzas)``: a dict and a list of ``(name, dict)`` in file order."""
    top = {}
    stanzas = []
    current = top
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {}
            stanzas.append((line[1:-1].strip().lower(), current))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in current:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        current[key] = value
    return top, stanzas


def to_bool(value):
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class PipelineConfig:
    resolution: float = 20.0
    block_resolution_divisor: int = 4
    lam: float = 1.0
    detect_threshold: float = 0.10
    h_maxima: float = 0.10
    area_opening_px: int = 25
    min_component_px: int = 10
    min_accumulation: int = 3
    p_cutoff: float = 0.01
    cv_folds: int = 10
    seed: int = 42
    fill_connectivity: str = "square8"
    zone_connectivity: str = "cross4"
    band_halfwidth: float = 2.0
    smoothing_window: int = 11
    min_depth: float = 3.0
    use_blocks: bool = True

    def __post_init__(self):
        for name in ("resolution", "lam", "detect_threshold", "h_maxima", "band_halfwidth", "min_depth"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.block_resolution_divisor < 1:
            raise ConfigError("block_resolution_divisor must be >= 1")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.area_opening_px < 1 or self.min_component_px < 0 or self.min_accumulation < 0:
            raise ConfigError("pixel and count thresholds must be non-negative (area >= 1)")
        if not 0 <= self.p_cutoff <= 1:
            raise ConfigError("p_cutoff must be a probability")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ConfigError("smoothing_window must be odd and >= 1")
        for name in ("fill_connectivity", "zone_connectivity"):
            if getattr(self, name) not in ("cross4", "square8"):
                raise ConfigError(f"{name} must be cross4 or square8")

    @classmethod
    def from_mapping(cls, mapping, base=None):
        base = base or cls()
        known = {f.name: f.type for f in fields(cls)}
        values = asdict(base)
        for key, raw in mapping.items():
            name = key.replace("-", "_")
            if name == "lambda":
                name = "lam"
            if name not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kind = known[name]
            try:
                if kind in (bool, "bool"):
                    values[name] = raw if isinstance(raw, bool) else to_bool(raw)
                elif kind in (int, "int"):
                    values[name] = int(raw)
                elif kind in (float, "float"):
                    values[name] = float(raw)
                else:
                    values[name] = str(raw).strip().lower()
            except ValueError:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from None
        return cls(**values)

    @classmethod
    def from_text(cls, text, base=None):
        top, stanzas = parse_text(text)
        if stanzas:
            raise ConfigError("pipeline config takes no [sections]")
        return cls.from_mapping(top, base)

    def to_text(self):
        out = []
        for key, value in asdict(self).items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            out.append(f"{'lambda' if key == 'lam' else key} = {value}")
        return "\n".join(out) + "\n"


def default_config_text():
    return resources.files("streetseg").joinpath("default.cfg").read_text()


def load_config(path=None):
    base = PipelineConfig.from_text(default_config_text())
    if path is None:
        return base
    with open(path) as fh:
        return PipelineConfig.from_text(fh.read(), base)
