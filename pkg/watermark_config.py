"""
Configuration for the Mesh Watermarking Toolkit
Plain-text key = value settings shared by embedding, extraction and the experiments
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

from qim import QimConfig
from runlength_code import RunAlphabet
from vertex_stability import StabilityConfig
from watermark_errors import ConfigError

logger = logging.getLogger(__name__)


def _boolean(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _polarity(text: str) -> int:
    if text not in ("1-first", "0-first"):
        raise ValueError("polarity must be 1-first or 0-first")
    return 1 if text == "1-first" else 0


def _order(text: str) -> str:
    if text not in ("rank", "index"):
        raise ValueError("order must be rank or index")
    return text


def _frame(text: str) -> str:
    if text not in ("vertex", "surface"):
        raise ValueError("frame must be vertex or surface")
    return text


@dataclass(frozen=True)
class WatermarkConfig:
    """Resolved settings; see README for the meaning of each key"""
    delta: float = 0.01
    L: int = 1
    bits_per_symbol: int = 1
    s_d: int = 1
    first_polarity: int = 1
    code: Optional[str] = None
    w_gaussian: float = 0.5
    w_mean: float = 0.3
    w_concave: float = 0.2
    w_roughness: float = 0.0
    risky_percentile: float = 20.0
    min_vertices: int = 4
    interleave: bool = False
    order: str = "index"
    frame: str = "vertex"
    refine_passes: int = 4
    p_d: float = 0.02
    max_iter: int = 50
    payload_bits: int = 0
    transform: bool = False
    transform_p0: float = 0.5
    key: int = 0

    def __post_init__(self):
        checks = [
            (self.delta > 0, "delta must be positive"),
            (self.L >= 1, "L must be at least 1"),
            (1 <= self.bits_per_symbol <= 8, "alphabet.bits_per_symbol must lie in 1..8"),
            (self.s_d >= 1, "s_d must be at least 1"),
            (0.0 <= self.p_d < 1.0, "p_d must lie in [0, 1)"),
            (self.max_iter >= 1, "max_iter must be at least 1"),
            (self.payload_bits >= 0, "payload_bits must be non-negative"),
            (0.0 < self.transform_p0 < 1.0, "transform.p0 must lie in (0, 1)"),
            (self.refine_passes >= 1, "refine_passes must be at least 1"),
            (0.0 <= self.risky_percentile < 100.0, "stability.risky_percentile must lie in [0, 100)"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if self.transform and self.bits_per_symbol != 1:
            raise ConfigError("the distribution transformer works on binary messages only")

    def qim_config(self) -> QimConfig:
        return QimConfig(self.delta, self.L, self.key, self.frame, self.refine_passes)

    def stability_config(self) -> StabilityConfig:
        return StabilityConfig(self.w_gaussian, self.w_mean, self.w_concave, self.w_roughness,
                               self.risky_percentile, self.min_vertices)

    def alphabet(self) -> RunAlphabet:
        return RunAlphabet.default(self.bits_per_symbol, self.s_d, self.first_polarity)

    def to_text(self) -> str:
        """Render in the file format, one documented key per line"""
        lines = []
        for key, (attribute, _) in KEYS.items():
            value = getattr(self, attribute)
            if value is None:
                continue
            if attribute == "first_polarity":
                value = "1-first" if value else "0-first"
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **changes) -> "WatermarkConfig":
        try:
            return replace(self, **changes)
        except TypeError as error:
            raise ConfigError(str(error)) from None


# File key -> (attribute, parser)
KEYS: Dict[str, Tuple[str, Callable[[str], object]]] = {
    "delta": ("delta", float),
    "L": ("L", int),
    "alphabet.bits_per_symbol": ("bits_per_symbol", int),
    "s_d": ("s_d", int),
    "polarity": ("first_polarity", _polarity),
    "code": ("code", str),
    "stability.w_gaussian": ("w_gaussian", float),
    "stability.w_mean": ("w_mean", float),
    "stability.w_concave": ("w_concave", float),
    "stability.w_roughness": ("w_roughness", float),
    "stability.risky_percentile": ("risky_percentile", float),
    "stability.min_vertices": ("min_vertices", int),
    "interleave": ("interleave", _boolean),
    "order": ("order", _order),
    "frame": ("frame", _frame),
    "refine_passes": ("refine_passes", int),
    "p_d": ("p_d", float),
    "max_iter": ("max_iter", int),
    "payload_bits": ("payload_bits", int),
    "transform": ("transform", _boolean),
    "transform.p0": ("transform_p0", float),
    "key": ("key", int),
}


def parse_config(text: str, base_dir: Optional[Path] = None) -> WatermarkConfig:
    """Parse key = value lines; a relative `code` path resolves against base_dir"""
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        attribute, parser = KEYS[key]
        try:
            values[attribute] = parser(value)
        except ValueError as error:
            raise ConfigError(f"line {number}: bad value for {key}: {error}") from None
    if values.get("code") and base_dir is not None and not Path(values["code"]).is_absolute():
        values["code"] = str(Path(base_dir) / values["code"])
    return WatermarkConfig(**values)


def load_config(path: Union[str, Path, None]) -> WatermarkConfig:
    """Read a config file; None gives the defaults"""
    if path is None:
        return WatermarkConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"cannot read config {path}: {error.strerror}") from None
    config = parse_config(text, path.parent)
    logger.info("loaded configuration from %s", path)
    return config
