"""Experiment configuration: validation, file parsing, manifests.

Configs are plain ``key = value`` text files (``#`` comments allowed);
command-line flags override file values. Every constraint from the domain
modules is enforced here at parse time so errors carry the offending key.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Optional, Tuple

from .analytic import MODE_IRC, MODE_NC, MODE_RC, AnalyticParams, w1_area
from .errors import ConfigError
from .geometry import DEFAULT_MARGIN_CELLS, Window, default_window

MODES = (MODE_NC, MODE_IRC, MODE_RC)
AREA_SOURCES = ("bound", "numeric")

# Candidate relays are collected within this many sqrt(cell area) of the
# transmitter; None means every receiver in the window is a candidate.
# 1.6 sqrt(|W1|) is about five times the e^-1 decay length of the decode
# probability, where the residual decode probability is below 1e-6.
DEFAULT_CAND_RADIUS_CELLS = 1.6

THREADS_ENV = "COOP_RELAY_THREADS"


@dataclass(frozen=True)
class SimConfig:
    """Full parameterization of one experiment."""

    lam: float = 1.0
    p: float = 0.05
    alpha: float = 3.0
    R: float = 3.0
    M: int = 1
    mode: str = MODE_NC
    trials: int = 10000
    seed: int = 1
    window: Optional[Tuple[float, float, float, float]] = None  # None -> auto
    margin_cells: float = DEFAULT_MARGIN_CELLS
    cand_radius_cells: Optional[float] = DEFAULT_CAND_RADIUS_CELLS
    contention_bits: int = 6
    contention_d_max: float = 10.0
    budget: int = 60000
    area_source: str = "bound"
    workers: Optional[int] = None

    def __post_init__(self):
        _validate(self)

    def analytic_params(self, exact_tail: bool = False) -> AnalyticParams:
        return AnalyticParams(self.lam, self.p, self.alpha, self.R, exact_tail=exact_tail)

    def cell_area(self) -> float:
        """Single-hop decoding-cell area |W1| at this parameter point."""
        return w1_area(self.analytic_params())

    def resolved_window(self) -> Window:
        if self.window is not None:
            return Window(*self.window)
        return default_window(self.cell_area(), self.margin_cells)

    def cand_radius(self) -> Optional[float]:
        if self.cand_radius_cells is None:
            return None
        return self.cand_radius_cells * math.sqrt(self.cell_area())

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise ConfigError(THREADS_ENV, f"not an integer: {env!r}")
        return max(1, os.cpu_count() or 1)


def _validate(cfg: SimConfig):
    if cfg.lam <= 0:
        raise ConfigError("lambda", f"intensity must be positive, got {cfg.lam}")
    if not 0.0 < cfg.p < 1.0:
        raise ConfigError("p", f"medium access probability must be in (0,1), got {cfg.p}")
    if cfg.alpha <= 2.0:
        raise ConfigError("alpha", f"path loss exponent must exceed 2, got {cfg.alpha}")
    if cfg.R <= 0:
        raise ConfigError("R", f"code rate must be positive, got {cfg.R}")
    if cfg.M < 1 or int(cfg.M) != cfg.M:
        raise ConfigError("M", f"diversity order must be an integer >= 1, got {cfg.M}")
    if cfg.mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}, got {cfg.mode!r}")
    if cfg.mode == MODE_NC and cfg.M != 1:
        raise ConfigError("M", "no-cooperation mode requires M = 1")
    if cfg.mode in (MODE_IRC, MODE_RC) and cfg.M < 2:
        raise ConfigError("M", f"{cfg.mode} combining requires M >= 2")
    if cfg.trials < 1:
        raise ConfigError("trials", f"must be >= 1, got {cfg.trials}")
    if cfg.seed < 0:
        raise ConfigError("seed", f"must be non-negative, got {cfg.seed}")
    if cfg.window is not None:
        x0, x1, y0, y1 = cfg.window
        if not (x0 < x1 and y0 < y1):
            raise ConfigError("window", f"degenerate window {cfg.window}")
        if not (x0 < 0.0 < x1 and y0 < 0.0 < y1):
            raise ConfigError("window", "window must contain the source at the origin")
    if cfg.margin_cells <= 0:
        raise ConfigError("margin_cells", "must be positive")
    if cfg.cand_radius_cells is not None and cfg.cand_radius_cells <= 0:
        raise ConfigError("cand_radius_cells", "must be positive (or empty for no limit)")
    if cfg.contention_bits < 1:
        raise ConfigError("contention_bits", f"must be >= 1, got {cfg.contention_bits}")
    if cfg.contention_d_max <= 0:
        raise ConfigError("contention_d_max", "must be positive")
    if cfg.budget < 1:
        raise ConfigError("budget", "must be >= 1")
    if cfg.area_source not in AREA_SOURCES:
        raise ConfigError("area_source", f"must be one of {AREA_SOURCES}")
    if cfg.workers is not None and cfg.workers < 1:
        raise ConfigError("workers", "must be >= 1 when given")


_KEY_ALIASES = {"lambda": "lam"}
_FLOAT_KEYS = {"lam", "p", "alpha", "R", "margin_cells", "contention_d_max"}
_INT_KEYS = {"M", "trials", "seed", "contention_bits", "budget", "workers"}
_STR_KEYS = {"mode", "area_source"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw.upper() if key == "mode" else raw.lower()
    if key == "window":
        if raw.lower() in ("auto", "none", ""):
            return None
        parts = [t for t in raw.replace(",", " ").split() if t]
        if len(parts) != 4:
            raise ConfigError("window", f"expected 'auto' or 4 numbers, got {raw!r}")
        return tuple(float(t) for t in parts)
    if key == "cand_radius_cells":
        if raw.lower() in ("none", ""):
            return None
        return float(raw)
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ConfigError(key, f"could not parse value {raw!r}")
    raise ConfigError(key, "unknown configuration key")


def config_from_mapping(values: Dict[str, object]) -> SimConfig:
    """Build a validated SimConfig from already-typed values."""
    kwargs = {}
    for key, val in values.items():
        key = _KEY_ALIASES.get(key, key)
        if key not in SimConfig.__dataclass_fields__:
            raise ConfigError(key, "unknown configuration key")
        if key == "window" and val is not None:
            val = tuple(float(v) for v in val)
        kwargs[key] = val
    return SimConfig(**kwargs)


def parse_config(path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None) -> SimConfig:
    """Parse a key=value config file, then apply string overrides.

    ``path`` may also point to a JSON run manifest written by the CLI, in
    which case the embedded config is loaded (reproducing a prior run).
    """
    values: Dict[str, object] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError("config", f"file not found: {path}")
        with open(path) as fh:
            text = fh.read()
        if text.lstrip().startswith("{"):
            manifest = json.loads(text)
            values.update(manifest["config"])
        else:
            for lineno, line in enumerate(text.splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError("config", f"line {lineno}: expected key = value, got {line!r}")
                key, raw = line.split("=", 1)
                key = _KEY_ALIASES.get(key.strip(), key.strip())
                if key not in SimConfig.__dataclass_fields__:
                    raise ConfigError(key, "unknown configuration key")
                values[key] = _parse_value(key, raw)
    for key, raw in (overrides or {}).items():
        key = _KEY_ALIASES.get(key, key)
        if key not in SimConfig.__dataclass_fields__:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _parse_value(key, str(raw))
    return config_from_mapping(values)


def config_to_mapping(cfg: SimConfig) -> Dict[str, object]:
    """Plain-JSON representation; inverse of :func:`config_from_mapping`."""
    out = asdict(cfg)
    if out["window"] is not None:
        out["window"] = list(out["window"])
    return out
