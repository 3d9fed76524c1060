"""Flat ``key = value`` experiment configuration.

Grammar (one entry per line)::

    # comment
    key = value
    list_key = 1, 2, 4

Blank lines and ``#`` comments are ignored; keys are case-sensitive; a key
may appear once.  Lists are comma separated.  Booleans accept
true/false/yes/no/on/off/1/0.  ``inf`` is accepted for truncation levels.
"""
from dataclasses import dataclass, field, fields
import math
from pathlib import Path

from .errors import ConfigError
from .nonlinearity import parse_nonlinearity

MODES = ("dipole", "combined", "k_limit", "supercritical_contrast", "kernels_selftest")
DUMP_FORMATS = ("none", "csv", "binary", "both")
ASSERTION_KEYS = (
    "assert_subcritical", "assert_orderings", "assert_odd", "assert_sandwich",
    "assert_targets", "assert_warm_start", "assert_determinism", "assert_contrast",
)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _pair(text):
    vals = _floats(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise ValueError(f"expected 'lo, hi' with lo < hi, got {text!r}")
    return vals


def _optional_pair(text):
    return None if text.strip().lower() in ("", "auto", "none") else _pair(text)


def _optional_floats(text):
    return None if text.strip().lower() in ("", "auto", "none") else _floats(text)


@dataclass
class ExperimentConfig:
    mode: str = "dipole"
    dimension: int = 2
    M: int = 257
    nonlinearity: str = "power:2"
    k: tuple = (1.0,)
    j: tuple = (0.0,)
    t: tuple = (0.25, 0.125, 0.0625)
    n: tuple = ()
    K: int = None
    eps_ratio: float = 0.25
    auto_n: bool = True
    control_p: float = None
    fit_direction: tuple = None
    fit_rmax: float = 0.2
    fit_window: tuple = None
    dirac_window: tuple = None
    exponent_window: tuple = (0.2, 0.45)
    angular_radius: float = 0.3
    target_tolerance: float = 0.10
    contrast_drop: float = 0.5
    richardson: bool = False
    workers: int = 1
    output_dir: str = "out"
    dump_fields: str = "csv"
    tol_linear: float = None
    tol_nl_rel: float = None
    max_newton: int = None
    preconditioner: str = None
    assert_subcritical: bool = True
    assert_orderings: bool = True
    assert_odd: bool = True
    assert_sandwich: bool = True
    assert_targets: bool = False
    assert_warm_start: bool = False
    assert_determinism: bool = False
    assert_contrast: bool = False
    source_path: str = field(default=None, repr=False)

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dimension not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.M < 5 or self.M % 2 == 0:
            raise ConfigError(f"M must be odd and >= 5, got {self.M}")
        if self.dump_fields not in DUMP_FORMATS:
            raise ConfigError(f"dump_fields must be one of {DUMP_FORMATS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.g = parse_nonlinearity(self.nonlinearity)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def strict(self):
        for key in ASSERTION_KEYS:
            setattr(self, key, True)
        return self

    def to_dict(self):
        out = {}
        for f in fields(self):
            if f.name == "source_path":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = [("inf" if isinstance(x, float) and math.isinf(x) else x) for x in v]
            out[f.name] = v
        return out


_PARSERS = {
    "mode": str, "dimension": int, "M": int, "nonlinearity": str, "k": _floats, "j": _floats,
    "t": _floats, "n": _floats, "K": int, "eps_ratio": float, "auto_n": _bool,
    "control_p": float, "fit_direction": _optional_floats, "fit_rmax": float,
    "fit_window": _optional_pair, "dirac_window": _optional_pair, "exponent_window": _pair,
    "angular_radius": float, "target_tolerance": float, "contrast_drop": float,
    "richardson": _bool, "workers": int, "output_dir": str, "dump_fields": str,
    "tol_linear": float, "tol_nl_rel": float, "max_newton": int, "preconditioner": str,
    **{key: _bool for key in ASSERTION_KEYS},
}


def parse_config(text, source_path=None):
    """Parse config text; unknown or repeated keys raise ConfigError."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: key {key!r} given twice")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    cfg = ExperimentConfig(**values, source_path=source_path)
    return cfg.validate()


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source_path=str(path))
