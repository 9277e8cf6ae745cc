"""Evaluation config files.

INI syntax (``key = value``).  ``[defaults]`` holds values shared by every
case, ``[output]`` names the report files, and every other section is one
case named after the section.  Physical quantities carry their unit in the
key name and all angles are in degrees::

    [defaults]
    n_trials = 500
    alt_m = 100
    hfov_deg = 35
    delta_theta_deg = 11.459155902616466

    [output]
    report_csv = report.csv

    [case1]
    sigma_att_deg = 0
    sigma_px = 0
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .harness import EvalCase
from .model import ConfigurationError, Disc, MatchParams, Rect

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "bundled_config"]

DEFAULTS_SECTION = "defaults"
OUTPUT_SECTION = "output"
OUTPUT_KEYS = ("report_csv", "report_json", "trials_csv", "timing_json")


class ConfigError(ValueError):
    """Malformed or inconsistent evaluation config."""


@dataclass(frozen=True)
class RunConfig:
    cases: tuple[EvalCase, ...]
    outputs: dict[str, str] = field(default_factory=dict)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _int(v: str) -> int:
    return int(v.strip())


def _floats(n: int) -> Callable[[str], tuple[float, ...]]:
    def parse(v: str) -> tuple[float, ...]:
        parts = [float(p) for p in v.split(",")]
        if len(parts) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return tuple(parts)
    return parse


def parse_region(v: str) -> Rect:
    """``WxH`` (origin at 0, 0) or ``xmin,ymin,xmax,ymax`` in meters."""
    s = v.strip().lower()
    if "x" in s:
        w, h = (float(p) for p in s.split("x"))
        if not (w >= 0 and h >= 0 and math.isfinite(w) and math.isfinite(h)):
            raise ValueError("region extents must be finite and >= 0")
        return Rect(0.0, 0.0, w, h)
    return Rect(*_floats(4)(s))


def _labels(v: str):
    """``a,b,c`` (equally likely) or ``a:0.7,b:0.3`` (weights)."""
    items = [p.strip() for p in v.split(",") if p.strip()]
    if not items:
        raise ValueError("empty label list")
    if any(":" in p for p in items):
        out = {}
        for p in items:
            name, w = p.split(":")
            out[name.strip()] = float(w)
        return out
    return items[0] if len(items) == 1 else tuple(items)


# key -> (EvalCase field or None, parser)
_CASE_KEYS: dict[str, tuple[str, Callable]] = {
    "sigma_att_deg": ("sigma_att_deg", float),
    "sigma_px": ("sigma_px", float),
    "hfov_deg": ("hfov_deg", float),
    "n_trials": ("n_trials", _int),
    "alt_m": ("alt_m", float),
    "db_seed": ("db_seed", _int),
    "noise_seed": ("noise_seed", _int),
    "db_count": ("n_objects", _int),
    "region_m": ("region", parse_region),
    "labels": ("labels", _labels),
    "width_px": ("width_px", _int),
    "height_px": ("height_px", _int),
    "inset": ("inset", _bool),
    "fp_threshold_m": ("fp_threshold_m", float),
}

# key -> (MatchParams field, parser)
_PARAM_KEYS: dict[str, tuple[str, Callable]] = {
    "n_min": ("n_min", _int),
    "delta_r": ("delta_r", float),
    "delta_theta_deg": ("delta_theta", lambda v: math.radians(float(v))),
    "selection_mode": ("selection_mode", str.strip),
    "search_mode": ("search_mode", str.strip),
    "max_hypotheses": ("max_hypotheses", _int),
    "search_seed": ("seed", _int),
    "top_k": ("top_k", _int),
    "injective": ("injective", _bool),
    "region_margin_frac": ("region_margin_frac", float),
    "merge_radius_m": ("merge_radius", float),
    "prior_rect_m": ("prior_region", lambda v: Rect(*_floats(4)(v))),
    "prior_disc_m": ("prior_region", lambda v: Disc(*_floats(3)(v))),
}


def _build_case(name: str, values: dict[str, str], where: str) -> EvalCase:
    case_kw: dict = {}
    param_kw: dict = {}
    for key, raw in values.items():
        if key in _CASE_KEYS:
            target, parse, dest = *_CASE_KEYS[key], case_kw
        elif key in _PARAM_KEYS:
            target, parse, dest = *_PARAM_KEYS[key], param_kw
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            dest[target] = parse(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    if "prior_rect_m" in values and "prior_disc_m" in values:
        raise ConfigError(f"{where}: prior_rect_m and prior_disc_m are exclusive")
    try:
        params = MatchParams(**param_kw)
        return EvalCase(name=name, params=params, **case_kw)
    except (ConfigurationError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse config text.  Raises :class:`ConfigError` on any problem."""
    parser = configparser.ConfigParser(
        default_section="\0unused", interpolation=None, strict=True,
        inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}: duplicate case name {exc.section!r}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    defaults = dict(parser[DEFAULTS_SECTION]) if parser.has_section(DEFAULTS_SECTION) else {}
    outputs = {}
    if parser.has_section(OUTPUT_SECTION):
        for key, value in parser[OUTPUT_SECTION].items():
            if key not in OUTPUT_KEYS:
                raise ConfigError(f"{source} [{OUTPUT_SECTION}]: unknown key {key!r}")
            outputs[key] = value.strip()
    cases = []
    for name in parser.sections():
        if name in (DEFAULTS_SECTION, OUTPUT_SECTION):
            continue
        merged = {**defaults, **parser[name]}
        cases.append(_build_case(name, merged, f"{source} [{name}]"))
    if defaults and not cases:
        # Validate the defaults even without cases so typos surface.
        _build_case("defaults", defaults, f"{source} [{DEFAULTS_SECTION}]")
    if not cases:
        raise ConfigError(f"{source}: no cases defined")
    return RunConfig(tuple(cases), outputs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def bundled_config(name: str = "table1") -> RunConfig:
    """A config shipped with the package (``table1``: the five bundled noise cases)."""
    from importlib.resources import files

    res = files("labelnav").joinpath("data", f"{name}.cfg")
    if not res.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return parse_config(res.read_text(encoding="utf-8"), f"<bundled {name}>")
