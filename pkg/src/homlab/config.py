"""Run configuration: an INI file with sections ``domain``, ``field``, ``data``,
``experiment``, ``grids``, ``tolerances`` and ``output``.

Example::

    [domain]
    name = ellipse
    a = 1.0
    b = 0.6

    [field]
    name = laminate          ; laminate | constant | trig
    a0 = 2.0
    amplitude = 1.0

    [data]
    name = cos               ; cos | constant | linear | modulated
    mode = 1, 0

    [experiment]
    kind = oscillating       ; constant | oscillating | higher_order | layer_check
    eps = 1/8, 1/12, 1/16, 1/24, 1/32

    [grids]
    N = 64
    h_factor = 8

    [tolerances]
    rtol = 1e-9

    [output]
    directory = runs/ellipse

Keys of ``domain``, ``field`` and ``data`` other than ``name`` are passed to the
preset constructors; values may be numbers, fractions (``1/8``) or comma lists.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .cell import CoefficientField, constant_field, laminate_field, trig_field
from .lab.experiments import DEFAULT_EPS
from .lab.mesh import DomainSpec
from .pipeline import OscillatingData, data_from_spec

SECTIONS = ("domain", "field", "data", "experiment", "grids", "tolerances", "output")
EXPERIMENT_KINDS = ("constant", "oscillating", "higher_order", "layer_check")

DEFAULTS = {
    "domain": {"name": "ellipse", "a": "1.0", "b": "0.6"},
    "field": {"name": "laminate", "a0": "2.0", "amplitude": "1.0"},
    "data": {"name": "cos", "mode": "1, 0"},
    "experiment": {"kind": "oscillating", "eps": "1/8, 1/12, 1/16, 1/24, 1/32"},
    "grids": {"N": "64", "h_factor": "8", "h": "0.05"},
    "tolerances": {"rtol": "1e-9", "layer_rtol": "1e-10", "flag_threshold": "1e-3"},
    "output": {"directory": "homlab-out"},
}


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    """``"3"`` -> 3, ``"0.5"`` -> 0.5, ``"1/8"`` -> 0.125, ``"1, 0"`` -> (1, 0); anything else stays a string."""
    text = text.strip()
    if "," in text:
        return tuple(parse_value(t) for t in text.split(",") if t.strip())
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        return text


def _params(section: configparser.SectionProxy) -> dict:
    return {k: parse_value(v) for k, v in section.items() if k != "name"}


@dataclass
class RunConfig:
    parser: configparser.ConfigParser
    source: Optional[str] = None
    overrides: dict = field(default_factory=dict)

    # -- raw access ---------------------------------------------------------
    def get(self, section: str, key: str, default=None):
        if self.parser.has_option(section, key):
            return parse_value(self.parser.get(section, key))
        return default

    def set(self, section: str, key: str, value) -> None:
        if isinstance(value, (tuple, list)):
            value = ", ".join(str(v) for v in value)
        self.parser.set(section, key, str(value))
        self.overrides[f"{section}.{key}"] = str(value)

    def as_dict(self) -> dict:
        return {s: dict(self.parser.items(s)) for s in self.parser.sections()}

    # -- typed views --------------------------------------------------------
    def domain(self) -> DomainSpec:
        sec = self.parser["domain"]
        return DomainSpec(sec.get("name", "ellipse"), _params(sec))

    def coefficient_field(self) -> CoefficientField:
        sec = self.parser["field"]
        return field_from_spec(sec.get("name", "laminate"), **_params(sec))

    def data(self) -> OscillatingData:
        sec = self.parser["data"]
        return data_from_spec(sec.get("name", "cos"), **_params(sec))

    @property
    def kind(self) -> str:
        kind = str(self.get("experiment", "kind", "oscillating"))
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; choose from {EXPERIMENT_KINDS}")
        return kind

    @property
    def eps(self) -> list:
        raw = self.get("experiment", "eps", DEFAULT_EPS)
        vals = [float(v) for v in (raw if isinstance(raw, tuple) else (raw,))]
        if any(v <= 0 or v >= 1 for v in vals):
            raise ConfigError("eps values must lie in (0, 1)")
        return sorted(vals, reverse=True)

    @property
    def N(self) -> int:
        return int(self.get("grids", "n", 64))

    @property
    def output_dir(self) -> Path:
        return Path(str(self.get("output", "directory", "homlab-out")))


def field_from_spec(name: str, **params) -> CoefficientField:
    """``laminate`` (a0, amplitude, axis), ``constant`` (matrix as ``a11, a12, a21, a22``) or ``trig``."""
    if name == "laminate":
        return laminate_field(**params)
    if name == "constant":
        mat = np.asarray(params.get("matrix", (1.0, 0.0, 0.0, 1.0)), dtype=float)
        return constant_field(mat.reshape(2, 2) if mat.size == 4 else float(mat) * np.eye(2))
    if name == "trig":
        modes = np.asarray(params.get("modes", (1, 0, 0, 1)), dtype=int).reshape(-1, 2)
        amps = np.atleast_1d(np.asarray(params.get("amplitudes", (0.5,) * len(modes)), dtype=float))
        return trig_field([tuple(m) for m in modes], list(amps), base=float(params.get("base", 2.0)))
    raise ConfigError(f"unknown field preset {name!r}; choose from constant, laminate, trig")


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``{"section.key": value}`` overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read_dict(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        file_parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        file_parser.read(path)
        unknown = set(file_parser.sections()) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}; expected {SECTIONS}")
        for sec in file_parser.sections():
            if "name" in file_parser[sec] and sec in ("domain", "field", "data"):
                # a new preset replaces the default parameters wholesale
                parser.remove_section(sec)
                parser.add_section(sec)
            for k, v in file_parser.items(sec):
                parser.set(sec, k, v)
    cfg = RunConfig(parser, str(path) if path is not None else None)
    overrides = dict(overrides or {})
    for key in overrides:
        sec, _, opt = key.partition(".")
        if sec not in SECTIONS or not opt:
            raise ConfigError(f"override {key!r} must look like section.key")
        if opt == "name" and sec in ("domain", "field", "data"):
            parser.remove_section(sec)
            parser.add_section(sec)
    for key, value in overrides.items():
        sec, _, opt = key.partition(".")
        cfg.set(sec, opt, value)
    return cfg


def write_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        cfg.parser.write(fh)
