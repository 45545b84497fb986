"""Experiment configuration: INI text with fixed sections, exact round trip.

Grammar (``configparser`` INI, keys case-sensitive)::

    [experiment]
    command = classify | exponent | decay | lq-decay | region | sharpness | vdc
    phase = <corpus name> | file:<path to coefficient file>
    output_dir = <directory>
    emit_plots = true | false
    workers = <int >= 1>

    [grid]
    p_grid = <comma separated rationals in [1, 2]>   e.g. 1, 8/7, 3/2, 2
    j_min = <int>            j_max = <int>            (4 <= j_min, j_max <= 20)
    z_box = <positive float>
    deltas = <comma separated positive floats>
    q = <float or empty for m + 1>

    [exponent]
    m = <int >= 2 | flat>    n = <int >= 2 | flat>    r_condition = true | false
    (empty m and n mean: take them from the classified phase)

    [sharpness]
    case = case_i | case_ii | remark_nonadapted
    p = <rational>
    k_offsets = <comma separated rationals added to the sharp threshold>

    [vdc]
    order = <int >= 2>

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Tuple

from .errors import ConfigError
from .orders import FLAT, Order, format_order, parse_order

__all__ = ["COMMANDS", "ExperimentConfig", "load_config", "parse_config", "config_to_text"]

COMMANDS = ("classify", "exponent", "decay", "lq-decay", "region", "sharpness", "vdc")
J_BOUNDS = (4, 20)


def _fmt_list(values) -> str:
    return ", ".join(str(v) for v in values)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    phase: str = ""
    output_dir: str = "out"
    emit_plots: bool = False
    workers: int = 1
    p_grid: Tuple[Fraction, ...] = (Fraction(1), Fraction(8, 7), Fraction(3, 2), Fraction(2))
    j_min: int = 6
    j_max: int = 14
    z_box: float = 0.125
    deltas: Tuple[float, ...] = (0.05, 0.1, 0.2)
    q: Optional[float] = None
    m: Optional[Order] = None
    n: Optional[Order] = None
    r_condition: bool = True
    case: str = "case_i"
    p: Fraction = Fraction(1)
    k_offsets: Tuple[Fraction, ...] = (Fraction(-1, 4), Fraction(1, 4))
    vdc_order: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        needs_phase = self.command not in ("exponent", "vdc")
        if needs_phase and not self.phase:
            raise ConfigError(f"command {self.command!r} needs a phase")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not self.p_grid:
            raise ConfigError("p_grid must be nonempty")
        if any(not (1 <= p <= 2) for p in self.p_grid):
            raise ConfigError("p_grid must lie in [1, 2]")
        if not (J_BOUNDS[0] <= self.j_min <= self.j_max <= J_BOUNDS[1]):
            raise ConfigError(f"j-range [{self.j_min}, {self.j_max}] must be nonempty and within {list(J_BOUNDS)}")
        if not self.z_box > 0:
            raise ConfigError("z_box must be positive")
        if not self.deltas or any(not d > 0 for d in self.deltas):
            raise ConfigError("deltas must be nonempty and positive")
        if self.q is not None and not self.q >= 1:
            raise ConfigError("q must be at least 1")
        if not (1 <= self.p <= 2):
            raise ConfigError("sharpness p must lie in [1, 2]")
        if not self.k_offsets:
            raise ConfigError("k_offsets must be nonempty")
        if self.case not in ("case_i", "case_ii", "remark_nonadapted"):
            raise ConfigError(f"unknown witness case {self.case!r}")
        if self.vdc_order < 2:
            raise ConfigError("vdc order must be at least 2")
        if self.command == "exponent" and not self.phase and (self.m is None or self.n is None):
            raise ConfigError("exponent needs either a phase or both m and n")

    @property
    def js(self):
        return list(range(self.j_min, self.j_max + 1))

    def with_output_dir(self, path) -> "ExperimentConfig":
        return replace(self, output_dir=str(path))


def _get(cp, section, key, fallback=None):
    if cp.has_option(section, key):
        return cp.get(section, key).strip()
    return fallback


def _bool(text, what):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{what}: expected a boolean, got {text!r}")


def _fracs(text, what):
    try:
        return tuple(Fraction(t.strip()) for t in text.split(",") if t.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _floats(text, what):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _int(text, what):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what}: expected an integer, got {text!r}") from None


def _order(text, what):
    if text is None or text == "":
        return None
    try:
        return parse_order(text)
    except Exception as exc:  # noqa: BLE001
        raise ConfigError(f"{what}: {exc}") from None


_ALLOWED = {
    "experiment": {"command", "phase", "output_dir", "emit_plots", "workers"},
    "grid": {"p_grid", "j_min", "j_max", "z_box", "deltas", "q"},
    "exponent": {"m", "n", "r_condition"},
    "sharpness": {"case", "p", "k_offsets"},
    "vdc": {"order"},
}


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    for section in cp.sections():
        if section not in _ALLOWED:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(cp.options(section)) - _ALLOWED[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")
    command = _get(cp, "experiment", "command")
    if not command:
        raise ConfigError("[experiment] command is required")
    kw = {"command": command}
    if (v := _get(cp, "experiment", "phase")) is not None:
        kw["phase"] = v
    if (v := _get(cp, "experiment", "output_dir")) is not None:
        kw["output_dir"] = v
    if (v := _get(cp, "experiment", "emit_plots")) is not None:
        kw["emit_plots"] = _bool(v, "emit_plots")
    if (v := _get(cp, "experiment", "workers")) is not None:
        kw["workers"] = _int(v, "workers")
    if (v := _get(cp, "grid", "p_grid")) is not None:
        kw["p_grid"] = _fracs(v, "p_grid")
    for key in ("j_min", "j_max"):
        if (v := _get(cp, "grid", key)) is not None:
            kw[key] = _int(v, key)
    if (v := _get(cp, "grid", "z_box")) is not None:
        kw["z_box"] = _floats(v, "z_box")[0] if v else 0.0
    if (v := _get(cp, "grid", "deltas")) is not None:
        kw["deltas"] = _floats(v, "deltas")
    if (v := _get(cp, "grid", "q")) is not None:
        kw["q"] = _floats(v, "q")[0] if v else None
    kw["m"] = _order(_get(cp, "exponent", "m"), "m")
    kw["n"] = _order(_get(cp, "exponent", "n"), "n")
    if (v := _get(cp, "exponent", "r_condition")) is not None:
        kw["r_condition"] = _bool(v, "r_condition")
    if (v := _get(cp, "sharpness", "case")) is not None:
        kw["case"] = v
    if (v := _get(cp, "sharpness", "p")) is not None:
        kw["p"] = _fracs(v, "p")[0]
    if (v := _get(cp, "sharpness", "k_offsets")) is not None:
        kw["k_offsets"] = _fracs(v, "k_offsets")
    if (v := _get(cp, "vdc", "order")) is not None:
        kw["vdc_order"] = _int(v, "vdc order")
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def config_to_text(cfg: ExperimentConfig, runtime: bool = True) -> str:
    """Canonical INI echo; ``parse_config(config_to_text(c)) == c``.

    With ``runtime=False`` the output directory and worker count are left
    out, so the echo depends only on what is computed.
    """
    out = io.StringIO()
    out.write("[experiment]\n")
    out.write(f"command = {cfg.command}\n")
    out.write(f"phase = {cfg.phase}\n")
    if runtime:
        out.write(f"output_dir = {cfg.output_dir}\n")
    out.write(f"emit_plots = {str(cfg.emit_plots).lower()}\n")
    if runtime:
        out.write(f"workers = {cfg.workers}\n")
    out.write("\n")
    out.write("[grid]\n")
    out.write(f"p_grid = {_fmt_list(cfg.p_grid)}\n")
    out.write(f"j_min = {cfg.j_min}\n")
    out.write(f"j_max = {cfg.j_max}\n")
    out.write(f"z_box = {cfg.z_box!r}\n")
    out.write(f"deltas = {_fmt_list(repr(d) for d in cfg.deltas)}\n")
    out.write(f"q = {'' if cfg.q is None else repr(cfg.q)}\n\n")
    out.write("[exponent]\n")
    out.write(f"m = {'' if cfg.m is None else format_order(cfg.m)}\n")
    out.write(f"n = {'' if cfg.n is None else format_order(cfg.n)}\n")
    out.write(f"r_condition = {str(cfg.r_condition).lower()}\n\n")
    out.write("[sharpness]\n")
    out.write(f"case = {cfg.case}\n")
    out.write(f"p = {cfg.p}\n")
    out.write(f"k_offsets = {_fmt_list(cfg.k_offsets)}\n\n")
    out.write("[vdc]\n")
    out.write(f"order = {cfg.vdc_order}\n")
    return out.getvalue()
