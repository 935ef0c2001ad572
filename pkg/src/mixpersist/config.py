"""Experiment configuration: typed sections in an INI-style text file.

Example::

    [experiment]
    entry = corollary-mixed-fbm
    experiment_id = corollary-mixed-fbm
    master_seed = 20240607
    out_dir = results/corollary-mixed-fbm
    threads = 1

    [estimation]
    n_paths = 100000
    ladder = 16.0, 32.0, 64.0
    burn_in = 2
    level = 1.0

    [grid]
    policy = lamperti
    n = 4096
    t_min = 0.001
    include_origin = true

    [specs]
    mixed = mixed(a=1.0,H=0.75,b=1.0,K=0.5)
    dominant = fbm(H=0.75)

Every section and key is optional except ``experiment.entry``; missing values
take the defaults of :class:`ExperimentConfig`.  Unknown sections or keys are
errors.  ``[specs]`` maps role names to process descriptors overriding the
registry entry's defaults.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass

from .persistence import GridPolicy
from .processes import ProcessSpec, SpecError

DEFAULT_LADDER = tuple(float(2**k) for k in range(4, 13))


class ConfigError(ValueError):
    """Invalid configuration text, with the offending location when known."""


@dataclass(frozen=True)
class ExperimentConfig:
    entry: str
    experiment_id: str = ""
    master_seed: int = 20240607
    out_dir: str = "results"
    threads: int = 1
    n_paths: int = 100_000
    ladder: tuple = DEFAULT_LADDER
    burn_in: int = 2
    level: float = 1.0
    grid: GridPolicy = GridPolicy()
    specs: tuple = ()

    def __post_init__(self) -> None:
        if not self.experiment_id:
            object.__setattr__(self, "experiment_id", self.entry)
        object.__setattr__(self, "ladder", tuple(float(x) for x in self.ladder))
        object.__setattr__(self, "specs", tuple(sorted(dict(self.specs).items())))
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.n_paths < 100:
            raise ConfigError("n_paths must be >= 100")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])) or not self.ladder:
            raise ConfigError("ladder must be non-empty and strictly increasing")

    def spec(self, role: str, default: ProcessSpec) -> ProcessSpec:
        return dict(self.specs).get(role, default)


# section -> key -> (attribute, parser, emitter)
def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ladder(text: str) -> tuple:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    return tuple(float(p) for p in parts)


_SCHEMA = {
    "experiment": {
        "entry": ("entry", str, str),
        "experiment_id": ("experiment_id", str, str),
        "master_seed": ("master_seed", int, str),
        "out_dir": ("out_dir", str, str),
        "threads": ("threads", int, str),
    },
    "estimation": {
        "n_paths": ("n_paths", int, str),
        "ladder": ("ladder", _ladder, lambda v: ", ".join(repr(x) for x in v)),
        "burn_in": ("burn_in", int, str),
        "level": ("level", float, repr),
    },
    "grid": {
        "policy": ("kind", str, str),
        "n": ("n", int, str),
        "t_min": ("t_min", float, repr),
        "include_origin": ("include_origin", _bool, lambda v: "true" if v else "false"),
    },
}


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return no
    return None


def _where(text, section, key=None) -> str:
    line = _line_of(text, section, key)
    loc = f"[{section}]" + (f" {key}" if key else "")
    return f"line {line}: {loc}" if line else loc


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; raises :class:`ConfigError` with line/key diagnostics."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values: dict = {}
    grid_values: dict = {}
    specs: dict = {}
    for section in cp.sections():
        if section == "specs":
            for key, raw in cp.items(section):
                try:
                    specs[key] = ProcessSpec.parse(raw)
                except SpecError as exc:
                    raise ConfigError(f"{_where(text, section, key)}: {exc}") from exc
            continue
        if section not in _SCHEMA:
            raise ConfigError(f"{_where(text, section)}: unknown section")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{_where(text, section, key)}: unknown key")
            attr, parse, _ = _SCHEMA[section][key]
            try:
                value = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{_where(text, section, key)}: {exc}") from exc
            (grid_values if section == "grid" else values)[attr] = value
    if "entry" not in values:
        raise ConfigError("[experiment] entry is required")
    try:
        grid = GridPolicy(**grid_values)
        return ExperimentConfig(grid=grid, specs=tuple(specs.items()), **values)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def emit_config(cfg: ExperimentConfig) -> str:
    """Text form of ``cfg``; ``parse_config(emit_config(cfg)) == cfg``."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        source = cfg.grid if section == "grid" else cfg
        for key, (attr, _, emit) in keys.items():
            lines.append(f"{key} = {emit(getattr(source, attr))}")
        lines.append("")
    lines.append("[specs]")
    for role, spec in cfg.specs:
        lines.append(f"{role} = {spec.descriptor()}")
    lines.append("")
    return "\n".join(lines)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

