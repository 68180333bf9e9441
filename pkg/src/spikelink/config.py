"""INI-style pipeline configuration.

::

    [global]
    delta_t = 0.05
    t_sim = 10
    mode = deterministic
    seed = 1

    [enc]
    kind = regular
    n_neurons = 2

    [connections]
    src.out -> enc.in

Every section other than ``global`` and ``connections`` declares one stage;
its keys are checked against the stage kind's parameter schema.  Parsed values
are typed and defaults are filled in, so ``parse_config(render_config(doc))``
reproduces ``doc``.
"""
from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ConfigSyntaxError, DanglingConnection, UnknownKey, UnknownStageKind
from .runtime import Connection
from .stages import BOOL, FLOAT, FLOATS, INT, MATRIX, REQUIRED, STAGE_TYPES, STR

__all__ = ["ConfigDocument", "StageConfig", "parse_config", "render_config", "load_config", "GLOBAL_KEYS"]

SEED_ENV = "SPIKELINK_SEED"

GLOBAL_KEYS = {
    "delta_t": (FLOAT, 0.05),
    "t_sim": (FLOAT, 10.0),
    "mode": (STR, "deterministic"),
    "seed": (INT, None),
    "workers": (INT, 1),
}
_MODES = ("deterministic", "realtime")
_BOOLS = configparser.ConfigParser.BOOLEAN_STATES


@dataclass
class StageConfig:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ConfigDocument:
    globals: dict
    stages: dict
    connections: list
    base_dir: Path | None = field(default=None, compare=False)

    def resolved_seed(self) -> int:
        if self.globals.get("seed") is not None:
            return int(self.globals["seed"])
        return int(os.environ.get(SEED_ENV, "0"))

    def with_globals(self, **overrides) -> "ConfigDocument":
        g = dict(self.globals)
        for k, v in overrides.items():
            if v is None:
                continue
            if k not in GLOBAL_KEYS:
                raise UnknownKey("global", k)
            g[k] = v
        _check_globals(g)
        return ConfigDocument(g, self.stages, self.connections, self.base_dir)


def _convert(typ, raw: str, where: str):
    raw = raw.strip()
    try:
        if typ == FLOAT:
            return float(raw)
        if typ == INT:
            return int(raw)
        if typ == STR:
            return raw
        if typ == BOOL:
            return _BOOLS[raw.lower()]
        if typ == FLOATS:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if typ == MATRIX:
            rows = [r for r in raw.split(";") if r.strip()]
            return tuple(tuple(float(x) for x in r.split(",")) for r in rows)
    except (ValueError, KeyError):
        raise ConfigError(f"{where}: cannot read {raw!r} as {typ}") from None
    raise AssertionError(typ)


def _format(typ, value) -> str:
    if typ == FLOAT:
        return repr(float(value))
    if typ == BOOL:
        return "true" if value else "false"
    if typ == FLOATS:
        return ", ".join(repr(float(x)) for x in value)
    if typ == MATRIX:
        return "; ".join(", ".join(repr(float(x)) for x in row) for row in value)
    return str(value)


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to the 1-based line where it is defined."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = i
        elif s and not s.startswith(("#", ";")) and section is not None:
            out.setdefault((section, s.split("=", 1)[0].strip()), i)
    return out


def _check_globals(g: dict):
    if g["mode"] not in _MODES:
        raise ConfigError(f"mode must be one of {_MODES}, got {g['mode']!r}")
    if not g["delta_t"] > 0:
        raise ConfigError("delta_t must be positive")
    if g["t_sim"] < 0:
        raise ConfigError("t_sim must be non-negative")
    if g["workers"] < 1:
        raise ConfigError("workers must be >= 1")


def parse_config(text: str, base_dir=None) -> ConfigDocument:
    cp = configparser.ConfigParser(
        interpolation=None, allow_no_value=True, delimiters=("=",),
        comment_prefixes=("#", ";"), inline_comment_prefixes=("#",), strict=True,
        default_section="\x00defaults",
    )
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigSyntaxError("text before the first [section]", exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigSyntaxError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigSyntaxError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigSyntaxError(f"cannot parse {line.strip()!r}", lineno, 1) from None
    lines = _key_lines(text)

    g = {k: d for k, (_, d) in GLOBAL_KEYS.items()}
    if cp.has_section("global"):
        for key, raw in cp.items("global"):
            if key not in GLOBAL_KEYS:
                raise UnknownKey("global", key)
            if raw is None:
                raise ConfigSyntaxError(f"key {key!r} has no value", lines.get(("global", key)))
            g[key] = _convert(GLOBAL_KEYS[key][0], raw, f"[global] {key}")
    _check_globals(g)

    stages = {}
    for section in cp.sections():
        if section in ("global", "connections"):
            continue
        items = dict(cp.items(section))
        for key, raw in items.items():
            if raw is None:
                raise ConfigSyntaxError(f"key {key!r} in [{section}] has no value", lines.get((section, key)))
        kind = items.pop("kind", None)
        if kind is None:
            raise ConfigError(f"stage [{section}] has no kind (line {lines.get((section, None))})")
        cls = STAGE_TYPES.get(kind)
        if cls is None:
            raise UnknownStageKind(f"stage [{section}]: unknown kind {kind!r}")
        params = {}
        for key, (typ, default) in cls.params.items():
            if key in items:
                params[key] = _convert(typ, items.pop(key), f"[{section}] {key}")
            elif default is REQUIRED:
                raise ConfigError(f"stage [{section}] is missing required key {key!r}")
            elif default is not None:
                params[key] = tuple(default) if isinstance(default, list) else default
        if items:
            raise UnknownKey(section, sorted(items)[0])
        stages[section] = StageConfig(kind, params)

    connections = []
    if cp.has_section("connections"):
        for key, raw in cp.items("connections"):
            line = lines.get(("connections", key))
            text_line = key if raw is None else f"{key}={raw}"
            try:
                c = Connection.parse(text_line)
            except ValueError as exc:
                raise ConfigSyntaxError(str(exc), line, 1) from None
            for s in (c.src, c.dst):
                if s not in stages:
                    raise DanglingConnection(f"connection {c} references undeclared stage {s!r} (line {line})")
            connections.append(c)
    return ConfigDocument(g, stages, connections, Path(base_dir) if base_dir else None)


def render_config(doc: ConfigDocument) -> str:
    out = ["[global]"]
    for key, (typ, _) in GLOBAL_KEYS.items():
        if doc.globals.get(key) is not None:
            out.append(f"{key} = {_format(typ, doc.globals[key])}")
    for name, sc in doc.stages.items():
        out += ["", f"[{name}]", f"kind = {sc.kind}"]
        schema = STAGE_TYPES[sc.kind].params
        for key, value in sc.params.items():
            if value is not None:
                out.append(f"{key} = {_format(schema[key][0], value)}")
    out += ["", "[connections]"]
    out += [str(c) for c in doc.connections]
    return "\n".join(out) + "\n"


def load_config(path) -> ConfigDocument:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
