"""
Run artifacts: binary field snapshots, configs, CSV/JSON outputs and manifests.

Snapshot layout (all little-endian)::

    offset  size  field
    0       4     magic b"NSBH"
    4       4     uint32 format version (1)
    8       4     uint32 Nh
    12      4     uint32 Nv
    16      4     uint32 number of components
    20      8     float64 Lh
    28      8     float64 Lv
    36      8     float64 time
    44      ...   float64 (re, im) pairs, component-major then C order
                  over (k1, k2, k3) in FFT index order

Coefficients are the normalised Fourier coefficients of the package
(``f(x) = sum_k c_k exp(i k.x)``).
"""

from __future__ import annotations

import configparser
import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import AnisoGrid

MAGIC = b"NSBH"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIddd")


# --------------------------------------------------------------- snapshots


def write_snapshot(path, grid: AnisoGrid, t: float, X: np.ndarray) -> None:
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[None]
    if X.shape[1:] != grid.shape:
        raise ValueError(f"coefficient shape {X.shape[1:]} does not match grid {grid.shape}")
    head = _HEADER.pack(MAGIC, VERSION, grid.Nh, grid.Nv, X.shape[0], float(grid.Lh), float(grid.Lv), float(t))
    payload = np.ascontiguousarray(X, dtype="<c16").tobytes()
    Path(path).write_bytes(head + payload)


def read_snapshot(path) -> tuple[AnisoGrid, float, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: file too short for a snapshot header")
    magic, ver, nh, nv, nc, lh, lv, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if ver != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {ver}")
    grid = AnisoGrid(nh, nv, lh, lv)
    expect = _HEADER.size + nc * grid.size * 16
    if len(data) != expect:
        raise ValueError(f"{path}: payload size {len(data) - _HEADER.size} does not match header")
    X = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape((nc,) + grid.shape).astype(complex)
    return grid, float(t), X


# ------------------------------------------------------------ json output


def _default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, default=_default, sort_keys=True, indent=1, allow_nan=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


# ---------------------------------------------------------------- configs


class ConfigError(ValueError):
    """Malformed config; ``str`` carries the file name and line number."""


@dataclass
class Config:
    path: str
    parser: configparser.ConfigParser
    lines: dict = field(default_factory=dict)

    def where(self, section: str, key: str | None = None) -> str:
        ln = self.lines.get((section, key)) or self.lines.get((section, None))
        return f"{self.path}:{ln}" if ln else self.path

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def get(self, section: str, key: str, conv=str, default=None, required: bool = False):
        if not self.parser.has_option(section, key):
            if required:
                raise ConfigError(f"{self.where(section)}: missing key '{key}' in section [{section}]")
            return default
        raw = self.parser.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.where(section, key)}: bad value for '{key}': {raw!r} ({exc})") from None

    def getbool(self, section: str, key: str, default: bool = False) -> bool:
        return self.get(section, key, _to_bool, default)

    def section_dict(self, section: str) -> dict:
        return dict(self.parser.items(section)) if self.parser.has_section(section) else {}

    def echo(self) -> dict:
        return {s: self.section_dict(s) for s in self.parser.sections()}

    def check_keys(self, allowed: dict) -> None:
        """Reject unknown sections and keys (``allowed`` maps section to key set)."""
        for s in self.parser.sections():
            if s not in allowed:
                raise ConfigError(f"{self.where(s)}: unknown section [{s}]")
            for k in self.parser.options(s):
                if k not in allowed[s]:
                    raise ConfigError(f"{self.where(s, k)}: unknown key '{k}' in section [{s}]")


def _to_bool(x: str) -> bool:
    v = x.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected a boolean")


_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def load_config(path) -> Config:
    text = Path(path).read_text()
    return parse_config(text, str(path))


def parse_config(text: str, name: str = "<config>") -> Config:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=name)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{name}:{exc.lineno}: key outside of any [section]") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{name}:{lineno}: cannot parse line {line.strip()!r}") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{name}:{exc.lineno}: duplicate key '{exc.option}' in [{exc.section}]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{name}:{exc.lineno}: duplicate section [{exc.section}]") from None
    lines = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = i
            continue
        m = _KEY.match(line)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = i
    return Config(name, cp, lines)
