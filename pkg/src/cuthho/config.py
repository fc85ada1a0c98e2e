"""Run configuration: an INI-style file with sections.

Grammar (``#`` or ``;`` start comments, keys are case-insensitive)::

    [mesh]
    nx = 16                 # cells per direction (ny defaults to nx)
    ny = 16
    domain = -1 1 -1 1      # x0 x1 y0 y1
    perturbation = 0.0      # interior vertex jitter, fraction of the cell size
    seed = 0                # overridden by CUT_HHO_SEED
    file = path.mesh        # alternative to nx/ny: a 'polymesh 2d' file
    sizes = 8 16 32 64      # convergence: one Cartesian mesh per size
    files = a.mesh b.mesh   # convergence: explicit mesh files

    [interface]
    levelset = circle(0, 0, 0.71)
    kappa1 = 1
    kappa2 = 100

    [discretization]
    k = 1
    eta = auto              # or a positive number
    n_sub = auto            # or a positive integer
    agglomerate = true

    [case]
    name = radial_circle    # radial_circle | planar_kink | smooth_nojump
    # further keys are case parameters (numbers, or words such as u = poly)

    [output]
    fields = true           # VTK + CSV field samples
    samples = 3             # plotting subdivisions per triangle
    matrix = false          # MatrixMarket dump of the skeleton matrix
    eoc_min = auto          # convergence threshold, auto = 0.9 (k + 1)
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .levelset import LevelSet, parse_levelset

__all__ = ["SEED_ENV", "ConfigError", "MissingKeyError", "RunConfig", "load_config", "parse_config"]

SEED_ENV = "CUT_HHO_SEED"


class ConfigError(ValueError):
    pass


class MissingKeyError(ConfigError):
    def __init__(self, key: str):
        super().__init__(f"missing configuration key '{key}'")
        self.key = key


@dataclass
class RunConfig:
    nx: int | None = None
    ny: int | None = None
    domain: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    perturbation: float = 0.0
    seed: int = 0
    mesh_file: Path | None = None
    sizes: tuple = ()
    mesh_files: tuple = ()
    levelset_text: str | None = None
    levelset: LevelSet | None = None
    kappa1: float | None = None
    kappa2: float | None = None
    k: int | None = None
    eta: float | None = None
    n_sub: int | None = None
    agglomerate: bool = True
    case: str | None = None
    case_params: dict = field(default_factory=dict)
    fields: bool = True
    samples: int = 3
    matrix: bool = False
    eoc_min: float | None = None
    source: str = "<string>"

    def require(self, *names: str) -> None:
        """Raise MissingKeyError naming the first absent ``section.key``."""
        where = {"levelset": "interface.levelset", "kappa1": "interface.kappa1", "kappa2": "interface.kappa2",
                 "k": "discretization.k", "case": "case.name", "nx": "mesh.nx"}
        for n in names:
            if getattr(self, n) is None:
                raise MissingKeyError(where.get(n, n))

    def require_mesh(self) -> None:
        if self.mesh_file is None and self.nx is None:
            raise MissingKeyError("mesh.nx")

    def require_sequence(self) -> None:
        if not self.sizes and not self.mesh_files:
            raise MissingKeyError("mesh.sizes")

    @property
    def eoc_threshold(self) -> float:
        if self.eoc_min is not None:
            return self.eoc_min
        return 0.9 * (self.k + 1)


def _locate(text: str, section: str, key: str) -> str:
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            current = m.group(1).strip().lower()
            continue
        if current == section:
            m = re.match(r"([^=:\s]+)\s*[=:]", line)
            if m and m.group(1).lower() == key:
                col = raw.find("=") if "=" in raw else raw.find(":")
                return f"line {lineno}, column {col + 2}"
    return "unknown position"


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, text: str, source: str):
        self.cp, self.text, self.source = cp, text, source

    def raw(self, section: str, key: str):
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            return None
        return self.cp.get(section, key).strip()

    def _fail(self, section, key, what, val):
        pos = _locate(self.text, section, key)
        return ConfigError(f"{self.source}: {pos}: {section}.{key} = {val!r} is not {what}")

    def get(self, section, key, conv, what, default=None):
        v = self.raw(section, key)
        if v is None or v == "":
            return default
        try:
            return conv(v)
        except (ValueError, TypeError) as exc:
            raise self._fail(section, key, what, v) from exc

    def boolean(self, section, key, default):
        v = self.raw(section, key)
        if v is None:
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError as exc:
            raise self._fail(section, key, "a boolean", v) from exc


def _auto(conv):
    def f(v):
        return None if v.lower() == "auto" else conv(v)
    return f


def _number_or_word(v: str):
    try:
        return float(v)
    except ValueError:
        return v


def _floats(v: str) -> tuple:
    return tuple(float(t) for t in v.replace(",", " ").split())


def _ints(v: str) -> tuple:
    return tuple(int(t) for t in v.replace(",", " ").split())


KNOWN = {
    "mesh": {"nx", "ny", "domain", "perturbation", "seed", "file", "sizes", "files"},
    "interface": {"levelset", "kappa1", "kappa2"},
    "discretization": {"k", "eta", "n_sub", "agglomerate"},
    "output": {"fields", "samples", "matrix", "eoc_min"},
}


def parse_config(text: str, source: str = "<string>", base_dir: Path | None = None,
                 env: dict | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    for sec in cp.sections():
        if sec not in KNOWN and sec != "case":
            line = next(i for i, t in enumerate(text.splitlines(), 1) if t.strip() == f"[{sec}]")
            raise ConfigError(f"{source}: line {line}, column 1: unknown section [{sec}]")
        if sec in KNOWN:
            for key in cp.options(sec):
                if key not in KNOWN[sec]:
                    raise ConfigError(f"{source}: {_locate(text, sec, key)}: unknown key {sec}.{key}")
    r = _Reader(cp, text, source)
    base = base_dir or Path(".")
    cfg = RunConfig(source=source)
    cfg.nx = r.get("mesh", "nx", int, "an integer")
    cfg.ny = r.get("mesh", "ny", int, "an integer", cfg.nx)
    dom = r.get("mesh", "domain", _floats, "four numbers")
    if dom is not None:
        if len(dom) != 4:
            raise r._fail("mesh", "domain", "four numbers", r.raw("mesh", "domain"))
        cfg.domain = ((dom[0], dom[1]), (dom[2], dom[3]))
    cfg.perturbation = r.get("mesh", "perturbation", float, "a number", 0.0)
    cfg.seed = r.get("mesh", "seed", int, "an integer", 0)
    env = os.environ if env is None else env
    if env.get(SEED_ENV, "").strip():
        try:
            cfg.seed = int(env[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={env[SEED_ENV]!r} is not an integer") from exc
    f = r.raw("mesh", "file")
    cfg.mesh_file = (base / f) if f else None
    cfg.sizes = r.get("mesh", "sizes", _ints, "a list of integers", ())
    files = r.raw("mesh", "files")
    cfg.mesh_files = tuple(base / t for t in files.split()) if files else ()
    cfg.levelset_text = r.raw("interface", "levelset") or None
    if cfg.levelset_text:
        try:
            cfg.levelset = parse_levelset(cfg.levelset_text)
        except ValueError as exc:
            pos = _locate(text, "interface", "levelset")
            raise ConfigError(f"{source}: {pos}: interface.levelset: {exc}") from exc
    cfg.kappa1 = r.get("interface", "kappa1", float, "a number")
    cfg.kappa2 = r.get("interface", "kappa2", float, "a number")
    cfg.k = r.get("discretization", "k", int, "an integer")
    cfg.eta = r.get("discretization", "eta", _auto(float), "'auto' or a number")
    cfg.n_sub = r.get("discretization", "n_sub", _auto(int), "'auto' or an integer")
    cfg.agglomerate = r.boolean("discretization", "agglomerate", True)
    cfg.case = r.raw("case", "name") or None
    if cp.has_section("case"):
        for key in cp.options("case"):
            if key != "name":
                cfg.case_params[key] = r.get("case", key, _number_or_word, "a value")
    cfg.fields = r.boolean("output", "fields", True)
    cfg.samples = r.get("output", "samples", int, "an integer", 3)
    cfg.matrix = r.boolean("output", "matrix", False)
    cfg.eoc_min = r.get("output", "eoc_min", _auto(float), "'auto' or a number")
    _validate(cfg, text)
    return cfg


def _validate(cfg: RunConfig, text: str) -> None:
    def bad(section, key, msg):
        return ConfigError(f"{cfg.source}: {_locate(text, section, key)}: {section}.{key} {msg}")

    if cfg.nx is not None and (cfg.nx < 1 or cfg.ny < 1):
        raise bad("mesh", "nx", "must be >= 1")
    if any(s < 1 for s in cfg.sizes):
        raise bad("mesh", "sizes", "entries must be >= 1")
    if cfg.k is not None and cfg.k < 0:
        raise bad("discretization", "k", "must be >= 0")
    for key in ("kappa1", "kappa2"):
        v = getattr(cfg, key)
        if v is not None and not v > 0.0:
            raise bad("interface", key, "must be positive")
    if cfg.eta is not None and not cfg.eta > 0.0:
        raise bad("discretization", "eta", "must be positive")
    if cfg.n_sub is not None and cfg.n_sub < 1:
        raise bad("discretization", "n_sub", "must be >= 1")
    if cfg.samples < 1:
        raise bad("output", "samples", "must be >= 1")


def load_config(path, env: dict | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {p}: {exc.strerror}") from exc
    return parse_config(text, str(p), p.parent, env)
