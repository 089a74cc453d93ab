"""Experiment configuration: a YAML document validated against a fixed schema.

Unknown keys, wrong types and regime violations are reported as ConfigError
with the 1-based line of the offending key.  See docs/formats.md for the full
schema.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigError, FracPseudoError

MODES = ("direct", "inverse", "verify", "ml-eval")

# leaf types: "num", "int", "str", "bool", "any", "numlist", "intlist", "strlist"
SCHEMA: dict = {
    "mode": "str",
    "alpha": "num",
    "T": "num",
    "regime": "str",
    "threads": "int",
    "spectrum": {"name": "str", "N": "int", "params": {"a": "num", "b": "num"}},
    "grid": {"J": "int", "grading": "num"},
    "quad": {"panels": "int", "tol": "num", "max_panels": "int"},
    "data": {"phi": "any", "psi": "any", "source": "any"},
    "inverse": {"eps_denom": "num", "cutoff": "num"},
    "verify": {"levels": "intlist", "modes": "intlist"},
    "ml": {"beta": "num", "z": "numlist"},
    "output": {"dir": "str", "formats": "strlist"},
}

COEFF_KEYS = {"power", "scale", "file"}
SOURCE_KEYS = {"kind", "coeffs", "profile", "file"}
PROFILE_KEYS = {"a", "b", "c", "omega"}
SOURCE_KINDS = ("zero", "constant", "separable", "sampled")


@dataclass(frozen=True)
class Located:
    """A parsed value and the line it came from."""

    value: Any
    line: Optional[int]


@dataclass
class ExperimentConfig:
    mode: Optional[str] = None
    alpha: float = 0.75
    T: float = 1.0
    regime: str = "auto"
    threads: int = 1
    spectrum_name: str = "dirichlet_laplacian_pair"
    N: int = 8
    spectrum_params: dict = field(default_factory=dict)
    J: int = 64
    grading: float = 1.0
    panels: int = 1024
    tol: float = 1e-8
    max_panels: int = 2**16
    phi: Any = None
    psi: Any = None
    source: Any = None
    eps_denom: float = 1e-14
    cutoff: Optional[float] = None
    verify_levels: tuple = (2**10, 2**11, 2**12, 2**13, 2**14)
    verify_modes: tuple = (1,)
    ml_beta: float = 1.0
    ml_z: tuple = ()
    out_dir: str = "out"
    formats: tuple = ("csv", "json")
    base_dir: Path = field(default_factory=Path.cwd)
    lines: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def line(self, *path: str) -> Optional[int]:
        return self.lines.get(path)

    def echo(self) -> dict:
        """The document as read, for meta.json."""
        return self.raw


# {{{ yaml walking


def _plain(node: yaml.Node, path: tuple, lines: dict) -> Any:
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value if isinstance(k, yaml.ScalarNode) else None
            if not isinstance(key, str):
                raise ConfigError("mapping keys must be plain strings", k.start_mark.line + 1)
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", k.start_mark.line + 1)
            lines[path + (key,)] = k.start_mark.line + 1
            out[key] = _plain(v, path + (key,), lines)
            lines[path + (key,)] = k.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, path + (str(i),), lines) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def _check(value: Any, schema: Any, path: tuple, lines: dict) -> None:
    line = lines.get(path)
    where = ".".join(path) or "document"
    if isinstance(schema, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{where} must be a mapping", line)
        for k, v in value.items():
            if k not in schema:
                allowed = ", ".join(sorted(schema))
                raise ConfigError(f"unknown key {'.'.join(path + (k,))!r} (allowed: {allowed})",
                                  lines.get(path + (k,)))
            _check(v, schema[k], path + (k,), lines)
        return
    ok = {
        "num": lambda x: isinstance(x, (int, float)) and not isinstance(x, bool),
        "int": lambda x: isinstance(x, int) and not isinstance(x, bool),
        "str": lambda x: isinstance(x, str),
        "bool": lambda x: isinstance(x, bool),
        "any": lambda x: True,
        "numlist": lambda x: isinstance(x, list)
        and all(isinstance(i, (int, float)) and not isinstance(i, bool) for i in x),
        "intlist": lambda x: isinstance(x, list)
        and all(isinstance(i, int) and not isinstance(i, bool) for i in x),
        "strlist": lambda x: isinstance(x, list) and all(isinstance(i, str) for i in x),
    }[schema]
    if not ok(value):
        kind = {"num": "a number", "int": "an integer", "str": "a string", "bool": "a boolean",
                "numlist": "a list of numbers", "intlist": "a list of integers",
                "strlist": "a list of strings"}[schema]
        raise ConfigError(f"{where} must be {kind}, got {value!r}", line)


# }}}


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    lines: dict = {}
    doc = {} if root is None else _plain(root, (), lines)
    _check(doc, SCHEMA, (), lines)

    cfg = ExperimentConfig(base_dir=base_dir or Path.cwd(), lines=lines, raw=doc)

    def get(*path, default=None):
        d: Any = doc
        for p in path:
            if not isinstance(d, dict) or p not in d:
                return default
            d = d[p]
        return d

    cfg.mode = get("mode")
    if cfg.mode is not None and cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}", cfg.line("mode"))
    cfg.alpha = float(get("alpha", default=cfg.alpha))
    if not (0.0 < cfg.alpha <= 1.0):
        raise ConfigError(f"alpha must lie in (0, 1], got {cfg.alpha}", cfg.line("alpha"))
    cfg.T = float(get("T", default=cfg.T))
    if not (cfg.T > 0) or not math.isfinite(cfg.T):
        raise ConfigError(f"T must be positive, got {cfg.T}", cfg.line("T"))
    cfg.regime = get("regime", default="auto")
    if cfg.regime not in ("auto", "case_I", "case_II", "classical"):
        raise ConfigError(
            f"regime must be auto, case_I, case_II or classical, got {cfg.regime!r}",
            cfg.line("regime"),
        )
    cfg.threads = int(get("threads", default=1))
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1", cfg.line("threads"))

    cfg.spectrum_name = get("spectrum", "name", default=cfg.spectrum_name)
    cfg.N = get("spectrum", "N", default=cfg.N)
    if cfg.N < 1:
        raise ConfigError(f"spectrum.N must be >= 1, got {cfg.N}", cfg.line("spectrum", "N"))
    cfg.spectrum_params = dict(get("spectrum", "params", default={}) or {})

    cfg.J = get("grid", "J", default=cfg.J)
    if cfg.J < 1:
        raise ConfigError(f"grid.J must be >= 1, got {cfg.J}", cfg.line("grid", "J"))
    cfg.grading = float(get("grid", "grading", default=1.0))
    if not (0 < cfg.grading <= 1):
        raise ConfigError("grid.grading must lie in (0, 1]", cfg.line("grid", "grading"))

    cfg.panels = get("quad", "panels", default=cfg.panels)
    cfg.tol = float(get("quad", "tol", default=cfg.tol))
    cfg.max_panels = get("quad", "max_panels", default=max(cfg.max_panels, cfg.panels))
    if cfg.panels < 2 or cfg.max_panels < cfg.panels:
        raise ConfigError("quad.panels must be >= 2 and <= quad.max_panels", cfg.line("quad"))
    if not (cfg.tol > 0):
        raise ConfigError("quad.tol must be positive", cfg.line("quad", "tol"))

    cfg.phi = get("data", "phi")
    cfg.psi = get("data", "psi")
    cfg.source = get("data", "source")
    _check_coeff_spec(cfg, cfg.phi, ("data", "phi"))
    _check_coeff_spec(cfg, cfg.psi, ("data", "psi"))
    _check_source_spec(cfg)

    cfg.eps_denom = float(get("inverse", "eps_denom", default=cfg.eps_denom))
    cut = get("inverse", "cutoff")
    cfg.cutoff = None if cut is None else float(cut)

    levels = get("verify", "levels")
    if levels is not None:
        if len(levels) < 3 or any(j < 2 for j in levels):
            raise ConfigError("verify.levels needs at least 3 step counts >= 2",
                              cfg.line("verify", "levels"))
        cfg.verify_levels = tuple(levels)
    modes = get("verify", "modes")
    if modes is not None:
        if not modes or any(m < 1 or m > cfg.N for m in modes):
            raise ConfigError(f"verify.modes must lie in 1..{cfg.N}", cfg.line("verify", "modes"))
        cfg.verify_modes = tuple(modes)

    cfg.ml_beta = float(get("ml", "beta", default=1.0))
    if not cfg.ml_beta > 0:
        raise ConfigError("ml.beta must be positive", cfg.line("ml", "beta"))
    cfg.ml_z = tuple(float(z) for z in get("ml", "z", default=[]))

    cfg.out_dir = get("output", "dir", default=cfg.out_dir)
    fmts = get("output", "formats")
    if fmts is not None:
        bad = [f for f in fmts if f not in ("csv", "json")]
        if bad:
            raise ConfigError(f"unknown output format(s) {bad}; use csv, json",
                              cfg.line("output", "formats"))
        cfg.formats = tuple(fmts)

    _check_regime(cfg)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(p)!r}: {exc.strerror}") from None
    return parse_config(text, p.parent)


def _check_coeff_spec(cfg: ExperimentConfig, spec: Any, path: tuple) -> None:
    line = cfg.line(*path)
    if spec is None or isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return
    if isinstance(spec, list):
        if len(spec) != cfg.N or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in spec
        ):
            raise ConfigError(f"{'.'.join(path)} must list exactly N={cfg.N} numbers", line)
        return
    if isinstance(spec, dict):
        unknown = set(spec) - COEFF_KEYS
        if unknown:
            k = sorted(unknown)[0]
            raise ConfigError(
                f"unknown key {'.'.join(path + (k,))!r} (allowed: {', '.join(sorted(COEFF_KEYS))})",
                cfg.line(*path, k),
            )
        if ("file" in spec) == ("power" in spec):
            raise ConfigError(f"{'.'.join(path)} needs exactly one of 'power' or 'file'", line)
        for k in ("power", "scale"):
            if k in spec and not isinstance(spec[k], (int, float)):
                raise ConfigError(f"{'.'.join(path + (k,))} must be a number", cfg.line(*path, k))
        return
    raise ConfigError(f"{'.'.join(path)} must be a number, a list or a mapping", line)


def _check_source_spec(cfg: ExperimentConfig) -> None:
    src = cfg.source
    path = ("data", "source")
    if src is None:
        return
    if not isinstance(src, dict):
        raise ConfigError("data.source must be a mapping", cfg.line(*path))
    unknown = set(src) - SOURCE_KEYS
    if unknown:
        k = sorted(unknown)[0]
        raise ConfigError(
            f"unknown key 'data.source.{k}' (allowed: {', '.join(sorted(SOURCE_KEYS))})",
            cfg.line(*path, k),
        )
    kind = src.get("kind")
    if kind not in SOURCE_KINDS:
        raise ConfigError(f"data.source.kind must be one of {SOURCE_KINDS}, got {kind!r}",
                          cfg.line(*path, "kind") or cfg.line(*path))
    if kind in ("constant", "separable"):
        if "coeffs" not in src:
            raise ConfigError(f"{kind} sources need data.source.coeffs", cfg.line(*path))
        _check_coeff_spec(cfg, src["coeffs"], path + ("coeffs",))
    if kind == "separable":
        prof = src.get("profile", {})
        if not isinstance(prof, dict):
            raise ConfigError("data.source.profile must be a mapping", cfg.line(*path, "profile"))
        for k, v in prof.items():
            if k not in PROFILE_KEYS:
                raise ConfigError(
                    f"unknown key 'data.source.profile.{k}' (allowed: a, b, c, omega)",
                    cfg.line(*path, "profile", k),
                )
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"data.source.profile.{k} must be a number",
                                  cfg.line(*path, "profile", k))
    if kind == "sampled" and "file" not in src:
        raise ConfigError("sampled sources need data.source.file", cfg.line(*path))


def source_has_derivative(cfg: ExperimentConfig) -> bool:
    src = cfg.source
    if src is None or src.get("kind") in ("zero", "constant", "separable"):
        return True
    return False  # sampled files without a derivative column are checked when read


def _check_regime(cfg: ExperimentConfig) -> None:
    line = cfg.line("regime")
    if cfg.regime == "case_I" and not cfg.alpha > 0.5:
        raise ConfigError(
            f"regime case_I requires 1/2 < alpha <= 1 (got alpha={cfg.alpha}); "
            "use case_II with a differentiable source instead",
            line,
        )
    if cfg.regime == "classical" and cfg.alpha != 1.0:
        raise ConfigError("regime classical requires alpha = 1", line)


# {{{ data resolution


def resolve_coeffs(cfg: ExperimentConfig, spec: Any, path: tuple, default=0.0) -> np.ndarray:
    """Turn a coefficient spec into a length-N vector."""
    N = cfg.N
    k = np.arange(1, N + 1, dtype=float)
    if spec is None:
        return np.full(N, float(default))
    if isinstance(spec, (int, float)):
        return np.full(N, float(spec))
    if isinstance(spec, list):
        return np.array(spec, dtype=float)
    if "power" in spec:
        return float(spec.get("scale", 1.0)) * k ** float(spec["power"])
    return read_coeff_file(cfg.base_dir / spec["file"], N, cfg.line(*path, "file"))


def read_coeff_file(path: Path, N: int, line: Optional[int] = None) -> np.ndarray:
    """CSV with columns mode_index,value (a header row is optional)."""
    out = np.full(N, np.nan)
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    i, v = int(row[0]), float(row[1])
                except (ValueError, IndexError):
                    if row[0].strip() == "mode_index":
                        continue
                    raise ConfigError(f"{path}: malformed row {row!r}", line) from None
                if 1 <= i <= N:
                    out[i - 1] = v
    except OSError as exc:
        raise ConfigError(f"cannot read {str(path)!r}: {exc.strerror}", line) from None
    if np.any(np.isnan(out)):
        missing = int(np.flatnonzero(np.isnan(out))[0]) + 1
        raise ConfigError(f"{path}: no coefficient for mode {missing}", line)
    return out


def read_sampled_source(path: Path, N: int, line: Optional[int] = None):
    """CSV rows mode_index,time,value[,derivative] -> per-mode (t, v, dv or None)."""
    rows: dict = {}
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#") or row[0].strip() == "mode_index":
                    continue
                try:
                    vals = [float(x) for x in row]
                    i = int(vals[0])
                except ValueError:
                    raise ConfigError(f"{path}: malformed row {row!r}", line) from None
                if len(vals) not in (3, 4):
                    raise ConfigError(f"{path}: rows need 3 or 4 columns", line)
                rows.setdefault(i, []).append(vals[1:])
    except OSError as exc:
        raise ConfigError(f"cannot read {str(path)!r}: {exc.strerror}", line) from None
    out = []
    for i in range(1, N + 1):
        if i not in rows:
            raise ConfigError(f"{path}: no samples for mode {i}", line)
        a = np.array(rows[i])
        widths = {len(r) for r in rows[i]}
        if len(widths) != 1:
            raise ConfigError(f"{path}: mode {i} mixes rows with and without derivatives", line)
        a = a[np.argsort(a[:, 0], kind="stable")]
        out.append((a[:, 0], a[:, 1], a[:, 2] if a.shape[1] == 3 else None))
    return out


# }}}


def config_error_from(exc: FracPseudoError, cfg: ExperimentConfig, *path: str) -> ConfigError:
    return ConfigError(str(exc), cfg.line(*path))
