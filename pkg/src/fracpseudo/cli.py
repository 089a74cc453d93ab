"""Command-line front end: ``fracpseudo {direct,inverse,verify,ml-eval}``.

Exit status is 0 on success, 2 for configuration or validation errors and 3
for numerical failures.  Output files are described in docs/formats.md.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import config as cfgmod
from .caputo_oracle import (
    L1Grid,
    convergence_order,
    l1_expansion_exponents,
    l1_solve_modal,
    richardson,
)
from .config import ConfigError, ExperimentConfig
from .direct import TimeGrid, select_regime, solve_direct, solve_modal
from .errors import FracPseudoError, InvalidParams, NumericalFailure
from .inverse import InverseProblemData, inverse_diagnostics, reconstruct
from .mlfunc import mittag_leffler
from .problem import FractionalOrder, ModalProblem, SourceTrace
from .quadrature import QuadratureSpec
from .spectral import SpectralField, builtin_spectrum

log = logging.getLogger("fracpseudo")

ROUND_TRIP_TOL = 1e-8
CSV_HEADER = ("mode_index", "time", "value", "tag")


# {{{ small helpers


@contextlib.contextmanager
def anchored(cfg: ExperimentConfig, *path: str):
    """Re-raise validation errors from the library against a config line."""
    try:
        yield
    except InvalidParams as exc:
        raise ConfigError(str(exc), cfg.line(*path) if path else None) from None


def _num(x: Any) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


class Writer:
    """Collects CSV rows and JSON documents, then writes them in one go."""

    def __init__(self, out_dir: Path, formats: Sequence[str]):
        self.out_dir = out_dir
        self.formats = tuple(formats)
        self.rows: list = []

    def row(self, mode_index: int, t: Optional[float], value: float, tag: str) -> None:
        self.rows.append((str(int(mode_index)), "" if t is None else _fmt(t), _fmt(value), tag))

    def write(self, ledger: dict, meta: dict) -> None:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            if "csv" in self.formats:
                with open(self.out_dir / "report.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(CSV_HEADER)
                    w.writerows(self.rows)
            if "json" in self.formats:
                _dump(self.out_dir / "ledger.json", ledger)
            _dump(self.out_dir / "meta.json", meta)
        except OSError as exc:
            raise ConfigError(f"cannot write to {str(self.out_dir)!r}: {exc.strerror}") from None


def _dump(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def _versions() -> dict:
    import mpmath
    import scipy

    from importlib.metadata import PackageNotFoundError, version

    try:
        own = version("artifact")
    except PackageNotFoundError:
        own = "unknown"
    return {
        "fracpseudo": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "mpmath": mpmath.__version__,
        "python": platform.python_version(),
    }


# }}}


# {{{ building problem objects from a config


def build_spectrum(cfg: ExperimentConfig):
    with anchored(cfg, "spectrum"):
        return builtin_spectrum(cfg.spectrum_name, cfg.N, **cfg.spectrum_params)


def build_field(cfg: ExperimentConfig, spectrum, spec, *path: str) -> SpectralField:
    coeffs = cfgmod.resolve_coeffs(cfg, spec, path)
    with anchored(cfg, *path):
        return SpectralField(coeffs, spectrum)


def build_sources(cfg: ExperimentConfig) -> list[SourceTrace]:
    src = cfg.source or {"kind": "zero"}
    kind = src["kind"]
    path = ("data", "source")
    N = cfg.N
    if kind == "zero":
        return [SourceTrace.zero() for _ in range(N)]
    if kind == "constant":
        c = cfgmod.resolve_coeffs(cfg, src["coeffs"], path + ("coeffs",))
        return [SourceTrace.constant(v) for v in c]
    if kind == "separable":
        c = cfgmod.resolve_coeffs(cfg, src["coeffs"], path + ("coeffs",))
        prof = {"a": 0.0, "b": 0.0, "c": 1.0, "omega": 1.0, **src.get("profile", {})}
        a, b, cc, w = (float(prof[k]) for k in ("a", "b", "c", "omega"))

        def make(k: float) -> SourceTrace:
            return SourceTrace.callback(
                lambda t: k * (a + b * t + cc * np.sin(w * t)),
                lambda t: k * (b + cc * w * np.cos(w * t)),
            )

        return [make(float(k)) for k in c]
    # sampled
    samples = cfgmod.read_sampled_source(cfg.base_dir / src["file"], N, cfg.line(*path, "file"))
    with anchored(cfg, *path, "file"):
        return [SourceTrace.sampled(t, v, d) for t, v, d in samples]


def build_order(cfg: ExperimentConfig) -> FractionalOrder:
    with anchored(cfg, "regime"):
        if cfg.regime == "auto":
            return FractionalOrder(cfg.alpha)
        return FractionalOrder(cfg.alpha, cfg.regime)


def build_quad(cfg: ExperimentConfig) -> QuadratureSpec:
    with anchored(cfg, "quad"):
        return QuadratureSpec(cfg.panels, cfg.tol, max(cfg.max_panels, cfg.panels))


def build_grid(cfg: ExperimentConfig) -> TimeGrid:
    with anchored(cfg, "grid"):
        return TimeGrid(cfg.T, cfg.J, cfg.grading)


# }}}


# {{{ flows


def run_direct(cfg: ExperimentConfig, w: Writer) -> dict:
    sp = build_spectrum(cfg)
    phi = build_field(cfg, sp, cfg.phi, "data", "phi")
    sources = build_sources(cfg)
    order = build_order(cfg)
    with anchored(cfg, "regime"):
        select_regime(order, sources)
    report = solve_direct(sp, phi, sources, order, build_grid(cfg), build_quad(cfg),
                          threads=cfg.threads)

    t = report.time_grid
    for i in range(sp.N):
        for tj, v in zip(t, report.modal_solutions[i]):
            w.row(i + 1, tj, v, "u")

    constant = None
    if all(s.is_constant for s in sources):
        constant = [s.value for s in sources]
    return {
        "kind": "direct",
        "alpha": cfg.alpha,
        "T": cfg.T,
        "N": sp.N,
        "regime": report.regime,
        "derivative_estimated": report.derivative_estimated,
        "truncation_diag": report.truncation_diag,
        "estimates": {k: e.as_dict() for k, e in report.norms_ledger.items()},
        "source_constant": constant,
    }


def _read_direct_report(directory: Path, N: int, T: float):
    """phi, psi and the recorded source from a previous direct run."""
    path = directory / "report.csv"
    rows: dict = {}
    try:
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                if r.get("tag") != "u":
                    continue
                rows.setdefault(int(r["mode_index"]), []).append((float(r["time"]), float(r["value"])))
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read direct report {str(path)!r}: {exc}") from None
    phi = np.empty(N)
    psi = np.empty(N)
    for i in range(1, N + 1):
        if i not in rows:
            raise ConfigError(f"direct report {str(path)!r} has no rows for mode {i}")
        pts = sorted(rows[i])
        if abs(pts[-1][0] - T) > 1e-12 * T:
            raise ConfigError(f"direct report ends at t={pts[-1][0]} but T={T}")
        phi[i - 1], psi[i - 1] = pts[0][1], pts[-1][1]
    source = None
    try:
        source = json.loads((directory / "ledger.json").read_text()).get("source_constant")
    except (OSError, ValueError):
        pass
    return phi, psi, source


def run_inverse(cfg: ExperimentConfig, w: Writer, from_direct: Optional[Path] = None) -> dict:
    sp = build_spectrum(cfg)
    reference = None
    if from_direct is not None:
        phi_c, psi_c, reference = _read_direct_report(from_direct, sp.N, cfg.T)
        phi = SpectralField(phi_c, sp)
        psi = SpectralField(psi_c, sp)
    else:
        if cfg.phi is None or cfg.psi is None:
            raise ConfigError("inverse mode needs data.phi and data.psi (or --from-direct)",
                              cfg.line("data"))
        phi = build_field(cfg, sp, cfg.phi, "data", "phi")
        psi = build_field(cfg, sp, cfg.psi, "data", "psi")

    with anchored(cfg, "data"):
        data = InverseProblemData(sp, phi, psi, build_order(cfg), cfg.T)
    sol = reconstruct(data, build_grid(cfg), cfg.eps_denom, cfg.cutoff)
    diag = inverse_diagnostics(sol, data)

    for i in range(sp.N):
        for tj, v in zip(sol.time_grid, sol.u[i]):
            w.row(i + 1, tj, v, "u")
    for tag, vals in (("f", sol.f.coeffs), ("C", sol.C), ("denom", sol.denom)):
        for i, v in enumerate(vals):
            w.row(i + 1, None, v, tag)

    estimates = {k: v.as_dict() for k, v in diag.items() if hasattr(v, "as_dict")}
    out = {
        "kind": "inverse",
        "alpha": cfg.alpha,
        "T": cfg.T,
        "N": sp.N,
        "C": sol.C,
        "f": sol.f.coeffs,
        "C_max_abs": float(np.max(np.abs(sol.C))),
        "f_minus_M_phi_max_abs": float(np.max(np.abs(sol.f.coeffs - sp.mu * phi.coeffs))),
        "certificate": {
            "denom_floor": sol.denom_floor,
            "weighted_floor": sol.weighted_floor,
            "min_denominator": float(np.min(sol.denom)),
            "holds": bool(np.all(sol.denom >= sol.denom_floor)),
        },
        "discarded_modes": list(sol.discarded),
        "estimates": estimates,
        "oracle": {"residual": diag["residual"], "eigen_relation": diag["eigen_relation"]},
    }
    if from_direct is not None:
        rt: dict = {"source": str(from_direct), "tolerance": ROUND_TRIP_TOL}
        if reference is not None and len(reference) == sp.N:
            ref = np.asarray(reference, dtype=float)
            scale = np.maximum(np.abs(ref), np.finfo(float).tiny)
            err = float(np.max(np.abs(sol.f.coeffs - ref) / scale))
            rt.update(max_rel_error=err, holds=err <= ROUND_TRIP_TOL)
        else:
            rt.update(max_rel_error=None, holds=None,
                      note="direct run had a time-dependent source; nothing to compare")
        out["round_trip"] = rt
    return out


def run_verify(cfg: ExperimentConfig, w: Writer) -> dict:
    if not cfg.alpha < 1.0:
        raise ConfigError("verify compares against the L1 scheme, which needs alpha < 1",
                          cfg.line("alpha"))
    sp = build_spectrum(cfg)
    phi = build_field(cfg, sp, cfg.phi, "data", "phi")
    sources = build_sources(cfg)
    order = build_order(cfg)
    with anchored(cfg, "regime"):
        regime, _ = select_regime(order, sources)
    quad = build_quad(cfg)
    levels = list(cfg.verify_levels)
    if any(m > sp.N for m in cfg.verify_modes):
        raise ConfigError(f"verify.modes must lie in 1..{sp.N}", cfg.line("verify", "modes"))
    grid = TimeGrid(cfg.T, cfg.J)

    modes = {}
    for m in cfg.verify_modes:
        i = m - 1
        p = ModalProblem(sp.lam[i], sp.mu[i], phi.coeffs[i], sources[i], order)
        try:
            closed = float(solve_modal(p, grid, quad, regime)[-1])
        except NumericalFailure as exc:
            raise exc.with_mode(m)
        vals = [float(l1_solve_modal(p, L1Grid(J, cfg.T))[-1]) for J in levels]
        with anchored(cfg, "verify", "levels"):
            conv = convergence_order(vals, levels, exact=closed)
        exps = l1_expansion_exponents(cfg.alpha, not sources[i].is_constant)[: len(levels) - 1]
        extrap = richardson(vals, exps, levels[1] / levels[0])
        rel = abs(extrap - closed) / max(abs(closed), np.finfo(float).tiny)

        w.row(m, cfg.T, closed, "closed_form")
        for J, v, e in zip(levels, vals, conv.errors):
            w.row(m, cfg.T, v, f"l1_J={J}")
            w.row(m, cfg.T, e, f"error_J={J}")
        for J, o in zip(levels[1:], conv.orders):
            w.row(m, cfg.T, o, f"order_J={J}")
        w.row(m, cfg.T, extrap, "l1_extrapolated")
        w.row(m, cfg.T, rel, "extrapolated_rel_error")
        modes[str(m)] = {
            "closed_form": closed,
            "l1_extrapolated": extrap,
            "extrapolated_rel_error": rel,
            "observed_order": None if conv.exact else conv.order,
            "exact": conv.exact,
        }
    return {"kind": "verify", "alpha": cfg.alpha, "T": cfg.T, "regime": regime,
            "levels": levels, "modes": modes}


def run_ml_eval(cfg: ExperimentConfig, w: Writer, stdout) -> dict:
    values = []
    for i, z in enumerate(cfg.ml_z):
        with anchored(cfg, "ml"):
            v = mittag_leffler(cfg.alpha, cfg.ml_beta, z)
        values.append(v)
        print(_fmt(v), file=stdout)
        w.row(i + 1, z, v, "E")
    return {"kind": "ml-eval", "alpha": cfg.alpha, "beta": cfg.ml_beta,
            "z": list(cfg.ml_z), "values": values}


def run(cfg: ExperimentConfig, mode: str, from_direct: Optional[Path] = None,
        stdout=None, write: bool = True) -> dict:
    """Execute one experiment and write its artifacts; returns the ledger."""
    stdout = stdout or sys.stdout
    start = time.perf_counter()
    w = Writer(Path(cfg.out_dir), cfg.formats)
    if mode == "direct":
        ledger = run_direct(cfg, w)
    elif mode == "inverse":
        ledger = run_inverse(cfg, w, from_direct)
    elif mode == "verify":
        ledger = run_verify(cfg, w)
    elif mode == "ml-eval":
        ledger = run_ml_eval(cfg, w, stdout)
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    meta = {
        "mode": mode,
        "config": cfg.echo(),
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - start,
    }
    if write:
        w.write(ledger, meta)
    log.info("%s finished in %.3f s", mode, meta["wall_time_s"])
    return ledger


# }}}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment file")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--threads", type=int, help="worker threads for modal solves")
    common.add_argument("--tol", type=float, help="quadrature tolerance (overrides quad.tol)")

    p = argparse.ArgumentParser(prog="fracpseudo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("direct", parents=[common], help="solve the direct problem")
    inv = sub.add_parser("inverse", parents=[common], help="recover the source from u(0), u(T)")
    inv.add_argument("--from-direct", type=Path, metavar="DIR",
                     help="take phi and psi from a previous direct run's output directory")
    sub.add_parser("verify", parents=[common], help="compare closed forms with the L1 oracle")
    ml = sub.add_parser("ml-eval", parents=[common], help="evaluate E_{alpha,beta}(z)")
    ml.add_argument("--alpha", type=float)
    ml.add_argument("--beta", type=float)
    ml.add_argument("--z", type=float, nargs="+")
    return p


def _load(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = cfgmod.load_config(args.config)
    elif args.command == "inverse" and args.from_direct is not None:
        meta = args.from_direct / "meta.json"
        try:
            echo = json.loads(meta.read_text())["config"]
        except (OSError, ValueError, KeyError):
            raise ConfigError(f"no --config given and {str(meta)!r} is unreadable") from None
        echo = {k: v for k, v in echo.items() if k not in ("mode", "output", "verify", "ml")}
        if isinstance(echo.get("data"), dict):
            echo["data"] = {}
        cfg = cfgmod.parse_config(json.dumps(echo), args.from_direct)
    elif args.command == "ml-eval":
        cfg = cfgmod.parse_config("")
    else:
        raise ConfigError(f"{args.command} needs --config")

    if cfg.mode is not None and cfg.mode != args.command:
        raise ConfigError(f"config is for mode {cfg.mode!r}, not {args.command!r}", cfg.line("mode"))
    if args.out is not None:
        cfg.out_dir = args.out
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.threads = args.threads
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError("--tol must be positive")
        cfg.tol = args.tol
    if args.command == "ml-eval":
        if args.alpha is not None:
            if not 0 < args.alpha <= 1:
                raise ConfigError(f"--alpha must lie in (0, 1], got {args.alpha}")
            cfg.alpha = args.alpha
        if args.beta is not None:
            cfg.ml_beta = args.beta
        if args.z is not None:
            cfg.ml_z = tuple(args.z)
        if not cfg.ml_z:
            raise ConfigError("ml-eval needs --z or ml.z")
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("FRACPSEUDO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        # ml-eval from flags alone only prints
        write = not (args.command == "ml-eval" and args.config is None and args.out is None)
        run(cfg, args.command, getattr(args, "from_direct", None), write=write)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FracPseudoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
