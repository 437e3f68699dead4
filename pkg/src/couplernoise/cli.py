"""Command-line front end.

``couplernoise simulate|envelope|synth|scan|fit [--config PATH] [--seed N]
[--out DIR] [--n-traj N] [--shots N] [--gnuplot]``

Every run writes into one output directory (``--out``, else
``$COUPLERNOISE_OUT``, else ``./couplernoise_out``).  Curves are CSV files
``t_us,value,stderr`` with a JSON sidecar of the same stem holding the
resolved configuration, seed and version, so any output can be recreated
from its own sidecar.  Files are written atomically and contain no
timestamps; the same configuration and seed give byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 fit did not
converge.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, set_path
from .curves import DecayCurve, sample_shots
from .engine.lindblad import lindblad_propagate
from .engine.montecarlo import mc_cpmg, mc_ramsey
from .fitting import (FitError, FitModel, fit_cpmg_family, fit_g_scaling, fit_ramsey_gaussian,
                      predict)
from .synth import closed_form_curve

__all__ = ["main", "run_simulate", "run_envelope", "run_synth", "run_scan", "run_fit",
           "read_curve", "write_curve", "OUT_ENV", "VERSION"]

OUT_ENV = "COUPLERNOISE_OUT"
VERSION = f"v{__version__}"
DEFAULT_SHOTS = 10_000

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FIT = 0, 2, 3, 4


# ---------------------------------------------------------------- file helpers

def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_curve(out: Path, stem: str, curve: DecayCurve, sidecar: dict) -> Path:
    """Write ``stem.csv`` and ``stem.json``; returns the CSV path."""
    csv_path = out / f"{stem}.csv"
    _atomic_write(csv_path, curve.to_csv())
    _atomic_write(out / f"{stem}.json", _dumps(dict(sidecar, curve_meta=curve.meta)))
    return csv_path


def read_curve(path: str | Path) -> DecayCurve:
    """Load a curve CSV and, when present, the metadata from its JSON sidecar."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    meta = {}
    side = path.with_suffix(".json")
    if side.exists():
        try:
            meta = json.loads(side.read_text(encoding="utf-8")).get("curve_meta", {})
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, f"{side} line {exc.lineno}") from None
    try:
        return DecayCurve.from_csv(text, meta)
    except ValueError as exc:
        raise ConfigError(str(exc), str(path)) from None


def _gnuplot(out: Path, files: list[str], title: str, overlay: bool = False):
    lines = ["set datafile separator ','", "set key autotitle columnhead",
             "set xlabel 't (us)'", "set ylabel 'normalised <sigma_z>'", f"set title '{title}'"]
    if overlay:
        parts = [f"'{f}' using 1:2 with points title '{f}', '{f}' using 1:3 with lines notitle"
                 for f in files]
    else:
        parts = [f"'{f}' using 1:2:3 with yerrorbars title '{f}'" for f in files]
    lines.append("plot " + ", \\\n     ".join(parts))
    lines.append("pause -1")
    _atomic_write(out / "plot.gp", "\n".join(lines) + "\n")


def _sidecar(command: str, cfg: RunConfig, **extra) -> dict:
    return dict({"version": VERSION, "command": command, "config": cfg.to_dict(),
                 "seed": cfg.engine.seed}, **extra)


# ---------------------------------------------------------------- commands

def _simulate_curve(cfg: RunConfig) -> tuple[DecayCurve, int]:
    e = cfg.engine
    if e.mode == "mc":
        run = mc_ramsey if cfg.sequence.kind == "ramsey" else mc_cpmg
        res = run(cfg.noise, cfg.sequence, cfg.device, n_traj=e.n_traj, seed=e.seed,
                  profile=e.profile, workers=e.workers)
    else:
        res = lindblad_propagate(cfg.noise, cfg.sequence, cfg.device,
                                 mode="trajectory" if e.mode == "lindblad" else "averaged",
                                 n_traj=e.n_traj, seed=e.seed, substeps=e.substeps,
                                 profile=e.profile)
    curve = res.curve
    if e.shots:
        curve = sample_shots(curve, e.shots, np.random.default_rng([e.seed, 1]))
    return curve, res.n_traj


def run_simulate(cfg: RunConfig, out: Path, gnuplot: bool = False) -> list[Path]:
    """Monte Carlo or master-equation curve for the configured sequence."""
    curve, n_traj = _simulate_curve(cfg)
    p = write_curve(out, "curve", curve, _sidecar("simulate", cfg, n_traj=n_traj))
    if gnuplot:
        _gnuplot(out, [p.name], "simulate")
    return [p]


def run_envelope(cfg: RunConfig, out: Path, gnuplot: bool = False) -> list[Path]:
    """Closed-form (noise-free) curve for the configured sequence."""
    curve = closed_form_curve(cfg.noise, cfg.sequence, cfg.device)
    p = write_curve(out, "curve", curve, _sidecar("envelope", cfg))
    if gnuplot:
        _gnuplot(out, [p.name], "envelope")
    return [p]


def run_synth(cfg: RunConfig, out: Path, gnuplot: bool = False) -> list[Path]:
    """Closed-form curve with binomial shot noise (default 10000 shots)."""
    shots = cfg.engine.shots or DEFAULT_SHOTS
    clean = closed_form_curve(cfg.noise, cfg.sequence, cfg.device)
    curve = sample_shots(clean, shots, np.random.default_rng(cfg.engine.seed))
    p = write_curve(out, "curve", curve, _sidecar("synth", cfg, shots=shots))
    if gnuplot:
        _gnuplot(out, [p.name], "synth")
    return [p]


_POINT_RUNNERS = {"simulate": lambda c: _simulate_curve(c)[0],
                  "envelope": lambda c: closed_form_curve(c.noise, c.sequence, c.device),
                  "synth": lambda c: sample_shots(
                      closed_form_curve(c.noise, c.sequence, c.device),
                      c.engine.shots or DEFAULT_SHOTS, np.random.default_rng(c.engine.seed))}


def _curve_features(curve: DecayCurve) -> dict:
    feats = {"final_value": float(curve.values[-1]), "gamma_r": float("nan"),
             "gamma_r_stderr": float("nan")}
    if curve.kind == "ramsey" and len(curve) >= 3:
        try:
            fit = fit_ramsey_gaussian(curve)
            feats["gamma_r"], feats["gamma_r_stderr"] = fit.gamma_r, fit.gamma_r_stderr
        except (FitError, ValueError):
            pass
    return feats


def run_scan(cfg: RunConfig, out: Path, gnuplot: bool = False, what: str = "simulate") -> list[Path]:
    """One curve per value of ``scan.parameter`` plus ``summary.csv``.

    The summary lists the final value of every curve and, for Ramsey
    curves, the Gaussian decay rate ``gamma_r`` from :func:`fit_ramsey_gaussian`.
    """
    if cfg.scan is None:
        raise ConfigError("scan needs a 'scan' section", "scan")
    if what not in _POINT_RUNNERS:
        raise ConfigError(f"unknown scan target {what!r}", "--what")
    base = cfg.to_dict()
    base.pop("scan")
    path, values = cfg.scan["parameter"], cfg.scan["values"]
    rows = ["index,value,final_value,gamma_r,gamma_r_stderr"]
    files = []
    for i, v in enumerate(values):
        point = RunConfig.from_dict(set_path(base, path, v))
        curve = _POINT_RUNNERS[what](point)
        files.append(write_curve(out, f"point_{i:03d}", curve,
                                 _sidecar(f"scan/{what}", point, scan_index=i,
                                          scan_parameter=path, scan_value=v)))
        f = _curve_features(curve)
        rows.append(",".join([str(i), repr(float(v)), repr(f["final_value"]),
                              repr(f["gamma_r"]), repr(f["gamma_r_stderr"])]))
    summary = out / "summary.csv"
    _atomic_write(summary, "\n".join(rows) + "\n")
    if gnuplot:
        _gnuplot(out, [p.name for p in files], f"scan over {path}")
    return files + [summary]


def run_fit(cfg: RunConfig, out: Path, gnuplot: bool = False,
            curve_paths: list[str] | None = None) -> list[Path]:
    """Fit curves and write ``fit.json``, ``fit.txt`` and one overlay CSV per curve."""
    fit_cfg = cfg.fit or {"kind": "cpmg_family", "curves": [], "model": {}}
    paths = list(curve_paths or []) or list(fit_cfg["curves"])
    if not paths:
        raise ConfigError("no curve files given", "fit.curves")
    curves = [read_curve(p) for p in paths]
    kind = fit_cfg["kind"]
    model = FitModel.from_dict(fit_cfg.get("model", {}))
    written = []
    if kind == "ramsey_gaussian":
        results = [fit_ramsey_gaussian(c) for c in curves]
        report = {"version": VERSION, "kind": kind, "curves": paths,
                  "results": [r.to_dict() for r in results]}
        text = "".join(f"{p}: gamma_r = {r.gamma_r:.6g} +- {r.gamma_r_stderr:.3g} 1/us, "
                       f"R^2 = {r.r_squared:.5f}\n" for p, r in zip(paths, results))
        models = []
        for c, r in zip(curves, results):
            env = np.exp(-(r.gamma_r * c.times) ** 2)
            models.append(env if r.envelope_only else env * np.cos(r.swap_freq * c.times))
    else:
        try:
            if kind == "cpmg_family":
                res = fit_cpmg_family(curves, model)
            else:
                res = fit_g_scaling(curves, model if model.share_chi_shape else
                                    FitModel.from_dict(dict(model.to_dict(), share_chi_shape=True)))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), "fit") from None
        report = dict(res.to_dict(), version=VERSION, curves=paths)
        text = res.report()
        models = [predict(res, c) for c in curves]
    _atomic_write(out / "fit.json", _dumps(report))
    _atomic_write(out / "fit.txt", text)
    written += [out / "fit.json", out / "fit.txt"]
    names = []
    for i, (c, m) in enumerate(zip(curves, models)):
        rows = ["t_us,data,model"] + [f"{t!r},{v!r},{float(x)!r}"
                                      for t, v, x in zip(c.times.tolist(), c.values.tolist(), m)]
        p = out / f"overlay_{i:03d}.csv"
        _atomic_write(p, "\n".join(rows) + "\n")
        written.append(p)
        names.append(p.name)
    if gnuplot:
        _gnuplot(out, names, f"fit: {kind}", overlay=True)
    return written


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="couplernoise", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"couplernoise {VERSION}")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"simulate": "Monte Carlo or master-equation curve",
             "envelope": "closed-form envelope curve",
             "synth": "closed-form curve with shot noise",
             "scan": "one curve per value of a configuration parameter",
             "fit": "fit noise parameters to curve files"}
    for name, h in helps.items():
        sp = sub.add_parser(name, help=h)
        sp.add_argument("--config", metavar="PATH", help="JSON configuration file")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--n-traj", type=int, metavar="N", dest="n_traj")
        sp.add_argument("--shots", type=int, metavar="N")
        sp.add_argument("--gnuplot", action="store_true", help="also write plot.gp")
        if name == "scan":
            sp.add_argument("--what", choices=sorted(_POINT_RUNNERS), default="simulate",
                            help="what to compute at each grid point")
        if name == "fit":
            sp.add_argument("curves", nargs="*", help="curve CSV files (override fit.curves)")
    return ap


def _load(args) -> RunConfig:
    if args.config:
        cfg = load_config(Path(args.config).read_text(encoding="utf-8"))
    else:
        cfg = RunConfig()
    for name in ("n_traj", "shots"):
        v = getattr(args, name)
        if v is not None and v < 1:
            raise ConfigError(f"must be >= 1, got {v}", f"--{name.replace('_', '-')}")
    if args.seed is not None and args.seed < 0:
        raise ConfigError("must be >= 0", "--seed")
    return cfg.with_overrides(seed=args.seed, n_traj=args.n_traj, shots=args.shots)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    out = Path(args.out or os.environ.get(OUT_ENV) or "couplernoise_out")
    try:
        cfg = _load(args)
        if args.command == "simulate":
            files = run_simulate(cfg, out, args.gnuplot)
        elif args.command == "envelope":
            files = run_envelope(cfg, out, args.gnuplot)
        elif args.command == "synth":
            files = run_synth(cfg, out, args.gnuplot)
        elif args.command == "scan":
            files = run_scan(cfg, out, args.gnuplot, args.what)
        else:
            files = run_fit(cfg, out, args.gnuplot, args.curves)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
