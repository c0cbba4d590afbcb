"""Command-line driver: dephasing curves, BLP sweeps, oracle validation, spectra.

Settings are resolved in order: built-in defaults, the file named by
``$IONNM_CONFIG``, the file given with ``--config``, then explicit flags.
Config files are flat ``key = value`` text with ``#`` comments; keys use the
flag names (``beta-omega-max`` or ``beta_omega_max``), lists are comma separated.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import blp, dephasing, lattice, oracle
from .errors import IonNMError, InvalidParameterError, ResourceLimitError

log = logging.getLogger("ionnm")

EXIT_OK, EXIT_VALIDATION, EXIT_PARAMS, EXIT_PARTIAL = 0, 1, 2, 3
MODES = ("curve", "sweep", "validate", "spectrum")
FORMATS = ("csv", "json")
ENV_CONFIG = "IONNM_CONFIG"

# oracle suite used by --mode validate
VALIDATE_MODES = (1, 2, 3)
VALIDATE_T_MAX = 50.0
VALIDATE_DT = 0.05
T0_TOL = 1e-8
THERMAL_TOL = 1e-2
PAIR_MODES = 2


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


@dataclass(frozen=True)
class RunConfig:
    mode: str = "curve"
    n_ions: int = 100
    delta: float = 0.1
    delta_list: tuple = ()
    beta_omega_max: tuple = (0.3,)
    eta: float = lattice.DEFAULT_ETA
    t_max: float = 200.0
    dt: float = dephasing.DEFAULT_DT
    t_trunc: float = blp.DEFAULT_T_TRUNC
    out: str | None = None
    jobs: int = 1
    format: str = "csv"
    b_reading: str = "exact"

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}")
        if self.format not in FORMATS:
            raise InvalidParameterError(f"format must be one of {FORMATS}")
        if self.b_reading not in ("exact", "literal"):
            raise InvalidParameterError("b_reading must be 'exact' or 'literal'")
        for name in ("eta", "t_max", "dt", "t_trunc"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{name} must be positive and finite")
        if self.n_ions < 4 or self.n_ions % 2:
            raise InvalidParameterError("n_ions must be even and >= 4")
        if self.jobs < 1:
            raise InvalidParameterError("jobs must be >= 1")
        if not self.beta_omega_max or any(not b > 0 for b in self.beta_omega_max):
            raise InvalidParameterError("beta_omega_max values must be > 0 (inf for T = 0)")
        deltas = self.delta_list if self.mode == "sweep" else (self.delta,)
        if self.mode == "sweep" and not deltas:
            raise InvalidParameterError("sweep needs a nonempty delta_list")
        for d in deltas:
            if abs(d) < blp.MIN_ABS_DELTA * (1 - 1e-12):
                raise InvalidParameterError(f"|delta| = {abs(d):g} below {blp.MIN_ABS_DELTA:g}")
        if self.mode == "curve" and self.t_max < self.dt:
            raise InvalidParameterError("t_max must be at least dt")
        return self

    def header(self) -> list:
        d = asdict(self)
        return [f"{k} = {_render(v)}" for k, v in d.items()]


def _render(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return "" if v is None else _fmt(v)


# --- config resolution -----------------------------------------------------------

_FIELDS = {f.name: f for f in fields(RunConfig)}
_LISTS = {"delta_list", "beta_omega_max"}
_INTS = {"n_ions", "jobs"}
_FLOATS = {"delta", "eta", "t_max", "dt", "t_trunc"}


def _coerce(key: str, raw):
    if key not in _FIELDS:
        raise InvalidParameterError(f"unknown config key {key!r}")
    if raw is None:
        return None
    try:
        if key in _LISTS:
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            return tuple(float(x) for x in items if str(x).strip())
        if key in _INTS:
            return int(raw)
        if key in _FLOATS:
            return float(raw)
    except ValueError as exc:
        raise InvalidParameterError(f"bad value for {key}: {raw!r}") from exc
    return str(raw)


def read_config_file(path) -> dict:
    out = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = _coerce(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ionnm", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--n-ions", type=int)
    p.add_argument("--delta", type=float, help="relative distance from criticality")
    p.add_argument("--delta-list", help="comma-separated deltas (sweep)")
    p.add_argument("--beta-omega-max", help="comma-separated beta*omega_max; 'inf' for T = 0")
    p.add_argument("--eta", type=float, help="Lamb-Dicke parameter")
    p.add_argument("--t-max", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-trunc", type=float, help="upper limit of the BLP integral")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--jobs", type=int)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--b-reading", choices=("exact", "literal"),
                   help="phase used in D_opt (default: exact)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    values = {}
    if environ.get(ENV_CONFIG):
        values.update(read_config_file(environ[ENV_CONFIG]))
    if args.config:
        values.update(read_config_file(args.config))
    for key in _FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, v)
    return RunConfig(**values).validate()


# --- output ----------------------------------------------------------------------

def _table_text(cfg: RunConfig, columns, rows, meta: dict | None = None) -> str:
    if cfg.format == "json":
        doc = {
            "config": {k: _render(v) for k, v in asdict(cfg).items()},
            "meta": {k: _render(v) for k, v in (meta or {}).items()},
            "columns": list(columns),
            "rows": [[_fmt(x) for x in r] for r in rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    lines = [f"# {h}" for h in cfg.header()]
    lines += [f"# {k} = {_render(v)}" for k, v in (meta or {}).items()]
    lines.append(",".join(columns))
    lines += [",".join(_fmt(x) for x in r) for r in rows]
    return "\n".join(lines) + "\n"


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def curve_path(out, bwm: float, n_files: int):
    """One file per temperature; ``out`` is used verbatim for a single one."""
    if out is None or n_files == 1:
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}_bwm{_fmt(bwm)}{p.suffix}"))


# --- modes -----------------------------------------------------------------------

def run_curve(cfg: RunConfig) -> int:
    if cfg.out is None and len(cfg.beta_omega_max) > 1:
        raise InvalidParameterError("several temperatures need --out (one file each)")
    params = lattice.ChainParams(cfg.n_ions, cfg.delta, cfg.eta)
    table = lattice.mode_table(params)
    for bwm in cfg.beta_omega_max:
        c = dephasing.curve(params, bwm, cfg.t_max, cfg.dt, table=table, b_reading=cfg.b_reading)
        rows = zip(c.times, c.values, c.A, c.B, c.V)
        meta = {k: c.meta[k] for k in ("phase", "nu_t", "omega_max", "beta")}
        meta["beta_omega_max"] = bwm
        text = _table_text(cfg, ("t", "D_opt", "A", "B", "V"), rows, meta)
        _emit(text, curve_path(cfg.out, bwm, len(cfg.beta_omega_max)))
    return EXIT_OK


def run_sweep(cfg: RunConfig) -> int:
    points = blp.sweep(cfg.delta_list, cfg.beta_omega_max, cfg.t_trunc, n_ions=cfg.n_ions,
                       eta=cfg.eta, dt=cfg.dt, jobs=cfg.jobs, b_reading=cfg.b_reading)
    rows = [(p.delta, p.beta_omega_max, p.result.value, p.result.truncation_time)
            for p in points if p.ok]
    _emit(_table_text(cfg, ("delta", "beta_omega_max", "nm_value", "t_trunc"), rows), cfg.out)
    failed = [p for p in points if not p.ok]
    if not failed:
        return EXIT_OK
    err_lines = [f"delta={_fmt(p.delta)} beta_omega_max={_fmt(p.beta_omega_max)}: {p.error}"
                 for p in failed]
    if cfg.out is None:
        sys.stderr.write("\n".join(err_lines) + "\n")
    else:
        _emit("\n".join(err_lines) + "\n", str(cfg.out) + ".errors")
    return EXIT_PARTIAL


def run_spectrum(cfg: RunConfig) -> int:
    params = lattice.ChainParams(cfg.n_ions, cfg.delta, cfg.eta)
    table = lattice.mode_table(params)
    rows = [(m.branch.value, m.k_index, m.omega, m.s1) for m in table.modes]
    meta = {"phase": table.phase.value, "nu_t": params.nu_t,
            "nu_c": lattice.critical_frequency(cfg.n_ions)}
    _emit(_table_text(cfg, ("branch", "k_index", "omega", "s1"), rows, meta), cfg.out)
    return EXIT_OK


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    limit: float | None = None
    note: str = ""


def validation_checks(cfg: RunConfig) -> list:
    """Oracle cross-checks of the closed form and of the optimal pair.

    Modes are the most strongly coupled ones of the configured table, rescaled
    to its total coupling. ``beta_omega_max`` is taken relative to the full
    table's omega_max; T = 0 is always included.
    """
    params = lattice.ChainParams(cfg.n_ions, cfg.delta, cfg.eta)
    table = lattice.mode_table(params)
    omega_max = dephasing.couplings(table).omega_max
    times = dephasing.time_grid(VALIDATE_T_MAX, VALIDATE_DT)
    temps = [math.inf] + [b for b in cfg.beta_omega_max if not math.isinf(b)]
    checks = []
    for bwm in temps:
        beta = bwm / omega_max
        for m in VALIDATE_MODES:
            conf = oracle.subsampled_config(table, beta, m)
            tag = f"M={m} bwm={_fmt(bwm)}"
            if math.isinf(bwm):
                r = oracle.compare_analytic(beta, conf, times, b_reading=cfg.b_reading)
                checks.append(Check(f"closed form vs oracle {tag}", r.max_deviation < T0_TOL,
                                    r.max_deviation, T0_TOL))
                continue
            r = oracle.compare_analytic(beta, conf, times, b_reading=cfg.b_reading)
            lit = oracle.compare_analytic(beta, conf, times, xi_reading="literal",
                                          b_reading=cfg.b_reading)
            checks.append(Check(f"closed form vs oracle {tag}", r.max_deviation < THERMAL_TOL,
                                r.max_deviation, THERMAL_TOL))
            checks.append(Check(f"xi reading discriminated {tag}",
                                r.max_deviation < lit.max_deviation, lit.max_deviation,
                                None, "literal-xi deviation, must exceed the adopted one"))
    thetas, phis = blp.default_pair_grid()
    step = float(thetas[1] - thetas[0])
    for bwm in temps[:2]:
        beta = bwm / omega_max
        conf = oracle.subsampled_config(table, beta, PAIR_MODES)
        scan = blp.pair_scan(conf, beta, thetas, phis, cfg.t_trunc)
        th, ph = scan.argmax
        checks.append(Check(f"optimal pair equatorial bwm={_fmt(bwm)}",
                            abs(th - math.pi / 2) <= step * (1 + 1e-9), th, step,
                            f"argmax phi={_fmt(ph)}, N_max={_fmt(scan.max_value)}"))
        pole = float(scan.values[0].max())
        pm = float(scan.values[np.argmin(np.abs(thetas - math.pi / 2)), 0])
        checks.append(Check(f"pole pair below |+-> pair bwm={_fmt(bwm)}", pole < pm, pole,
                            None, f"|+-> pair N={_fmt(pm)}"))
    return checks


def run_validate(cfg: RunConfig) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        checks = validation_checks(cfg)
    rows = [("PASS" if c.passed else "FAIL", c.name, c.measured,
             "" if c.limit is None else c.limit, c.note) for c in checks]
    if cfg.format == "json":
        _emit(_table_text(cfg, ("status", "check", "measured", "limit", "note"), rows), cfg.out)
    else:
        lines = [f"{s} {n}: measured={_fmt(m)}" + (f" limit={_fmt(lim)}" if lim != "" else "")
                 + (f" ({note})" if note else "") for s, n, m, lim, note in rows]
        _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


RUNNERS = {"curve": run_curve, "sweep": run_sweep, "validate": run_validate,
           "spectrum": run_spectrum}


def main(argv=None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args, environ)
        return RUNNERS[cfg.mode](cfg)
    except (InvalidParameterError, ResourceLimitError) as exc:
        log.error("%s", exc)
        return EXIT_PARAMS
    except (IonNMError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_PARAMS
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
