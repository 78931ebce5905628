"""Command-line front end.

Every subcommand writes one tab-delimited table (to ``--out`` or stdout)
preceded by ``#`` metadata lines: command, config hash and versions.  Errors
are reported on stderr and mapped to the ``exit_code`` of their class.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import bounds as bd
from . import dataio
from . import estimation as est
from .errors import CompShockError, UsageError
from .svma import simulate
from .verify import bias_curve, run_experiment

logger = logging.getLogger("compshock")

SECTORAL = ("sectoral", "decompose", "test", "counterfactual")
COMMANDS = ("simulate", "estimate", "sectoral", "decompose", "test", "bounds",
            "counterfactual", "montecarlo")


@dataclass
class RunConfig:
    """Everything a subcommand needs; built from arguments or a YAML file."""

    command: str
    data: Optional[str] = None
    model: Optional[str] = None
    experiment: Optional[str] = None
    schema: dataio.DatasetSchema = field(default_factory=dataio.DatasetSchema)
    controls: est.ControlSpec = field(default_factory=est.ControlSpec)
    horizons: tuple = (0,)
    instrument: Optional[str] = None
    instruments: Optional[tuple] = None
    bandwidth: Optional[int] = None
    weighting: str = "2sls"
    cumulative: bool = False
    loading_pattern: Optional[list] = None
    T: int = 500
    seed: int = 0
    restrictions: tuple = ()
    line: Optional[tuple] = None
    theta2: tuple = ()
    jobs: int = 1
    T_grid: tuple = ()
    out: Optional[str] = None
    plot_data: Optional[str] = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not self.horizons or any(h < 0 for h in self.horizons):
            raise UsageError("horizons must be a nonempty list of nonnegative integers")

    def inputs(self) -> list:
        return [p for p in (self.data, self.model, self.experiment) if p]

    def canonical(self) -> dict:
        d = asdict(self)
        for key in ("out", "plot_data"):
            d.pop(key)
        return d


# --- argument parsing helpers ----------------------------------------------

def parse_horizons(text: str) -> tuple:
    """``"0:20"`` (inclusive range), ``"0:20:4"`` or ``"0,2,4"``."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            return tuple(range(start, stop + 1, step))
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"cannot parse horizons {text!r}") from None


def parse_floats(text: str) -> tuple:
    try:
        if text.count(":") == 2:
            lo, hi, step = (float(p) for p in text.split(":"))
            n = int(round((hi - lo) / step)) + 1
            return tuple(float(v) for v in lo + step * np.arange(n))
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def parse_restriction(text: str) -> bd.SignRestriction:
    """``[label:]w1>0@beta`` or ``[label:]w2<0@beta``."""
    label, _, body = text.rpartition(":")
    try:
        cond, beta = body.split("@")
        cond = cond.strip()
        weight = int(cond[1])
        sign = {">": 1, "<": -1}[cond[2]]
        if cond[0] != "w" or cond[3:] != "0":
            raise ValueError
        return bd.SignRestriction(weight, sign, float(beta), label)
    except (ValueError, KeyError, IndexError):
        raise UsageError(f"cannot parse restriction {text!r}; expected e.g. 'A:w1>0@0.69'") from None


def parse_pattern(text: str) -> list:
    """Rows separated by ';', entries by ','; nonzero marks a free loading."""
    try:
        return [[bool(int(v)) for v in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise UsageError(f"cannot parse loading pattern {text!r}") from None


def _split(text: Optional[str]) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip()) if text else ()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compshock", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def output(p):
        p.add_argument("--out", help="output table (default: stdout)")
        p.add_argument("--config", help="YAML file with option values; flags override it")

    def data_opts(p, sectors=False):
        p.add_argument("data", help="CSV panel")
        p.add_argument("--y", help="outcome column (default: y)")
        p.add_argument("--x", help="aggregate column (default: x; '' to sum the sectors)")
        p.add_argument("--sectors", help="comma-separated sectoral columns"
                       + (" (default: x1,x2)" if sectors else ""))
        p.add_argument("--instruments", help="comma-separated instrument columns "
                       "(default: all columns starting with 'z')")
        p.add_argument("--no-demean", action="store_true")
        p.add_argument("--horizons", help="e.g. 0:20, 0:20:4 or 0,2,4 (default: 0)")
        p.add_argument("--lags", type=int, help="lag order of the controls (default: 4)")
        p.add_argument("--no-y-lags", action="store_true")
        p.add_argument("--no-x-lags", action="store_true")
        p.add_argument("--no-instrument-lags", action="store_true")
        p.add_argument("--sector-lags", action="store_true")
        p.add_argument("--bandwidth", type=int, help="Newey-West lags (default h+1)")
        p.add_argument("--cumulative", action="store_true")
        output(p)

    p = sub.add_parser("simulate", help="simulate a panel from a model file")
    p.add_argument("model")
    p.add_argument("--T", type=int, help="sample length (default: 500)")
    p.add_argument("--seed", type=int, help="random seed (default: 0)")
    output(p)

    p = sub.add_parser("estimate", help="LP-IV responses by horizon")
    data_opts(p)
    p.add_argument("--instrument", help="instrument column (default: first)")
    p.add_argument("--plot-data", help="also write a tidy plot-data table here")

    p = sub.add_parser("sectoral", help="sectoral responses from several instruments")
    data_opts(p, sectors=True)
    p.add_argument("--weighting", choices=est.WEIGHTINGS, help="default: 2sls")
    p.add_argument("--plot-data")

    p = sub.add_parser("decompose", help="weights and sectoral multipliers of an LP-IV multiplier")
    data_opts(p, sectors=True)
    p.add_argument("--instrument")

    p = sub.add_parser("test", help="GMM test of no inter-sectoral effects")
    data_opts(p, sectors=True)
    p.add_argument("--loading-pattern", help="e.g. '1,0;1,0;0,1;0,1' (instrument rows)")

    p = sub.add_parser("bounds", help="identified sets from weight-sign restrictions")
    p.add_argument("--restriction", action="append", default=[],
                   help="[label:]w1>0@beta; repeat to intersect")
    output(p)

    p = sub.add_parser("counterfactual", help="theta_1 implied by calibrated theta_2")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--line", help="c_y,c_1,c_2")
    src.add_argument("--data", help="CSV panel to estimate the line from")
    p.add_argument("--theta2", required=True, help="'lo:hi:step' or comma list")
    p.add_argument("--y")
    p.add_argument("--x")
    p.add_argument("--sectors")
    p.add_argument("--instruments")
    p.add_argument("--instrument")
    p.add_argument("--no-demean", action="store_true")
    p.add_argument("--horizons")
    p.add_argument("--lags", type=int)
    p.add_argument("--cumulative", action="store_true")
    output(p)

    p = sub.add_parser("montecarlo", help="run a Monte Carlo experiment")
    p.add_argument("experiment", help="experiment YAML file")
    p.add_argument("--jobs", type=int, help="worker processes (default: 1)")
    p.add_argument("--T-grid", help="comma list of sample sizes for a bias curve")
    output(p)
    return parser


def _instrument_columns(path: str, given: Optional[str]) -> tuple:
    if given:
        return _split(given)
    with open(path, encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    return tuple(h for h in header if h.startswith("z"))


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_opts = {}
    if getattr(args, "config", None):
        file_opts = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
    def get(name, default=None):
        value = getattr(args, name, None)
        if value is None or value is False or value == "" or value == []:
            return file_opts.get(name, default)
        return value

    cfg = RunConfig(command=args.command, out=get("out"), plot_data=get("plot_data"))
    if args.command == "simulate":
        cfg.model, cfg.T, cfg.seed = args.model, int(get("T", 500)), int(get("seed", 0))
    elif args.command == "montecarlo":
        cfg.experiment, cfg.jobs = args.experiment, int(get("jobs", 1))
        cfg.T_grid = tuple(int(v) for v in parse_floats(args.T_grid)) if args.T_grid else ()
    elif args.command == "bounds":
        texts = get("restriction", []) or []
        if not texts:
            raise UsageError("bounds needs at least one --restriction")
        cfg.restrictions = tuple(parse_restriction(t) for t in texts)
    if getattr(args, "data", None) or args.command == "counterfactual":
        cfg.data = getattr(args, "data", None)
        cfg.horizons = parse_horizons(str(get("horizons", "0")))
        cfg.cumulative = bool(get("cumulative", False))
        cfg.instrument = get("instrument")
        cfg.bandwidth = get("bandwidth")
        cfg.weighting = get("weighting", "2sls")
        cfg.controls = est.ControlSpec(
            lags=int(get("lags", 4)), y=not get("no_y_lags", False),
            x=not get("no_x_lags", False), instrument=not get("no_instrument_lags", False),
            sectors=bool(get("sector_lags", False)))
        if get("loading_pattern"):
            pat = get("loading_pattern")
            cfg.loading_pattern = parse_pattern(pat) if isinstance(pat, str) else pat
    if cfg.data:
        cols = _instrument_columns(cfg.data, get("instruments"))
        cfg.instruments = cols
        x = None if getattr(args, "x", None) == "" else get("x", "x")
        sectors = get("sectors", "x1,x2" if args.command in SECTORAL else "")
        cfg.schema = dataio.DatasetSchema(
            y=get("y", "y"), x=x or None, sectors=_split(sectors),
            instruments=cols, demean=not get("no_demean", False))
    if args.command == "counterfactual":
        if args.line:
            cfg.line = parse_floats(args.line)
            if len(cfg.line) != 3:
                raise UsageError("--line takes exactly three numbers: c_y,c_1,c_2")
        cfg.theta2 = parse_floats(args.theta2)
    return cfg


# --- command implementations -----------------------------------------------

def _instrument_index(cfg: RunConfig) -> int:
    if cfg.instrument is None:
        return 0
    if cfg.instrument not in cfg.instruments:
        raise UsageError(f"instrument {cfg.instrument!r} is not among {list(cfg.instruments)}")
    return cfg.instruments.index(cfg.instrument)


def _panel(cfg: RunConfig):
    return dataio.load_csv(cfg.data, cfg.schema)


def cmd_simulate(cfg: RunConfig):
    model, specs = dataio.model_from_config(cfg.model)
    return simulate(model, specs, cfg.T, seed=cfg.seed), None


def _band(point, se):
    return point - 1.96 * se, point + 1.96 * se


def cmd_estimate(cfg: RunConfig):
    panel = _panel(cfg)
    j = _instrument_index(cfg)
    rows, plot = [], []
    for h in cfg.horizons:
        r = est.lpiv_estimate(panel, j, h, cfg.controls, cfg.cumulative, cfg.bandwidth)
        rows.append({"horizon": h, "estimate": r.point, "se": r.std_errors, "nobs": r.nobs,
                     "instrument": cfg.instruments[j]})
        lo, hi = _band(r.point, r.std_errors)
        plot.append({"horizon": h, "series": "beta", "value": r.point, "lo": lo, "hi": hi})
    return rows, plot


def cmd_sectoral(cfg: RunConfig):
    panel = _panel(cfg)
    rows, plot = [], []
    names = panel.names.get("sectors", [f"x{s + 1}" for s in range(panel.S)])
    for h in cfg.horizons:
        r = est.sectoral_irf_estimate(panel, None, h, cfg.controls, cfg.weighting,
                                      cfg.cumulative, cfg.bandwidth)
        row = {"horizon": h, "nobs": r.nobs}
        for s, name in enumerate(names):
            row[f"theta_{name}"] = r.point[s]
            row[f"se_{name}"] = r.std_errors[s]
            lo, hi = _band(r.point[s], r.std_errors[s])
            plot.append({"horizon": h, "series": f"theta_{name}", "value": r.point[s],
                         "lo": lo, "hi": hi})
        rows.append(row)
    return rows, plot


def cmd_decompose(cfg: RunConfig):
    panel = _panel(cfg)
    j = _instrument_index(cfg)
    names = panel.names.get("sectors", [f"x{s + 1}" for s in range(panel.S)])
    rows = []
    for h in cfg.horizons:
        d = est.decompose_multiplier(panel, j, h, cfg.controls, bandwidth=cfg.bandwidth)
        row = {"horizon": h, "beta": d.beta.point, "se_beta": d.beta.std_errors}
        for s, name in enumerate(names):
            row[f"w_{name}"] = d.weights[s]
            row[f"m_{name}"] = d.multipliers.point[s]
            row[f"se_m_{name}"] = d.multipliers.std_errors[s]
        row["weight_sum"] = float(np.sum(d.weights))
        row["recomposed"] = d.recomposed
        row["gap"] = d.gap
        rows.append(row)
    return rows, None


def cmd_test(cfg: RunConfig):
    panel = _panel(cfg)
    pattern = None if cfg.loading_pattern is None else np.asarray(cfg.loading_pattern, bool)
    rows = []
    for h in cfg.horizons:
        r = est.gmm_test_no_intersectoral(panel, None, h, cfg.controls, loading_pattern=pattern,
                                          bandwidth=cfg.bandwidth)
        rows.append({"horizon": h, "statistic": r.statistic, "dof": r.dof, "p_value": r.p_value,
                     "reject_5pct": r.rejects(0.05), "iterations": r.iterations})
    return rows, None


def cmd_bounds(cfg: RunConfig):
    sets = [bd.sign_restriction_set(r) for r in cfg.restrictions]
    result = bd.intersect(sets)
    rows = [{"kind": "status", "empty": result.is_empty}]
    for rec in result.to_records():
        rows.append({"kind": "inequality", **rec})
    for k, iv in enumerate(result.intervals()):
        for axis in ("theta1", "theta2"):
            lo, hi = iv[axis]
            rows.append({"kind": "interval", "region": k, "branch": iv["branch"], "axis": axis,
                         "lo": lo, "hi": hi})
    return rows, None


def cmd_counterfactual(cfg: RunConfig):
    rows = []
    if cfg.line is not None:
        lines = [(None, bd.case2_line(*cfg.line))]
    else:
        panel = _panel(cfg)
        j = _instrument_index(cfg)
        lines = [(h, bd.sample_line(panel, j, h, cfg.controls, cfg.cumulative))
                 for h in cfg.horizons]
    for h, line in lines:
        theta1 = np.atleast_1d(bd.counterfactual_theta1(line, np.asarray(cfg.theta2)))
        for t2, t1 in zip(cfg.theta2, theta1):
            row = {} if h is None else {"horizon": h}
            row.update({"theta2": t2, "theta1": float(t1), "w1": line.w1})
            rows.append(row)
    return rows, None


def cmd_montecarlo(cfg: RunConfig):
    e = dataio.experiment_from_config(cfg.experiment)
    if cfg.T_grid:
        curve = bias_curve(e, cfg.T_grid, n_jobs=cfg.jobs)
        rows = curve.rows + [{"T": max(cfg.T_grid), "passed": curve.passed}]
        return rows, None
    rep = run_experiment(e, n_jobs=cfg.jobs)
    rows = rep.table()
    rows += [{"criterion": k, "passed": v} for k, v in rep.passed.items()]
    return rows, None


HANDLERS = {
    "simulate": cmd_simulate, "estimate": cmd_estimate, "sectoral": cmd_sectoral,
    "decompose": cmd_decompose, "test": cmd_test, "bounds": cmd_bounds,
    "counterfactual": cmd_counterfactual, "montecarlo": cmd_montecarlo,
}


def _write(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    """Execute one command and write its output; returns the exit status."""
    cfg.validate()
    result, plot = HANDLERS[cfg.command](cfg)
    if cfg.command == "simulate":
        dataio.write_csv(result, cfg.out or sys.stdout)
        return 0
    meta = {"command": cfg.command,
            "config_hash": dataio.config_hash(cfg.canonical(), cfg.inputs()),
            "versions": dataio.versions()}
    _write(dataio.format_table(result, meta), cfg.out)
    if plot is not None and cfg.plot_data:
        _write(dataio.format_table(plot, {**meta, "table": "plot-data"}), cfg.plot_data)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return UsageError.exit_code
    try:
        return run(config_from_args(args))
    except CompShockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return UsageError.exit_code
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
