"""CSV panels, model/experiment configuration files and tabular output.

Model files are YAML (JSON is accepted as a subset)::

    version: 1
    kind: baseline            # or "augmented"
    S: 2                      # composite shocks / sectors
    coeffs:                   # H_max + 1 matrices, rows x m each
      - [[1, 1, 0], [0.2, 0.1, 1], [0.5, 0.8, 0.3]]
      - [[0.4, 0.2, 0], [0, 0, 0.5], [0.3, 0.2, 0.1]]
    shock_variances: [1, 1, 1]          # optional, unit by default
    distribution: gaussian              # or a list with one entry per shock:
                                        # gaussian | {support: [...], probs: [...]}
    no_intersectoral: true              # augmented models only
    instruments:
      - {loadings: [1, 0.5, 0], noise_variance: 1.0, kind: continuous}
      - {loadings: [0, 1, 0], noise_variance: 1.0, kind: binary, p_z: 0.3}

A coefficient matrix may also be given flat in row-major order; ``n`` (rows of
the baseline system), ``m`` and ``H_max`` are then required for reshaping and
are checked when present.

Output tables are tab-delimited with a header of ``# key: value`` lines.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .errors import EmptyInputError, InvalidArgumentError, ParseError, SchemaError
from .estimation import ControlSpec
from .svma import (
    AugmentedSvmaModel,
    DiscreteShock,
    InstrumentSpec,
    LagPolynomial,
    Panel,
    SvmaModel,
)

logger = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "none", "."}
CONFIG_VERSION = 1


@dataclass
class DatasetSchema:
    """Column mapping for :func:`load_csv`.

    When ``x`` is ``None`` and sectors are given, x is built as their sum.
    """

    y: str = "y"
    x: Optional[str] = "x"
    sectors: Sequence[str] = ()
    instruments: Sequence[str] = ()
    date: Optional[str] = None
    demean: bool = True

    def required(self) -> list:
        cols = [self.y] + ([self.x] if self.x else []) + list(self.sectors) + list(self.instruments)
        if len(set(cols)) != len(cols):
            dup = sorted({c for c in cols if cols.count(c) > 1})
            raise SchemaError(f"duplicate column mapping: {', '.join(dup)}")
        if not self.instruments:
            raise SchemaError("at least one instrument column is required")
        return cols


def _parse_cell(value: str, row: int, col: str) -> float:
    text = value.strip()
    if text.lower() in MISSING:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {value!r} at row {row}, column {col!r}") from None


def load_csv(path, schema: DatasetSchema) -> Panel:
    """Read a comma-delimited file with a header row into a :class:`Panel`.

    Rows missing any mapped value are dropped (count logged); series are
    demeaned unless ``schema.demean`` is false.
    """
    path = Path(path)
    cols = schema.required()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path} is empty")
        header = [h.strip() for h in header]
        for c in cols:
            if c not in header:
                raise SchemaError(f"column {c!r} not found in {path}")
        pos = {c: header.index(c) for c in cols}
        data = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not v.strip() for v in rec):
                continue
            if len(rec) < len(header):
                raise ParseError(f"row {lineno} has {len(rec)} fields, expected {len(header)}")
            data.append([_parse_cell(rec[pos[c]], lineno, c) for c in cols])
    if not data:
        raise EmptyInputError(f"{path} has no data rows")
    arr = np.array(data, dtype=float)
    keep = np.all(np.isfinite(arr), axis=1)
    if not keep.all():
        logger.warning("dropped %d row(s) with missing values", int((~keep).sum()))
    arr = arr[keep]
    if arr.shape[0] == 0:
        raise EmptyInputError("no complete rows remain after dropping missing values")
    if schema.demean:
        arr = arr - arr.mean(axis=0)
    series = dict(zip(cols, arr.T))
    sectors = np.array([series[c] for c in schema.sectors]) if schema.sectors else None
    if schema.x:
        x = series[schema.x]
    elif sectors is not None:
        x = sectors.sum(axis=0)
    else:
        raise SchemaError("schema needs an x column or sectoral columns")
    names = {"y": schema.y, "x": schema.x or "x", "instruments": list(schema.instruments)}
    if sectors is not None:
        names["sectors"] = list(schema.sectors)
    try:
        return Panel(y=series[schema.y], x=x, sectors=sectors,
                     instruments=np.array([series[c] for c in schema.instruments]), names=names)
    except InvalidArgumentError as exc:
        raise SchemaError(str(exc)) from exc


def write_csv(panel: Panel, path) -> None:
    """Write a panel as CSV with round-trip-exact floats to a path or text stream."""
    if hasattr(path, "write"):
        _write_rows(panel, path)
        return
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _write_rows(panel, fh)


def _write_rows(panel: Panel, fh) -> None:
    cols = panel.columns()
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(list(cols))
    for row in zip(*cols.values()):
        writer.writerow([repr(float(v)) for v in row])


def panel_schema(panel: Panel, demean: bool = False) -> DatasetSchema:
    """Schema matching the columns written by :func:`write_csv`."""
    return DatasetSchema(y=panel.names["y"], x=panel.names["x"],
                         sectors=tuple(panel.names.get("sectors", ())),
                         instruments=tuple(panel.names["instruments"]), demean=demean)


# --- model configuration ---------------------------------------------------

def _read_structured(source) -> dict:
    if isinstance(source, dict):
        return source
    try:
        return yaml.safe_load(Path(source).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"cannot parse {source}: {exc}") from exc


def _distribution(entry):
    if entry is None or entry == "gaussian":
        return "gaussian"
    if isinstance(entry, dict) and "support" in entry:
        return DiscreteShock(entry["support"], entry["probs"])
    raise SchemaError(f"unknown distribution entry {entry!r}")


def _coeffs(cfg: dict) -> np.ndarray:
    raw = cfg.get("coeffs")
    if raw is None:
        raise SchemaError("model config needs 'coeffs'")
    mats = []
    S = int(cfg.get("S", 1))
    rows = cfg.get("n")
    if rows is not None and cfg.get("kind", "baseline") == "augmented":
        rows = int(rows) + S - 1
    for k, mat in enumerate(raw):
        arr = np.asarray(mat, dtype=float)
        if arr.ndim == 1:
            if rows is None or "m" not in cfg:
                raise SchemaError("flat coefficient lists need 'n' and 'm' for reshaping")
            arr = arr.reshape(int(rows), int(cfg["m"]))
        mats.append(arr)
    try:
        coeffs = LagPolynomial.from_matrices(mats).coeffs
    except InvalidArgumentError as exc:
        raise SchemaError(str(exc)) from exc
    for key, value in (("m", coeffs.shape[2]), ("H_max", coeffs.shape[0] - 1)):
        if key in cfg and int(cfg[key]) != value:
            raise SchemaError(f"'{key}' is {cfg[key]} but coeffs imply {value}")
    if rows is not None and int(rows) != coeffs.shape[1]:
        raise SchemaError(f"'n' implies {rows} rows but coeffs have {coeffs.shape[1]}")
    return coeffs


def model_from_config(source) -> tuple:
    """Build ``(model, instrument_specs)`` from a config file path or mapping."""
    cfg = _read_structured(source)
    if not isinstance(cfg, dict):
        raise SchemaError("model config must be a mapping")
    if int(cfg.get("version", CONFIG_VERSION)) != CONFIG_VERSION:
        raise SchemaError(f"unsupported config version {cfg.get('version')}")
    coeffs = _coeffs(cfg)
    dist = cfg.get("distribution", "gaussian")
    dists = [_distribution(d) for d in dist] if isinstance(dist, list) else _distribution(dist)
    kind = cfg.get("kind", "baseline")
    S = int(cfg.get("S", 1))
    if kind == "baseline":
        model = SvmaModel(coeffs, S=S, shock_variances=cfg.get("shock_variances"),
                          distributions=dists, x_row=int(cfg.get("x_row", 0)),
                          y_row=int(cfg.get("y_row", -1)))
    elif kind == "augmented":
        model = AugmentedSvmaModel(coeffs, S=S, shock_variances=cfg.get("shock_variances"),
                                   distributions=dists,
                                   no_intersectoral=bool(cfg.get("no_intersectoral", False)))
    else:
        raise SchemaError(f"unknown model kind {kind!r}")
    specs = []
    for item in cfg.get("instruments", []) or []:
        try:
            specs.append(InstrumentSpec(item["loadings"], float(item.get("noise_variance", 1.0)),
                                        item.get("kind", "continuous"), item.get("p_z")))
        except KeyError as exc:
            raise SchemaError(f"instrument entry missing {exc}") from None
    return model, specs


def model_to_config(model, specs: Sequence[InstrumentSpec] = ()) -> dict:
    poly = model.polynomial
    cfg = {
        "version": CONFIG_VERSION,
        "kind": "augmented" if isinstance(model, AugmentedSvmaModel) else "baseline",
        "S": model.S,
        "H_max": poly.H_max,
        "m": poly.m,
        "coeffs": poly.coeffs.tolist(),
        "shock_variances": model.shock_variances.tolist(),
        "distribution": [d if isinstance(d, str) else
                         {"support": d.support.tolist(), "probs": d.probs.tolist()}
                         for d in model.distributions],
        "instruments": [{"loadings": s.loadings.tolist(), "noise_variance": s.noise_variance,
                         "kind": s.kind, **({"p_z": s.p_z} if s.p_z is not None else {})}
                        for s in specs],
    }
    if isinstance(model, AugmentedSvmaModel):
        cfg["no_intersectoral"] = model.no_intersectoral
    else:
        cfg["x_row"], cfg["y_row"] = model.x_row, model.y_row
    return cfg


def controls_from_config(cfg: Optional[dict]) -> ControlSpec:
    cfg = dict(cfg or {})
    unknown = set(cfg) - {"lags", "y", "x", "instrument", "sectors"}
    if unknown:
        raise SchemaError(f"unknown control options: {', '.join(sorted(unknown))}")
    return ControlSpec(**cfg)


def experiment_from_config(source):
    """Build a :class:`~compshock.verify.Experiment` from a config file or mapping.

    Keys: ``model`` (inline model config) or ``model_file``, ``target``, ``T``,
    ``horizons``, ``replications``, ``seed``, ``instrument``, ``instruments``,
    ``controls``, ``weighting``, ``bandwidth``, ``loading_pattern`` and the
    tolerance fields of ``Experiment``.
    """
    from .verify import Experiment

    cfg = dict(_read_structured(source))
    base = Path(source).parent if not isinstance(source, dict) else Path(".")
    if "model" in cfg:
        model, specs = model_from_config(cfg.pop("model"))
    elif "model_file" in cfg:
        model, specs = model_from_config(base / cfg.pop("model_file"))
    else:
        raise SchemaError("experiment config needs 'model' or 'model_file'")
    controls = controls_from_config(cfg.pop("controls", None))
    if "loading_pattern" in cfg and cfg["loading_pattern"] is not None:
        cfg["loading_pattern"] = np.asarray(cfg["loading_pattern"], dtype=bool)
    if "horizons" in cfg:
        cfg["horizons"] = tuple(int(h) for h in cfg["horizons"])
    allowed = set(Experiment.__dataclass_fields__) - {"model", "specs", "controls"}
    unknown = set(cfg) - allowed
    if unknown:
        raise SchemaError(f"unknown experiment keys: {', '.join(sorted(unknown))}")
    return Experiment(model=model, specs=specs, controls=controls, **cfg)


# --- output tables ---------------------------------------------------------

def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config: dict, inputs: Iterable = ()) -> str:
    """Hash of a canonical JSON rendering of ``config`` plus input file contents."""
    h = hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode())
    for p in inputs:
        h.update(file_digest(p).encode())
    return h.hexdigest()[:16]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def format_table(rows: Sequence[dict], meta: dict) -> str:
    """Tab-delimited table with ``# key: value`` metadata lines."""
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    cols = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    lines.append("\t".join(cols))
    for row in rows:
        lines.append("\t".join(_fmt(row.get(c)) for c in cols))
    return "\n".join(lines) + "\n"


def versions() -> str:
    return f"compshock {__version__}; numpy {np.__version__}; python {platform.python_version()}"


def read_table(path) -> tuple:
    """Parse a table written by :func:`format_table` into ``(meta, rows)``."""
    meta, rows, header = {}, [], None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif header is None:
            header = line.split("\t")
        elif line:
            rows.append(dict(zip(header, line.split("\t"))))
    return meta, rows
