"""CSV ingestion of long-format panels, chronological splitting and report/model writers.

Long format means one row per (individual, period) with an id column, an
integer time column, the response and any number of numeric covariates.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DimensionError, ParseError, SchemaError, ValidationError
from .panel import CoefficientSet, MseReport, PanelDataset, WeightMatrix

MAX_IMBALANCE = 10.0
REPORT_HEADER = ("dgp", "design", "n", "t", "cor", "estimator", "mse", "mc_stderr", "reps")


@dataclass(frozen=True)
class LongRows:
    """Parsed rows of a long-format file, before balancing."""

    ids: list
    times: np.ndarray
    y: Optional[np.ndarray]
    x: np.ndarray
    covariate_names: tuple


def _parse_float(text, line, column):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", line=line, column=column) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {text!r}", line=line, column=column)
    return v


def _parse_int(text, line, column):
    try:
        return int(text)
    except ValueError:
        pass
    v = _parse_float(text, line, column)
    if v != int(v):
        raise ParseError(f"time index {text!r} is not an integer", line=line, column=column)
    return int(v)


def read_long_rows(path, id_column, time_column, y_column=None, covariates=None) -> LongRows:
    """Parse a long-format CSV without balancing it.

    ``covariates`` fixes the covariate columns and their order; by default all
    columns other than id, time and response are covariates, in file order.
    A ``y_column`` of None means the response is not read.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path} is empty; a header row is required", line=1)
        header = [h.strip() for h in header]
        required = [id_column, time_column] + ([y_column] if y_column is not None else [])
        for col in required + list(covariates or []):
            if col not in header:
                raise SchemaError(col, path)
        if len(set(header)) != len(header):
            raise ParseError(f"duplicate column names in header of {path}", line=1)
        if covariates is None:
            covariates = [h for h in header if h not in required]
        pos = {h: k for k, h in enumerate(header)}
        x_pos = [pos[c] for c in covariates]

        ids, times, ys, xs = [], [], [], []
        seen = set()
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
            ident = row[pos[id_column]].strip()
            when = _parse_int(row[pos[time_column]], line, time_column)
            if (ident, when) in seen:
                raise ValidationError(f"line {line}: duplicate observation for id {ident!r} at time {when}")
            seen.add((ident, when))
            ids.append(ident)
            times.append(when)
            if y_column is not None:
                ys.append(_parse_float(row[pos[y_column]], line, y_column))
            xs.append([_parse_float(row[k], line, c) for k, c in zip(x_pos, covariates)])

    return LongRows(
        ids=ids,
        times=np.asarray(times, dtype=np.int64),
        y=np.asarray(ys, dtype=float) if y_column is not None else None,
        x=np.asarray(xs, dtype=float).reshape(len(ids), len(covariates)),
        covariate_names=tuple(covariates),
    )


def read_long_csv(path, y_column: str, id_column: str, time_column: str) -> PanelDataset:
    """Read a long-format CSV into a balanced panel.

    Individuals keep their order of first appearance; each individual's rows
    are sorted by time and cut to the first T, the smallest per-individual
    count. An intercept column is prepended to the covariates.
    """
    rows = read_long_rows(path, id_column, time_column, y_column)
    if not rows.ids:
        raise ValidationError(f"{path} contains no observations")
    order = {}
    for k, ident in enumerate(rows.ids):
        order.setdefault(ident, []).append(k)
    counts = [len(v) for v in order.values()]
    t = min(counts)
    if max(counts) / t > MAX_IMBALANCE:
        raise ValidationError(
            f"panel too unbalanced: between {t} and {max(counts)} periods per individual (ratio > {MAX_IMBALANCE:g})"
        )
    picks = []
    for idx in order.values():
        idx = np.asarray(idx)
        picks.append(idx[np.argsort(rows.times[idx], kind="stable")][:t])
    picks = np.asarray(picks)
    n = picks.shape[0]
    design = np.concatenate([np.ones((n, t, 1)), rows.x[picks]], axis=2)
    return PanelDataset(
        design=design,
        response=rows.y[picks],
        ids=tuple(order),
        times=rows.times[picks],
        covariate_names=rows.covariate_names,
    )


def write_long_csv(data: PanelDataset, path, y_column="y", id_column="id", time_column="time") -> None:
    """Inverse of :func:`read_long_csv`; floats are written with round-trip precision."""
    n, t, k = data.design.shape
    ids = data.ids if data.ids is not None else tuple(str(i) for i in range(n))
    times = data.times if data.times is not None else np.tile(np.arange(t), (n, 1))
    names = data.covariate_names or tuple(f"x{j}" for j in range(1, k))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([id_column, time_column, y_column, *names])
        for i in range(n):
            for s in range(t):
                w.writerow([ids[i], int(times[i, s]), repr(float(data.response[i, s]))] + [repr(float(v)) for v in data.design[i, s, 1:]])


def chronological_split(data: PanelDataset, test_fraction: float):
    """Hold out the last ``floor(T * test_fraction)`` periods of every individual."""
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    t = data.n_periods
    n_test = math.floor(t * test_fraction)
    if n_test < 1 or t - n_test < 1:
        raise ValidationError(f"split of T={t} at fraction {test_fraction} leaves an empty train or test set")
    return data.subset_periods(np.arange(t - n_test)), data.subset_periods(np.arange(t - n_test, t))


def _fmt(v, decimals=4):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(v)
    return f"{float(v):.{decimals}f}"


def _report_cells(row):
    return [
        "" if row.dgp is None else str(row.dgp),
        row.design,
        str(row.n),
        str(row.t),
        "" if row.cor is None else _fmt(float(row.cor)),
        row.estimator,
        _fmt(float(row.mse)),
        _fmt(float(row.mc_stderr)),
        str(row.reps),
    ]


def render_report(report: MseReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        lines = [",".join(REPORT_HEADER)] + [",".join(_report_cells(r)) for r in report]
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| " + " | ".join(REPORT_HEADER) + " |", "|" + "---|" * len(REPORT_HEADER)]
        lines += ["| " + " | ".join(_report_cells(r)) + " |" for r in report]
        return "\n".join(lines) + "\n"
    raise ValidationError(f"unknown report format {fmt!r}; choose csv or markdown")


def write_report(report: MseReport, path, fmt: str = "csv") -> None:
    text = render_report(report, fmt)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report: {exc.strerror}", str(path)) from exc


@dataclass(frozen=True)
class ModelBundle:
    """A fitted model as persisted on disk: coefficients, weights and settings."""

    ids: tuple
    coefs: CoefficientSet
    weights: WeightMatrix
    covariate_names: tuple
    meta: dict

    def __post_init__(self):
        n = len(self.ids)
        if self.coefs.coefs.shape != (n, len(self.covariate_names) + 1):
            raise DimensionError("coefficient matrix does not match ids and covariate names")
        if self.weights.n_individuals != n:
            raise DimensionError("weight matrix does not match ids")


def save_model(bundle: ModelBundle, directory) -> None:
    """Write ``coefs.csv``, ``weights.csv`` and ``meta.csv`` into ``directory``."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    with open(directory / "coefs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "intercept", *bundle.covariate_names])
        for ident, b in zip(bundle.ids, bundle.coefs.coefs):
            w.writerow([ident, *(repr(float(v)) for v in b)])
    with open(directory / "weights.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *bundle.ids])
        for ident, row in zip(bundle.ids, bundle.weights.w):
            w.writerow([ident, *(repr(float(v)) for v in row)])
    meta = dict(bundle.meta)
    meta["delta"] = repr(float(bundle.weights.delta))
    meta["gamma"] = repr(float(bundle.weights.gamma))
    with open(directory / "meta.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for k, v in meta.items():
            w.writerow([k, v])


def _read_table(path):
    if not path.exists():
        raise ValidationError(f"model file {path} not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path} is empty", line=1)
        return header, [(reader.line_num, row) for row in reader if row]


def load_model(directory) -> ModelBundle:
    directory = Path(directory)
    header, rows = _read_table(directory / "coefs.csv")
    if header[:2] != ["id", "intercept"]:
        raise SchemaError("intercept", directory / "coefs.csv")
    ids = tuple(row[0] for _, row in rows)
    coefs = np.array([[_parse_float(v, line, header[j + 1]) for j, v in enumerate(row[1:])] for line, row in rows])
    w_header, w_rows = _read_table(directory / "weights.csv")
    if tuple(w_header[1:]) != ids or tuple(r[0] for _, r in w_rows) != ids:
        raise ValidationError(f"ids in {directory / 'weights.csv'} do not match coefs.csv")
    w = np.array([[_parse_float(v, line, w_header[j + 1]) for j, v in enumerate(row[1:])] for line, row in w_rows])
    _, m_rows = _read_table(directory / "meta.csv")
    meta = {row[0]: row[1] for _, row in m_rows}
    delta = float(meta.pop("delta", 1.0))
    gamma = float(meta.pop("gamma", 0.0))
    return ModelBundle(
        ids=ids,
        coefs=CoefficientSet(coefs.reshape(len(ids), len(header) - 1)),
        weights=WeightMatrix(w=w.reshape(len(ids), len(ids)), delta=delta, gamma=gamma),
        covariate_names=tuple(header[2:]),
        meta=meta,
    )
