"""CSV, JSON sidecar and plot-data writers for sweep tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from ..errors import InvalidInputError
from .runner import SweepRow, SweepTable

__all__ = ["CSV_COLUMNS", "emit_results", "read_csv", "write_plot_data"]

CSV_COLUMNS = ("axis_value", "estimator", "mean_se_per_use", "mean_se_eff",
               "stderr_se_eff", "tau_total", "trials")


def _fmt(value) -> str:
    # repr of a float is the shortest string that parses back to the same value
    return repr(float(value)) if isinstance(value, float) else str(value)


def _open(path: Path, mode: str = "w"):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_results(table: SweepTable, path, fmt: str = "csv", plot_data: bool = False) -> list[Path]:
    """
    Write ``table`` to ``path`` (a ``.csv`` file); a JSON sidecar with the
    scenario config lands next to it with the same stem.

    Returns the written paths.
    """
    if fmt != "csv":
        raise InvalidInputError(f"unsupported output format {fmt!r}")
    path = Path(path)
    written = [path]
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in table.rows:
            writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])

    sidecar = path.with_suffix(".json")
    payload = {
        "axis": table.axis,
        "master_seed": None if table.config is None else table.config.master_seed,
        "config": None if table.config is None else table.config.to_dict(),
        "failures": {f"{_fmt(r.axis_value)}/{r.estimator}": r.failures
                     for r in table.rows if r.failures},
    }
    with _open(sidecar) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(sidecar)

    if plot_data:
        written.extend(write_plot_data(table, path.parent, path.stem))
    return written


def write_plot_data(table: SweepTable, out_dir, prefix: str) -> list[Path]:
    """
    One two-column whitespace-separated file per (series, estimator).

    Power sweeps produce per-use and effective rate series plus a training
    length listing; coherence-length sweeps produce the effective rate series.
    """
    out_dir = Path(out_dir)
    estimators = list(dict.fromkeys(r.estimator for r in table.rows))
    metrics = ["mean_se_eff"] if table.axis == "gamma" else ["mean_se_per_use", "mean_se_eff"]
    names = {"mean_se_per_use": "se_per_use", "mean_se_eff": "se_effective"}
    written = []
    for metric in metrics:
        for est in estimators:
            xs, ys = table.series(est, metric)
            p = out_dir / f"{prefix}_{table.axis}_{names[metric]}_{est}.dat"
            with _open(p) as fh:
                for x, y in zip(xs, ys):
                    fh.write(f"{_fmt(x)} {_fmt(y)}\n")
            written.append(p)
    p = out_dir / f"{prefix}_training_length.dat"
    with _open(p) as fh:
        for est in estimators:
            tau = next(r.tau_total for r in table.rows if r.estimator == est)
            fh.write(f"{est} {tau}\n")
    written.append(p)
    return written


def read_csv(path) -> list[SweepRow]:
    """Parse a CSV written by :func:`emit_results` back into rows."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InvalidInputError(f"{path} does not have the expected columns")
        for rec in reader:
            rows.append(SweepRow(
                axis_value=float(rec["axis_value"]), estimator=rec["estimator"],
                mean_se_per_use=float(rec["mean_se_per_use"]),
                mean_se_eff=float(rec["mean_se_eff"]),
                stderr_se_eff=float(rec["stderr_se_eff"]),
                tau_total=int(rec["tau_total"]), trials=int(rec["trials"]),
            ))
    return rows
