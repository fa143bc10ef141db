"""CSV/JSON artifacts and generated gnuplot scripts."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from .fitting import FitModel
from .measure import BenchSample

SAMPLE_FIELDS = ("cycle", "x", "y_ms", "kind")
GRID_FIELDS = ("lambda", "T_p", "R_pr_ms")


def write_samples_csv(path: str | Path, samples: Iterable[BenchSample]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_FIELDS)
        for s in samples:
            w.writerow((s.cycle_index, repr(float(s.x)), repr(float(s.y_ms)), s.kind))
    return path


def read_samples_csv(path: str | Path) -> list[BenchSample]:
    with Path(path).open(newline="") as fh:
        return [
            BenchSample(int(row["cycle"]), float(row["x"]), float(row["y_ms"]), row["kind"])
            for row in csv.DictReader(fh)
        ]


def write_json(path: str | Path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def write_fit_report(path: str | Path, model: FitModel) -> Path:
    return write_json(path, model.to_dict())


def read_fit_report(path: str | Path) -> FitModel:
    return FitModel.from_dict(json.loads(Path(path).read_text()))


def write_grid_csv(path: str | Path, rows: Sequence[tuple[float, float, float]]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_FIELDS)
        for lam, tp, r in rows:
            w.writerow((repr(float(lam)), repr(float(tp)), repr(float(r))))
    return path


def _gp_expr(model: FitModel) -> str:
    c = model.coefficients
    if model.family == "poly2":
        return f"{c[0]!r} + {c[1]!r}*x + {c[2]!r}*x**2"
    if model.family == "linear":
        return f"{c[0]!r} + {c[1]!r}*x"
    return f"{c[0]!r} - {c[1]!r}*log(x - {c[2]!r})"


def samples_plot_script(csv_name: str, model: FitModel | None, title: str, xlabel: str) -> str:
    lines = [
        "set datafile separator ','",
        "set key top left",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        "set ylabel 'response time (ms)'",
    ]
    plot = f"plot '{csv_name}' using 2:3 skip 1 with points title 'samples'"
    if model is not None:
        lines.append(f"f(x) = {_gp_expr(model)}")
        plot += f", f(x) with lines title '{model.family} fit'"
    lines.append(plot)
    return "\n".join(lines) + "\n"


def grid_plot_script(csv_name: str) -> str:
    return "\n".join([
        "set datafile separator ','",
        "set title 'predicted proof retrieval time'",
        "set xlabel 'lambda (tx/s)'",
        "set ylabel 'T_p (s)'",
        "set zlabel 'R_pr (ms)'",
        "set dgrid3d 30,30",
        "set hidden3d",
        f"splot '{csv_name}' using 1:2:3 skip 1 with lines title 'R_pr'",
    ]) + "\n"
