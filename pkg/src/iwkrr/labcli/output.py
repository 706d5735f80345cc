"""CSV and SVG artifacts of a sweep."""

from __future__ import annotations

import csv
import math
import os
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..errors import DataError
from .sweep import ErrorReason, ErrorRecord, SweepRecord, record_field_names

ERROR_FIELDS = ["decay_a", "n", "seed_index", "d", "reason", "message"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _check_finite(rec: SweepRecord) -> None:
    for name, v in zip(record_field_names(), _values(rec)):
        if isinstance(v, float) and not math.isfinite(v):
            raise DataError(f"record (decay_a={rec.decay_a}, n={rec.n}, seed={rec.seed_index}) "
                            f"has nonfinite {name}={v}")


def _values(rec: SweepRecord) -> Tuple:
    return tuple(getattr(rec, f) for f in rec.__dataclass_fields__)


def emit_csv(records: Sequence[SweepRecord], path) -> None:
    """Header = SweepRecord field names in order; floats with 17 significant digits."""
    records = list(records)
    if not records:
        raise DataError("emit_csv needs at least one record")
    for rec in records:
        _check_finite(rec)
    rows = sorted(records, key=SweepRecord.sort_key)
    _write(path, record_field_names(), ([_fmt(v) for v in _values(r)] for r in rows))


def emit_errors(errors: Sequence[ErrorRecord], path) -> None:
    rows = sorted(errors, key=ErrorRecord.sort_key)
    _write(path, ERROR_FIELDS, ([_fmt(e.decay_a), str(e.n), str(e.seed_index), str(e.d),
                                 e.reason.value, e.message] for e in rows))


def _write(path, header, rows) -> None:
    path = Path(path)
    try:
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> List[SweepRecord]:
    names = record_field_names()
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != names:
            raise DataError(f"{path}: header does not match the sweep schema")
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(names):
                raise DataError(f"{path}:{lineno}: expected {len(names)} columns, got {len(row)}")
            vals = []
            for f, text in zip(SweepRecord.__dataclass_fields__.values(), row):
                if f.name in ("seed_index", "n", "d"):
                    vals.append(int(text))
                elif f.name == "weighting_mode":
                    vals.append(text)
                elif text == "" and f.name == "mc_excess_risk":
                    vals.append(None)
                else:
                    vals.append(float(text))
            out.append(SweepRecord(*vals))
    return out


def read_errors(path) -> List[ErrorRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [ErrorRecord(int(r["seed_index"]), int(r["n"]), int(r["d"]), float(r["decay_a"]),
                            ErrorReason(r["reason"]), r["message"]) for r in reader]


# --- plots --------------------------------------------------------------------

def series_stats(records: Iterable[SweepRecord], attr) -> Dict[float, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per decay: (n values, mean over seeds, population std over seeds).

    ``attr`` is a field name or a callable on a record.
    """
    get = attr if callable(attr) else (lambda r: getattr(r, attr))
    buckets: Dict[float, Dict[int, List[float]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        buckets[r.decay_a][r.n].append(float(get(r)))
    out = {}
    for a, by_n in buckets.items():
        ns = np.array(sorted(by_n))
        vals = [np.array(by_n[n]) for n in ns]
        out[a] = (ns, np.array([v.mean() for v in vals]), np.array([v.std() for v in vals]))
    return out


def scale_to_last(bound: np.ndarray, empirical: np.ndarray) -> Tuple[np.ndarray, float]:
    """Multiply ``bound`` so that it equals ``empirical`` at the largest n."""
    if bound[-1] <= 0 or empirical[-1] <= 0:
        return bound.copy(), 1.0
    s = float(empirical[-1] / bound[-1])
    return bound * s, s


def _svg_comments(meta: Dict[str, object], series: Dict[str, Tuple[np.ndarray, np.ndarray]]) -> str:
    lines = []
    for k, v in meta.items():
        lines.append(f"<!-- meta {k}={_fmt(v) if not isinstance(v, str) else v} -->")
    for name, (x, y) in series.items():
        xs = ",".join(_fmt(int(v)) for v in x)
        ys = ",".join(_fmt(float(v)) for v in y)
        lines.append(f"<!-- series name={name.replace('--', '-')} n=[{xs}] y=[{ys}] -->")
    return "\n".join(lines) + "\n"


def _panel(path: Path, a: float, quantity: str, ns, mean, std, bound_label: str, bound) -> None:
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    scaled, factor = scale_to_last(bound, mean)
    degenerate = not np.all(mean > 0)
    with matplotlib.rc_context({"svg.hashsalt": "iwkrr", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        lo = mean - std
        if degenerate:
            ax.plot(ns, mean, "o-", color="C0", label=f"empirical {quantity}")
            ax.set_xscale("log")
            ax.text(0.5, 0.5, f"degenerate axis: {quantity} is not strictly positive,\nlinear y-scale shown",
                    transform=ax.transAxes, ha="center", va="center", color="C3")
        else:
            ax.fill_between(ns, np.where(lo > 0, lo, mean * 1e-3), mean + std, color="C0", alpha=0.25,
                            label="mean ± 1 std")
            ax.plot(ns, mean, "o-", color="C0", label=f"empirical {quantity}")
            ax.plot(ns, scaled, "s--", color="C1", label=f"{bound_label} (×{factor:.3g}, matched at n={ns[-1]})")
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("n (training points)")
        ax.set_ylabel(quantity)
        ax.set_title(f"a = {_fmt(a)}")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    body = path.read_text(encoding="utf-8")
    head, sep, rest = body.partition("\n")
    meta = {"decay_a": float(a), "quantity": quantity, "bound_scale": factor,
            "scale_rule": "bound multiplied to match the empirical mean at the largest n",
            "degenerate_axis": "true" if degenerate else "false"}
    comments = _svg_comments(meta, {f"{quantity}_mean": (ns, mean), f"{quantity}_std": (ns, std),
                                    bound_label: (ns, scaled)})
    path.write_text(head + sep + comments + rest, encoding="utf-8")


def emit_plots(records: Sequence[SweepRecord], path_prefix) -> List[Path]:
    """Two SVG panels per decay value: variance vs n and bias^2 vs n."""
    records = list(records)
    if len({r.n for r in records}) < 2:
        raise DataError("emit_plots needs records spanning at least 2 distinct n values")
    var = series_stats(records, "variance")
    bias = series_stats(records, "bias_sq")
    vb = series_stats(records, "bound_variance_dominated")
    bb = series_stats(records, lambda r: r.bound_bias_in + r.bound_bias_iw)
    prefix = os.fspath(path_prefix)
    written = []
    for a in sorted(var):
        tag = _fmt(a).replace(".", "p")
        ns, m, s = var[a]
        p = Path(f"{prefix}_a{tag}_variance.svg")
        _panel(p, a, "variance", ns, m, s, "scaled V", vb[a][1])
        written.append(p)
        ns, m, s = bias[a]
        p = Path(f"{prefix}_a{tag}_bias.svg")
        _panel(p, a, "bias^2", ns, m, s, "scaled B", bb[a][1])
        written.append(p)
    return written
