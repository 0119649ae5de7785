"""CSV / JSON row writers.

Both formats share one column schema. Reals are written with 10
significant digits (``%.10g``); absent values are empty in CSV and
``null`` in JSON, and an out-of-domain ``gamma_db`` is the literal
``undefined`` in both.
"""

import csv
import io
import json
import math
from pathlib import Path

from .errors import TmcdmaError

COLUMNS = ("K", "algorithm", "phi2", "aleph", "gamma_linear", "gamma_db",
           "ber", "ber_ci95", "empirical_snr_db", "mean_metric_evals",
           "symbols", "seed", "ebn0_db", "status")

INT_COLUMNS = {"K", "symbols", "seed"}
UNDEFINED = "undefined"


class OutputError(TmcdmaError, OSError):
    pass


def round_real(x):
    """Round to 10 significant digits; keeps None and non-finite values."""
    if x is None or isinstance(x, str):
        return x
    x = float(x)
    if not math.isfinite(x):
        return x
    return float(f"{x:.10g}")


def format_value(col, x):
    """Text form of one cell."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if col in INT_COLUMNS:
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10g}"


def curve_row(pt):
    """Row dict for an analytic :class:`SnrCurvePoint`."""
    return {"K": pt.K, "algorithm": pt.algorithm_id, "phi2": pt.phi2,
            "aleph": pt.aleph, "gamma_linear": pt.gamma_linear,
            "gamma_db": UNDEFINED if pt.gamma_db is None else pt.gamma_db}


def stats_row(st):
    """Row dict for a :class:`MonteCarloStats`."""
    row = {"K": st.K, "algorithm": st.detector_id, "ebn0_db": st.ebn0_db,
           "empirical_snr_db": st.empirical_snr_db, "symbols": st.symbols,
           "seed": st.seed, "status": st.status}
    if not st.skipped:
        row.update(ber=st.ber, ber_ci95=st.ber_ci95,
                   mean_metric_evals=st.mean_metric_evals)
    return row


def _as_row(r):
    if isinstance(r, dict):
        return r
    if hasattr(r, "detector_id"):
        return stats_row(r)
    return curve_row(r)


def render_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        r = _as_row(r)
        w.writerow([format_value(c, r.get(c)) for c in COLUMNS])
    return buf.getvalue()


def _json_value(col, x):
    if x is None or isinstance(x, str):
        return x
    if col in INT_COLUMNS:
        return int(x)
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return round_real(x)


def json_document(rows, meta):
    return {"columns": list(COLUMNS),
            "rows": [{c: _json_value(c, _as_row(r).get(c)) for c in COLUMNS}
                     for r in rows],
            "meta": meta}


def render_json(rows, meta):
    return json.dumps(json_document(rows, meta), indent=2) + "\n"


def _write_text(path, text):
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_rows(rows, fmt, path, meta=None):
    """Serialize rows to ``path`` as ``csv`` or ``json``.

    For CSV the metadata, if given, goes to a ``<path>.meta.json`` sidecar.
    Identical inputs always produce byte-identical files.
    """
    rows = list(rows)
    if fmt == "csv":
        _write_text(path, render_csv(rows))
        if meta is not None:
            _write_text(str(path) + ".meta.json",
                        json.dumps(meta, indent=2) + "\n")
    elif fmt == "json":
        _write_text(path, render_json(rows, meta or {}))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_json_rows(path):
    """Parse a JSON output file back into (rows, meta)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return doc["rows"], doc["meta"]
