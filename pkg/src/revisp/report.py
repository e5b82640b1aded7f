"""Evaluation reports and benchmark tables.

Aggregation rule, echoed in every report:

* ``target`` / ``oof``: mean over the images of that group
* ``overall``: unweighted mean over all images of both groups
* images with infinite PSNR (exact reconstructions) are left out of PSNR
  means and counted in ``psnr_inf_excluded``; SSIM means use every image
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .dataio import GROUPS, read_raw16
from .errors import FormatError, RevispError
from .metrics import psnr, ssim

REPORT_FORMAT_VERSION = 1
AGGREGATION_RULE = (
    "overall = unweighted mean over all images; target/oof = mean over the group's images; "
    "infinite PSNR values are excluded from PSNR means and counted")
TABLE_COLUMNS = ("Method", "Overall PSNR", "Overall SSIM", "Target PSNR", "Target SSIM",
                 "OOF PSNR", "OOF SSIM")
SCOPES = ("overall",) + GROUPS


class MissingPredictionError(RevispError):
    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__("missing predictions for ids: " + ", ".join(self.ids))


def _mean(values):
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def aggregate(rows) -> dict:
    """Per-scope means over per-image rows, summed in id order."""
    rows = sorted(rows, key=lambda r: r["id"])
    out = {}
    for scope in SCOPES:
        sel = rows if scope == "overall" else [r for r in rows if r["group"] == scope]
        finite = [r["psnr"] for r in sel if not math.isinf(r["psnr"])]
        out[scope] = {
            "count": len(sel),
            "psnr": _mean(finite) if finite else None,
            "ssim": _mean([r["ssim"] for r in sel]) if sel else None,
            "psnr_inf_excluded": len(sel) - len(finite),
        }
    return out


def score_pair(entry, pred_path) -> dict:
    gt = read_raw16(entry.raw_path)
    pred = read_raw16(pred_path)
    return {"id": entry.id, "device": entry.device, "group": entry.group,
            "psnr": psnr(pred, gt), "ssim": ssim(pred, gt)}


def evaluate(pred_dir, manifest, method: str = "unnamed", tta: str = "none",
             model_path=None, threads: int = 1) -> dict:
    """Score ``<pred_dir>/<id>.raw16`` against every manifest entry."""
    pred_dir = Path(pred_dir)
    entries = sorted(manifest.entries, key=lambda e: e.id)
    missing = [e.id for e in entries if not (pred_dir / f"{e.id}.raw16").is_file()]
    if missing:
        raise MissingPredictionError(missing)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda e: score_pair(e, pred_dir / f"{e.id}.raw16"), entries))
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "aggregation_rule": AGGREGATION_RULE,
        "config": {"method": method, "tta": tta, "model": None if model_path is None else str(model_path)},
        "per_image": rows,
        "aggregates": aggregate(rows),
    }


def _encode_psnr(rows):
    return [dict(r, psnr="inf" if math.isinf(r["psnr"]) else r["psnr"]) for r in rows]


def dumps_report(report: dict) -> str:
    doc = dict(report, per_image=_encode_psnr(report["per_image"]))
    return json.dumps(doc, indent=2) + "\n"


def loads_report(text: str) -> dict:
    try:
        doc = json.loads(text)
        if doc.get("format_version") != REPORT_FORMAT_VERSION:
            raise FormatError(f"unsupported report format_version {doc.get('format_version')!r}")
        for r in doc["per_image"]:
            r["psnr"] = math.inf if r["psnr"] == "inf" else float(r["psnr"])
        for scope in SCOPES:
            agg = doc["aggregates"][scope]
            for key in ("psnr", "ssim"):
                if agg[key] is not None:
                    agg[key] = float(agg[key])
        doc["config"]["method"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed report: {exc!r}") from exc
    return doc


def save_report(path, report: dict) -> None:
    Path(path).write_text(dumps_report(report), encoding="utf-8")


def load_report(path) -> dict:
    return loads_report(Path(path).read_text(encoding="utf-8"))


# --- tables ----------------------------------------------------------------------

def _cell(value, digits):
    return "-" if value is None else f"{value:.{digits}f}"


def table_row(method: str, aggregates: dict) -> list[str]:
    """Cells for one method: PSNR to 2 decimals, SSIM to 4, ``-`` when empty."""
    cells = [method]
    for scope in SCOPES:
        agg = aggregates.get(scope) or {}
        cells.append(_cell(agg.get("psnr"), 2))
        cells.append(_cell(agg.get("ssim"), 4))
    return cells


def render_table(rows, fmt: str = "markdown") -> str:
    """Render ``(method, aggregates)`` rows as CSV or a markdown table."""
    body = [table_row(method, aggs) for method, aggs in rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(body)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(TABLE_COLUMNS) + " |",
                 "|" + "|".join(["---"] + ["---:"] * (len(TABLE_COLUMNS) - 1)) + "|"]
        lines += ["| " + " | ".join(cells) + " |" for cells in body]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}; use 'csv' or 'markdown'")


def render_reports(reports, fmt: str = "markdown") -> str:
    return render_table([(r["config"]["method"], r["aggregates"]) for r in reports], fmt)
