"""Benchmark command line: ``revisp {synth,fit,predict,eval,report}``.

Global options (``--seed``, ``--threads``, ``--manifest``, ``--config``) may
appear before or after the subcommand. A JSON config file supplies defaults
for any option by its long name (dashes or underscores); explicit flags win.

Exit codes: 0 success, 1 usage error, 2 data error, 3 fit error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import load_manifest, load_metadata, read_rgb, write_raw16
from .errors import EmptyDatasetError, IllConditionedFitError, RevispError
from .isp import inverse_isp_linear
from .model import (
    DEFAULT_GAMMAS,
    FitConfig,
    GlobalMatrixModel,
    block_color_samples,
    fit,
    fit_global_matrix,
    load_model,
    save_model,
)
from .report import evaluate, load_report, render_reports, save_report
from .sampling import stratified_sample
from .synth import synth_dataset
from .tta import BACKMAPS, TTA_SETS, predict_tta

log = logging.getLogger("revisp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIT = 0, 1, 2, 3

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "manifest": None,
    "verbose": False,
    # synth
    "n": 20,
    "size": 512,
    "n_oof": None,
    "split": "test",
    "meta": None,
    # fit
    "method": "gamma-mixture",
    "gammas": ",".join(str(g) for g in DEFAULT_GAMMAS),
    "patch": 64,
    "stride": None,
    "patches": 256,
    "bins": 4,
    "loss": "mse",
    "max_iters": 500,
    # predict
    "model": None,
    "meta_from_manifest": False,
    "tta": "none",
    "tta_backmap": "spatial",
    "inputs": [],
    # eval / report
    "pred": None,
    "name": None,
    "format": "markdown",
    "reports": [],
    "out": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, help="worker threads for per-image work (default 1)")
    common.add_argument("--manifest", help="dataset manifest (JSON)")
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="revisp", description=__doc__.splitlines()[0], parents=[common],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    kw = {"parents": [common], "argument_default": argparse.SUPPRESS}

    p = sub.add_parser("synth", help="write a synthetic dataset", **kw)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, help="number of pairs (default 20)")
    p.add_argument("--size", type=int, help="packed RAW side length (default 512)")
    p.add_argument("--n-oof", type=int, help="pairs tagged as OOF devices (default n // 3)")
    p.add_argument("--split", choices=("train", "test"))
    p.add_argument("--meta", help="ISP metadata JSON (default: built-in camera)")

    p = sub.add_parser("fit", help="fit a reverse model on a training manifest", **kw)
    p.add_argument("--method", choices=("gamma-mixture", "global-matrix"))
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--gammas", help="comma-separated gamma candidates (default 1.0,2.2,2.4)")
    p.add_argument("--patch", type=int, help="RAW patch side for sampling (default 64)")
    p.add_argument("--stride", type=int, help="patch stride (default: patch)")
    p.add_argument("--patches", type=int, help="stratified patches to draw, 0 = all (default 256)")
    p.add_argument("--bins", type=int, help="brightness bins (default 4)")
    p.add_argument("--loss", choices=("mse", "l1", "gar2net", "hardlog"))
    p.add_argument("--max-iters", type=int, help="outer iterations (default 500)")

    p = sub.add_parser("predict", help="reconstruct RAW from RGB images", **kw)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="model file from `fit`")
    src.add_argument("--meta", help="ISP metadata JSON used for every image")
    src.add_argument("--meta-from-manifest", action="store_true",
                     help="use each manifest entry's metadata file")
    p.add_argument("--tta", choices=tuple(TTA_SETS))
    p.add_argument("--tta-backmap", choices=BACKMAPS)
    p.add_argument("--out", required=True, help="output directory for <id>.raw16")
    p.add_argument("inputs", nargs="*", help="RGB files (alternative to --manifest)")

    p = sub.add_parser("eval", help="score predictions against a manifest", **kw)
    p.add_argument("--pred", required=True, help="directory of <id>.raw16 predictions")
    p.add_argument("--out", required=True, help="report file to write")
    p.add_argument("--name", help="method name recorded in the report")
    p.add_argument("--model", help="model path echoed in the report")
    p.add_argument("--tta", choices=tuple(TTA_SETS))

    p = sub.add_parser("report", help="render reports as a benchmark table", **kw)
    p.add_argument("reports", nargs="+", help="report files from `eval`")
    p.add_argument("--format", choices=("csv", "markdown"))
    p.add_argument("--out", help="write the table here instead of stdout")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    given = vars(args)
    if "config" in given:
        try:
            config = json.loads(Path(given["config"]).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {given['config']}: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in config.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            settings[key] = value
    settings.update(given)
    return settings


def _require_manifest(s):
    if not s["manifest"]:
        raise UsageError("this command needs --manifest")
    return load_manifest(s["manifest"])


# --- commands -----------------------------------------------------------------------

def cmd_synth(s) -> int:
    meta = load_metadata(s["meta"]) if s["meta"] else None
    manifest = synth_dataset(s["out"], s["n"], meta=meta, seed=s["seed"], size=s["size"],
                             n_oof=s["n_oof"], split=s["split"])
    print(f"wrote {len(manifest)} pairs to {s['out']}")
    return EXIT_OK


def _training_pairs(manifest, s, whole_images: bool):
    from .dataio import crop_aligned

    pairs = []
    for e in sorted(manifest.entries, key=lambda e: e.id):
        rgb, raw = e.load_rgb(), e.load_raw()
        if whole_images:
            pairs.extend(crop_aligned(rgb, raw, min(raw.shape[:2]), min(raw.shape[:2])))
        else:
            size = min(s["patch"], *raw.shape[:2])
            pairs.extend(crop_aligned(rgb, raw, size, s["stride"] or size))
    return pairs


def cmd_fit(s) -> int:
    manifest = _require_manifest(s)
    if len(manifest) == 0:
        raise EmptyDatasetError("empty dataset: the training manifest has no entries")
    if s["method"] == "global-matrix":
        pairs = _training_pairs(manifest, s, whole_images=True)
        raw_rgb, lin_rgb = block_color_samples(pairs)
        transform = fit_global_matrix(samples=(raw_rgb, lin_rgb))
        objective = float(np.mean((raw_rgb @ transform.m.T - lin_rgb) ** 2))
        save_model(GlobalMatrixModel(transform), s["out"])
    else:
        gammas = [float(g) for g in str(s["gammas"]).split(",") if g.strip()]
        pairs = _training_pairs(manifest, s, whole_images=False)
        if s["patches"] and s["patches"] < len(pairs):
            pairs = stratified_sample(pairs, s["patches"], min(s["bins"], s["patches"]), seed=s["seed"])
        cfg = FitConfig(max_outer_iters=s["max_iters"], seed=s["seed"], loss=s["loss"])
        model, history = fit(pairs, len(gammas), gammas, cfg)
        objective = history[-1]
        save_model(model, s["out"])
    print(f"final objective: {objective:.10e}")
    print(f"wrote {s['out']}")
    return EXIT_OK


def cmd_predict(s) -> int:
    jobs = []
    if s["inputs"]:
        jobs = [(Path(p).stem, p, None) for p in s["inputs"]]
    elif s["manifest"]:
        jobs = [(e.id, e.rgb_path, e.meta_path) for e in _require_manifest(s).entries]
    else:
        raise UsageError("predict needs input files or --manifest")

    if s["model"]:
        model = load_model(s["model"])
        predictors = {None: model.predict_linear}
    elif s["meta"]:
        meta = load_metadata(s["meta"])
        predictors = {None: lambda img: inverse_isp_linear(img, meta)}
    elif s["meta_from_manifest"]:
        predictors = {}
        for _, _, meta_path in jobs:
            if meta_path is None:
                raise UsageError("--meta-from-manifest needs a meta_path on every entry")
            if meta_path not in predictors:
                meta = load_metadata(meta_path)
                predictors[meta_path] = (lambda m: lambda img: inverse_isp_linear(img, m))(meta)
    else:
        raise UsageError("predict needs --model, --meta or --meta-from-manifest")

    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)

    def run(job):
        ident, rgb_path, meta_path = job
        predictor = predictors.get(meta_path, predictors.get(None))
        raw = predict_tta(predictor, read_rgb(rgb_path), s["tta"], s["tta_backmap"])
        write_raw16(out / f"{ident}.raw16", raw)

    with ThreadPoolExecutor(max_workers=max(1, s["threads"])) as pool:
        list(pool.map(run, jobs))
    print(f"wrote {len(jobs)} predictions to {out} (tta={s['tta']})")
    return EXIT_OK


def cmd_eval(s) -> int:
    manifest = _require_manifest(s)
    name = s["name"] or Path(s["pred"]).name
    report = evaluate(s["pred"], manifest, method=name, tta=s["tta"], model_path=s["model"],
                      threads=s["threads"])
    save_report(s["out"], report)
    agg = report["aggregates"]["overall"]
    psnr = "-" if agg["psnr"] is None else f"{agg['psnr']:.2f}"
    ssim = "-" if agg["ssim"] is None else f"{agg['ssim']:.4f}"
    print(f"overall PSNR {psnr} dB, SSIM {ssim} over {agg['count']} images "
          f"({agg['psnr_inf_excluded']} infinite PSNR excluded)")
    return EXIT_OK


def cmd_report(s) -> int:
    table = render_reports([load_report(p) for p in s["reports"]], s["format"])
    if s["out"]:
        Path(s["out"]).write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(table)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve_settings(args)
        logging.basicConfig(level=logging.DEBUG if settings["verbose"] else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[settings["command"]](settings)
    except UsageError as exc:
        print(f"revisp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IllConditionedFitError as exc:
        print(f"revisp: fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (RevispError, OSError) as exc:
        print(f"revisp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
