"""Command-line front end: ``gasinar {simulate,fit,forecast,evaluate,replicate}``.

Every command computes its results in memory, then writes all output files
atomically into ``--output`` (a directory). Each JSON document records the
seed, the full configuration and the package version. On failure a JSON
error document is printed to stdout and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from gasinar import __version__
from gasinar.diagnostics import (
    alpha_confidence_bands,
    contraction_check,
    rolling_evaluate,
)
from gasinar.distributions import NegativeBinomial, Poisson
from gasinar.estimation import FitOptions, fit, from_natural, lr_test, param_names
from gasinar.exceptions import GasInarError, InputError
from gasinar.filter import GasParams, run_filter
from gasinar.forecasting import forecast_model
from gasinar.models import MODEL_KINDS, GasInar, alpha_path, model_from_dict, model_to_dict
from gasinar.simulation import DgpKind, simulate
from gasinar.studies import TABLE1_THETA, table1, table2

__all__ = ["main", "read_counts_csv", "build_parser"]

logger = logging.getLogger("gasinar")

MIN_SCALE = 20
DEFAULT_SCALE = {"table1": 200, "table2": 100}
FULL_SCALE = 1000
DEFAULT_T = {"table1": 1000, "table2": 500}
COUNT_HEADERS = ("count", "counts", "y", "value")

# natural parameters used by `simulate` when --param is not given
DEFAULT_PARAMS = {
    "inar": {"alpha": 0.5, "mu": 5.0, "sigma2": 10.0},
    "rc": {"omega": -1.0, "tau": 0.1, "mu": 5.0, "sigma2": 10.0},
}


class UsageError(GasInarError, ValueError):
    pass


# --------------------------------------------------------------------------
# input


def _parse_count(cell: str, line: int) -> int:
    text = cell.strip()
    try:
        value = int(text)
    except ValueError:
        try:
            f = float(text)
        except ValueError:
            raise InputError(f"line {line}: non-numeric count {text!r}") from None
        if not math.isfinite(f) or f != int(f):
            raise InputError(f"line {line}: count must be an integer, got {text!r}") from None
        value = int(f)
    if value < 0:
        raise InputError(f"line {line}: count must be non-negative, got {value}")
    return value


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_counts_csv(path) -> np.ndarray:
    """Read a count series from a CSV file.

    A non-numeric first row is a header. With a header, the column named
    ``count``/``counts``/``y``/``value`` is used if present; otherwise (and
    without a header) the last column is the count column, so a leading date
    column is ignored. Errors name the 1-based line number.
    """
    with open(path, newline="") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1) if any(c.strip() for c in row)]
    if not rows:
        raise InputError(f"{path}: empty file")
    col = -1
    first_line, first = rows[0]
    if not _is_number(first[-1].strip()):
        names = [c.strip().lower() for c in first]
        for name in COUNT_HEADERS:
            if name in names:
                col = names.index(name)
                break
        rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no data rows after the header")
    out = []
    for line, row in rows:
        if col >= len(row) or (col < 0 and not row):
            raise InputError(f"line {line}: missing count column")
        out.append(_parse_count(row[col], line))
    return np.asarray(out, dtype=np.int64)


# --------------------------------------------------------------------------
# output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_outputs(outdir: Path, files: dict[str, str]) -> list[str]:
    """Write every file to a temporary name first, then rename them all."""
    outdir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=outdir)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, outdir / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [str(final) for _, final in staged]


def _envelope(command: str, args: argparse.Namespace, result: dict) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output", "verbose")}
    return {"command": command, "version": __version__, "seed": args.seed, "config": config, "result": result}


# --------------------------------------------------------------------------
# commands


def _parse_params(items: Sequence[str] | None) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects name=value, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {key}: not a number: {value!r}") from None
    return out


def _simulation_model(kind: str, given: dict):
    prefix, _, family = kind.partition("-")
    names = param_names(kind)
    unknown = set(given) - set(names) - ({"mean_logit"} if prefix == "gas" else set())
    if unknown:
        raise UsageError(f"unknown parameter(s) for {kind}: {sorted(unknown)}; expected {names}")
    if prefix == "gas":
        mean_logit, beta, tau, mu = TABLE1_THETA
        beta = given.get("beta", beta)
        tau = given.get("tau", tau)
        mu = given.get("mu", mu)
        error = NegativeBinomial(mu, given.get("sigma2", 2.0 * mu)) if family == "negbin" else Poisson(mu)
        if "omega" in given:
            if "mean_logit" in given:
                raise UsageError("give either omega or mean_logit, not both")
            return GasInar(GasParams(given["omega"], beta, tau, error))
        return GasInar(GasParams.from_mean_logit(given.get("mean_logit", mean_logit), beta, tau, error))
    values = {**DEFAULT_PARAMS[prefix], **given}
    return from_natural(kind, [values[n] for n in names])


def cmd_simulate(args) -> dict[str, str]:
    if args.T < 2:
        raise UsageError("--T must be >= 2")
    if args.dgp:
        if args.param:
            raise UsageError("--param cannot be combined with --dgp")
        source = DgpKind(args.dgp)
        described = {"dgp": source.value, "error": Poisson(5.0).to_dict()}
    else:
        source = _simulation_model(args.model, _parse_params(args.param))
        described = {"model": model_to_dict(source)}
    sim = simulate(source, args.T, args.seed)
    result = {**described, "T": args.T, "n_obs": int(sim.series.size)}
    return {"simulate.json": dumps(_envelope("simulate", args, result)), "series.csv": sim.to_csv()}


def _fit_options(args, compute_se: bool = True) -> FitOptions:
    return FitOptions(restarts=args.restarts, seed=args.seed, compute_se=compute_se)


def _path_csv(y: np.ndarray, model) -> str:
    if isinstance(model, GasInar):
        return run_filter(y, model.params).to_csv()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "y", "alpha"])
    for t, a in enumerate(alpha_path(model, y), start=1):
        w.writerow([t, int(y[t]), repr(float(a))])
    return buf.getvalue()


def cmd_fit(args) -> dict[str, str]:
    y = read_counts_csv(args.input)
    res = fit(args.model, y, _fit_options(args))
    result = {"fit": res.to_dict()}
    prefix, _, family = args.model.partition("-")
    if prefix != "inar":
        static = fit(f"inar-{family}", y, _fit_options(args, compute_se=False))
        result["static_fit"] = {"kind": static.kind, "loglik_sum": static.loglik_sum, "aic": static.aic}
        result["lr_vs_static"] = lr_test(static, res).to_dict()
    if isinstance(res.model, GasInar):
        result["contraction"] = contraction_check(y, res.model.params).to_dict()
    files = {"filter_path.csv": _path_csv(y, res.model)}
    if res.covariance is not None:
        bands = alpha_confidence_bands(y, res, n_draws=args.draws, rng=args.seed)
        files["bands.csv"] = bands.to_csv()
        result["bands"] = {"approximate": True, "method": "normal approximation", "n_draws": args.draws}
    else:
        result["bands"] = None
        logger.warning("covariance unavailable; bands.csv not written")
    files["fit.json"] = dumps(_envelope("fit", args, result))
    return files


def _load_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    if "result" in doc and "fit" in doc["result"]:
        doc = doc["result"]["fit"]["model"]
    elif "model" in doc and isinstance(doc["model"], dict):
        doc = doc["model"]
    try:
        return model_from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a model or fit document ({exc})") from None


def cmd_forecast(args) -> dict[str, str]:
    if args.horizon < 1:
        raise UsageError("--horizon must be >= 1")
    y = read_counts_csv(args.input)
    if args.fit_json:
        model = _load_model(args.fit_json)
        source = {"fit_json": str(args.fit_json)}
    else:
        model = fit(args.model, y, _fit_options(args, compute_se=False)).model
        source = {"fitted_on_input": True}
    files = {}
    dists = []
    for h in range(1, args.horizon + 1):
        d = forecast_model(model, y, h, B=args.draws, rng=[args.seed, h])
        d.seed = args.seed
        files[f"forecast_h{h}.csv"] = d.to_csv()
        dists.append(d.to_dict())
    result = {**source, "model": model_to_dict(model), "forecasts": dists}
    files["forecast.json"] = dumps(_envelope("forecast", args, result))
    return files


def cmd_evaluate(args) -> dict[str, str]:
    y = read_counts_csv(args.input)
    split = args.split if args.split is not None else int(round(0.6 * y.size))
    kinds = args.models or list(MODEL_KINDS)
    reports = rolling_evaluate(
        y, split, args.horizon, kinds, B=args.draws, rng=args.seed,
        options=_fit_options(args, compute_se=False), refit_every=args.refit_every,
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "horizon", "mse", "log_score", "n_origins", "skipped"])
    for kind, rep in reports.items():
        for h, m, ls in zip(rep.horizons, rep.mse, rep.log_score):
            w.writerow([kind, h, repr(m), repr(ls), rep.n_origins, rep.skipped])
    result = {"split": split, "reports": {k: r.to_dict() for k, r in reports.items()}}
    return {"evaluate.json": dumps(_envelope("evaluate", args, result)), "evaluate.csv": buf.getvalue()}


def _study_csv(doc: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if doc["study"] == "table1":
        w.writerow(["parameter", "true", "mean", "mean_se", "bias", "sd", "sd_se", "rmse"])
        for name, s in doc["estimates"].items():
            w.writerow([name, doc["theta"][name], s["mean"], s["mean_se"], s["bias"], s["sd"], s["sd_se"], s["rmse"]])
    else:
        w.writerow(["dgp", "model", "root_mse", "root_mse_se", "mean_kl", "mean_kl_se", "n", "failures"])
        for dgp, rows in doc["results"].items():
            for kind, r in rows.items():
                w.writerow([dgp, kind, r["root_mse"], r["root_mse_se"], r["mean_kl"], r["mean_kl_se"], r["n"], r["failures"]])
    return buf.getvalue()


def cmd_replicate(args) -> dict[str, str]:
    study = args.study
    if args.full_scale:
        if args.replications is not None:
            raise UsageError("--full-scale and --replications/--scale are exclusive")
        n = FULL_SCALE
        logger.warning("full-scale run (%d replications) can take many hours", n)
    else:
        n = args.replications if args.replications is not None else DEFAULT_SCALE[study]
    if n < MIN_SCALE:
        raise UsageError(f"--replications must be >= {MIN_SCALE}, got {n}")
    T = args.T if args.T is not None else DEFAULT_T[study]
    restarts = args.restarts
    if study == "table1":
        doc = table1(n, T, seed=args.seed, options=FitOptions(restarts=restarts, seed=args.seed),
                     progress=lambda i: logger.info("replication %d/%d", i + 1, n))
    else:
        doc = table2(n, T, seed=args.seed, options=FitOptions(restarts=restarts, seed=args.seed, compute_se=False),
                     progress=lambda d, i: logger.info("%s replication %d/%d", d, i + 1, n))
    return {
        f"replicate_{study}.json": dumps(_envelope("replicate", args, doc)),
        f"replicate_{study}.csv": _study_csv(doc),
    }


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output", type=Path, default=Path("gasinar-out"), help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="gasinar", description="Score-driven INAR(1) models for count time series.")
    parser.add_argument("--version", action="version", version=f"gasinar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="simulate a series from a model or DGP")
    p.add_argument("--model", choices=MODEL_KINDS, default="gas-poisson")
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="natural parameter (gas also accepts mean_logit instead of omega)")
    p.add_argument("--dgp", choices=[d.value for d in DgpKind])
    p.add_argument("--T", type=int, default=500)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit a model by maximum likelihood")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--model", choices=MODEL_KINDS, default="gas-poisson")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--draws", type=int, default=1000, help="parameter draws for the alpha bands")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", parents=[common], help="forecast pmfs for h = 1..horizon")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--model", choices=MODEL_KINDS, default="gas-poisson")
    p.add_argument("--fit-json", type=Path, help="reuse the model in a fit.json instead of refitting")
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--draws", type=int, default=10000)
    p.add_argument("--restarts", type=int, default=5)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", parents=[common], help="rolling-origin forecast evaluation")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--model", dest="models", action="append", choices=MODEL_KINDS,
                   help="repeatable; default all six kinds")
    p.add_argument("--split", type=int, help="first forecast origin (default 60%% of the series)")
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--draws", type=int, default=2000)
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--refit-every", type=int, default=1, help="refit every k origins, filter in between")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("replicate", parents=[common], help="rerun a Monte Carlo study")
    p.add_argument("--study", choices=("table1", "table2"), required=True)
    p.add_argument("--replications", "--scale", dest="replications", type=int)
    p.add_argument("--full-scale", action="store_true", help=f"{FULL_SCALE} replications")
    p.add_argument("--T", type=int)
    p.add_argument("--restarts", type=int, default=3)
    p.set_defaults(func=cmd_replicate)
    return parser


def _error_doc(exc: BaseException) -> str:
    return json.dumps({"status": "error", "error": {"type": type(exc).__name__, "message": str(exc)}}, sort_keys=True)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(_error_doc(exc))
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        files = args.func(args)
        written = write_outputs(args.output, files)
    except UsageError as exc:
        print(_error_doc(exc))
        return 2
    except Exception as exc:  # any failure becomes an error document
        print(_error_doc(exc))
        return 1
    print(json.dumps({"status": "ok", "command": args.command, "outputs": written}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
