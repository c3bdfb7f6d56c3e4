"""Command-line entry point: generate, tune, select, cv-curve, bench, whiten.

Settings resolve as built-in defaults < ``[mipboost]`` section of ``--config``
< command-line flags. Every file is written under ``--out``. Failures print a
JSON object ``{"error": {"type": ..., "message": ...}}`` to stderr and exit
with a nonzero code.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import fields
from pathlib import Path

import numpy as np

from .bench import MethodSpec, derive_seeds, run_experiment, validation_mse, write_report
from .bisection import initial_upper_bound, tune
from .data import Dataset, apply_scaling, load_csv, make_folds, standardize, write_csv
from .icv import MODES, CvEvaluator, write_cv_csv
from .lasso import cv_lasso
from .pipeline import MipBoostConfig, mipboost_select
from .scenarios import (Correlation, ScenarioConfig, generate_scenario, load_scenarios, mixed_beta,
                        unit_beta)
from .whitening import load_covariance_csv, whiten

log = logging.getLogger("mipboost")

COMMANDS = ("generate", "tune", "select", "cv-curve", "bench", "whiten")
EXIT_USAGE, EXIT_FAIL = 2, 1


class CliError(Exception):
    def __init__(self, message: str, kind: str = "invalid_arguments", code: int = EXIT_USAGE):
        super().__init__(message)
        self.kind = kind
        self.code = code


def default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, 5))


# name -> (type, default). Keys double as config-file keys and flag names (with dashes).
OPTIONS = {
    "response": (str, "y"),
    "v": (int, 10),
    "seed": (int, 0),
    "delta": (float, 0.01),
    "feeler_radius": (int, 1),
    "max_restarts": (int, 1),
    "itermax": (int, None),
    "c0": (int, None),
    "eps_gap": (float, 0.05),
    "eps_fs": (float, 0.05),
    "maxtime": (float, 180.0),
    "totaltime": (float, 600.0),
    "bigm_c": (float, 5.0),
    "whiten": (bool, False),
    "covariance": (str, None),
    "cv_mode": (str, "integrated"),
    "workers": (int, None),
}


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _read_config(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise CliError(f"config file not found: {path}", "file_not_found", EXIT_FAIL)
    cp = configparser.ConfigParser()
    cp.read(path, encoding="utf-8")
    if not cp.has_section("mipboost"):
        return {}
    return {k.replace("-", "_"): v for k, v in cp["mipboost"].items()}


def resolve_settings(args) -> dict:
    """Merge defaults, config-file values and flags; report every bad value at once."""
    conf = _read_config(getattr(args, "config", None))
    errors = []
    unknown = sorted(set(conf) - set(OPTIONS))
    if unknown:
        errors.append(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for name, (typ, default) in OPTIONS.items():
        val = default
        if name in conf:
            try:
                val = _bool(conf[name]) if typ is bool else typ(conf[name])
            except ValueError:
                errors.append(f"config {name}={conf[name]!r} is not a valid {typ.__name__}")
        flag = getattr(args, name, None)
        if flag is not None:
            val = flag
        out[name] = val
    if getattr(args, "command", None) == "whiten":
        out["whiten"] = True
    if out["workers"] is None:
        out["workers"] = default_workers()
    checks = [
        (out["v"] >= 2, "v must be >= 2"),
        (out["delta"] > 0, "delta must be > 0"),
        (out["feeler_radius"] >= 1, "feeler_radius must be >= 1"),
        (out["max_restarts"] >= 0, "max_restarts must be >= 0"),
        (out["itermax"] is None or out["itermax"] >= 1, "itermax must be >= 1"),
        (out["c0"] is None or out["c0"] >= 2, "c0 must be >= 2"),
        (out["eps_gap"] >= 0, "eps_gap must be >= 0"),
        (out["eps_fs"] >= 0, "eps_fs must be >= 0"),
        (out["maxtime"] > 0, "maxtime must be > 0"),
        (out["totaltime"] >= out["maxtime"], "totaltime must be >= maxtime"),
        (out["bigm_c"] >= 1, "bigm_c must be >= 1"),
        (out["cv_mode"] in MODES, f"cv_mode must be one of {', '.join(MODES)}"),
        (out["workers"] >= 1, "workers must be >= 1"),
        (out["covariance"] is None or out["whiten"], "covariance given without whiten"),
    ]
    errors += [msg for ok, msg in checks if not ok]
    if errors:
        raise CliError("; ".join(errors))
    return out


def config_from_settings(s: dict) -> MipBoostConfig:
    names = {f.name for f in fields(MipBoostConfig)}
    return MipBoostConfig(**{k: v for k, v in s.items() if k in names})


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _load_training(args, s):
    """Load, standardize and (when asked) resolve the covariance for whitening."""
    d = load_csv(args.data, _response(s["response"]))
    d_std, rec = standardize(d)
    sigma = None
    if s["whiten"]:
        if s["covariance"] is not None:
            sigma = load_covariance_csv(s["covariance"], d.p)
        elif d.p >= d.n:
            raise CliError(
                f"whitening needs a covariance file when p >= n (p={d.p}, n={d.n}): the sample "
                "covariance is singular, so pass --covariance", "invalid_combination")
    return d, d_std, rec, sigma


def _response(text):
    return int(text) if str(text).lstrip("-").isdigit() else text


def _work_data(d_std: Dataset, s, sigma):
    if not s["whiten"]:
        return d_std, None
    return whiten(d_std, sigma)


def cmd_generate(args, s, out: Path):
    if args.scenarios:
        scenarios = load_scenarios(args.scenarios)
    else:
        if args.n is None or args.p is None:
            raise CliError("generate needs --scenarios or both --n and --p")
        k0 = args.k0
        beta = mixed_beta(args.p) if args.beta == "mixed" else unit_beta(args.p, k0)
        if args.beta == "mixed":
            k0 = int(np.count_nonzero(beta))
        corr = Correlation(args.correlation, alpha=args.alpha, rho=args.rho, omega=args.omega)
        scenarios = [ScenarioConfig(n=args.n, p=args.p, k0=k0, correlation=corr, beta=beta,
                                    snr=args.snr, replicates=args.replicates)]
    written = []
    for si, sc in enumerate(scenarios):
        for r in range(sc.replicates):
            train_seed, val_seed = derive_seeds(s["seed"], si, r)
            stem = sc.name if sc.replicates == 1 else f"{sc.name}_r{r}"
            train, truth = generate_scenario(sc, seed=train_seed)
            val, _ = generate_scenario(sc, seed=val_seed)
            write_csv(train, out / f"{stem}_train.csv")
            write_csv(val, out / f"{stem}_validation.csv")
            np.savetxt(out / f"{stem}_covariance.csv", truth.R, delimiter=",", fmt="%.17g")
            _write_json(out / f"{stem}_truth.json", {
                "scenario": sc.name, "replicate": r, "train_seed": train_seed,
                "val_seed": val_seed, "active_set": list(truth.active_set),
                "beta": [float(b) for b in truth.beta], "theta": truth.theta,
                "population_r2": truth.population_r2, "snr": sc.snr,
            })
            written.append(stem)
    return {"generated": written}


def _tune(args, s, out: Path):
    cfg = config_from_settings(s)
    d, d_std, rec, sigma = _load_training(args, s)
    work, transform = _work_data(d_std, s, sigma)
    folds = make_folds(work.n, cfg.v, cfg.seed)
    c0 = cfg.c0 if cfg.c0 is not None else initial_upper_bound(work, folds, cv_lasso(work, folds))
    c0 = int(min(c0, work.p, work.n))
    ev = CvEvaluator(work, folds, cfg.miqp_options(), mode=cfg.cv_mode, c=cfg.bigm_c,
                     workers=cfg.workers)
    k_hat, trace = tune(ev, cfg.bf_options(), c0)
    trace_path = trace.write_csv(out / "bf_trace.csv")
    _write_json(out / "bf_decisions.json", _jsonable(trace.decisions))
    return {"k_hat": k_hat, "c0": c0, "evaluations": len(trace.evaluated),
            "restarts": trace.restarts, "hit_itermax": trace.hit_itermax,
            "failed_evaluations": trace.failed, "trace": trace_path.name}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


def cmd_tune(args, s, out: Path):
    res = _tune(args, s, out)
    _write_json(out / "tune.json", res)
    return res


def cmd_select(args, s, out: Path):
    cfg = config_from_settings(s)
    d, d_std, rec, sigma = _load_training(args, s)
    res = mipboost_select(d_std, cfg, sigma=sigma)
    names = [d.feature_names[j] for j in res.support]
    report = {
        "k_hat": res.k_hat, "c0": res.c0,
        "support": list(res.support), "support_names": names,
        "beta_standardized": [float(b) for b in res.beta],
        "final_status": res.final.status, "final_gap": res.final.gap,
        "bf_evaluations": len(res.trace.evaluated) if res.trace else 0,
        "whitened": bool(s["whiten"]),
    }
    if res.trace is not None:
        report["bf_trace"] = res.trace.write_csv(out / "bf_trace.csv").name
    if args.validation:
        val = apply_scaling(load_csv(args.validation, _response(s["response"])), rec)
        if val.feature_names != d.feature_names:
            raise CliError("validation columns do not match the training columns")
        report["validation_mse"] = validation_mse(res.beta, val)
    _write_json(out / "report.json", _jsonable(report))
    log.info("select finished in %.2f s", res.wall_time)
    return report


def _parse_range(text: str):
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"bad k range {text!r}; use lo:hi or a comma list") from None


def cmd_cv_curve(args, s, out: Path):
    cfg = config_from_settings(s)
    d, d_std, rec, sigma = _load_training(args, s)
    work, _ = _work_data(d_std, s, sigma)
    ks = _parse_range(args.k_range) if args.k_range else list(range(1, work.p + 1))
    if min(ks) < 0 or max(ks) > work.p:
        raise CliError(f"k range must lie in [0, p={work.p}]")
    folds = make_folds(work.n, cfg.v, cfg.seed)
    ev = CvEvaluator(work, folds, cfg.miqp_options(), mode=cfg.cv_mode, c=cfg.bigm_c,
                     workers=cfg.workers)
    results = [ev.result(k) for k in ks]
    path = write_cv_csv(results, out / "cv_curve.csv")
    return {"cv_curve": path.name, "k": ks}


def cmd_whiten(args, s, out: Path):
    d, d_std, rec, sigma = _load_training(args, s)
    work, t = whiten(d_std, sigma)
    write_csv(work, out / "whitened.csv", response_name=str(s["response"]))
    np.savetxt(out / "whitening_matrix.csv", t.W, delimiter=",", fmt="%.17g")
    return {"whitened": "whitened.csv", "matrix": "whitening_matrix.csv", "source": t.source,
            "eigen_floor": t.eigen_floor, "floored": t.floored}


def cmd_bench(args, s, out: Path):
    cfg = config_from_settings(s)
    if not args.scenarios and not args.config:
        raise CliError("bench needs --scenarios (or [scenario...] sections in --config)")
    scenarios = load_scenarios(args.scenarios or args.config)
    try:
        methods = [MethodSpec.parse(m) for m in args.methods.split(",") if m.strip()]
    except ValueError as e:
        raise CliError(str(e)) from None
    rows, agg = run_experiment(scenarios, methods, replicates=args.replicates, seed=s["seed"],
                               cfg=config_from_settings(dict(s, workers=1)) if args.parallel_runs
                               else cfg,
                               workers=cfg.workers if args.parallel_runs else 1)
    paths = write_report(rows, agg, out)
    failed = sum(r["status"] != "ok" for r in rows)
    return {"rows": len(rows), "failed": failed, **{k: p.name for k, p in paths.items()}}


HANDLERS = {"generate": cmd_generate, "tune": cmd_tune, "select": cmd_select,
            "cv-curve": cmd_cv_curve, "bench": cmd_bench, "whiten": cmd_whiten}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mipboost", description="L0 feature selection by branch-and-bound MIQP.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, data=True):
        sp.add_argument("--config", help="INI file; its [mipboost] section sets defaults")
        sp.add_argument("--out", default="mipboost_out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, help="worker threads (default min(cpus, 5))")
        sp.add_argument("-q", "--quiet", action="store_true")
        if data:
            sp.add_argument("--data", required=True, help="training CSV with a header row")
            sp.add_argument("--response", help="response column name or 0-based index (default y)")

    def solver(sp):
        sp.add_argument("--v", type=int, help="number of CV folds (default 10)")
        sp.add_argument("--delta", type=float, help="slope threshold (default 0.01)")
        sp.add_argument("--feeler-radius", dest="feeler_radius", type=int)
        sp.add_argument("--max-restarts", dest="max_restarts", type=int)
        sp.add_argument("--itermax", type=int)
        sp.add_argument("--c0", type=int, help="upper end of the k search (default from LASSO)")
        sp.add_argument("--eps-gap", dest="eps_gap", type=float, help="gap target (default 0.05)")
        sp.add_argument("--eps-fs", dest="eps_fs", type=float,
                        help="surrogate-bound tolerance (default 0.05)")
        sp.add_argument("--maxtime", type=float, help="seconds before the surrogate rule applies")
        sp.add_argument("--totaltime", type=float, help="hard per-solve cap in seconds")
        sp.add_argument("--bigm-c", dest="bigm_c", type=float, help="big-M scale (default 5)")
        sp.add_argument("--cv-mode", dest="cv_mode", choices=MODES)

    def whitening(sp):
        sp.add_argument("--whiten", action="store_const", const=True, default=None)
        sp.add_argument("--covariance", help="p x p covariance CSV (required when p >= n)")

    g = sub.add_parser("generate", help="write synthetic scenario CSVs")
    common(g, data=False)
    g.add_argument("--scenarios", help="INI file with [scenario...] sections")
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--k0", type=int, default=10)
    g.add_argument("--correlation", default="autoregressive",
                   choices=("autoregressive", "block", "identity"))
    g.add_argument("--alpha", type=float, default=0.0)
    g.add_argument("--rho", type=float, default=0.0)
    g.add_argument("--omega", type=float, default=0.0)
    g.add_argument("--beta", default="unit", choices=("unit", "mixed"))
    g.add_argument("--snr", type=float, default=1.0)
    g.add_argument("--replicates", type=int, default=1)

    for name, help_ in (("tune", "choose k by bisection with feelers"),
                        ("select", "full pipeline: tune, solve at k, OLS refit")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        solver(sp)
        whitening(sp)
        if name == "select":
            sp.add_argument("--validation", help="validation CSV scored with the refit")

    c = sub.add_parser("cv-curve", help="cross-validated error over a range of k")
    common(c)
    solver(c)
    whitening(c)
    c.add_argument("--k-range", dest="k_range", help="lo:hi or comma list (default 1:p)")

    w = sub.add_parser("whiten", help="write the ZCA-whitened design")
    common(w)
    w.add_argument("--covariance", help="p x p covariance CSV (required when p >= n)")

    b = sub.add_parser("bench", help="simulation sweep over scenarios and methods")
    common(b, data=False)
    solver(b)
    b.add_argument("--scenarios", help="INI file with [scenario...] sections")
    b.add_argument("--methods", default="mipboost,lasso_min,lasso_1sd,fs",
                   help="comma list; append +w for the whitened variant")
    b.add_argument("--replicates", type=int, help="override each scenario's replicate count")
    b.add_argument("--parallel-runs", dest="parallel_runs", action="store_true",
                   help="run replicates in worker processes instead of threads inside solves")
    return p


def _emit_error(kind: str, message: str):
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}}) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliError(f"missing command; choose one of {', '.join(COMMANDS)}")
        s = resolve_settings(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(message)s", force=True)
        fh = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
        fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(fh)
        try:
            t0 = time.perf_counter()
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                summary = HANDLERS[args.command](args, s, out)
            for w in caught:
                log.warning("%s", w.message)
            _write_json(out / "settings.json", _jsonable({"command": args.command, **s}))
            log.info("%s done in %.2f s", args.command, time.perf_counter() - t0)
        finally:
            log.removeHandler(fh)
            fh.close()
        print(json.dumps(_jsonable(summary), sort_keys=True))
        return 0
    except CliError as e:
        _emit_error(e.kind, str(e))
        return e.code
    except (OSError, ValueError, RuntimeError) as e:
        kind = "file_not_found" if "not found" in str(e) else type(e).__name__
        _emit_error(kind, str(e))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
