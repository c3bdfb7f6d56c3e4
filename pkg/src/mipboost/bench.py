"""Metrics and the simulation harness (selection accuracy, prediction, beta error)."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Dataset, apply_scaling, standardize
from .pipeline import MipBoostConfig, fs_select, lasso_select, mipboost_select
from .scenarios import Correlation, ScenarioConfig, generate_scenario

SCHEMA_VERSION = "1"
METHODS = ("mipboost", "mip_true_k", "lasso_min", "lasso_1sd", "fs")

ROW_FIELDS = [
    "schema_version", "scenario", "replicate", "method", "whiten", "status", "k_hat", "tp", "fp",
    "fn", "validation_mse", "train_seed", "val_seed", "support", "beta_hat",
    "settings", "error",
]
METRICS = ("tp", "fp", "fn", "k_hat", "validation_mse")
# wall times live in timings.csv so that a fixed seed reproduces report.csv byte for byte


def confusion_counts(selected, truth):
    """(true positives, false positives, false negatives) of two index sets."""
    s, t = set(int(i) for i in selected), set(int(i) for i in truth)
    return len(s & t), len(s - t), len(t - s)


def validation_mse(beta_hat, d: Dataset) -> float:
    beta_hat = np.asarray(beta_hat, dtype=float)
    if beta_hat.shape != (d.p,):
        raise ValueError(f"beta has length {beta_hat.shape[0]}, validation data has p={d.p}")
    r = d.y - d.X @ beta_hat
    return float(r @ r) / d.n


def beta_error_decomposition(beta_hats, beta_true):
    """Squared bias ||mean(b) - beta||^2 and variance mean_r ||b_r - mean(b)||^2."""
    B = np.asarray(beta_hats, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    if B.ndim != 2 or B.shape[0] < 2:
        raise ValueError("need at least 2 replicate coefficient vectors")
    if B.shape[1] != beta_true.shape[0]:
        raise ValueError("replicate dimension does not match the true beta")
    mean = B.mean(axis=0)
    bias2 = float(np.sum((mean - beta_true) ** 2))
    var = float(np.mean(np.sum((B - mean) ** 2, axis=1)))
    return bias2, var


@dataclass(frozen=True)
class MethodSpec:
    name: str
    whiten: bool = False

    def __post_init__(self):
        if self.name not in METHODS:
            raise ValueError(f"unknown method {self.name!r}; choose from {METHODS}")

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        """``name`` or ``name+w`` (whitened)."""
        text = text.strip()
        if text.endswith("+w"):
            return cls(text[:-2], True)
        return cls(text)

    def label(self) -> str:
        return self.name + ("+w" if self.whiten else "")


def derive_seeds(seed: int, scenario_index: int, replicate: int):
    """Independent integer seeds for the training and validation draws."""
    ss = np.random.SeedSequence([seed, scenario_index, replicate])
    train, val = (int(c.generate_state(1, np.uint32)[0]) for c in ss.spawn(2))
    if train == val:
        val = (val + 1) % 2**32
    return train, val


def _scenario_dict(sc: ScenarioConfig) -> dict:
    return {
        "name": sc.name, "n": sc.n, "p": sc.p, "k0": sc.k0, "snr": sc.snr,
        "correlation": asdict(sc.correlation), "beta": [float(b) for b in sc.beta],
    }


def _scenario_from_dict(m: dict) -> ScenarioConfig:
    return ScenarioConfig(n=m["n"], p=m["p"], k0=m["k0"], correlation=Correlation(**m["correlation"]),
                          beta=np.array(m["beta"]), snr=m["snr"], name=m["name"])


def _run_method(spec: MethodSpec, train: Dataset, cfg: MipBoostConfig, sigma, k0: int):
    if spec.name == "mipboost":
        return mipboost_select(train, replace(cfg, whiten=spec.whiten), sigma=sigma)
    if spec.name == "mip_true_k":
        return mipboost_select(train, replace(cfg, whiten=spec.whiten), sigma=sigma, k=k0)
    if spec.name in ("lasso_min", "lasso_1sd"):
        return lasso_select(train, rule=spec.name.split("_")[1], v=cfg.v, seed=cfg.seed,
                            whiten_data=spec.whiten, sigma=sigma)
    return fs_select(train, v=cfg.v, seed=cfg.seed, whiten_data=spec.whiten, sigma=sigma)


def run_replicate(sc: ScenarioConfig, methods, replicate: int, train_seed: int, val_seed: int,
                  cfg: MipBoostConfig) -> list:
    """All methods on one (scenario, replicate); failures become rows, never exceptions."""
    rows = []
    base = {"schema_version": SCHEMA_VERSION, "scenario": sc.name, "replicate": replicate,
            "train_seed": train_seed, "val_seed": val_seed}
    try:
        train_raw, truth = generate_scenario(sc, seed=train_seed)
        val_raw, _ = generate_scenario(sc, seed=val_seed)
        train, rec = standardize(train_raw)
        val = apply_scaling(val_raw, rec)
    except Exception as exc:
        return [dict(base, method=m.name, whiten=m.whiten, status="failed", error=repr(exc))
                for m in methods]
    # whitening with p >= n falls back to the population correlation
    sigma = truth.R if sc.p >= sc.n else None
    for spec in methods:
        settings = json.dumps({"config": cfg.snapshot(), "scenario": _scenario_dict(sc),
                               "method": spec.name, "whiten": spec.whiten,
                               "train_seed": train_seed, "val_seed": val_seed}, sort_keys=True)
        row = dict(base, method=spec.name, whiten=spec.whiten, settings=settings)
        t0 = time.perf_counter()
        try:
            res = _run_method(spec, train, cfg, sigma, sc.k0)
            tp, fp, fn = confusion_counts(res.support, truth.active_set)
            row.update(status="ok", k_hat=res.k_hat, tp=tp, fp=fp, fn=fn,
                       validation_mse=validation_mse(res.beta, val),
                       wall_time=time.perf_counter() - t0,
                       support=";".join(str(j) for j in res.support),
                       beta_hat=";".join(repr(float(b)) for b in res.beta), error="")
        except Exception as exc:
            row.update(status="failed", wall_time=time.perf_counter() - t0, error=repr(exc))
        rows.append(row)
    return rows


def _job(args):
    return run_replicate(*args)


def run_experiment(scenarios, methods, replicates: Optional[int] = None, seed: int = 0,
                   cfg: Optional[MipBoostConfig] = None, workers: int = 1):
    """Run every (scenario, replicate, method); returns ``(rows, aggregates)``."""
    cfg = cfg or MipBoostConfig()
    methods = [m if isinstance(m, MethodSpec) else MethodSpec.parse(m) for m in methods]
    jobs = []
    for si, sc in enumerate(scenarios):
        reps = replicates if replicates is not None else sc.replicates
        for r in range(reps):
            train_seed, val_seed = derive_seeds(seed, si, r)
            jobs.append((sc, methods, r, train_seed, val_seed, cfg))
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            for out in ex.map(_job, jobs):
                rows.extend(out)
    else:
        for job in jobs:
            rows.extend(_job(job))
    rows = [_normalize(r) for r in rows]
    return rows, aggregate(rows)


def _normalize(row: dict) -> dict:
    out = {f: row.get(f, "") for f in ROW_FIELDS + ["wall_time"]}
    out["whiten"] = bool(out["whiten"])
    return out


def _beta_vec(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(";")]) if text else np.array([])


def aggregate(rows) -> list:
    """Means/SDs per (scenario, method, whiten), plus beta bias^2/variance."""
    groups = {}
    for r in rows:
        groups.setdefault((r["scenario"], r["method"], bool(r["whiten"])), []).append(r)
    out = []
    for (scen, method, wh), rs in groups.items():
        ok = [r for r in rs if r["status"] == "ok"]
        agg = {"scenario": scen, "method": method, "whiten": wh, "runs": len(rs),
               "failed": len(rs) - len(ok)}
        for m in METRICS:
            vals = np.array([float(r[m]) for r in ok])
            agg[f"{m}_mean"] = float(vals.mean()) if vals.size else float("nan")
            agg[f"{m}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else float("nan")
        agg["squared_bias"] = agg["beta_variance"] = float("nan")
        if len(ok) >= 2:
            settings = json.loads(ok[0]["settings"])
            beta_true = np.array(settings["scenario"]["beta"])
            B = np.array([_beta_vec(r["beta_hat"]) for r in ok])
            agg["squared_bias"], agg["beta_variance"] = beta_error_decomposition(B, beta_true)
        out.append(agg)
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_report(rows, aggregates, out_dir) -> dict:
    """Write report.csv (one row per run), aggregates.csv, long.csv (one metric per row), timings.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"report": out_dir / "report.csv", "aggregates": out_dir / "aggregates.csv",
             "long": out_dir / "long.csv", "timings": out_dir / "timings.csv"}
    with paths["report"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=ROW_FIELDS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    with paths["timings"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "replicate", "method", "whiten", "status", "wall_time"])
        for r in rows:
            w.writerow([r["scenario"], r["replicate"], r["method"], r["whiten"], r["status"],
                        _fmt(r.get("wall_time", ""))])
    if aggregates:
        with paths["aggregates"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(aggregates[0]))
            w.writeheader()
            for a in aggregates:
                w.writerow({k: _fmt(v) for k, v in a.items()})
    with paths["long"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "replicate", "method", "whiten", "metric", "value"])
        for r in rows:
            if r["status"] != "ok":
                continue
            for m in METRICS:
                w.writerow([r["scenario"], r["replicate"], r["method"], r["whiten"], m, _fmt(r[m])])
    return paths


def read_report(path) -> list:
    """Parse report.csv back into row dicts with the types ``aggregate`` expects."""
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            r["whiten"] = r["whiten"] == "True"
            r["replicate"] = int(r["replicate"])
            rows.append(r)
    return rows


def replay_row(row: dict) -> dict:
    """Re-run a single report row from its settings snapshot."""
    s = json.loads(row["settings"])
    sc = _scenario_from_dict(s["scenario"])
    cfg = MipBoostConfig(**s["config"])
    out = run_replicate(sc, [MethodSpec(s["method"], s["whiten"])], int(row["replicate"]),
                        s["train_seed"], s["val_seed"], cfg)
    return _normalize(out[0])
