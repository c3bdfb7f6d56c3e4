"""Synthetic regression scenarios with controlled collinearity and SNR.

Designs are Gaussian with an autoregressive, two-block, or identity
correlation matrix; the active features are always the first ``k0`` columns.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Dataset


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Correlation:
    kind: str = "autoregressive"  # autoregressive | block | identity
    alpha: float = 0.0
    rho: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("autoregressive", "block", "identity"):
            raise ScenarioError(f"unknown correlation kind {self.kind!r}")
        for name in ("alpha", "rho", "omega"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ScenarioError(f"{name} must lie in [0, 1), got {v}")

    def label(self) -> str:
        if self.kind == "autoregressive":
            return f"ar{self.alpha:g}"
        if self.kind == "block":
            return f"block{self.rho:g}-{self.omega:g}"
        return "identity"


def unit_beta(p: int, k0: int) -> np.ndarray:
    beta = np.zeros(p)
    beta[:k0] = 1.0
    return beta


def mixed_beta(p: int) -> np.ndarray:
    """Seven strong (10) and three weak (5) signals followed by zeros."""
    if p < 10:
        raise ScenarioError("mixed pattern needs p >= 10")
    beta = np.zeros(p)
    beta[:7] = 10.0
    beta[7:10] = 5.0
    return beta


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    p: int
    k0: int
    correlation: Correlation
    beta: np.ndarray
    snr: float
    seed: int = 0
    replicates: int = 1
    name: str = ""

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if beta.shape != (self.p,):
            raise ScenarioError(f"beta must have length p={self.p}")
        nz = np.flatnonzero(beta)
        if nz.size != self.k0 or (self.k0 and nz.max() != self.k0 - 1):
            raise ScenarioError("beta must have exactly k0 nonzeros in the first k0 positions")
        if self.snr <= 0:
            raise ScenarioError("snr must be positive")
        if self.n < 2 or self.p < 1:
            raise ScenarioError("need n >= 2 and p >= 1")
        if not self.name:
            object.__setattr__(
                self, "name",
                f"n{self.n}_p{self.p}_k{self.k0}_{self.correlation.label()}_snr{self.snr:g}")


@dataclass(frozen=True)
class TruthRecord:
    active_set: tuple
    beta: np.ndarray
    theta: float
    population_r2: float
    R: Optional[np.ndarray] = field(default=None, repr=False)


def build_correlation(corr: Correlation, p: int, k0: int = 0) -> np.ndarray:
    """Population correlation matrix; positive definiteness is verified."""
    if corr.kind == "identity" or (corr.kind == "autoregressive" and corr.alpha == 0):
        R = np.eye(p)
    elif corr.kind == "autoregressive":
        idx = np.arange(p)
        R = corr.alpha ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    else:
        active = np.arange(p) < k0
        same = active[:, None] == active[None, :]
        R = np.where(same, corr.rho, corr.omega)
        np.fill_diagonal(R, 1.0)
    R = 0.5 * (R + R.T)
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(R)[0])
        raise ScenarioError(
            f"correlation parameters {corr} give a non positive definite matrix "
            f"(smallest eigenvalue {smallest:.3g})") from None
    return R


def sample_design(n: int, R: np.ndarray, rng) -> np.ndarray:
    """Rows ~ N(0, R). Standard normals are drawn column by column, then mixed by chol(R)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise ScenarioError("correlation matrix is not positive definite") from None
    Z = rng.standard_normal((R.shape[0], n)).T
    return Z @ L.T


def noise_scale_for_snr(beta, R, snr: float) -> float:
    beta = np.asarray(beta, dtype=float)
    if snr <= 0:
        raise ScenarioError("snr must be positive")
    signal = float(beta @ R @ beta)
    if signal <= 0:
        raise ScenarioError("SNR is undefined for a zero signal")
    return float(np.sqrt(signal / snr))


def generate_scenario(cfg: ScenarioConfig, seed: Optional[int] = None):
    """Draw ``(Dataset, TruthRecord)``; ``seed`` overrides ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    R = build_correlation(cfg.correlation, cfg.p, cfg.k0)
    theta = noise_scale_for_snr(cfg.beta, R, cfg.snr)
    X = sample_design(cfg.n, R, rng)
    y = X @ cfg.beta + theta * rng.standard_normal(cfg.n)
    names = [f"x{j + 1}" for j in range(cfg.p)]
    truth = TruthRecord(
        active_set=tuple(range(cfg.k0)),
        beta=cfg.beta,
        theta=theta,
        population_r2=cfg.snr / (1.0 + cfg.snr),
        R=R,
    )
    return Dataset(y=y, X=X, feature_names=names), truth


def _parse_beta(text: str, p: int, k0: int) -> np.ndarray:
    text = text.strip()
    if text == "unit":
        return unit_beta(p, k0)
    if text == "mixed":
        return mixed_beta(p)
    vals = [float(v) for v in text.split(",") if v.strip()]
    if len(vals) > p:
        raise ScenarioError("explicit beta longer than p")
    return np.concatenate([vals, np.zeros(p - len(vals))])


def scenario_from_mapping(m, name: str = "") -> ScenarioConfig:
    try:
        n, p = int(m["n"]), int(m["p"])
        k0 = int(m.get("k0", 10))
        corr = Correlation(
            kind=m.get("correlation", "autoregressive").strip(),
            alpha=float(m.get("alpha", 0.0)),
            rho=float(m.get("rho", 0.0)),
            omega=float(m.get("omega", 0.0)),
        )
        beta = _parse_beta(m.get("beta", "unit"), p, k0)
        return ScenarioConfig(
            n=n, p=p, k0=k0, correlation=corr, beta=beta,
            snr=float(m.get("snr", 1.0)), seed=int(m.get("seed", 0)),
            replicates=int(m.get("replicates", 1)), name=name,
        )
    except KeyError as e:
        raise ScenarioError(f"scenario {name or '?'} is missing key {e.args[0]!r}") from None


def load_scenarios(path) -> list:
    """Read ``key = value`` scenario sections from an INI-style config file.

    Every section whose name starts with ``scenario`` defines one scenario;
    a ``snr`` value may be a comma list, which expands into one scenario per
    value.
    """
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    cp.read(path, encoding="utf-8")
    out = []
    for section in cp.sections():
        if not section.startswith("scenario"):
            continue
        m = dict(cp[section])
        snrs = [s.strip() for s in m.get("snr", "1").split(",") if s.strip()]
        # [scenario: name], [scenario name] or a bare [scenario] (auto-named)
        base = section[len("scenario"):].lstrip(" :").strip()
        for s in snrs:
            m2 = dict(m, snr=s)
            nm = base if len(snrs) == 1 or not base else f"{base}_snr{float(s):g}"
            out.append(scenario_from_mapping(m2, name=nm))
    if not out:
        raise ScenarioError(f"{path}: no [scenario...] sections")
    return out
