"""Monte Carlo study: Karhunen-Loeve curves, leverage contamination, median MSE.

Replicate r draws from its own generator seeded by SeedSequence((seed, r)),
so results do not depend on how replicates are spread over workers.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import Grid, default_dimension, make_basis, make_uniform_grid
from .divergence import as_link
from .model import FunctionalDataset, FitConfig, NearSingularWarning, build_design
from .selection import SelectionConfig, select_kappa, select_lambda

__all__ = [
    "ESTIMATORS",
    "StudyConfig",
    "StudyReport",
    "generate_curves",
    "beta_true",
    "generate_labels",
    "contaminate",
    "mse",
    "empirical_prediction_error",
    "bootstrap_median_se",
    "run_replicate",
    "run_study",
]

ESTIMATORS = ("DPD(kappa_hat)", "ML", "DPD(1)", "DPD(2)")
N_TERMS = 50
_BOOTSTRAP_STREAM = 2**63 - 1


def _eigenfunctions(points):
    j = np.arange(1, N_TERMS + 1)
    return np.sqrt(2.0) * np.sin((j[:, None] - 0.5) * np.pi * np.asarray(points)[None, :])


def generate_curves(n: int, grid, rng: np.random.Generator) -> np.ndarray:
    """n curves X(t) = sum_j j^-1 Z_j sqrt(2) sin((j - 1/2) pi t), 50 terms."""
    points = grid.points if isinstance(grid, Grid) else np.asarray(grid, float)
    Z = rng.standard_normal((n, N_TERMS))
    return (Z / np.arange(1, N_TERMS + 1)) @ _eigenfunctions(points)


def beta_true(index: int, grid) -> np.ndarray:
    t = grid.points if isinstance(grid, Grid) else np.asarray(grid, float)
    if index == 1:
        return 3 * (t - 0.3) ** 2 + 1
    if index == 2:
        return 3 * np.sin(3.4 * t**2)
    if index == 3:
        return -np.sin(5 * t / 1.2) / 0.5 - 1
    raise ValueError(f"beta index must be 1, 2 or 3, got {index!r}")


def generate_labels(curves, beta, grid: Grid, link, rng: np.random.Generator) -> np.ndarray:
    eta = grid.integrate(np.asarray(curves) * np.asarray(beta))
    p = as_link(link)(eta)
    return (rng.random(p.shape) < p).astype(float)


def contaminate(dataset: FunctionalDataset, epsilon: float, rng: np.random.Generator):
    """Scale floor(epsilon * n) random curves by 5 and flip their labels.

    Returns the new dataset and the sorted contaminated indices.
    """
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    n = dataset.n
    m = int(math.floor(epsilon * n + 1e-9))
    if m == 0:
        return dataset, np.array([], dtype=int)
    idx = np.sort(rng.choice(n, size=m, replace=False))
    X = np.array(dataset.curves)
    y = np.array(dataset.labels)
    X[idx] *= 5.0
    y[idx] = 1.0 - y[idx]
    return FunctionalDataset(X, y, dataset.grid), idx


def mse(beta_hat, beta) -> float:
    beta_hat = np.asarray(beta_hat, float)
    beta = np.asarray(beta, float)
    if beta_hat.shape != beta.shape:
        raise ValueError("shape mismatch")
    return float(np.mean((beta_hat - beta) ** 2))


def empirical_prediction_error(beta_hat, beta, fresh_curves, grid: Grid) -> float:
    """Mean over fresh curves of <X, beta_hat - beta>^2."""
    X = np.atleast_2d(np.asarray(fresh_curves, float))
    if X.shape[0] == 0:
        return 0.0
    diff = np.asarray(beta_hat, float) - np.asarray(beta, float)
    return float(np.mean(grid.integrate(X * diff) ** 2))


def bootstrap_median_se(values, resamples: int, rng: np.random.Generator) -> float:
    """Standard deviation of the median over bootstrap resamples of `values`."""
    v = np.asarray(values, float)
    v = v[np.isfinite(v)]
    if v.size < 2 or resamples < 2:
        return 0.0
    idx = rng.integers(0, v.size, size=(resamples, v.size))
    return float(np.std(np.median(v[idx], axis=1), ddof=1))


@dataclass(frozen=True)
class StudyConfig:
    beta_index: int = 1
    epsilon: float = 0.0
    n: int = 400
    replications: int = 100
    grid_size: int = 200
    estimators: tuple = ESTIMATORS
    seed: int = 0
    bootstrap_resamples: int = 2000
    basis_dim: int = 0  # 0: floor(min(30, n/4))
    order: int = 4
    penalty_order: int = 2

    def __post_init__(self):
        if self.beta_index not in (1, 2, 3):
            raise ValueError("beta_index must be 1, 2 or 3")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        est = tuple(self.estimators)
        unknown = [e for e in est if e not in ESTIMATORS]
        if unknown or not est:
            raise ValueError(f"unknown estimators {unknown}; choose from {ESTIMATORS}")
        object.__setattr__(self, "estimators", est)


@dataclass
class StudyReport:
    config: dict
    median_mse: dict
    bootstrap_se: dict
    mse: dict
    kappa_hat: list
    lambda_hat: dict
    failures: int
    nonstationary_fits: int
    failed_replicates: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True)

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(self.to_json() + "\n")
        with open(os.path.join(out_dir, "replicates.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "estimator", "epsilon", "beta_index", "mse", "kappa_hat", "lambda_hat"])
            for est in self.config["estimators"]:
                for r, value in enumerate(self.mse[est]):
                    kh = self.kappa_hat[r] if est == "DPD(kappa_hat)" else _fixed_kappa(est)
                    w.writerow(
                        [r, est, repr(self.config["epsilon"]), self.config["beta_index"],
                         repr(value), repr(kh), repr(self.lambda_hat[est][r])]
                    )

    def table_row(self) -> str:
        cells = [f"beta{self.config['beta_index']}", f"eps={self.config['epsilon']:g}"]
        for est in self.config["estimators"]:
            cells.append(f"{est}: {self.median_mse[est]:.3f} ({self.bootstrap_se[est]:.3f})")
        return "  ".join(cells)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _fixed_kappa(est):
    return {"ML": 0.0, "DPD(1)": 1.0, "DPD(2)": 2.0}[est]


def _replicate_rng(seed, r):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(r)]))


def run_replicate(config: StudyConfig, r: int, selection: SelectionConfig | None = None) -> dict:
    """One replicate: returns per-estimator MSE and tuning, or raises."""
    rng = _replicate_rng(config.seed, r)
    grid = make_uniform_grid(config.grid_size)
    beta = beta_true(config.beta_index, grid)
    X = generate_curves(config.n, grid, rng)
    y = generate_labels(X, beta, grid, "logit", rng)
    data, _ = contaminate(FunctionalDataset(X, y, grid), config.epsilon, rng)
    K = config.basis_dim or default_dimension(config.n, config.order)
    basis = make_basis(K, config.order)
    sel = selection or SelectionConfig()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearSingularWarning)
        design = build_design(data, basis, config.penalty_order)
        out = {"mse": {}, "lambda_hat": {}, "kappa_hat": float("nan"), "nonstationary": 0}
        if "DPD(kappa_hat)" in config.estimators:
            ks = select_kappa(design, data.labels, sel)
            out["kappa_hat"] = ks.kappa_hat
            paths = dict(ks.paths)
            paths["kappa_hat"] = paths[ks.kappa_hat]
        else:
            paths = {}
        anchor_kappa = float(sel.init_kappa)
        if anchor_kappa not in paths:
            paths[anchor_kappa] = select_lambda(
                design, data.labels, anchor_kappa, sel.lambda_grid, link=sel.link
            )
        anchor = paths[anchor_kappa].fit.coef
        for est in config.estimators:
            k = "kappa_hat" if est == "DPD(kappa_hat)" else _fixed_kappa(est)
            if k not in paths:
                paths[k] = select_lambda(
                    design, data.labels, k, sel.lambda_grid, link=sel.link, init=anchor
                )
        fits = {}
        for est in config.estimators:
            k = "kappa_hat" if est == "DPD(kappa_hat)" else _fixed_kappa(est)
            fits[est] = (paths[k].fit, paths[k].lambda_hat)
        out["nonstationary"] = sum(
            p.n_nonstationary for key, p in paths.items() if key != "kappa_hat"
        )
    for est in config.estimators:
        f, lam = fits[est]
        out["mse"][est] = mse(f.beta(basis, grid), beta)
        out["lambda_hat"][est] = lam
    return out


def _run_chunk(args):
    config, indices = args
    results = {}
    for r in indices:
        try:
            results[r] = run_replicate(config, r)
        except Exception as exc:  # recorded per replicate, never fatal
            results[r] = {"error": f"{type(exc).__name__}: {exc}"}
    return results


def default_workers() -> int:
    return max(1, int(os.environ.get("DPDLOGIT_WORKERS", "1")))


def run_study(config: StudyConfig, workers: int | None = None) -> StudyReport:
    workers = default_workers() if workers is None else max(1, int(workers))
    reps = list(range(config.replications))
    if workers == 1:
        results = _run_chunk((config, reps))
    else:
        chunks = [reps[i::workers] for i in range(workers)]
        results = {}
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, [(config, c) for c in chunks if c]):
                results.update(part)

    ests = config.estimators
    mse_vals = {e: [] for e in ests}
    lam_vals = {e: [] for e in ests}
    kappas, failed = [], []
    nonstat = 0
    for r in reps:
        res = results[r]
        if "error" in res:
            failed.append({"replicate": r, "error": res["error"]})
            for e in ests:
                mse_vals[e].append(float("nan"))
                lam_vals[e].append(float("nan"))
            kappas.append(float("nan"))
            continue
        for e in ests:
            mse_vals[e].append(res["mse"][e])
            lam_vals[e].append(res["lambda_hat"][e])
        kappas.append(res["kappa_hat"])
        nonstat += res["nonstationary"]

    boot_rng = np.random.default_rng(np.random.SeedSequence([int(config.seed) & (2**64 - 1), _BOOTSTRAP_STREAM]))
    medians, ses = {}, {}
    for e in ests:
        v = np.asarray(mse_vals[e])
        medians[e] = float(np.nanmedian(v)) if np.any(np.isfinite(v)) else float("nan")
        ses[e] = bootstrap_median_se(v, config.bootstrap_resamples, boot_rng)
    cfg = asdict(config)
    cfg["estimators"] = list(ests)
    return StudyReport(
        config=cfg,
        median_mse=medians,
        bootstrap_se=ses,
        mse=mse_vals,
        kappa_hat=kappas,
        lambda_hat=lam_vals,
        failures=len(failed),
        nonstationary_fits=nonstat,
        failed_replicates=failed,
    )
