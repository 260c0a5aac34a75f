"""Binary-regression experiment harness.

The data stream encodes uniform random integers in [0, 1023] as 16-bit
binary inputs with the integer itself as the regression target; every
1000th sample is the all-ones input with target 65535.  The rare huge
target is what stresses each optimizer: a single unnormalized update of
that magnitude can wreck a small network.

``run_grid`` sweeps the four optimizer variants over an (alpha, beta)
grid with repeated seeded runs, records the per-sample pre-update test
error, and selects each method's best cell by median area under the
error curve.  Runs that diverge (non-finite loss) are flagged and score
infinite area rather than crashing the sweep.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .network import Mlp
from .schedules import constant
from .stats import Normalizer
from .training import (
    OutputLayer,
    art_only_sgd_step,
    normalized_sgd_step,
    plain_sgd_step,
    popart_sgd_step,
    predict,
)

METHODS = ("sgd", "art", "popart", "normalized_sgd")

# 11 half-decade points, 10^-5 .. 10^0
FULL_GRID = tuple(10.0 ** (-5 + 0.5 * i) for i in range(11))
# The 1e-5 row exists so unnormalized SGD has convergent cells: its
# lower-layer updates grow with the square of the target scale, and every
# alpha >= 10^-4.5 diverges on the first 65535 spike.
CI_ALPHAS = tuple(10.0**e for e in (-5.0, -4.0, -3.0, -2.5, -2.0))
CI_BETAS = tuple(10.0**e for e in (-4.0, -3.0, -2.0, -1.0, -0.5))

RESULTS_HEADER = ["method", "alpha", "beta", "seed", "step", "rmse", "grad_norm"]


class BinRegStream:
    """Deterministic sample stream; steps are 1-based and sequential."""

    N_BITS = 16
    NORMAL_MAX = 2**10 - 1
    SPIKE_PERIOD = 1000
    SPIKE_VALUE = 2**16 - 1

    def __init__(self, seed: int):
        self.rng = np.random.default_rng([seed, 0xB17])
        self.step = 0

    @staticmethod
    def encode(value: int) -> np.ndarray:
        """Low-bit-first binary encoding into a 16-component 0/1 vector."""
        return np.array([(value >> i) & 1 for i in range(BinRegStream.N_BITS)], dtype=float)

    def sample(self) -> tuple[np.ndarray, float]:
        self.step += 1
        if self.step % self.SPIKE_PERIOD == 0:
            return self.encode(self.SPIKE_VALUE), float(self.SPIKE_VALUE)
        value = int(self.rng.integers(0, self.NORMAL_MAX + 1))
        return self.encode(value), float(value)


@dataclass
class ExperimentConfig:
    methods: tuple = METHODS
    alphas: tuple = CI_ALPHAS
    betas: tuple = CI_BETAS
    n_samples: int = 5000
    n_repetitions: int = 10
    smoothing_window: int = 10
    hidden: tuple = (10, 10, 10)
    percentiles: tuple = (10, 50, 90)
    base_seed: int = 1000

    @classmethod
    def profile(cls, name: str, base_seed: int = 1000) -> "ExperimentConfig":
        if name == "ci":
            return cls(base_seed=base_seed)
        if name == "full":
            return cls(
                alphas=FULL_GRID,
                betas=FULL_GRID,
                n_repetitions=50,
                base_seed=base_seed,
            )
        raise ValueError(f"unknown profile {name!r}")

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        known = set(self.__dataclass_fields__)
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        coerced = {
            k: tuple(v) if isinstance(getattr(self, k), tuple) else v
            for k, v in overrides.items()
        }
        return replace(self, **coerced)


@dataclass
class RunRecord:
    method: str
    alpha: float
    beta: float
    seed: int
    rmse: np.ndarray
    grad_norm: np.ndarray
    diverged: bool

    @property
    def auc(self) -> float:
        return math.inf if self.diverged else float(self.rmse.sum())


def run_single(
    method: str,
    alpha: float,
    beta: float,
    seed: int,
    n_samples: int = 5000,
    hidden: tuple = (10, 10, 10),
) -> RunRecord:
    """One seeded run of one optimizer on one grid cell.

    The error recorded at each step is the absolute error of the current
    unnormalized prediction on the upcoming sample, measured before any
    update from that sample (a test error).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng([seed, 0x1217])
    net = Mlp([BinRegStream.N_BITS, *hidden], rng=rng)
    normalizer = Normalizer(k=1, schedule=constant(beta))
    layer = OutputLayer(1, hidden[-1], normalizer=normalizer, rng=rng)
    stream = BinRegStream(seed)

    rmse = np.full(n_samples, np.inf)
    grad_norm = np.full(n_samples, np.inf)
    with np.errstate(over="ignore", invalid="ignore"):
        diverged = _run_loop(method, net, layer, normalizer, stream, alpha,
                             n_samples, rmse, grad_norm)
    return RunRecord(method, alpha, beta, seed, rmse, grad_norm, diverged)


def _run_loop(method, net, layer, normalizer, stream, alpha, n_samples, rmse, grad_norm):
    for i in range(n_samples):
        x, y = stream.sample()
        pred = predict(net, layer, x)[0]
        if not math.isfinite(pred):
            return True
        rmse[i] = abs(pred - y)
        if method == "popart":
            report = popart_sgd_step(net, layer, x, y, alpha)
        elif method == "art":
            report = art_only_sgd_step(net, layer, x, y, alpha)
        elif method == "sgd":
            report = plain_sgd_step(net, layer, x, y, alpha)
        else:
            normalizer.update(y)
            report = normalized_sgd_step(net, layer, x, y, normalizer.sigma, alpha)
        grad_norm[i] = report.gradient_norm
        if not math.isfinite(report.squared_loss):
            return True
    return False


def _run_cell(args) -> RunRecord:
    return run_single(*args)


def run_grid(config: ExperimentConfig, workers: int = 1, progress=None):
    """Sweep every (method, alpha, beta) cell with repeated seeded runs.

    Returns ``(records, summary)`` where ``summary`` maps each method to
    its best cell (minimum median area under the error curve) with the
    chosen hyperparameters.  Repetition ``i`` of every method and cell
    shares seed ``base_seed + i`` so comparisons are paired.
    """
    jobs = [
        (method, alpha, beta, config.base_seed + rep, config.n_samples, config.hidden)
        for method in config.methods
        for alpha in config.alphas
        for beta in config.betas
        for rep in range(config.n_repetitions)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = []
            for i, rec in enumerate(pool.map(_run_cell, jobs, chunksize=4)):
                records.append(rec)
                if progress:
                    progress(i + 1, len(jobs))
    else:
        records = []
        for i, job in enumerate(jobs):
            records.append(_run_cell(job))
            if progress:
                progress(i + 1, len(jobs))
    return records, summarize(records)


def summarize(records) -> dict:
    """Best (alpha, beta) per method by median area under the error curve."""
    cells: dict[tuple, list] = {}
    for rec in records:
        cells.setdefault((rec.method, rec.alpha, rec.beta), []).append(rec.auc)
    summary: dict[str, dict] = {}
    for (method, alpha, beta), aucs in cells.items():
        med = float(np.median(aucs))
        best = summary.get(method)
        if best is None or med < best["median_auc"]:
            summary[method] = {"alpha": alpha, "beta": beta, "median_auc": med}
    return summary


def aggregate(traces, percentiles=(10, 50, 90), window: int = 10) -> dict:
    """Per-step percentile bands across repetitions, then a trailing
    moving average over ``window`` samples (window 1 leaves the trace
    untouched).
    """
    arr = np.asarray(traces, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.size == 0:
        raise ValueError("no traces to aggregate")
    if window < 1:
        raise ValueError("window must be >= 1")
    bands = {}
    for p in percentiles:
        band = np.percentile(arr, p, axis=0)
        bands[p] = _moving_average(band, window)
    return bands


def _moving_average(x: np.ndarray, window: int) -> np.ndarray:
    if window == 1:
        return x.copy()
    csum = np.concatenate([[0.0], np.cumsum(x)])
    n = len(x)
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i + 1 - window)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


# -- machine-readable outputs ---------------------------------------------


def _atomic_path(path: str):
    return path + ".tmp"


def write_results_csv(path: str, records) -> None:
    """Exact-header CSV, one row per (method, alpha, beta, seed, step)."""
    tmp = _atomic_path(path)
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for rec in records:
            for step in range(len(rec.rmse)):
                writer.writerow(
                    [
                        rec.method,
                        repr(rec.alpha),
                        repr(rec.beta),
                        rec.seed,
                        step + 1,
                        repr(float(rec.rmse[step])),
                        repr(float(rec.grad_norm[step])),
                    ]
                )
    os.replace(tmp, path)


def write_summary_json(path: str, summary: dict) -> None:
    tmp = _atomic_path(path)
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_results_csv(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULTS_HEADER:
            raise ValueError(f"unexpected results header: {reader.fieldnames}")
        return list(reader)
