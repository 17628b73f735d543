"""Accuracy sweeps: recovered-support percent error across scheme and data scales.

Three sweeps cover the interesting axes: support level per scheme width,
dataset size, and itemset size. Every trial generates a fresh synthetic
dataset, publishes its shares, recovers the planted itemset's support
from the shares alone, and scores the percent error against the direct
measurement. Trials are seeded through a SeedSequence spawn so results
are reproducible and safely parallel.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..multiballot import Dataset, build_priv_dataset
from ..stats import percent_error, recovered_measures, support
from .synthetic import PlantedSet, SyntheticSpec, gen_synthetic

DEFAULT_TRIALS = 100
CI_TRIALS = 20

FIG6_KS = (1, 2, 3, 4)
FIG6_SUPPORTS = tuple(float(s) for s in np.geomspace(0.01, 0.5, 12).round(4))
FIG7_SIZES_FULL = (1_000, 10_000, 100_000, 1_000_000)
FIG7_SIZES_CI = (1_000, 10_000, 100_000)
FIG7_SUPPORTS = (0.1, 0.3, 0.5, 0.7, 0.9)
FIG8_SIZES = (2, 3, 4, 5, 6, 7, 8)


@dataclass(frozen=True)
class TrialRow:
    config: tuple  # hashable configuration key
    trial: int
    true_support: float
    recovered_support: float
    pct_error: float


@dataclass
class ExperimentResult:
    name: str
    config_fields: tuple[str, ...]
    rows: list[TrialRow] = field(default_factory=list)

    def summary(self) -> list[dict]:
        grouped: dict[tuple, list[float]] = {}
        for row in self.rows:
            grouped.setdefault(row.config, []).append(row.pct_error)
        out = []
        for config in sorted(grouped):
            errors = grouped[config]
            entry = dict(zip(self.config_fields, config))
            entry["trials"] = len(errors)
            entry["mean_pct_error"] = float(np.mean(errors))
            entry["var_pct_error"] = float(np.var(errors, ddof=1)) if len(errors) > 1 else 0.0
            out.append(entry)
        return out

    def mean_error(self, config: tuple) -> float:
        errors = [row.pct_error for row in self.rows if row.config == config]
        if not errors:
            raise KeyError(f"no rows for configuration {config}")
        return float(np.mean(errors))

    def write_csv(self, out_dir: str) -> tuple[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        rows_path = os.path.join(out_dir, f"{self.name}_trials.csv")
        with open(rows_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(
                list(self.config_fields) + ["trial", "true_support", "recovered_support", "pct_error"]
            )
            for row in self.rows:
                writer.writerow(
                    list(row.config)
                    + [row.trial, row.true_support, row.recovered_support, row.pct_error]
                )
        summary_path = os.path.join(out_dir, f"{self.name}_summary.csv")
        summary = self.summary()
        with open(summary_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(summary[0].keys()))
            writer.writeheader()
            writer.writerows(summary)
        return rows_path, summary_path


def _recovery_trial(job: tuple) -> TrialRow:
    """One dataset -> shares -> recovered support measurement."""
    config, trial, r, t, k, elements, target_support, seed_entropy = job
    rng = np.random.default_rng(np.random.SeedSequence(seed_entropy))
    spec = SyntheticSpec(
        r=r, t=t, planted=(PlantedSet(elements=elements, support=target_support),)
    )
    values = gen_synthetic(spec, rng)
    true_supp = support(values, elements)
    priv = build_priv_dataset(Dataset(values=values), k, rng, include_share_ids=False)
    recovered = recovered_measures(priv, [elements])[0].support
    return TrialRow(
        config=config,
        trial=trial,
        true_support=true_supp,
        recovered_support=recovered,
        pct_error=percent_error(true_supp, recovered),
    )


def _run_jobs(jobs: list[tuple], workers: int) -> list[TrialRow]:
    if workers <= 1 or len(jobs) <= 1:
        return [_recovery_trial(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_recovery_trial, jobs, chunksize=max(1, len(jobs) // (workers * 4))))


def _spawn_entropy(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def run_fig6(
    r: int = 1_000_000,
    ks: tuple[int, ...] = FIG6_KS,
    supports: tuple[float, ...] = FIG6_SUPPORTS,
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    workers: int = 1,
) -> ExperimentResult:
    """Pair-itemset percent error as the rule's occurrence rate varies, per k."""
    jobs = []
    configs = [(k, s) for k in ks for s in supports]
    entropy = _spawn_entropy(seed, len(configs) * trials)
    i = 0
    for k, supp in configs:
        for trial in range(trials):
            jobs.append(((k, supp), trial, r, 4, k, (1, 2), supp, entropy[i]))
            i += 1
    result = ExperimentResult(name="fig6", config_fields=("k", "support"))
    result.rows = _run_jobs(jobs, workers)
    return result


def run_fig7(
    sizes: tuple[int, ...] = FIG7_SIZES_FULL,
    supports: tuple[float, ...] = FIG7_SUPPORTS,
    k: int = 1,
    trials: int = DEFAULT_TRIALS,
    seed: int = 2,
    workers: int = 1,
) -> ExperimentResult:
    """Percent error across dataset sizes; five planted pairs per dataset."""
    jobs = []
    configs = [(r, s) for r in sizes for s in supports]
    entropy = _spawn_entropy(seed, len(configs) * trials)
    i = 0
    for r, supp in configs:
        for trial in range(trials):
            jobs.append(((r, supp), trial, r, 2, k, (1, 2), supp, entropy[i]))
            i += 1
    result = ExperimentResult(name="fig7", config_fields=("r", "support"))
    result.rows = _run_jobs(jobs, workers)
    return result


def run_fig8(
    r: int = 100_000,
    sizes: tuple[int, ...] = FIG8_SIZES,
    target_support: float = 0.1,
    k: int = 1,
    trials: int = DEFAULT_TRIALS,
    seed: int = 3,
    workers: int = 1,
) -> ExperimentResult:
    """Percent error as the planted itemset widens at fixed support."""
    jobs = []
    entropy = _spawn_entropy(seed, len(sizes) * trials)
    i = 0
    for size in sizes:
        elements = tuple(range(1, size + 1))
        for trial in range(trials):
            jobs.append(((size,), trial, r, size, k, elements, target_support, entropy[i]))
            i += 1
    result = ExperimentResult(name="fig8", config_fields=("itemset_size",))
    result.rows = _run_jobs(jobs, workers)
    return result


def import_transactions_csv(path: str, t: int | None = None) -> np.ndarray:
    """Binary matrix from a transactions CSV (one row = item ids present).

    Supports the common public-dataset shape where each line lists the
    1-based item identifiers of one transaction, with or without a
    header. Items beyond ``t`` (default: the largest seen) are dropped.
    """
    rows: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            items = [p for p in line.replace(",", " ").split() if p]
            if not items:
                continue
            try:
                rows.append([int(p) for p in items])
            except ValueError:
                continue  # header or annotation line
    if not rows:
        raise ValueError(f"{path}: no transactions found")
    width = t or max(max(row) for row in rows)
    values = np.zeros((len(rows), width), dtype=np.uint8)
    for i, row in enumerate(rows):
        for item in row:
            if 1 <= item <= width:
                values[i, item - 1] = 1
    return values
