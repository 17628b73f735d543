"""vams-exp: accuracy sweeps and the server throughput bench, CSV out."""

from __future__ import annotations

import os
import sys

import click

from .bench import DEFAULT_BATCH_SIZES, bench_throughput, write_bench_csv
from .runners import (
    CI_TRIALS,
    DEFAULT_TRIALS,
    FIG7_SIZES_CI,
    FIG7_SIZES_FULL,
    run_fig6,
    run_fig7,
    run_fig8,
)

PROFILES = ("ci", "full")


def _trials(trials: int | None, profile: str) -> int:
    if trials is not None:
        return trials
    return DEFAULT_TRIALS if profile == "full" else CI_TRIALS


def _echo_summary(result) -> None:
    for entry in result.summary():
        click.echo(
            "  ".join(f"{key}={value}" for key, value in entry.items())
        )


@click.group()
def main():
    """Accuracy and throughput evaluation harness."""


common = [
    click.option("--out", "out_dir", required=True, type=click.Path()),
    click.option("--trials", type=int, default=None, help="default: 100 full / 20 ci"),
    click.option("--profile", type=click.Choice(PROFILES), default="ci", show_default=True),
    click.option("--seed", type=int, default=1, show_default=True),
    click.option("--workers", type=int, default=min(4, os.cpu_count() or 1), show_default=True),
]


def with_common(fn):
    for option in reversed(common):
        fn = option(fn)
    return fn


@main.command()
@with_common
def fig6(out_dir, trials, profile, seed, workers):
    """Pair-support percent error vs occurrence rate, per scheme width."""
    r = 1_000_000 if profile == "full" else 100_000
    result = run_fig6(r=r, trials=_trials(trials, profile), seed=seed, workers=workers)
    rows, summary = result.write_csv(out_dir)
    _echo_summary(result)
    click.echo(f"wrote {rows} and {summary}")


@main.command()
@with_common
def fig7(out_dir, trials, profile, seed, workers):
    """Percent error across dataset sizes and support levels."""
    sizes = FIG7_SIZES_FULL if profile == "full" else FIG7_SIZES_CI
    result = run_fig7(sizes=sizes, trials=_trials(trials, profile), seed=seed, workers=workers)
    rows, summary = result.write_csv(out_dir)
    _echo_summary(result)
    click.echo(f"wrote {rows} and {summary}")


@main.command()
@with_common
def fig8(out_dir, trials, profile, seed, workers):
    """Percent error across itemset sizes at fixed support."""
    result = run_fig8(trials=_trials(trials, profile), seed=seed, workers=workers)
    rows, summary = result.write_csv(out_dir)
    _echo_summary(result)
    click.echo(f"wrote {rows} and {summary}")


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--requests", type=int, default=300, show_default=True)
@click.option("--batch-sizes", default=",".join(str(b) for b in DEFAULT_BATCH_SIZES), show_default=True)
@click.option("--threads", type=int, default=4, show_default=True)
def bench(out_dir, requests, batch_sizes, threads):
    """End-to-end submit/map throughput per batch size (in-process server)."""
    if requests < 1:
        click.echo("empty bench: no requests, no report", err=True)
        sys.exit(0)
    sizes = tuple(int(b) for b in batch_sizes.split(","))
    rows = bench_throughput(batch_sizes=sizes, requests=requests, submit_threads=threads)
    path = write_bench_csv(rows, out_dir)
    for row in rows:
        click.echo(
            f"batch={row.batch_size:>4}  submit={row.submit_ops_per_sec:8.1f}/s  "
            f"e2e={row.e2e_ops_per_sec:8.1f}/s  visibility={row.mean_visibility_ms:8.1f}ms"
        )
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
