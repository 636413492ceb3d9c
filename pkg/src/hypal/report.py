"""Plot-ready aggregation of learning traces and dataset histograms.

Consumes trace CSVs written by the learn command and emits:

    model_rewards.csv        file,init,model,selections,cumulative,average_reward
                             (plus one 'mean' row per model: arithmetic mean
                             of the per-initialization averages)
    step_traces.csv          file,init,step,model,U_total,U_median,reward
    step_mean.csv            step,U_median_mean,reward_mean  (mean across inits)
    fe_histograms.csv        series,bin_index,bin_left,bin_right,density
                             (series: full | subset; only with a dataset)

No plotting here; every file is a flat table with a documented header.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from hypal.data import histogram, load_feature_table, partition_first_n
from hypal.errors import DataError

TRACE_COLUMNS = ("step", "init", "model", "U_total", "U_median", "reward", "queried_id", "seconds")

DEFAULT_HIST_BINS = 60


def write_trace_header(fh, config_hash: str, master_seed: int) -> None:
    fh.write(f"# config_hash={config_hash} master_seed={master_seed}\n")
    fh.write(",".join(TRACE_COLUMNS) + "\n")


def format_trace_row(init: int, record, include_seconds: bool) -> str:
    seconds = repr(record.seconds) if include_seconds else "0.0"
    cells = (
        str(record.step), str(init), record.model_name,
        repr(record.u_total), repr(record.u_median), str(record.reward),
        str(record.queried_id), seconds,
    )
    return ",".join(cells) + "\n"


def read_trace(path: str | Path) -> list[dict]:
    """Parse one trace CSV (leading # comment lines are metadata)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"trace file not found: {path}")
    rows: list[dict] = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_COLUMNS:
        raise DataError(f"{path}: malformed trace header {reader.fieldnames}")
    for raw in reader:
        try:
            rows.append(
                {
                    "step": int(raw["step"]),
                    "init": int(raw["init"]),
                    "model": raw["model"],
                    "U_total": float(raw["U_total"]),
                    "U_median": float(raw["U_median"]),
                    "reward": int(raw["reward"]),
                    "queried_id": int(raw["queried_id"]),
                    "seconds": float(raw["seconds"]),
                }
            )
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: malformed trace row {raw}: {exc}") from None
    return rows


def generate_report(
    trace_paths: Sequence[str | Path],
    out_dir: str | Path,
    dataset: str | Path | None = None,
    first_n: int = 1000,
    bins: int = DEFAULT_HIST_BINS,
    header_comment: str = "",
) -> list[Path]:
    """Aggregate traces (and optionally dataset histograms) into CSVs."""
    if not trace_paths:
        raise DataError("no trace files given")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    traces = [(i, read_trace(p)) for i, p in enumerate(trace_paths)]

    # per-series per-model reward bookkeeping (step-0 rewards are 0 and skipped)
    per_series: dict[tuple[int, int, str], list[int]] = defaultdict(list)
    models: list[str] = []
    for file_idx, rows in traces:
        for row in rows:
            if row["model"] not in models:
                models.append(row["model"])
            if row["reward"] != 0:
                per_series[(file_idx, row["init"], row["model"])].append(row["reward"])

    rewards_path = out_dir / "model_rewards.csv"
    with open(rewards_path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["file", "init", "model", "selections", "cumulative", "average_reward"])
        series_keys = sorted({(f, i) for (f, i, _) in per_series})
        averages: dict[str, list[float]] = defaultdict(list)
        for file_idx, init in series_keys:
            for model in models:
                rewards = per_series.get((file_idx, init, model), [])
                cumulative = sum(rewards)
                avg = cumulative / len(rewards) if rewards else ""
                if rewards:
                    averages[model].append(cumulative / len(rewards))
                writer.writerow([file_idx, init, model, len(rewards), cumulative, avg])
        for model in models:
            vals = averages.get(model, [])
            mean = sum(vals) / len(vals) if vals else ""
            writer.writerow(["all", "mean", model, "", "", mean])
    written.append(rewards_path)

    steps_path = out_dir / "step_traces.csv"
    with open(steps_path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["file", "init", "step", "model", "U_total", "U_median", "reward"])
        for file_idx, rows in traces:
            for row in rows:
                writer.writerow(
                    [file_idx, row["init"], row["step"], row["model"],
                     repr(row["U_total"]), repr(row["U_median"]), row["reward"]]
                )
    written.append(steps_path)

    by_step: dict[int, list[dict]] = defaultdict(list)
    for _, rows in traces:
        for row in rows:
            by_step[row["step"]].append(row)
    mean_path = out_dir / "step_mean.csv"
    with open(mean_path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "U_median_mean", "reward_mean"])
        for step in sorted(by_step):
            rows = by_step[step]
            writer.writerow(
                [step,
                 repr(sum(r["U_median"] for r in rows) / len(rows)),
                 repr(sum(r["reward"] for r in rows) / len(rows))]
            )
    written.append(mean_path)

    if dataset is not None:
        table = load_feature_table(dataset)
        partition = partition_first_n(table, first_n)
        fe = table.column("FE")
        row_of = table.index_of()
        subset_fe = fe[[row_of[i] for i in partition.hypothesis_subset]]
        hist_path = out_dir / "fe_histograms.csv"
        with open(hist_path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["series", "bin_index", "bin_left", "bin_right", "density"])
            for series, values in (("full", fe), ("subset", subset_fe)):
                edges, densities = histogram(values, bins)
                for b in range(len(densities)):
                    writer.writerow(
                        [series, b, repr(float(edges[b])), repr(float(edges[b + 1])),
                         repr(float(densities[b]))]
                    )
        written.append(hist_path)
    return written
