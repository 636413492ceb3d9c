"""Command-line entry point.

Subcommands: forge (generate hypotheses from the data subset), learn (run
the exploration loop), report (aggregate traces into plot-ready CSVs),
selfcheck (run the built-in oracle suite). Every config key can live in a
JSON file (--config) and be overridden by the flag of the same name.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from pathlib import Path

from hypal import forge as forge_mod
from hypal import learn as learn_mod
from hypal import report as report_mod
from hypal.config import ExperimentConfig, load_config
from hypal.data import FEATURE_COLUMNS, TARGET_COLUMN, load_feature_table, partition_first_n
from hypal.errors import (
    DataError,
    DomainError,
    ExprSyntaxError,
    NumericalError,
    UnitError,
    UsageError,
)
from hypal.hypotheses import (
    bundled_hypotheses_path,
    load_bundled_hypotheses,
    load_hypotheses,
    save_hypotheses,
)
from hypal.selfcheck import run_selfcheck

log = logging.getLogger("hypal")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that for data errors
        raise UsageError(message)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its keys")
    parser.add_argument("--dataset", help="feature table CSV")
    parser.add_argument("--hypotheses", help="hypothesis JSON (default: bundled reference models)")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--hypothesis-subset-n", dest="hypothesis_subset_n", type=int)
    parser.add_argument("--n-seed", dest="n_seed", type=int)
    parser.add_argument("--n-steps", dest="n_steps", type=int)
    parser.add_argument("--n-init", dest="n_init", type=int)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--pool-subsample", dest="pool_subsample", type=int)
    parser.add_argument("--hmc-warmup", dest="hmc_warmup", type=int)
    parser.add_argument("--hmc-samples", dest="hmc_samples", type=int)
    parser.add_argument("--hmc-thin-to", dest="hmc_thin_to", type=int)
    parser.add_argument("--leapfrog-min", dest="leapfrog_min", type=int)
    parser.add_argument("--leapfrog-max", dest="leapfrog_max", type=int)
    parser.add_argument("--target-accept", dest="target_accept", type=float)
    parser.add_argument("--forge-max-terms", dest="forge_max_terms", type=int)
    parser.add_argument("--forge-sis-top", dest="forge_sis_top", type=int)
    parser.add_argument("--forge-n-hypotheses", dest="forge_n_hypotheses", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument(
        "--trace-timings", dest="trace_timings", action="store_const", const=True,
        help="record real wall times in the trace CSV (breaks byte-identical reruns)",
    )


_CONFIG_KEYS = [f for f in ExperimentConfig.__dataclass_fields__]


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if hasattr(args, k)}
    config = load_config(getattr(args, "config", None), overrides)
    env_out = os.environ.get("HYPAL_OUTPUT_DIR")
    if env_out:
        config.output_dir = env_out
    return config


def _prepare_output(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _setup_logging(verbose: bool, logfile: Path | None = None) -> None:
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    for handler in list(root.handlers):
        root.removeHandler(handler)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.DEBUG if verbose else logging.INFO)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(console)
    if logfile is not None:
        file_handler = logging.FileHandler(logfile, mode="w", encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(file_handler)


def cmd_forge(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    if not config.dataset:
        raise UsageError("forge requires --dataset (or a dataset key in the config)")
    out = _prepare_output(config)
    _setup_logging(args.verbose, out / "forge.log")
    table = load_feature_table(config.dataset)
    partition = partition_first_n(table, min(config.hypothesis_subset_n, len(table) - 1))
    row_of = table.index_of()
    subset_idx = [row_of[i] for i in partition.hypothesis_subset]
    hypotheses, rep = forge_mod.run_forge(
        table,
        subset_idx,
        base_features=FEATURE_COLUMNS,
        target_column=TARGET_COLUMN,
        max_terms=config.forge_max_terms,
        sis_top=config.forge_sis_top,
        lambda_points=config.forge_lambda_points,
        lambda_min_ratio=config.forge_lambda_min_ratio,
        n_hypotheses=config.forge_n_hypotheses,
    )
    meta = {"config_hash": config.hash(), "master_seed": config.seed}
    hypo_path = out / "hypotheses.json"
    save_hypotheses(hypotheses, hypo_path, metadata=meta)
    shutil.copyfile(bundled_hypotheses_path(), out / "reference_hypotheses.json")
    report_path = out / "forge_descriptors.csv"
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config.hash()} master_seed={config.seed}\n")
        fh.write("rank,provenance,unit,abs_coefficient\n")
        for rank, idx in enumerate(rep.ranking, start=1):
            cand = rep.candidates[idx]
            coef = abs(float(rep.result.coefficients[idx]))
            fh.write(f"{rank},\"{cand.label}\",{cand.unit.tag()},{coef!r}\n")
    log.info("wrote %s (%d hypotheses) and %s", hypo_path, len(hypotheses), report_path)
    for h in hypotheses:
        log.info("  %s: %s", h.name, forge_mod.ex.to_text(h.expr))
    return 0


def _load_experiment(config: ExperimentConfig) -> tuple[learn_mod.Experiment, list]:
    if not config.dataset:
        raise UsageError("learn requires --dataset (or a dataset key in the config)")
    table = load_feature_table(config.dataset)
    if config.hypotheses:
        hypotheses = load_hypotheses(config.hypotheses)
    else:
        hypotheses = load_bundled_hypotheses()
    if len(table) - config.hypothesis_subset_n <= config.n_seed:
        raise DataError(
            f"table of {len(table)} rows cannot supply a {config.hypothesis_subset_n}-row "
            f"hypothesis subset plus {config.n_seed} seeds plus a query pool; "
            "lower hypothesis_subset_n or n_seed"
        )
    partition = partition_first_n(table, config.hypothesis_subset_n)
    experiment = learn_mod.Experiment(
        table=table,
        hypotheses=hypotheses,
        excluded_ids=partition.hypothesis_subset,
        gp_inputs=config.gp_inputs,
        n_seed=config.n_seed,
        n_steps=config.n_steps,
        epsilon=config.epsilon,
        pool_subsample=config.pool_subsample,
        hmc_warmup=config.hmc_warmup,
        hmc_samples=config.hmc_samples,
        hmc_thin_to=config.hmc_thin_to,
        leapfrog_min=config.leapfrog_min,
        leapfrog_max=config.leapfrog_max,
        target_accept=config.target_accept,
        master_seed=config.seed,
    )
    return experiment, hypotheses


def cmd_learn(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    out = _prepare_output(config)
    _setup_logging(args.verbose, out / "run.log")
    experiment, _ = _load_experiment(config)
    trace_path = out / "trace.csv"
    summary_path = out / "summary.json"
    with open(trace_path, "w", encoding="utf-8") as trace_fh:
        report_mod.write_trace_header(trace_fh, config.hash(), config.seed)
        trace_fh.flush()

        def on_step(init_index: int, record: learn_mod.StepRecord) -> None:
            trace_fh.write(
                report_mod.format_trace_row(init_index, record, config.trace_timings)
            )
            trace_fh.flush()

        try:
            _, summary = learn_mod.run(
                experiment, config.n_init, on_step=on_step, workers=config.workers
            )
        except Exception:
            trace_fh.flush()  # keep the partial trace on abort
            raise
    payload = {"config_hash": config.hash(), "master_seed": config.seed, **summary}
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote %s and %s", trace_path, summary_path)
    log.info("ranking by average reward: %s", " > ".join(summary["aggregate"]["ranking"]))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    out = _prepare_output(config)
    _setup_logging(args.verbose)
    written = report_mod.generate_report(
        args.traces,
        out,
        dataset=config.dataset or None,
        first_n=config.hypothesis_subset_n,
        bins=args.bins,
        header_comment=f"config_hash={config.hash()} master_seed={config.seed}",
    )
    for path in written:
        log.info("wrote %s", path)
    return 0


def cmd_selfcheck(args: argparse.Namespace) -> int:
    _setup_logging(args.verbose)
    failures = run_selfcheck()
    if failures:
        raise NumericalError(f"{failures} selfcheck(s) failed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="hypal", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_forge = sub.add_parser("forge", help="generate candidate hypotheses from the data subset")
    _add_config_flags(p_forge)
    p_forge.set_defaults(func=cmd_forge)

    p_learn = sub.add_parser("learn", help="run the exploration loop")
    _add_config_flags(p_learn)
    p_learn.set_defaults(func=cmd_learn)

    p_report = sub.add_parser("report", help="aggregate traces into plot-ready CSVs")
    _add_config_flags(p_report)
    p_report.add_argument("traces", nargs="+", help="trace CSV paths")
    p_report.add_argument("--bins", type=int, default=report_mod.DEFAULT_HIST_BINS)
    p_report.set_defaults(func=cmd_report)

    p_check = sub.add_parser("selfcheck", help="run the built-in oracle suite")
    p_check.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        # verbose may be given before or after the subcommand
        if not hasattr(args, "verbose"):
            args.verbose = False
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, UnitError, DomainError, ExprSyntaxError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
