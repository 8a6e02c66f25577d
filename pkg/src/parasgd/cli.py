import argparse
import logging
import os
import sys
import textwrap
from typing import List, Optional, Sequence, Tuple

from parasgd import __version__
from parasgd.analysis import (
    calibrate_target,
    sweep_heatmap,
    sweep_overhead,
    sweep_scaling,
    sweep_tau,
)
from parasgd.config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_override,
    resolve_output_dir,
)
from parasgd.data import generate_synthetic, load_csv, load_idx, write_csv
from parasgd.models import Dataset, NetParams, NetSpecError, RunTrace, Scheme
from parasgd.records import (
    ensure_dir,
    write_heatmap_csv,
    write_manifest,
    write_overhead_csv,
    write_scaling_csv,
    write_trace_csv,
)
from parasgd.render import heatmap_svg, line_chart_svg, write_svg
from parasgd.schemes import Workload, run_scheme
from parasgd.settings import SWEEP_KINDS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def parse_cli_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    prog = "parasgd"
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="override run.seed")
    common.add_argument("--threads", type=int, metavar="N", help="override run.threads")
    common.add_argument("--svg", action="store_true", help="also render SVG charts")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config assignment, eg. --set cost.S=20",
    )
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log progress (-vv for every evaluation)",
    )

    args_parser = argparse.ArgumentParser(
        prog=prog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Simulated data-parallel SGD: serial, naive splitting and model averaging",
        epilog=textwrap.dedent(
            f"""\
        examples:
          {prog} train --config exp.cfg              one run, writes trace.csv
          {prog} sweep heatmap --config exp.cfg --svg  K x tau speedup grid
          {prog} sweep overhead --config exp.cfg     speedup against S
          {prog} generate-data --config exp.cfg      synthetic dataset as CSV
        """
        ),
    )
    args_parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=f"v{__version__}",
        help="print version and exit",
    )
    commands = args_parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True
    commands.add_parser("train", parents=[common], help="run one scheme and write its trace")
    sweep = commands.add_parser("sweep", parents=[common], help="run a sweep of experiments")
    sweep.add_argument("kind", choices=SWEEP_KINDS, help="which sweep to run")
    commands.add_parser(
        "generate-data", parents=[common], help="write a synthetic dataset in CSV layout"
    )
    return args_parser.parse_args(argv)


def setup_logging(verbosity: int) -> None:
    if verbosity <= 0:
        level = logging.WARNING
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = dict(parse_override(raw) for raw in args.set)
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.threads is not None:
        overrides["run.threads"] = str(args.threads)
    return load_config(args.config, overrides)


def output_dir(args: argparse.Namespace, config: ExperimentConfig) -> str:
    return ensure_dir(resolve_output_dir(args.out, config))


def load_datasets(config: ExperimentConfig) -> Tuple[Dataset, Dataset]:
    """(train, validation); without a validation source part of train is held out"""
    data, seed = config.data, config.run.seed
    validation: Optional[Dataset] = None
    if data.source == "synthetic":
        train = generate_synthetic(data.classes, data.shape, data.per_class, data.separation, seed)
    elif data.source == "idx":
        train = load_idx(data.images, data.labels, data.classes)
        if data.validation_images:
            validation = load_idx(data.validation_images, data.validation_labels, data.classes)
    else:
        train = load_csv(data.csv, data.shape, data.classes)
        if data.validation_csv:
            validation = load_csv(data.validation_csv, data.shape, data.classes)
    if validation is None:
        train, validation = train.split(data.validation_fraction, seed)
    logger.info("%d training and %d validation examples", len(train), len(validation))
    return train, validation


def build_net_params(config: ExperimentConfig, train: Dataset) -> NetParams:
    try:
        return config.net_params(train.example_shape)
    except NetSpecError as e:
        raise ConfigError("net.layer" if config.layers else "net.preset", str(e)) from None


def build_workload(config: ExperimentConfig) -> Workload:
    train, validation = load_datasets(config)
    return Workload(
        net_params=build_net_params(config, train),
        train=train,
        validation=validation,
        learning_rate=config.train.learning_rate,
        momentum=config.train.momentum,
        seed=config.run.seed,
        eval_steps=config.eval.steps or None,
        threads=config.threads,
    )


def resolve_target(config: ExperimentConfig, workload: Workload) -> float:
    if config.target.calibrate_at > 0:
        return calibrate_target(
            workload, config.target.calibrate_at, config.eval.every, config.cost_model()
        )
    return config.target.accuracy


def _accuracy_series(label: str, trace: RunTrace) -> Tuple[str, List[Tuple[float, float]]]:
    return label, [(r.sim_time, r.accuracy) for r in trace.records]


def cmd_train(config: ExperimentConfig, out_dir: str, svg: bool = False) -> int:
    scheme = Scheme(config.scheme.name)
    workload = build_workload(config)
    target = resolve_target(config, workload)
    budget = config.budget.rounds if scheme is Scheme.SPARKNET else config.budget.iterations
    trace = run_scheme(
        scheme,
        workload,
        workers=config.scheme.workers if scheme is not Scheme.SERIAL else 1,
        tau=config.scheme.tau if scheme is Scheme.SPARKNET else 1,
        budget=budget,
        eval_every=config.eval.every,
        target=target,
        cost=config.cost_model(),
        warm_start=config.train.warm_start,
    )
    write_trace_csv([trace], os.path.join(out_dir, "trace.csv"))

    if scheme is Scheme.SPARKNET:
        name, value = "M_a", trace.rounds_to(target)
    else:
        name, value = "N_a", trace.iterations_to(target)
    write_manifest(
        os.path.join(out_dir, "manifest.json"),
        "train",
        config.as_dict(),
        {"target": target, name: value, "final_accuracy": trace.final_accuracy},
    )
    if svg and trace.records:
        write_svg(
            os.path.join(out_dir, "trace.svg"),
            line_chart_svg(
                [_accuracy_series(scheme.value, trace)],
                "Accuracy against simulated time",
                "simulated seconds",
                "accuracy",
                y_max=1.0,
            ),
        )
    if value is None:
        print(f"{name}: target accuracy {target} not reached within the budget")
    else:
        print(f"{name} = {value}")
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, kind: str, out_dir: str, svg: bool = False) -> int:
    workload = build_workload(config)
    target = resolve_target(config, workload)
    sweep, budget = config.sweep, config.budget.iterations
    warm, threads = config.train.warm_start, config.threads
    results: dict = {"target": target}

    if kind in ("heatmap", "overhead"):
        workers = sweep.heatmap_workers if kind == "heatmap" else (sweep.overhead_workers,)
        taus = sweep.heatmap_taus if kind == "heatmap" else sweep.overhead_taus
        grid, baseline = sweep_heatmap(
            workload, workers, taus, target, budget, budget, config.eval.every, warm, threads
        )
        results["N_a"] = grid.N_a
        write_trace_csv([baseline], os.path.join(out_dir, "baseline.csv"))
        if kind == "heatmap":
            write_heatmap_csv(grid, os.path.join(out_dir, "heatmap.csv"))
            if svg:
                write_svg(os.path.join(out_dir, "heatmap.svg"), heatmap_svg(grid))
        else:
            points = sweep_overhead(grid, sweep.overhead_workers, sweep.overheads)
            write_overhead_csv(points, os.path.join(out_dir, "overhead.csv"))
            if svg:
                reached = [p for p in points if p.sparknet_speedup is not None]
                series = [
                    ("naive", [(p.S, p.naive_speedup) for p in points]),
                    ("sparknet (best tau)", [(p.S, p.sparknet_speedup) for p in reached]),
                ]
                write_svg(
                    os.path.join(out_dir, "overhead.svg"),
                    line_chart_svg(
                        series,  # type: ignore[arg-type]
                        f"Speedup against overhead, K={sweep.overhead_workers}",
                        "S / C(b)",
                        "speedup",
                        log_x=True,
                    ),
                )
    elif kind == "tau":
        traces = sweep_tau(
            workload,
            sweep.tau_taus,
            sweep.tau_workers,
            budget,
            target,
            config.cost_model(),
            warm,
            threads,
        )
        write_trace_csv(list(traces.values()), os.path.join(out_dir, "tau.csv"))
        results["M_a"] = {str(tau): trace.rounds_to(target) for tau, trace in traces.items()}
        if svg:
            write_svg(
                os.path.join(out_dir, "tau.svg"),
                line_chart_svg(
                    [_accuracy_series(f"tau={tau}", t) for tau, t in traces.items()],
                    f"Accuracy against simulated time, K={sweep.tau_workers}",
                    "simulated seconds",
                    "accuracy",
                    y_max=1.0,
                ),
            )
    elif kind == "scaling":
        baseline, traces, rows = sweep_scaling(
            workload,
            sweep.scaling_workers,
            sweep.scaling_tau,
            budget,
            target,
            config.cost_model(),
            config.eval.every,
            warm,
            threads,
        )
        write_trace_csv([baseline, *traces.values()], os.path.join(out_dir, "scaling.csv"))
        write_scaling_csv(rows, os.path.join(out_dir, "scaling_summary.csv"))
        results["speedup"] = {
            (str(r.K) if r.scheme is Scheme.SPARKNET else "serial"): r.speedup for r in rows
        }
        if svg:
            series = [_accuracy_series("serial", baseline)]
            series += [_accuracy_series(f"K={K}", t) for K, t in traces.items()]
            write_svg(
                os.path.join(out_dir, "scaling.svg"),
                line_chart_svg(
                    series,
                    f"Accuracy against simulated time, tau={sweep.scaling_tau}",
                    "simulated seconds",
                    "accuracy",
                    y_max=1.0,
                ),
            )
    else:
        raise ConfigError("sweep", f"unknown sweep {kind!r} (valid: {', '.join(SWEEP_KINDS)})")

    write_manifest(
        os.path.join(out_dir, "manifest.json"), f"sweep {kind}", config.as_dict(), results
    )
    return EXIT_OK


def cmd_generate_data(config: ExperimentConfig, out_dir: str) -> int:
    data = config.data
    dataset = generate_synthetic(
        data.classes, data.shape, data.per_class, data.separation, config.run.seed
    )
    path = os.path.join(out_dir, "data.csv")
    write_csv(dataset, path)
    write_manifest(
        os.path.join(out_dir, "manifest.json"),
        "generate-data",
        config.as_dict(),
        {"file": "data.csv", "rows": len(dataset), "shape": list(dataset.example_shape)},
    )
    print(f"Wrote {len(dataset)} examples to {path}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_cli_args(argv)
    setup_logging(args.verbose)
    try:
        config = config_from_args(args)
        out_dir = output_dir(args, config)
        if args.command == "train":
            return cmd_train(config, out_dir, args.svg)
        elif args.command == "sweep":
            return cmd_sweep(config, args.kind, out_dir, args.svg)
        return cmd_generate_data(config, out_dir)
    except ConfigError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        logger.debug("Failure", exc_info=True)
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_FAILURE

