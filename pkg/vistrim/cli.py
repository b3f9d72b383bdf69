"""Command line interface of vistrim

Every command prints a JSON summary on stdout and writes its CSV and JSON
outputs to the output directory. Failures print one JSON error record on
stderr and exit with status 1.
"""
import argparse
import json
import logging
import sys
from dataclasses import replace

from vistrim.cost import CostParams
from vistrim.cost import tflops
from vistrim.errors import ConfigError
from vistrim.errors import VistrimError
from vistrim.logger import logger
from vistrim.logger import set_level
from vistrim.prune import BASELINE_KINDS
from vistrim.prune import DEFAULT_STAGE_LAYERS
from vistrim.prune import SCORERS
from vistrim.prune import PruneSchedule
from vistrim.runner import LocalRunner
from vistrim.trace import AnalysisConfig
from vistrim.trace import BaselineConfig
from vistrim.trace import BudgetConfig
from vistrim.trace import RunConfig


class ArgumentParser(argparse.ArgumentParser):
    """Parser raising ConfigError on usage errors instead of exiting"""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def parse_layers(text: str) -> tuple[int, ...]:
    """Parse a comma separated layer list such as ``1,10,20``"""
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as err:
        raise ConfigError(f"invalid layer list {text!r}") from err


def parse_schedule(text: str, num_layers: int) -> PruneSchedule:
    """Parse ``layer:keep`` pairs such as ``1:58,10:29,20:8``"""
    try:
        stages = tuple(tuple(int(v) for v in pair.split(":"))
                       for pair in text.split(",") if pair.strip())
    except ValueError as err:
        raise ConfigError(f"invalid schedule {text!r}") from err
    if any(len(stage) != 2 for stage in stages):
        raise ConfigError(f"schedule stages must be layer:keep, got {text!r}")
    return PruneSchedule(stages, num_layers)


def _common_arguments(parser: ArgumentParser):
    parser.add_argument("--config", type=str, default=None,
                        help="Path to a YAML run configuration.")
    parser.add_argument("--output", type=str, default=None,
                        help="Output directory, VISTRIM_OUTPUT by default.")
    parser.add_argument("--seed", type=int, default=None,
                        help="Seed of the sample generators.")
    parser.add_argument("--n-jobs", type=int, default=None,
                        help="Number of parallel workers.")
    parser.add_argument("--verbose", action="store_true",
                        help="Log progress messages.")
    parser.add_argument("--quiet", action="store_true",
                        help="Log errors only.")


def _run_arguments(parser: ArgumentParser):
    parser.add_argument("--samples", type=int, default=None,
                        help="Number of simulated samples.")
    parser.add_argument("--budget", type=float, default=None,
                        help="Average vision token budget per layer.")
    parser.add_argument("--schedule", type=str, default=None,
                        help="Explicit stages, e.g. 1:58,10:29,20:8.")
    parser.add_argument("--fraction-text", type=float, default=None,
                        help="Share of key text tokens (mIoU).")
    parser.add_argument("--fraction-vision", type=float, default=None,
                        help="Share of top vision tokens (shifts).")


def _baseline_arguments(parser: ArgumentParser):
    parser.add_argument("--start", type=int, default=0,
                        help="First layer of a uniform or single baseline.")
    parser.add_argument("--stride", type=int, default=None,
                        help="Layer stride of a uniform baseline.")
    parser.add_argument("--num-stages", type=int, default=None,
                        help="Layers drawn by a random baseline.")


def build_parser() -> ArgumentParser:
    """Argument parser of every command"""
    parser = ArgumentParser(
        prog="vistrim",
        description="Text-guided vision token pruning experiments.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate",
                                   help="Write toy model attention traces.")
    prune = commands.add_parser("prune", help="Run the pruned prefill.")
    shifts = commands.add_parser("shifts",
                                 help="Attention shift histogram.")
    miou = commands.add_parser("miou", help="Key text token mIoU matrix.")
    for sub in (simulate, prune, shifts, miou):
        _common_arguments(sub)
        _run_arguments(sub)
    prune.add_argument("--scorer", choices=SCORERS, default=None)
    prune.add_argument("--baseline", choices=BASELINE_KINDS, default=None,
                       help="Solve a baseline schedule at the budget.")
    prune.add_argument("--baseline-layers", type=str, default=None)
    _baseline_arguments(prune)
    prune.add_argument("--write-traces", action="store_true")
    for sub in (prune, shifts, miou):
        sub.add_argument("--traces", type=str, default=None,
                         help="Trace corpus directory to analyze.")

    cost = commands.add_parser("cost", help="FLOPs of a run.")
    _common_arguments(cost)
    cost.add_argument("--dense", action="store_true",
                      help="Dense run without pruning.")
    cost.add_argument("--d", type=int, default=None, help="Hidden size.")
    cost.add_argument("--m", type=int, default=None,
                      help="Feed-forward size.")
    cost.add_argument("--layers", type=int, default=None,
                      help="Number of layers.")
    cost.add_argument("--text", type=int, default=None,
                      help="Number of text tokens.")
    cost.add_argument("--vision", type=int, default=None,
                      help="Initial number of vision tokens.")
    cost.add_argument("--decode-steps", type=int, default=None)
    cost.add_argument("--budget", type=float, default=None)
    cost.add_argument("--schedule", type=str, default=None)
    cost.add_argument("--stage-layers", type=str, default=None)

    solve = commands.add_parser("schedule-solve",
                                help="Keep counts meeting a budget.")
    _common_arguments(solve)
    solve.add_argument("--budget", type=float, required=True)
    solve.add_argument("--vision", type=int, default=None)
    solve.add_argument("--layers", type=str, default=None,
                       help="Stage layers, e.g. 1,10,20.")
    solve.add_argument("--num-layers", type=int, default=32,
                       help="Number of layers of the model.")
    solve.add_argument("--final-keep", type=int, default=None)
    solve.add_argument("--ratio", type=float, default=None)
    solve.add_argument("--baseline", choices=BASELINE_KINDS, default=None)
    _baseline_arguments(solve)

    report = commands.add_parser("report",
                                 help="Merge the command outputs.")
    _common_arguments(report)
    return parser


def _budget(config: RunConfig, value: float,
            stage_layers: tuple[int, ...] | None = None,
            final_keep: int | None = None,
            ratio: float | None = None) -> BudgetConfig:
    base = config.budget or BudgetConfig(value)
    return BudgetConfig(value=value,
                        stage_layers=stage_layers or base.stage_layers,
                        final_keep=base.final_keep if final_keep is None
                        else final_keep,
                        ratio=base.ratio if ratio is None else ratio)


def load_config(args: argparse.Namespace) -> RunConfig:
    """Configuration file, if any, overridden by the command flags"""
    config = RunConfig.from_yaml(args.config) if args.config else RunConfig()
    changes = {}
    if args.output is not None:
        changes["output"] = args.output
    if args.n_jobs is not None:
        changes["n_jobs"] = args.n_jobs
    data = config.data
    if args.seed is not None:
        data = replace(data, seed=args.seed)
    if getattr(args, "samples", None) is not None:
        data = replace(data, samples=args.samples)
    changes["data"] = data
    fraction_text = getattr(args, "fraction_text", None)
    fraction_vision = getattr(args, "fraction_vision", None)
    if fraction_text is not None or fraction_vision is not None:
        analysis = config.analysis
        changes["analysis"] = AnalysisConfig(
            fraction_text=analysis.fraction_text if fraction_text is None
            else fraction_text,
            fraction_vision=analysis.fraction_vision if fraction_vision is None
            else fraction_vision)
    if getattr(args, "scorer", None) is not None:
        changes["scorer"] = args.scorer
    if getattr(args, "schedule", None) is not None and args.command != "cost":
        changes.update(schedule=parse_schedule(args.schedule,
                                               config.model.num_layers),
                       budget=None, baseline=None)
    if getattr(args, "budget", None) is not None and args.command != "cost":
        changes.update(budget=_budget(config, args.budget), schedule=None)
    if getattr(args, "baseline", None) is not None:
        layers = getattr(args, "baseline_layers", None)
        changes["baseline"] = BaselineConfig(
            kind=args.baseline,
            layers=parse_layers(layers) if layers else None,
            start=args.start,
            stride=args.stride,
            seed=data.seed,
            num_stages=args.num_stages)
    return config.update(**changes)


def _simulate(args, config: RunConfig) -> dict:
    return LocalRunner(config).simulate()


def _prune(args, config: RunConfig) -> dict:
    return LocalRunner(config).prune(trace_dir=args.traces,
                                     write_traces=args.write_traces)


def _shifts(args, config: RunConfig) -> dict:
    histogram = LocalRunner(config).shifts(args.traces)
    return {"mode": histogram.mode if histogram.num_layers else None,
            **histogram.to_dict()}


def _miou(args, config: RunConfig) -> dict:
    return LocalRunner(config).miou(args.traces).to_dict()


def _cost(args, config: RunConfig) -> dict:
    model = config.model
    layers = args.layers if args.layers is not None else model.num_layers
    vision = args.vision if args.vision is not None \
        else config.data.vision_count
    schedule = None
    if not args.dense:
        if args.schedule is not None:
            schedule = parse_schedule(args.schedule, layers)
        else:
            stage_layers = parse_layers(args.stage_layers) \
                if args.stage_layers else None
            budget = _budget(config, args.budget, stage_layers) \
                if args.budget is not None else config.budget
            resolved = config.update(
                model=replace(model, num_layers=layers),
                data=replace(config.data, vision_count=vision),
                schedule=None if budget is not None else config.schedule,
                budget=budget)
            schedule = resolved.resolve_schedule()
    params = CostParams(
        hidden_dim=args.d if args.d is not None else model.hidden_dim,
        ffn_dim=args.m if args.m is not None else model.ffn_dim,
        num_layers=layers,
        text_count=args.text if args.text is not None
        else config.data.text_count,
        vision_count=vision,
        schedule=schedule,
        decode_steps=args.decode_steps if args.decode_steps is not None
        else config.decode_steps)
    report = LocalRunner(config).cost(params, method=config.scorer)
    return {"tflops": tflops(report.grand_total), **report.to_dict()}


def _schedule_solve(args, config: RunConfig) -> dict:
    num_layers = args.num_layers
    vision = args.vision if args.vision is not None \
        else config.data.vision_count
    layers = parse_layers(args.layers) if args.layers else None
    budget = _budget(config, args.budget,
                     layers or (config.budget.stage_layers if config.budget
                                else DEFAULT_STAGE_LAYERS),
                     args.final_keep, args.ratio)
    baseline = config.baseline
    if baseline is not None and layers:
        baseline = replace(baseline, layers=layers)
    solved = config.update(model=replace(config.model, num_layers=num_layers),
                           data=replace(config.data, vision_count=vision),
                           schedule=None, budget=budget, baseline=baseline)
    schedule = LocalRunner(solved).solve()
    return {"keep_counts": schedule.keep_counts,
            "average_tokens": schedule.average_tokens(vision),
            **schedule.to_dict()}


def _report(args, config: RunConfig) -> dict:
    return LocalRunner(config).report()


COMMANDS = {"simulate": _simulate,
            "prune": _prune,
            "shifts": _shifts,
            "miou": _miou,
            "cost": _cost,
            "schedule-solve": _schedule_solve,
            "report": _report}


def _error_record(err: BaseException, command: str | None) -> int:
    record = {"error": type(err).__name__,
              "message": str(err),
              "command": command}
    if getattr(err, "feasible", None) is not None:
        record["feasible"] = list(err.feasible)
    print(json.dumps(record), file=sys.stderr)
    return 1


def main(argv: list[str] | None = None) -> int:
    """Run one command

    :param argv: Arguments without the program name, sys.argv otherwise,
    :return: The exit status
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    command = next((arg for arg in argv if arg in COMMANDS), None)
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as err:
        set_level(logging.WARNING)
        logger().error(str(err))
        return _error_record(err, command)
    if args.verbose:
        set_level(logging.INFO)
    elif args.quiet:
        set_level(logging.ERROR)
    else:
        set_level(logging.WARNING)
    try:
        config = load_config(args)
        summary = COMMANDS[args.command](args, config)
    except (VistrimError, OSError) as err:
        logger().error(f"{args.command} failed: {err}")
        return _error_record(err, args.command)
    except Exception as err:
        logger().exception(f"{args.command} failed unexpectedly")
        return _error_record(err, args.command)
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
