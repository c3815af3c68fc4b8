# Copyright 2025 Liatrio
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Command-line entry point.

Subcommands:
    run         one pipeline run, report as JSON
    oracle      exact global and local counts of a stream
    experiment  a seeded multi-trial study writing CSV and a manifest
    plotdata    gnuplot-ready series from experiment results

Exit codes: 0 success, 1 unexpected failure, 2 usage, config or data error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from opentelemetry.semconv.trace import SpanAttributes

from . import __version__
from .config import resolve_config, resolve_jobs
from .experiments import (
    ExperimentKind,
    ExperimentSpec,
    ExperimentSpecError,
    PlotDataError,
    emit_plotdata,
    read_spec_file,
    run_experiment,
)
from .pipeline import (
    Aggregation,
    Algorithm,
    ConfigError,
    ExecutionMode,
    InstrumentationError,
    TrianglePipeline,
    verify_structural_properties,
)
from .routing import MappingPolicy
from .stream_ingest import (
    EdgeListFormatError,
    GraphStream,
    StreamSizeError,
    gen_random_graph,
    parse_edge_list,
)
from .telemetry import (
    PipelineAttributes,
    add_enhanced_error_attributes,
    add_span_attributes,
    get_logger,
    get_tracer,
)
from .triangle_oracle import IncompleteAssignmentError, exact_count, pair_counts

tracer = get_tracer()
logger = get_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

USAGE_ERRORS = (
    ConfigError,
    ExperimentSpecError,
    PlotDataError,
    EdgeListFormatError,
    StreamSizeError,
    InstrumentationError,
    IncompleteAssignmentError,
    OSError,
)


def _gen_pair(value: str) -> tuple[int, int]:
    try:
        n, m = (int(part) for part in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n,m got {value!r}") from None
    return n, m


def _int_list(value: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {value!r}") from None


def _float_list(value: str) -> list[float]:
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {value!r}") from None


def _budget_list(value: str) -> list:
    """Integers are absolute budgets, decimals are fractions of |E|."""
    budgets = []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            budgets.append(float(part) if "." in part else int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid budget {part!r}") from None
    return budgets


def _add_source_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--input", help="edge-list file, one 'u v' pair per line")
    source.add_argument(
        "--gen", type=_gen_pair, metavar="N,M", help="Erdos-Renyi G(n, m) stream"
    )
    parser.add_argument(
        "--delimiter", help="field separator (default: any whitespace or comma)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triangle-stream",
        description="Distributed single-pass triangle counting over graph streams.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one pipeline over a stream")
    _add_source_arguments(run)
    run.add_argument("--algo", choices=[str(a) for a in Algorithm])
    run.add_argument("--k", type=int)
    run.add_argument("--budget", type=int)
    run.add_argument("--theta", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--aggregation", choices=[str(a) for a in Aggregation])
    run.add_argument("--mode", choices=[str(m) for m in ExecutionMode])
    run.add_argument("--mapping", choices=[str(m) for m in MappingPolicy])
    run.add_argument("--instrument", action="store_true", default=None)
    run.add_argument("--eager-zero", action="store_true", default=None)
    run.add_argument(
        "--verify",
        action="store_true",
        help="check structural properties against the oracle",
    )
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--out", help="write the JSON report here instead of stdout")
    run.add_argument("--locals-out", help="write local estimates as 'node count' lines")

    oracle = commands.add_parser("oracle", help="exact counts of a stream")
    _add_source_arguments(oracle)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument(
        "--pairs", action="store_true", help="also count Type-1/Type-2 pairs"
    )
    oracle.add_argument("--out", help="write JSON here instead of stdout")
    oracle.add_argument(
        "--locals-out", help="write exact local counts as 'node count' lines"
    )

    experiment = commands.add_parser(
        "experiment", help="run a seeded multi-trial study"
    )
    _add_source_arguments(experiment)
    experiment.add_argument(
        "--spec", help="JSON experiment spec; flags override its fields"
    )
    experiment.add_argument("--kind", choices=[str(k) for k in ExperimentKind])
    experiment.add_argument("--algo", type=lambda v: [a for a in v.split(",") if a])
    experiment.add_argument("--trials", type=int)
    experiment.add_argument("--k", type=_int_list, metavar="K[,K...]")
    experiment.add_argument("--budget", type=_budget_list, metavar="B[,B...]")
    experiment.add_argument("--theta", type=_float_list, metavar="T[,T...]")
    experiment.add_argument("--sizes", type=_int_list, metavar="M[,M...]")
    experiment.add_argument("--seed", type=int)
    experiment.add_argument("--jobs", type=int)
    experiment.add_argument("--aggregation", choices=[str(a) for a in Aggregation])
    experiment.add_argument("--mode", choices=[str(m) for m in ExecutionMode])
    experiment.add_argument("--instrument", action="store_true", default=None)
    experiment.add_argument("--reshuffle", action="store_true", default=None)
    experiment.add_argument("--out", help="output directory")

    plotdata = commands.add_parser(
        "plotdata", help="plot series from experiment results"
    )
    plotdata.add_argument("results", help="experiment output directory")
    plotdata.add_argument("--out", help="series directory (default: RESULTS/plotdata)")
    return parser


def _load_source(args: argparse.Namespace, seed: int) -> GraphStream:
    if args.input:
        return parse_edge_list(args.input, args.delimiter)
    if args.gen:
        n, m = args.gen
        return gen_random_graph(n, m, seed)
    raise ConfigError("give a stream with --input or --gen")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_config(
        {
            "algorithm": args.algo,
            "k": args.k,
            "budget": args.budget,
            "theta": args.theta,
            "seed": args.seed,
            "aggregation": args.aggregation,
            "execution": args.mode,
            "mapping": args.mapping,
            "instrumentation": True if args.verify else args.instrument,
            "eager_zero": args.eager_zero,
        },
        config_path=args.config,
    )
    stream = _load_source(args, config.seed)
    report = TrianglePipeline(config).process(stream)
    payload = report.to_dict(include_locals=False)

    if args.verify:
        verdict = verify_structural_properties(report, exact_count(stream))
        payload["structural_properties"] = {
            "passed": verdict.passed,
            "replication": vars(verdict.replication),
            "single_counter": (
                vars(verdict.single_counter) if verdict.single_counter else None
            ),
            "designated_worker": (
                vars(verdict.designated_worker) if verdict.designated_worker else None
            ),
            "assignment_bound": (
                vars(verdict.assignment_bound) if verdict.assignment_bound else None
            ),
        }
    if args.locals_out:
        report.write_locals(args.locals_out)
    _emit(json.dumps(payload, indent=2), args.out)
    if args.verify and not payload["structural_properties"]["passed"]:
        return EXIT_FAILURE
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    stream = _load_source(args, args.seed)
    oracle = exact_count(stream)
    payload = {
        "edges": len(stream),
        "nodes": len(oracle.nodes),
        "triangles": oracle.global_count,
    }
    if args.pairs:
        pairs = pair_counts(stream, oracle=oracle)
        payload.update(type1_pairs=pairs.type1, type2_pairs=pairs.type2)
    if args.locals_out:
        with open(args.locals_out, "w", encoding="utf-8") as handle:
            for node in sorted(oracle.nodes):
                handle.write(f"{node} {oracle.local(node)}\n")
    _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def _experiment_spec(args: argparse.Namespace) -> ExperimentSpec:
    data = {}
    if args.spec:
        data = read_spec_file(args.spec)
    overrides = {
        "kind": args.kind,
        "algorithms": args.algo,
        "trials": args.trials,
        "k_values": args.k,
        "budgets": args.budget,
        "thetas": args.theta,
        "stream_sizes": args.sizes,
        "base_seed": args.seed,
        "aggregation": args.aggregation,
        "execution": args.mode,
        "instrument": args.instrument,
        "reshuffle": args.reshuffle,
        "output_dir": args.out,
        "delimiter": args.delimiter,
    }
    data.update({key: value for key, value in overrides.items() if value is not None})
    if args.input or args.gen:
        data["input_path"] = args.input
        data["gen"] = list(args.gen) if args.gen else None
    jobs = args.jobs if args.jobs is not None else data.get("jobs")
    data["jobs"] = resolve_jobs(jobs)
    return ExperimentSpec.from_dict(data)


def cmd_experiment(args: argparse.Namespace) -> int:
    files = run_experiment(_experiment_spec(args))
    print(json.dumps({role: str(path) for role, path in files.items()}, indent=2))
    return EXIT_OK


def cmd_plotdata(args: argparse.Namespace) -> int:
    for path in emit_plotdata(args.results, args.out):
        print(path)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "oracle": cmd_oracle,
    "experiment": cmd_experiment,
    "plotdata": cmd_plotdata,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch the subcommand and map errors to exit codes."""
    args = build_parser().parse_args(argv)

    with tracer.start_as_current_span(f"cli.{args.command}") as span:
        add_span_attributes(
            span,
            **{
                SpanAttributes.CODE_FUNCTION: "main",
                "cli.command": args.command,
                PipelineAttributes.STREAM_SOURCE: getattr(args, "input", None),
            },
        )
        try:
            return COMMANDS[args.command](args)
        except USAGE_ERRORS as e:
            add_enhanced_error_attributes(span, e, command=args.command)
            logger.error(
                "Command failed",
                extra={"command": args.command, "error_type": e.__class__.__name__},
            )
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        except Exception as e:
            add_enhanced_error_attributes(span, e, command=args.command)
            logger.error(
                "Unexpected failure",
                exc_info=True,
                extra={"command": args.command},
            )
            print(f"error: {e}", file=sys.stderr)
            return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
