import argparse
from pathlib import Path
from typing import List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from .bootstrap import ToolkitBootstrap
from .config import RunConfig
from .enums import Command, ExitCode, LogLevel, OutputFormat
from .errors import InvalidConfigError
from .services.writers import ResultWriter

CONFIG_DUMP_NAME = "config.toml"


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def _seed(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccdlab",
        description="Concatenated continuous driving of a two-level system: simulate, analyze, emit CSV/JSON.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides [run].out)")
    common.add_argument("--seed", type=_seed, help="base seed (overrides [run].seed)")
    common.add_argument("--threads", type=_positive_int, help="worker threads (default: CCDLAB_THREADS or all cores)")
    common.add_argument(
        "--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value,
        help="table format",
    )
    common.add_argument("--log-level", choices=[level.value for level in LogLevel], help="log verbosity")
    common.add_argument("--dump-config", action="store_true", help=f"write the normalized {CONFIG_DUMP_NAME}")
    common.add_argument("--progress", action="store_true", help="show a progress bar for sweeps")

    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        Command.EVOLVE: "noiseless time evolution, P|0>(t)",
        Command.FLOQUET: "quasi-energies, band spectrum, mode-control phases",
        Command.RATES: "analytic relaxation rates and sweeps",
        Command.MONTECARLO: "noise-averaged signal and fitted decay rate",
        Command.ENSEMBLE: "inhomogeneous Rabi signal and coherence-time sweeps",
        Command.MAP: "robustness contrast map over drive strength and detuning",
        Command.FIT: "fit a model to a CSV column",
    }
    for command, text in helps.items():
        cmd = sub.add_parser(command.value, parents=[common], help=text)
        if command is Command.FIT:
            cmd.add_argument("--input", type=Path, help="CSV with time in μs as its first column")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config.replace("run", seed=args.seed)
    if args.out is not None:
        config = config.replace("run", out=str(args.out))
    if getattr(args, "input", None) is not None:
        config = config.replace("fit", input=str(args.input))
    return config


def _print_summary(console: Console, command: Command, code: ExitCode, files: List[Path]) -> None:
    table = Table(title=f"ccdlab {command.value}")
    table.add_column("file")
    table.add_column("bytes", justify="right")
    for path in files:
        table.add_row(str(path), str(path.stat().st_size))
    console.print(table)
    if code is not ExitCode.OK:
        console.print(f"[red]exit {code.value}[/red]")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    command = Command(args.command)
    console = Console(stderr=True)
    try:
        bootstrap = ToolkitBootstrap.from_env(
            threads=args.threads,
            log_level=None if args.log_level is None else LogLevel(args.log_level),
            show_progress=args.progress,
        )
    except InvalidConfigError as e:
        console.print(f"[red]{e}[/red]")
        return ExitCode.CONFIG_ERROR.value

    try:
        config = _load_config(args)
    except InvalidConfigError as e:
        bootstrap.logger.error(f"Invalid configuration: {e}")
        return ExitCode.CONFIG_ERROR.value

    writer = ResultWriter(Path(config.run.out), OutputFormat(args.format), bootstrap.logger)
    if args.dump_config:
        writer.write_text(CONFIG_DUMP_NAME, config.to_toml())
    code = bootstrap.controller.execute(command, config, writer)
    _print_summary(console, command, code, writer.written)
    return code.value
