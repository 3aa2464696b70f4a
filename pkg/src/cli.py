"""Command-line front end.

    python src/cli.py curve --d 2 --points 101 --out curve.csv
    python src/cli.py verify --d 2 --x 0.57735 --samples 100000 --seed 7
    python src/cli.py realize --d 2 --p 0.5
    python src/cli.py trajectory --d 3 --info 0.5 --samples 200

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""
import argparse
import asyncio
import logging
import sys
from dataclasses import dataclass

from rich.logging import RichHandler

from agents.tradeoff_controller import TradeoffController
from errors import TradeoffError, UsageError
from settings import load_settings

logger = logging.getLogger("tradeoff")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    d: int
    x: float | None = None
    info: float | None = None
    p: float | None = None
    samples: int = 100_000
    seed: int = 20240101
    points: int = 101
    out: str | None = None
    format: str = "csv"
    threads: int = 1
    chunks: int = 8
    upper: bool = False

    def validate(self):
        if not 2 <= self.d <= 6:
            raise UsageError(f"--d must lie in [2, 6], got {self.d}")
        if self.samples < 1:
            raise UsageError(f"--samples must be at least 1, got {self.samples}")
        if self.threads < 1 or self.chunks < 1:
            raise UsageError("--threads and --chunks must be positive")
        given = [v for v in (self.x, self.info, self.p) if v is not None]
        if self.command == "curve":
            if given:
                raise UsageError("curve takes no point specification")
            if self.points < 2:
                raise UsageError(f"--points must be at least 2, got {self.points}")
        else:
            if len(given) != 1:
                raise UsageError("exactly one of --x, --info, --p is required")
            if self.format != "json":
                raise UsageError(f"{self.command} writes JSON output only")
        return self


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tradeoff", description="Information/disturbance trade-off for unitary estimation"
    )
    parser.add_argument("--verbose", action="store_true", help="Debug-level logging")
    parser.add_argument("--quiet", action="store_true", help="Do not print tables")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub, point=True):
        sub.add_argument("--d", type=int, required=True, help="Dimension of the unknown unitary")
        sub.add_argument("--out", help="Output file (defaults under the output directory)")
        sub.add_argument("--threads", type=int, help="Worker threads for Monte Carlo")
        sub.add_argument("--chunks", type=int, help="Independent RNG streams")
        sub.add_argument("--seed", type=int, help="Master RNG seed")
        if point:
            group = sub.add_mutually_exclusive_group(required=True)
            group.add_argument("--x", type=float, help="Estimate amplitude x in [0, 1]")
            group.add_argument("--info", type=float, help="Information I in [0, 1]")
            group.add_argument("--p", type=float, help="Weight of the gain in the figure of merit")
            sub.add_argument("--samples", type=int, help="Monte Carlo samples or trajectory count")

    curve = commands.add_parser("curve", help="Emit the optimal trade-off curve")
    common(curve, point=False)
    curve.add_argument("--points", type=int, default=101, help="Number of points in I")
    curve.add_argument("--format", choices=("csv", "json"), default="csv")
    curve.add_argument("--upper", action="store_true", help="Emit the upper root instead")

    for name, text in (
        ("verify", "Analytic and Monte Carlo verification report"),
        ("realize", "Serialize the optimal network with self-checks"),
        ("trajectory", "Sample trajectories of the optimal network"),
    ):
        sub = commands.add_parser(name, help=text)
        common(sub)
        sub.add_argument("--format", choices=("json",), default="json")
    return parser


def configure_logging(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(show_path=False)],
        force=True,
    )


def config_from_args(args, settings):
    def pick(value, fallback):
        return fallback if value is None else value

    return RunConfig(
        command=args.command,
        d=args.d,
        x=getattr(args, "x", None),
        info=getattr(args, "info", None),
        p=getattr(args, "p", None),
        samples=pick(getattr(args, "samples", None), settings.samples),
        seed=pick(args.seed, settings.seed),
        points=getattr(args, "points", 101),
        out=args.out,
        format=args.format,
        threads=pick(args.threads, settings.threads),
        chunks=pick(args.chunks, settings.chunks),
        upper=getattr(args, "upper", False),
    ).validate()


async def dispatch(controller, config):
    """Run one command; returns the process exit code"""
    if config.command == "curve":
        await controller.cmd_curve(config.d, config.points, config.out, config.format, config.upper)
        return EXIT_OK

    point = controller.resolve_point(config.d, config.x, config.info, config.p)
    if config.command == "verify":
        report = await controller.cmd_verify(point, config.samples, config.seed, config.out)
        return EXIT_OK if report["verified"] else EXIT_FAILED
    if config.command == "realize":
        report = await controller.cmd_realize(point, config.samples, config.seed, config.out)
        return EXIT_OK if report["verified"] else EXIT_FAILED
    await controller.cmd_trajectory(point, config.samples, config.seed, config.out)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return EXIT_OK if exit_.code == 0 else EXIT_USAGE

    configure_logging(args.verbose)
    settings = load_settings()
    try:
        config = config_from_args(args, settings)
        settings.threads, settings.chunks = config.threads, config.chunks
        controller = TradeoffController(settings, quiet=args.quiet)
        return asyncio.run(dispatch(controller, config))
    except UsageError as e:
        logger.error("usage error: %s", e)
        return EXIT_USAGE
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_USAGE
    except TradeoffError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
