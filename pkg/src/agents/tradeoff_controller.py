import asyncio
import logging
import os

from errors import UsageError
from exporters import point_record, trajectory_record, write_curve_csv, write_json, write_jsonl
from network_sim import run_trajectories
from settings import load_settings
from tradeoff import curve_points, point_from_info, point_from_p, point_from_x
from verification.dashboard import VerificationDashboard
from verification.orchestrator import VerificationPipeline
from verification.realization_validator import RealizationValidator

logger = logging.getLogger(__name__)


class TradeoffController:
    def __init__(self, settings=None, quiet=False):
        """Wire the estimators, validators and dashboard to one settings object"""
        self.settings = settings or load_settings()
        self.verifier = VerificationPipeline(
            self.settings.thresholds, threads=self.settings.threads, chunks=self.settings.chunks
        )
        self.validator = RealizationValidator(self.settings.thresholds)
        self.dashboard = None if quiet else VerificationDashboard()

    def output_path(self, out, default_name):
        return out or os.path.join(self.settings.output_dir, default_name)

    @staticmethod
    def resolve_point(d, x=None, info=None, p=None):
        """Full trade-off point from exactly one of x, I or p"""
        given = [name for name, value in (("x", x), ("info", info), ("p", p)) if value is not None]
        if len(given) != 1:
            raise UsageError(f"exactly one of --x, --info, --p is required, got {given or 'none'}")
        if x is not None:
            return point_from_x(x, d)
        if info is not None:
            return point_from_info(info, d)
        return point_from_p(p, d)

    async def cmd_curve(self, d, points, out=None, fmt="csv", upper=False):
        """Sample the optimal curve uniformly in I and write it to disk"""
        curve = curve_points(d, points, upper=upper)
        path = self.output_path(out, f"curve_d{d}.{fmt}")
        if fmt == "csv":
            write_curve_csv(path, curve)
        else:
            write_json(path, {"d": d, "upper": upper, "points": [point_record(p) for p in curve]})
        logger.info("wrote %d curve points to %s", len(curve), path)
        if self.dashboard:
            self.dashboard.display_curve(curve)
        return path

    async def cmd_verify(self, point, samples, seed, out=None):
        """Analytic and Monte Carlo verification report for one point"""
        report = await self.verifier.verify(point, samples, seed)
        path = self.output_path(out, f"verify_d{point.d}_seed{seed}.json")
        write_json(path, report)
        if self.dashboard:
            self.dashboard.display_report(report)
        return report

    async def cmd_realize(self, point, samples, seed, out=None):
        """Serialized optimal network with its self-check results"""
        loop = asyncio.get_running_loop()
        report = await loop.run_in_executor(None, self.validator.validate, point, samples, seed)
        path = self.output_path(out, f"network_d{point.d}_seed{seed}.json")
        write_json(path, report)
        if self.dashboard:
            self.dashboard.display_report(report)
        return report

    async def cmd_trajectory(self, point, count, seed, out=None):
        """Run `count` sampled trajectories and dump them as JSON lines"""
        loop = asyncio.get_running_loop()
        trajectories = await loop.run_in_executor(
            None, run_trajectories, point.x, point.y, point.d, count, seed, self.settings.threads
        )
        path = self.output_path(out, f"trajectories_d{point.d}_seed{seed}.jsonl")
        write_jsonl(path, (trajectory_record(t) for t in trajectories))
        if self.dashboard:
            self.dashboard.display_trajectories(trajectories)
        return trajectories
