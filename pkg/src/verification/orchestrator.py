import logging

import numpy as np

from exporters import number, point_record
from network_sim import pure_input_fidelity_samples, trajectory_samples
from parallel import run_chunked_async
from settings import DEFAULT_THRESHOLDS
from tradeoff import (
    MCEstimate,
    TradeoffPoint,
    avg_pure_input_fidelity,
    fidelity_samples,
    gain_samples,
    instrument_from_xy,
    lambda_ops,
)

logger = logging.getLogger(__name__)

PHASE_WEIGHTS = {
    "analytic": 0.2,
    "curve": 0.1,
    "importance_sampling": 0.3,
    "trajectory": 0.3,
    "pure_input": 0.1,
}


def _estimate_record(estimate, target, sigma, abs_tol):
    return {
        "estimate": number(estimate.value),
        "stderr": number(estimate.stderr),
        "target": number(target),
        "deviation": number(estimate.deviation(target)),
        "samples": estimate.n,
        "passed": bool(estimate.agrees_with(target, sigma, abs_tol)),
    }


class VerificationPipeline:
    def __init__(self, thresholds=None, threads=1, chunks=8):
        self.thresholds = dict(DEFAULT_THRESHOLDS)
        self.thresholds.update(thresholds or {})
        self.threads = threads
        self.chunks = chunks
        self.verification_history = []

    @property
    def sigma(self):
        return float(self.thresholds["mc_sigma"])

    @property
    def abs_tol(self):
        return float(self.thresholds["mc_abs_tol"])

    def check_analytic(self, point):
        """Closed-form F, G against Tr[Λ Ξ] for the seed operator"""
        instrument = instrument_from_xy(point.x, point.y, point.d)
        ops = lambda_ops(point.d)
        trace_f = float(np.real(np.trace(ops.lambda_f.matrix @ instrument.xi.matrix)))
        trace_g = float(np.real(np.trace(ops.lambda_g.matrix @ instrument.xi.matrix)))
        constraint = abs(point.constraint_residual())
        gap = max(abs(trace_f - point.F), abs(trace_g - point.G))
        return {
            "F": number(point.F),
            "G": number(point.G),
            "I": number(point.I),
            "D": number(point.D),
            "trace_F": number(trace_f),
            "trace_G": number(trace_g),
            "constraint_residual": number(constraint),
            "passed": bool(constraint <= 1e-10 and gap <= 1e-10),
        }

    def check_curve(self, point):
        residual = abs(point.curve_residual())
        return {
            "residual": number(residual),
            "passed": bool(residual <= float(self.thresholds["curve_residual"])),
        }

    async def _samples(self, sampler, n, seed, stream):
        return await run_chunked_async(sampler, n, (seed, stream), self.chunks, self.threads)

    async def check_importance_sampling(self, point, n, seed):
        x, y, d = point.x, point.y, point.d
        f = await self._samples(lambda size, rng: fidelity_samples(x, y, d, size, rng), n, seed, 1)
        g = await self._samples(lambda size, rng: gain_samples(x, y, d, size, rng), n, seed, 2)
        f_record = _estimate_record(MCEstimate.from_samples(f), point.F, self.sigma, self.abs_tol)
        g_record = _estimate_record(MCEstimate.from_samples(g), point.G, self.sigma, self.abs_tol)
        return {"F": f_record, "G": g_record, "passed": f_record["passed"] and g_record["passed"]}

    async def check_trajectory(self, point, n, seed):
        x, y, d = point.x, point.y, point.d
        samples = await self._samples(lambda size, rng: trajectory_samples(x, y, d, size, rng), n, seed, 3)
        f_record = _estimate_record(MCEstimate.from_samples(samples[:, 0]), point.F, self.sigma, self.abs_tol)
        g_record = _estimate_record(MCEstimate.from_samples(samples[:, 1]), point.G, self.sigma, self.abs_tol)
        return {"F": f_record, "G": g_record, "passed": f_record["passed"] and g_record["passed"]}

    async def check_pure_input(self, point, n, seed):
        x, y, d = point.x, point.y, point.d
        samples = await self._samples(
            lambda size, rng: pure_input_fidelity_samples(x, y, d, size, rng), n, seed, 4
        )
        target = avg_pure_input_fidelity(point.F, d)
        record = _estimate_record(MCEstimate.from_samples(samples), target, self.sigma, self.abs_tol)
        return {"F_pure": record, "passed": record["passed"]}

    async def verify(self, point: TradeoffPoint, samples, seed):
        """Run all verification phases for one trade-off point"""
        report = {
            "id": f"verify_d{point.d}_seed{seed}",
            "config": {
                "d": point.d,
                "samples": samples,
                "seed": seed,
                "chunks": self.chunks,
            },
            "point": point_record(point),
            "results": {},
        }

        # Phase 1: analytic consistency
        report["results"]["analytic"] = self.check_analytic(point)

        # Phase 2: curve membership
        report["results"]["curve"] = self.check_curve(point)

        # Phase 3: importance-sampling Monte Carlo
        report["results"]["importance_sampling"] = await self.check_importance_sampling(
            point, samples, seed
        )

        # Phase 4: trajectory-level Monte Carlo
        report["results"]["trajectory"] = await self.check_trajectory(point, samples, seed)

        # Phase 5: pure-input average fidelity
        report["results"]["pure_input"] = await self.check_pure_input(point, samples, seed)

        score = sum(
            weight for key, weight in PHASE_WEIGHTS.items() if report["results"][key]["passed"]
        )
        report["verification_score"] = round(score, 6)
        report["verified"] = all(result["passed"] for result in report["results"].values())
        logger.info("%s: score %.2f, verified=%s", report["id"], score, report["verified"])

        self.verification_history.append(report)
        return report
