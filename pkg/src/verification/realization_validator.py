import logging

import numpy as np

from comb_algebra import CHECK_TOL
from exporters import number, point_record, stage_record
from realization import (
    ancilla_povm,
    kraus_of_outcome,
    optimal_network,
    realize,
    recompose,
    recompose_outcome,
)
from settings import DEFAULT_THRESHOLDS
from tensor_core import haar_unitary
from tradeoff import BLOCK, chi_vectors, instrument_from_xy, r_total

logger = logging.getLogger(__name__)


class RealizationValidator:
    """Self-checks for the isometric realization of the optimal instrument"""

    def __init__(self, thresholds=None):
        self.thresholds = dict(DEFAULT_THRESHOLDS)
        self.thresholds.update(thresholds or {})

    def stage_checks(self, stages):
        limit = float(self.thresholds["isometry_residual"])
        records = []
        for stage in stages:
            residual = stage.isometry_residual()
            records.append({
                "level": stage.level,
                "ancilla_dim_in": stage.ancilla_dim_in,
                "ancilla_dim_out": stage.ancilla_dim_out,
                "isometry_residual": number(residual),
                "passed": bool(residual <= limit),
            })
        return records

    def recomposition_residual(self, stages, target):
        comb = recompose(stages)
        return float(np.linalg.norm(comb.matrix - target.op.aligned(comb.op).matrix))

    def check_network(self, stages, target):
        stages_report = self.stage_checks(stages)
        residual = self.recomposition_residual(stages, target)
        passed = residual <= float(self.thresholds["recomposition_residual"])
        return {
            "stages": stages_report,
            "recomposition_residual": number(residual),
            "passed": bool(passed and all(s["passed"] for s in stages_report)),
        }

    def check_kraus(self, x, y, d, rng, count=50):
        """Closed-form K_Û against the measured-ancilla construction"""
        if x <= CHECK_TOL:
            return {"skipped": "single-outcome instrument at x = 0", "passed": True}
        worst = 0.0
        for uhat in haar_unitary(d, rng, count):
            closed = kraus_of_outcome(uhat, x, y, d, route="closed")
            pipeline = kraus_of_outcome(uhat, x, y, d, route="pipeline")
            worst = max(worst, float(np.linalg.norm(closed - pipeline)))
        return {
            "outcomes": count,
            "max_deviation": number(worst),
            "passed": bool(worst <= float(self.thresholds["kraus_equivalence"])),
        }

    def check_outcomes(self, stages, povm, instrument, rng, count=5):
        """R_Û recovered from the stages and the POVM element P_Û"""
        worst = 0.0
        for uhat in haar_unitary(instrument.d, rng, count):
            recovered = recompose_outcome(stages, povm(uhat))
            expected = instrument.r_uhat(uhat)
            worst = max(worst, float(np.linalg.norm(recovered.matrix - expected.aligned(recovered).matrix)))
        return {
            "outcomes": count,
            "max_deviation": number(worst),
            "passed": bool(worst <= float(self.thresholds["recomposition_residual"])),
        }

    def check_povm_completeness(self, povm, x, y, d, n, rng):
        """∫dÛ P_Û = I on the final ancilla, by Monte Carlo"""
        rank = povm.basis.shape[1]
        total = np.zeros((rank, rank), dtype=complex)
        total_sq_norm = 0.0
        min_eigenvalue = np.inf
        remaining = n
        while remaining > 0:
            size = min(BLOCK, remaining)
            eta = povm.vectors(chi_vectors(x, y, haar_unitary(d, rng, size)))
            total += eta.T @ eta.conj()
            norms = np.sum(np.abs(eta) ** 2, axis=1)
            total_sq_norm += float(np.sum(norms ** 2))
            min_eigenvalue = min(min_eigenvalue, float(norms.min()))
            remaining -= size
        mean = total / n
        residual = float(np.linalg.norm(mean - np.eye(rank)))
        stderr = float(np.sqrt(max(total_sq_norm / n - np.linalg.norm(mean) ** 2, 0.0) / n))
        limit = max(float(self.thresholds["povm_completeness"]), float(self.thresholds["mc_sigma"]) * stderr)
        return {
            "ancilla_dim": rank,
            "samples": n,
            "residual": number(residual),
            "stderr": number(stderr),
            "passed": bool(residual <= limit and min_eigenvalue >= 0.0),
        }

    def validate(self, point, samples, seed):
        x, y, d = point.x, point.y, point.d
        rng = np.random.default_rng(seed)
        target = r_total(x, y, d)
        instrument = instrument_from_xy(x, y, d)

        closed = optimal_network(x, y, d)
        generic = realize(target)
        povm = ancilla_povm(instrument.r_uhat, target, ancilla_basis=generic[-1].ancilla_basis)

        report = {
            "id": f"realize_d{d}_seed{seed}",
            "config": {"d": d, "samples": samples, "seed": seed},
            "point": point_record(point),
            "network": [stage_record(stage) for stage in closed],
            "results": {},
        }
        report["results"]["closed_form"] = self.check_network(closed, target)
        report["results"]["generic"] = self.check_network(generic, target)
        report["results"]["kraus"] = self.check_kraus(x, y, d, rng)
        report["results"]["outcomes"] = self.check_outcomes(generic, povm, instrument, rng)
        report["results"]["povm"] = self.check_povm_completeness(povm, x, y, d, samples, rng)
        report["ancilla_ranks"] = [stage.ancilla_dim_out for stage in generic]
        report["verified"] = all(result["passed"] for result in report["results"].values())
        logger.info("%s: verified=%s, ancilla ranks %s", report["id"], report["verified"], report["ancilla_ranks"])
        return report
