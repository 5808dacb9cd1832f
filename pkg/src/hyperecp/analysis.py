"""Closed-form success probabilities, recycling arithmetic and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

from .detection import BELL, run_protocol
from .protocol import RecycledParams, SourceParams

FORM_TOL = 1e-12
SIM_TOL = 1e-9


@dataclass
class ProbReport:
    p1: float
    recycle_prob: float
    p2: float
    p2_expanded: float
    sim_success: float | None = None
    sim_recycle: float | None = None
    sim_fail: float | None = None
    max_abs_deviation: float | None = None

    @property
    def fail_prob(self) -> float:
        return 1.0 - self.p1 - self.recycle_prob


def p1(p: SourceParams) -> float:
    """Single-round success probability ``4|alpha beta gamma delta|^2``."""
    return 4 * abs(p.alpha * p.beta * p.gamma * p.delta) ** 2


def recycle_probability(p: SourceParams) -> float:
    return p.pol_recycle_factor * p.spatial_recycle_factor


def recycled_params(p: SourceParams) -> RecycledParams:
    return p.recycled()


def analytic_probs(p: SourceParams) -> ProbReport:
    """Formula values only; ``p2`` is given in both algebraic forms."""
    first = p1(p)
    rec = recycle_probability(p)
    # the product of the two recycle factors is at least 1/4 for normalised amplitudes
    assert rec >= 0.25 - FORM_TOL, rec
    second = first + 4 * abs(p.alpha * p.beta * p.gamma * p.delta) ** 4 / rec
    expanded = first + p1(p.recycled()) * rec
    if abs(second - expanded) > FORM_TOL:
        raise ArithmeticError(f"the two forms of P2 disagree: {second!r} vs {expanded!r}")
    return ProbReport(first, rec, second, expanded)


def compare(p: SourceParams, kind: str = BELL) -> ProbReport:
    """Formula values next to the simulated class aggregates."""
    rep = analytic_probs(p)
    run = run_protocol(p, kind)
    agg = run.aggregates
    rep.sim_success, rep.sim_recycle, rep.sim_fail = agg["Success"], agg["Recycle"], agg["Fail"]
    rep.max_abs_deviation = max(
        abs(rep.sim_success - rep.p1),
        abs(rep.sim_recycle - rep.recycle_prob),
        abs(rep.sim_fail - rep.fail_prob),
    )
    return rep


def success_with_recycling(p: SourceParams, rounds: int = 2) -> float:
    """Total success when the residual state is concentrated again.

    ``rounds=1`` is the single-round probability and ``rounds=2`` adds one
    recycling round. Larger values keep recycling the residual state with
    the same circuit.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if rounds == 1 or recycle_probability(p) == 0:
        return p1(p)
    return p1(p) + recycle_probability(p) * success_with_recycling(p.recycled(), rounds - 1)


@dataclass
class RecycledRoundReport:
    params: SourceParams
    recycled: RecycledParams
    expected: float
    simulated: float

    @property
    def deviation(self) -> float:
        return abs(self.simulated - self.expected)

    @property
    def ok(self) -> bool:
        return self.deviation <= SIM_TOL


def recycled_round_check(p: SourceParams, kind: str = BELL) -> RecycledRoundReport:
    """Run a fresh round on two sources carrying the recycled amplitudes."""
    rp = p.recycled()
    run = run_protocol(rp, kind)
    return RecycledRoundReport(p, rp, p1(rp), run.success)


@dataclass
class SweepRow:
    alpha2: float
    gamma2: float
    p1: float
    p2: float
    sim_success: float
    sim_recycle: float
    sim_fail: float
    max_dev: float


SWEEP_FIELDS = ["alpha2", "gamma2", "p1", "p2", "sim_success", "sim_recycle", "sim_fail", "max_dev"]


def sweep_grid(step: float = 0.05, upper: float = 0.5) -> list[float]:
    """Points ``step, 2*step, ...`` up to ``upper`` inclusive."""
    if not 0 < step <= upper or upper > 0.5:
        raise ValueError(f"grid must lie in (0, 0.5], got step={step}, upper={upper}")
    n = int(math.floor(upper / step + 1e-9))
    return [round(k * step, 12) for k in range(1, n + 1)]


def sweep(step: float = 0.05, kind: str = BELL, upper: float = 0.5) -> list[SweepRow]:
    """Formula and simulation over the grid ``|alpha|^2, |gamma|^2 in (0, upper]``."""
    grid = sweep_grid(step, upper)
    rows = []
    for a2 in grid:
        for g2 in grid:
            rep = compare(SourceParams.from_moduli(a2, g2), kind)
            rows.append(
                SweepRow(a2, g2, rep.p1, rep.p2, rep.sim_success, rep.sim_recycle, rep.sim_fail, rep.max_abs_deviation)
            )
    return rows


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for r in rows:
        w.writerow([repr(float(getattr(r, f))) for f in SWEEP_FIELDS])
    return buf.getvalue()


def sweep_to_json(rows: list[SweepRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2)
