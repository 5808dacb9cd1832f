"""End-to-end acceptance checks, shared by ``hyperecp verify`` and the tests.

Each check returns a :class:`Criterion`. Detail strings hold no timings so
that repeated runs print identical text.
"""

from __future__ import annotations

import io
import itertools
import math
import time
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from . import analysis
from .detection import (
    BELL,
    FAIL,
    FAIL_INTERVALS,
    GHZ,
    RECYCLE,
    SUCCESS,
    check_click_sufficiency,
    find_detector_bijection,
    run_protocol,
    signature_table,
)
from .fock import Mode, State, apply_mode_map, fidelity, monomial
from .optics import BS, HWP, PS, Circuit, PathSwap, apply_circuit, check_unitarity, element_map
from .protocol import (
    SourceParams,
    bell_input,
    bprime_flip,
    build_bell_circuit,
    build_ghz_circuit,
    feedforward_circuit,
    front_end,
    ghz_input,
)

EQ_TOL = 1e-12
PROB_TOL = 1e-9
NORM_TOL = 1e-12

PARAM_GRID = [
    SourceParams.from_moduli(0.5, 0.5),
    SourceParams.from_moduli(0.3, 0.4),
    SourceParams.from_moduli(0.1, 0.45),
    SourceParams.from_moduli(0.3, 0.4, phase_alpha=0.7, phase_gamma=-1.1, phase_beta=0.2, phase_delta=2.5),
]


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    detail: str
    budget: float
    elapsed: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.title}: {self.detail}"


# -- independent right-hand sides ----------------------------------------


def expand_product(factors: Sequence[Sequence[tuple[Mode, complex]]], scale: complex = 1.0) -> State:
    """Multiply out a product of linear forms in creation operators."""
    acc: dict = {}
    for choice in itertools.product(*factors):
        coeff = scale
        for _, c in choice:
            coeff *= c
        key = monomial(m for m, _ in choice)
        acc[key] = acc.get(key, 0j) + coeff
    return State(acc)


def _pol_amp(p: SourceParams, pol: str) -> complex:
    return p.alpha if pol == "H" else p.beta


def _path_amp(p: SourceParams, k: int) -> complex:
    return p.gamma if k == 1 else p.delta


def distributed_state(p: SourceParams, flipped: bool = False, ghz: bool = False) -> State:
    """Both sources after the front-end beam splitters, written out by hand.

    Photon B leaves its splitter as ``b_k + a_k'`` and A' as ``b_l - a_l'``.
    ``flipped`` applies the bit flips of B' directly to its mode labels.
    """
    total = State()
    flip = {"H": "V", "V": "H"}
    for pa, pb, k, l in itertools.product("HV", "HV", (1, 2), (1, 2)):
        c = _pol_amp(p, pa) * _pol_amp(p, pb) * _path_amp(p, k) * _path_amp(p, l) / 2
        bp = Mode(f"b{3 - l}'", flip[pb]) if flipped else Mode(f"b{l}'", pb)
        factors = [
            [(Mode(f"a{k}", pa), 1)],
            [(Mode(f"b{k}", pa), 1), (Mode(f"a{k}'", pa), 1)],
            [(Mode(f"b{l}", pb), 1), (Mode(f"a{l}'", pb), -1)],
            [(bp, 1)],
        ]
        if ghz:
            factors += [[(Mode(f"c{k}", pa), 1)], [(Mode(f"c{l}'", pb), 1)]]
        total = total + expand_product(factors, c)
    return total


def crit_equations() -> Criterion:
    worst = 1.0
    names = []
    for p, label in ((SourceParams.balanced(), "balanced"), (PARAM_GRID[3], "general")):
        after_bs = apply_circuit(bell_input(p), front_end())
        worst = min(worst, fidelity(after_bs, distributed_state(p)))
        after_flip = apply_circuit(after_bs, bprime_flip())
        worst = min(worst, fidelity(after_flip, distributed_state(p, flipped=True)))
        ghz = apply_circuit(ghz_input(p), front_end())
        worst = min(worst, fidelity(ghz, distributed_state(p, ghz=True)))
        names.append(label)
    ok = worst >= 1 - EQ_TOL
    return Criterion(1, "equation regression", ok, f"min fidelity 1-{1 - worst:.1e} ({', '.join(names)})", 1.0)


def crit_p1() -> Criterion:
    run = run_protocol(SourceParams.balanced(), BELL)
    ok = abs(run.success - 0.25) <= PROB_TOL
    return Criterion(2, "P1 reproduction", ok, f"success {run.success:.12f} (target 0.25)", 1.0)


def crit_p2() -> Criterion:
    rep = analysis.analytic_probs(SourceParams.balanced())
    worst = 0.0
    for a2, g2 in itertools.product(analysis.sweep_grid(0.05), repeat=2):
        r = analysis.analytic_probs(SourceParams.from_moduli(a2, g2))
        worst = max(worst, abs(r.p2 - r.p2_expanded))
    ok = abs(rep.p2 - 0.3125) <= EQ_TOL and worst <= EQ_TOL
    return Criterion(3, "P2 reproduction", ok, f"p2 {rep.p2:.15f}, max form gap {worst:.1e} over 100 points", 1.0)


def crit_sweep() -> Criterion:
    rows = analysis.sweep()
    dev_s = max(abs(r.sim_success - r.p1) for r in rows)
    dev_r = max(
        abs(r.sim_recycle - analysis.recycle_probability(SourceParams.from_moduli(r.alpha2, r.gamma2))) for r in rows
    )
    ok = len(rows) == 100 and dev_s <= PROB_TOL and dev_r <= PROB_TOL
    return Criterion(4, "closed form vs simulation", ok, f"{len(rows)} points, max dev success {dev_s:.1e}, recycle {dev_r:.1e}", 60.0)


def _bijection_text(mapping: dict[str, str]) -> str:
    moved = [f"{k}->{v}" for k, v in mapping.items() if k != v]
    return " ".join(moved) if moved else "identity"


def crit_table1() -> Criterion:
    details = []
    ok = True
    for p in (SourceParams.balanced(), PARAM_GRID[1]):
        run = run_protocol(p, BELL)
        mapping = find_detector_bijection(signature_table(run))
        fs = run.min_corrected_fidelity(SUCCESS)
        fr = run.min_corrected_fidelity(RECYCLE)
        ok &= mapping is not None and fs >= 1 - PROB_TOL and fr >= 1 - PROB_TOL
        if mapping is not None and not details:
            details.append(f"bijection {_bijection_text(mapping)}")
    details.append("feed-forward fidelities >= 1-1e-9" if ok else "mismatch")
    return Criterion(5, "Bell table equivalence", ok, "; ".join(details), 5.0)


def crit_intervals() -> Criterion:
    counts: Counter = Counter()
    ok = True
    allowed = {FAIL: FAIL_INTERVALS, SUCCESS: {0, 2}, RECYCLE: {0}}
    for p in PARAM_GRID:
        for o in run_protocol(p, BELL).outcomes:
            good = o.interval in allowed[o.cls]
            counts[(o.cls, good)] += 1
            ok &= good
    parts = [f"{cls} {counts[(cls, True)]}/{counts[(cls, True)] + counts[(cls, False)]}" for cls in (FAIL, SUCCESS, RECYCLE)]
    return Criterion(6, "fail-interval law", ok, ", ".join(parts), 5.0)


def crit_ghz() -> Criterion:
    ok = True
    notes = []
    for p in (SourceParams.balanced(), PARAM_GRID[3]):
        ghz = run_protocol(p, GHZ)
        bell = run_protocol(p, BELL)
        ok &= abs(ghz.success - analysis.p1(p)) <= PROB_TOL
        ok &= all(abs(ghz.aggregates[c] - bell.aggregates[c]) <= PROB_TOL for c in (SUCCESS, RECYCLE, FAIL))
        ok &= ghz.min_corrected_fidelity(SUCCESS) >= 1 - PROB_TOL
        ok &= ghz.min_corrected_fidelity(RECYCLE) >= 1 - PROB_TOL
        # a failing Alice/Bob pattern fails whatever Charlie sees
        by_ab: dict = {}
        for o in ghz.outcomes:
            by_ab.setdefault(o.record.timed_clicks(), set()).add(o.cls)
        for classes in by_ab.values():
            ok &= FAIL not in classes or classes == {FAIL}
        mapping = find_detector_bijection(signature_table(ghz))
        ok &= mapping is not None
        if not notes:
            notes.append(f"success {ghz.success:.12f}")
            notes.append(f"bijection {_bijection_text(mapping) if mapping else 'none'}")
    return Criterion(7, "GHZ suite", ok, ", ".join(notes), 30.0)


def random_params(n: int = 10, seed: int = 20230314) -> list[SourceParams]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        a2, g2 = rng.uniform(0.05, 0.95, size=2)
        phases = rng.uniform(-math.pi, math.pi, size=4)
        out.append(SourceParams.from_moduli(float(a2), float(g2), *map(float, phases)))
    return out


def crit_recycled() -> Criterion:
    worst = 0.0
    for p in random_params():
        rep = analysis.recycled_round_check(p)
        worst = max(worst, rep.deviation)
        # second-round success times recycle probability is the extra term of P2
        extra = analysis.analytic_probs(p).p2 - analysis.p1(p)
        worst = max(worst, abs(rep.simulated * analysis.recycle_probability(p) - extra))
    ok = worst <= PROB_TOL
    return Criterion(8, "recycled round", ok, f"10 draws, max dev {worst:.1e}", 30.0)


def catalogue() -> list:
    elements = list(build_bell_circuit()) + list(build_ghz_circuit())
    elements += list(feedforward_circuit({"ZS", "ZP"}))
    elements += [HWP("x", 0), HWP("x", 22.5), HWP("x", 45), PS("x"), BS("x", "y"), PathSwap("x", "y")]
    seen, out = set(), []
    for e in elements:
        if e not in seen:
            seen.add(e)
            out.append(e)
    return out


def hom_violations(circuits: Sequence[Circuit], tbins: int = 5) -> int:
    """Count balanced splitters that let two identical photons exit apart."""
    bad = 0
    splitters = {e for c in circuits for e in c if isinstance(e, BS)}
    for bs in sorted(splitters, key=lambda e: (e.x, e.y)):
        m = element_map(bs)
        for pol, t in itertools.product("HV", range(tbins)):
            out = apply_mode_map(State.single(Mode(bs.x, pol, t), Mode(bs.y, pol, t)), m)
            cross = monomial([Mode(bs.x, pol, t), Mode(bs.y, pol, t)])
            bad += cross in out.terms
    return bad


def crit_physics() -> Criterion:
    hom = hom_violations([build_bell_circuit(), build_ghz_circuit()])
    unit = max(check_unitarity(e).max_deviation for e in catalogue())
    unit_ok = all(check_unitarity(e).ok for e in catalogue())
    norm_dev = 0.0
    complete_dev = 0.0
    resolving_ok = True
    for p in PARAM_GRID[:2]:
        for kind, inp, circ in ((BELL, bell_input, build_bell_circuit), (GHZ, ghz_input, build_ghz_circuit)):
            norm_dev = max(norm_dev, abs(apply_circuit(inp(p), circ()).norm_sq - 1))
            run = run_protocol(p, kind)
            complete_dev = max(complete_dev, abs(run.total_probability - 1))
            try:
                check_click_sufficiency(run.outcomes)
            except RuntimeError:
                resolving_ok = False
            resolving_ok &= len({o.record.clicks for o in run.outcomes}) == len(run.outcomes)
    ok = hom == 0 and unit_ok and norm_dev <= NORM_TOL and complete_dev <= PROB_TOL and resolving_ok
    detail = (
        f"HOM violations {hom}, unitarity dev {unit:.1e}, norm dev {norm_dev:.1e}, "
        f"completeness dev {complete_dev:.1e}, click patterns unambiguous {resolving_ok}"
    )
    return Criterion(9, "physics properties", ok, detail, 30.0)


def crit_determinism() -> Criterion:
    from . import cli

    outputs = []
    for _ in range(2):
        buf = io.StringIO()
        for args in (
            ["run", "--protocol", "bell", "--alpha2", "0.3", "--gamma2", "0.4", "--format", "json"],
            ["run", "--protocol", "ghz", "--alpha2", "0.5", "--gamma2", "0.5"],
            ["table", "--protocol", "bell", "--format", "csv", "--compare-paper"],
        ):
            cli.main(args, out=buf)
        outputs.append(buf.getvalue())
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    return Criterion(10, "determinism", ok, f"repeat outputs identical ({len(outputs[0])} bytes)" if ok else "outputs differ", 30.0)


CRITERIA: list[Callable[[], Criterion]] = [
    crit_equations,
    crit_p1,
    crit_p2,
    crit_sweep,
    crit_table1,
    crit_intervals,
    crit_ghz,
    crit_recycled,
    crit_physics,
    crit_determinism,
]


def run_criterion(fn: Callable[[], Criterion]) -> Criterion:
    start = time.perf_counter()
    try:
        c = fn()
    except Exception as exc:  # a crash is a failed criterion, reported as such
        num = CRITERIA.index(fn) + 1 if fn in CRITERIA else 0
        return Criterion(num, fn.__name__, False, f"error: {type(exc).__name__}: {exc}", 0.0)
    c.elapsed = time.perf_counter() - start
    if c.elapsed > c.budget:
        c.passed = False
        c.detail += " (over time budget)"
    return c


def verify_all() -> list[Criterion]:
    return [run_criterion(fn) for fn in CRITERIA]
