"""Time-tagged detection, outcome classification and signature tables.

Detectors cannot resolve photon number: any number of photons reaching the
same detector in the same time bin gives one click. Arrival times of Alice's
and Bob's photons are recorded relative to the earliest of them. Two Fock
patterns that differ only by a common shift of those arrival times are the
same detection event, so their amplitudes add coherently before the
projection. Charlie's clicks carry no timing information.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from functools import lru_cache

from .fock import Monomial, State, apply_mode_map, bosonic_weight, expand, fidelity, monomial
from .optics import element_map
from .protocol import (
    Reference,
    SourceParams,
    bell_input,
    build_bell_circuit,
    build_ghz_circuit,
    feed_forward,
    ghz_input,
    reference_family,
)

ALICE, BOB, CHARLIE = "Alice", "Bob", "Charlie"

MATCH_TOL = 1e-9

SUCCESS, RECYCLE, FAIL = "Success", "Recycle", "Fail"

BELL, GHZ = "bell", "ghz"

FAIL_INTERVALS = frozenset({1, 3})
SUCCESS_INTERVALS = frozenset({0, 2})


class ClassificationError(RuntimeError):
    """An outcome matched no reference or broke the time-interval rule."""


@dataclass(frozen=True)
class DetectorAssignment:
    """Which (path, polarisation) rail feeds which detector, and who owns it."""

    rails: Mapping[tuple[str, str], str]
    sides: Mapping[str, str]
    timed: frozenset[str] = frozenset({ALICE, BOB})

    def __post_init__(self):
        ids = list(self.rails.values())
        if len(set(ids)) != len(ids):
            raise ValueError("detector assignment is not injective")
        missing = set(ids) - set(self.sides)
        if missing:
            raise ValueError(f"detectors without a side: {sorted(missing)}")

    @property
    def order(self) -> tuple[str, ...]:
        return tuple(self.rails.values())

    @property
    def paths(self) -> frozenset[str]:
        return frozenset(p for p, _ in self.rails)

    def detectors(self, side: str) -> tuple[str, ...]:
        return tuple(d for d in self.order if self.sides[d] == side)


def bell_detectors() -> DetectorAssignment:
    """D1..D4 on Alice's rails (a1'H, a1'V, a2'H, a2'V), D5..D8 on Bob's (b1, b2)."""
    rails = {}
    for i, (rail, pol) in enumerate(
        [("d1", "H"), ("d2", "V"), ("d3", "H"), ("d4", "V"), ("d5", "H"), ("d6", "V"), ("d7", "H"), ("d8", "V")],
        start=1,
    ):
        rails[(rail, pol)] = f"D{i}"
    sides = {f"D{i}": ALICE if i <= 4 else BOB for i in range(1, 9)}
    return DetectorAssignment(rails, sides)


def ghz_detectors() -> DetectorAssignment:
    bell = bell_detectors()
    rails = dict(bell.rails)
    rails.update({("dh1", "H"): "DH1", ("dv1", "V"): "DV1", ("dh2", "H"): "DH2", ("dv2", "V"): "DV2"})
    sides = dict(bell.sides)
    sides.update({d: CHARLIE for d in ("DH1", "DV1", "DH2", "DV2")})
    return DetectorAssignment(rails, sides)


@dataclass(frozen=True)
class ClickRecord:
    """Clicks as ``(detector, time)`` pairs, in detector order."""

    clicks: tuple[tuple[str, int], ...]
    sides: tuple[str, ...]

    def timed_clicks(self, timed: Iterable[str] = (ALICE, BOB)) -> tuple[tuple[str, int], ...]:
        timed = set(timed)
        return tuple(c for c, s in zip(self.clicks, self.sides) if s in timed)

    def untimed(self, timed: Iterable[str] = (ALICE, BOB)) -> tuple[str, ...]:
        timed = set(timed)
        return tuple(d for (d, _), s in zip(self.clicks, self.sides) if s not in timed)

    def interval(self) -> int:
        times = [t for _, t in self.timed_clicks()]
        return max(times) - min(times) if times else 0

    def kind(self) -> str:
        """``single``, ``same-side``, ``cross`` (both at zero interval) or ``delayed``."""
        timed = [(c, s) for c, s in zip(self.clicks, self.sides) if s in (ALICE, BOB)]
        if self.interval() > 0:
            return "delayed"
        if len(timed) == 1:
            return "single"
        return "same-side" if len({s for _, s in timed}) == 1 else "cross"

    def label(self) -> str:
        return format_clicks(self.timed_clicks())


def format_clicks(clicks: Iterable[tuple[str, int]]) -> str:
    """``D1^2t,D2`` style: a superscript marks a relative delay."""
    parts = []
    for d, t in clicks:
        parts.append(d if t == 0 else f"{d}^{'' if t == 1 else t}t")
    return ",".join(parts)


def parse_clicks(text: str) -> frozenset[tuple[str, int]]:
    out = set()
    for tok in text.split(","):
        tok = tok.strip()
        if "^" in tok:
            d, t = tok.split("^")
            k = t[:-1] or "1"
            out.add((d, int(k)))
        else:
            out.add((tok, 0))
    return frozenset(out)


def format_feedforward(ff: Iterable[str] | None) -> str:
    ff = sorted(ff or ())
    return ",".join(ff) if ff else "none"


@dataclass(frozen=True)
class Outcome:
    record: ClickRecord
    probability: float
    collapsed: State
    pattern: Monomial
    cls: str | None = None
    reference: Reference | None = None
    feedforward: frozenset[str] | None = None
    match_fidelity: float | None = None
    corrected_fidelity: float | None = None

    @property
    def interval(self) -> int:
        return self.record.interval()


def measure(s: State, d: DetectorAssignment, n_measured: int | None = None) -> list[Outcome]:
    """Enumerate every click outcome of the photons on ``d``'s rails.

    Returns outcomes in a deterministic order, each with its probability
    and the normalised state of the unmeasured photons.
    """
    total = s.norm_sq
    if total <= 0:
        raise ValueError("cannot measure the zero state")
    measured_paths = d.paths
    groups: dict[Monomial, dict[Monomial, complex]] = {}
    for mono, amp in s:
        seen, kept = [], []
        for mode in expand(mono):
            if mode.path in measured_paths:
                if (mode.path, mode.pol) not in d.rails:
                    raise ValueError(f"stray photon in {mode} on a detector path with no detector")
                seen.append(mode)
            else:
                kept.append(mode)
        if n_measured is not None and len(seen) != n_measured:
            raise ValueError(f"expected {n_measured} measured photons, term has {len(seen)}")
        timed = [m.tbin for m in seen if d.sides[d.rails[(m.path, m.pol)]] in d.timed]
        shift = min(timed, default=0)
        pattern = monomial(
            m.shifted(-shift) if d.sides[d.rails[(m.path, m.pol)]] in d.timed else m for m in seen
        )
        bucket = groups.setdefault(pattern, {})
        key = monomial(kept)
        bucket[key] = bucket.get(key, 0j) + amp

    order = {det: i for i, det in enumerate(d.order)}
    outcomes = []
    for pattern, kept_terms in groups.items():
        collapsed = State(kept_terms)
        weight = bosonic_weight(pattern) * collapsed.norm_sq
        if weight <= 0:
            continue
        clicks = sorted({(d.rails[(m.path, m.pol)], m.tbin) for m, _ in pattern}, key=lambda c: (order[c[0]], c[1]))
        record = ClickRecord(tuple(clicks), tuple(d.sides[c[0]] for c in clicks))
        outcomes.append(
            Outcome(record, weight / total, collapsed * (1 / math.sqrt(collapsed.norm_sq)), pattern)
        )
    outcomes.sort(key=lambda o: _record_key(o.record, order))
    return outcomes


def _record_key(record: ClickRecord, order: Mapping[str, int]):
    return tuple((order[d], t) for d, t in record.clicks)


def classify(
    o: Outcome, refs: Mapping[Reference, State], tol: float = MATCH_TOL
) -> tuple[str, Reference | None, frozenset[str] | None, float]:
    """Match the collapsed state against the references.

    Returns ``(class, reference, feedforward, best fidelity)``. The
    time-interval rule is checked against the fidelity verdict; any
    disagreement raises :class:`ClassificationError`.
    """
    best_ref, best_fid = None, -1.0
    for ref, state in refs.items():
        f = fidelity(o.collapsed, state)
        if f > best_fid:
            best_ref, best_fid = ref, f
    interval, kind = o.record.interval(), o.record.kind()
    label = o.record.label()
    if best_fid >= 1 - tol:
        if best_ref.is_target:
            if not (interval == 2 or (interval == 0 and kind == "cross")):
                raise ClassificationError(f"{label}: matches {best_ref} but interval {interval} ({kind})")
            return SUCCESS, best_ref, best_ref.feedforward, best_fid
        if not (interval == 0 and kind in ("single", "same-side")):
            raise ClassificationError(f"{label}: matches {best_ref} but interval {interval} ({kind})")
        return RECYCLE, best_ref, best_ref.feedforward, best_fid
    if interval in FAIL_INTERVALS:
        return FAIL, None, None, best_fid
    raise ClassificationError(f"unclassified outcome {label}: best fidelity {best_fid:.6f}, interval {interval}")


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str
    detectors: DetectorAssignment
    target_family: str
    residual_family: str
    n_measured: int


def protocol_spec(kind: str) -> ProtocolSpec:
    if kind == BELL:
        return ProtocolSpec(BELL, bell_detectors(), "phi0", "phi1", 2)
    if kind == GHZ:
        return ProtocolSpec(GHZ, ghz_detectors(), "psi0", "psi1", 3)
    raise ValueError(f"unknown protocol {kind!r}, expected 'bell' or 'ghz'")


def references(p: SourceParams, kind: str) -> dict[Reference, State]:
    spec = protocol_spec(kind)
    refs = reference_family(spec.target_family)
    refs.update(reference_family(spec.residual_family, p.recycled()))
    return refs


@lru_cache(maxsize=None)
def _compiled(kind: str) -> tuple:
    circuit = build_bell_circuit() if kind == BELL else build_ghz_circuit()
    return tuple(element_map(e) for e in circuit)


def evolve(p: SourceParams, kind: str) -> State:
    """Input state of both sources pushed through the full circuit."""
    s = bell_input(p) if kind == BELL else ghz_input(p)
    for m in _compiled(kind):
        s = apply_mode_map(s, m)
    return s


@dataclass
class ProtocolRun:
    params: SourceParams
    kind: str
    outcomes: list[Outcome]
    norm_sq: float

    @property
    def aggregates(self) -> dict[str, float]:
        agg = {SUCCESS: 0.0, RECYCLE: 0.0, FAIL: 0.0}
        for o in self.outcomes:
            agg[o.cls] += o.probability
        return agg

    @property
    def success(self) -> float:
        return self.aggregates[SUCCESS]

    @property
    def recycle(self) -> float:
        return self.aggregates[RECYCLE]

    @property
    def fail(self) -> float:
        return self.aggregates[FAIL]

    @property
    def total_probability(self) -> float:
        return math.fsum(o.probability for o in self.outcomes)

    def of_class(self, cls: str) -> list[Outcome]:
        return [o for o in self.outcomes if o.cls == cls]

    def min_corrected_fidelity(self, cls: str) -> float:
        fids = [o.corrected_fidelity for o in self.of_class(cls)]
        return min(fids) if fids else 1.0


def run_protocol(p: SourceParams, kind: str = BELL, match_tol: float = MATCH_TOL) -> ProtocolRun:
    """Simulate one concentration round end to end and classify every outcome."""
    spec = protocol_spec(kind)
    final = evolve(p, kind)
    refs = references(p, kind)
    plus = {
        True: Reference(spec.target_family),
        False: Reference(spec.residual_family),
    }
    outcomes = []
    for o in measure(final, spec.detectors, spec.n_measured):
        cls, ref, ff, fid = classify(o, refs, match_tol)
        corrected = None
        if ref is not None:
            fixed = feed_forward(o.collapsed, ff)
            corrected = fidelity(fixed, refs[plus[ref.is_target]])
        outcomes.append(replace(o, cls=cls, reference=ref, feedforward=ff, match_fidelity=fid, corrected_fidelity=corrected))
    check_click_sufficiency(outcomes)
    return ProtocolRun(p, kind, outcomes, final.norm_sq)


def check_click_sufficiency(outcomes: Sequence[Outcome]) -> None:
    """Raise if one click record could stem from outcomes of different classes."""
    seen: dict[tuple, tuple] = {}
    for o in outcomes:
        verdict = (o.cls, o.reference)
        prev = seen.setdefault(o.record.clicks, verdict)
        if prev != verdict:
            raise ClassificationError(
                f"click record {o.record.label()} is ambiguous without photon-number resolution: {prev} vs {verdict}"
            )


# -- signature tables ------------------------------------------------------


@dataclass(frozen=True)
class SignatureRow:
    pattern: str
    charlie: str
    interval: int
    cls: str
    reference: str
    feedforward: str
    probability: float

    @property
    def key(self) -> tuple[frozenset, str]:
        return parse_clicks(self.pattern), self.charlie


@dataclass
class SignatureTable:
    kind: str
    rows: list[SignatureRow]

    def fields(self) -> list[str]:
        names = ["pattern", "interval", "class", "reference", "feedforward", "probability"]
        if self.kind == GHZ:
            names.insert(1, "charlie")
        return names

    def records(self) -> list[dict]:
        out = []
        for r in self.rows:
            d = {
                "pattern": r.pattern,
                "charlie": r.charlie,
                "interval": r.interval,
                "class": r.cls,
                "reference": r.reference,
                "feedforward": r.feedforward,
                "probability": r.probability,
            }
            out.append({k: d[k] for k in self.fields()})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.fields(), lineterminator="\n")
        w.writeheader()
        for rec in self.records():
            rec["probability"] = repr(rec["probability"])
            w.writerow(rec)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"protocol": self.kind, "rows": self.records()}, indent=2)

    def heralded(self) -> dict[tuple[frozenset, str], tuple[str, str]]:
        """Success and recycle rows as ``(clicks, charlie) -> (reference, feedforward)``."""
        return {r.key: (r.reference, r.feedforward) for r in self.rows if r.cls != FAIL}

    def totals(self) -> dict[str, float]:
        agg = {SUCCESS: 0.0, RECYCLE: 0.0, FAIL: 0.0}
        for r in self.rows:
            agg[r.cls] += r.probability
        return agg


def signature_table(run: ProtocolRun) -> SignatureTable:
    det = protocol_spec(run.kind).detectors
    order = {d: i for i, d in enumerate(det.order)}
    merged: dict[tuple, list] = {}
    for o in run.outcomes:
        row = merged.setdefault(o.record.clicks, [o, 0.0])
        row[1] += o.probability
    rows = []
    for clicks in sorted(merged, key=lambda c: tuple((order[d], t) for d, t in c)):
        o, prob = merged[clicks]
        rows.append(
            SignatureRow(
                pattern=o.record.label(),
                charlie=",".join(o.record.untimed()),
                interval=o.interval,
                cls=o.cls,
                reference=o.reference.label if o.reference else "",
                feedforward=format_feedforward(o.feedforward) if o.cls != FAIL else "",
                probability=prob,
            )
        )
    rows.sort(key=lambda r: (r.charlie, tuple((order[d], t) for d, t in sorted(parse_clicks(r.pattern), key=lambda c: (order[c[0]], c[1])))))
    return SignatureTable(run.kind, rows)


def derive_signature_table(p: SourceParams, kind: str = BELL) -> SignatureTable:
    return signature_table(run_protocol(p, kind))


# Published signature tables, transcribed row by row.

_SINGLES = [f"D{i}" for i in range(1, 9)]
_PAIRS_12 = ["D1,D2", "D3,D4", "D5,D6", "D7,D8"]
_PAIRS_14 = ["D1,D4", "D2,D3", "D5,D8", "D6,D7"]
_PAIRS_13 = ["D1,D3", "D2,D4", "D5,D7", "D6,D8"]
_CROSS_18 = ["D1,D8", "D2,D7", "D3,D6", "D4,D5"]
_CROSS_16 = ["D1,D6", "D2,D5", "D3,D8", "D4,D7"]
_DELAYED_ODD = [
    "D1^2t,D2", "D1,D2^2t", "D3^2t,D4", "D3,D4^2t", "D1^2t,D3", "D1,D3^2t", "D2^2t,D4", "D2,D4^2t",
    "D5^2t,D6", "D5,D6^2t", "D7^2t,D8", "D7,D8^2t", "D5^2t,D7", "D5,D7^2t", "D6^2t,D8", "D6,D8^2t",
]  # fmt: skip
_DELAYED_EVEN = [
    "D1^2t,D1", "D2^2t,D2", "D3^2t,D3", "D4^2t,D4", "D5^2t,D5", "D6^2t,D6", "D7^2t,D7", "D8^2t,D8",
    "D1^2t,D4", "D1,D4^2t", "D2^2t,D3", "D2,D3^2t", "D5^2t,D8", "D5,D8^2t", "D6^2t,D7", "D6,D7^2t",
]  # fmt: skip

BELL_TABLE = [
    ("phi1++", "none", _SINGLES),
    ("phi1-+", "ZP", _PAIRS_12),
    ("phi1+-", "ZS", _PAIRS_14),
    ("phi1--", "ZP,ZS", _PAIRS_13),
    ("phi0+-", "ZS", _CROSS_18),
    ("phi0-+", "ZP", _CROSS_16),
    ("phi0--", "ZP,ZS", _DELAYED_ODD),
    ("phi0++", "none", _DELAYED_EVEN),
]

# (reference, feedforward, [(Charlie's detector, Alice/Bob patterns), ...])
GHZ_TABLE = [
    ("psi1++", "none", [("DH1", _SINGLES), ("DH2", _PAIRS_14), ("DV1", _PAIRS_12), ("DV2", _PAIRS_13)]),
    ("psi1+-", "ZS", [("DH2", _SINGLES), ("DH1", _PAIRS_14), ("DV2", _PAIRS_12), ("DV1", _PAIRS_13)]),
    ("psi1-+", "ZP", [("DV1", _SINGLES), ("DV2", _PAIRS_14), ("DH1", _PAIRS_12), ("DH2", _PAIRS_13)]),
    ("psi1--", "ZP,ZS", [("DV2", _SINGLES), ("DV1", _PAIRS_14), ("DH2", _PAIRS_12), ("DH1", _PAIRS_13)]),
    ("psi0++", "none", [("DH2", _CROSS_18), ("DV1", _CROSS_16), ("DH1", _DELAYED_EVEN), ("DV2", _DELAYED_ODD)]),
    ("psi0+-", "ZS", [("DH1", _CROSS_18), ("DV2", _CROSS_16), ("DH2", _DELAYED_EVEN), ("DV1", _DELAYED_ODD)]),
    ("psi0-+", "ZP", [("DV2", _CROSS_18), ("DH1", _CROSS_16), ("DV1", _DELAYED_EVEN), ("DH2", _DELAYED_ODD)]),
    ("psi0--", "ZP,ZS", [("DV1", _CROSS_18), ("DH2", _CROSS_16), ("DV2", _DELAYED_EVEN), ("DH1", _DELAYED_ODD)]),
]


def expected_signatures(kind: str) -> dict[tuple[frozenset, str], tuple[str, str]]:
    """Published heralded rows as ``(clicks, charlie) -> (reference, feedforward)``."""
    out: dict[tuple[frozenset, str], tuple[str, str]] = {}

    def put(key, value):
        if key in out and out[key] != value:
            raise ValueError(f"conflicting published rows for {key}")
        out[key] = value

    if kind == BELL:
        for ref, ff, patterns in BELL_TABLE:
            for pat in patterns:
                put((parse_clicks(pat), ""), (ref, ff))
    elif kind == GHZ:
        for ref, ff, blocks in GHZ_TABLE:
            for charlie, patterns in blocks:
                for pat in patterns:
                    put((parse_clicks(pat), charlie), (ref, ff))
    else:
        raise ValueError(f"unknown protocol {kind!r}")
    return out


_CHARLIE_PERMS = (
    {},
    {"DH1": "DH2", "DH2": "DH1"},
    {"DV1": "DV2", "DV2": "DV1"},
    {"DH1": "DH2", "DH2": "DH1", "DV1": "DV2", "DV2": "DV1"},
)


def _relabel(table, mapping):
    return {
        (frozenset((mapping.get(d, d), t) for d, t in clicks), mapping.get(ch, ch)): v
        for (clicks, ch), v in table.items()
    }


def find_detector_bijection(table: SignatureTable) -> dict[str, str] | None:
    """Side-preserving detector relabelling that maps the derived heralded
    rows onto the published ones, or ``None`` if there is none.

    Alice's and Bob's detectors are permuted independently; Charlie's may be
    swapped within each polarisation rail. Candidates are tried in a fixed
    order, so the answer is deterministic.
    """
    derived = table.heralded()
    expected = expected_signatures(table.kind)
    if len(derived) != len(expected):
        return None
    alice = [f"D{i}" for i in range(1, 5)]
    bob = [f"D{i}" for i in range(5, 9)]
    charlie = _CHARLIE_PERMS if table.kind == GHZ else ({},)
    for pa in itertools.permutations(alice):
        for pb in itertools.permutations(bob):
            base = dict(zip(alice + bob, pa + pb))
            for pc in charlie:
                mapping = {**base, **pc}
                if _relabel(derived, mapping) == expected:
                    return mapping
    return None
