from collections import Counter
from dataclasses import replace

import pytest

from hyperecp.detection import (
    ALICE,
    BELL,
    BOB,
    FAIL,
    GHZ,
    RECYCLE,
    SUCCESS,
    ClassificationError,
    ClickRecord,
    DetectorAssignment,
    Outcome,
    bell_detectors,
    classify,
    derive_signature_table,
    expected_signatures,
    find_detector_bijection,
    format_clicks,
    format_feedforward,
    measure,
    parse_clicks,
    run_protocol,
)
from hyperecp.fock import Mode, State, monomial
from hyperecp.optics import BS, apply_circuit
from hyperecp.protocol import Reference, SourceParams, reference_family

TWO_DET = DetectorAssignment({("x", "H"): "D1", ("y", "H"): "D2"}, {"D1": ALICE, "D2": BOB})


def test_click_text_roundtrip():
    clicks = (("D1", 2), ("D2", 0), ("D3", 1))
    text = format_clicks(clicks)
    assert text == "D1^2t,D2,D3^t"
    assert parse_clicks(text) == frozenset(clicks)
    assert format_feedforward(None) == "none"
    assert format_feedforward({"ZS", "ZP"}) == "ZP,ZS"


def test_detector_assignment_must_be_injective():
    with pytest.raises(ValueError):
        DetectorAssignment({("x", "H"): "D1", ("y", "H"): "D1"}, {"D1": ALICE})


def test_hom_pair_gives_single_detector_clicks():
    s = apply_circuit(State.single(("x", "H"), ("y", "H")), [BS("x", "y")])
    outs = measure(s, TWO_DET)
    assert [o.record.clicks for o in outs] == [(("D1", 0),), (("D2", 0),)]
    assert [o.probability for o in outs] == pytest.approx([0.5, 0.5])


def test_common_time_shift_adds_coherently():
    # the same pattern one bin later interferes with the earlier one
    s = State.from_terms([([Mode("x", "H", 0), Mode("y", "H", 1)], 1.0), ([Mode("x", "H", 1), Mode("y", "H", 2)], -1.0)])
    assert measure(s, TWO_DET) == []
    with pytest.raises(ValueError):
        measure(State(), TWO_DET)


def test_relative_times_reported():
    s = State.single(Mode("x", "H", 3), Mode("y", "H", 5))
    (o,) = measure(s, TWO_DET)
    assert o.record.clicks == (("D1", 0), ("D2", 2))
    assert o.interval == 2
    assert o.record.kind() == "delayed"


def test_unmeasured_photons_collapse():
    s = State.from_terms([([("x", "H"), ("k", "H")], 0.6), ([("y", "H"), ("k", "V")], 0.8)])
    outs = {o.record.label(): o for o in measure(s, TWO_DET)}
    assert outs["D1"].collapsed == State.single(("k", "H"))
    assert outs["D2"].probability == pytest.approx(0.64)


def _outcome(clicks, sides, state):
    return Outcome(ClickRecord(clicks, sides), 1.0, state, monomial([]))


def test_classify_rejects_target_at_odd_interval():
    refs = reference_family("phi0")
    target = refs[Reference("phi0")]
    o = _outcome((("D1", 0), ("D2", 1)), (ALICE, ALICE), target)
    with pytest.raises(ClassificationError):
        classify(o, refs)


def test_classify_fail_and_success():
    refs = reference_family("phi0")
    target = refs[Reference("phi0", -1, 1)]
    cls, ref, ff, fid = classify(_outcome((("D1", 0), ("D8", 0)), (ALICE, BOB), target), refs)
    assert (cls, ref.label, ff) == (SUCCESS, "phi0-+", frozenset({"ZP"}))
    junk = State.single(("a1", "H"), ("b1'", "V"))
    cls, *_ = classify(_outcome((("D1", 0), ("D2", 3)), (ALICE, ALICE), junk), refs)
    assert cls == FAIL


def test_balanced_bell_run():
    run = run_protocol(SourceParams.balanced(), BELL)
    assert run.total_probability == pytest.approx(1.0, abs=1e-12)
    assert run.success == pytest.approx(0.25, abs=1e-12)
    assert run.recycle == pytest.approx(0.25, abs=1e-12)
    assert Counter(o.cls for o in run.outcomes) == {SUCCESS: 40, RECYCLE: 20, FAIL: 128}
    assert run.min_corrected_fidelity(SUCCESS) >= 1 - 1e-9


def test_bell_table_contents():
    table = derive_signature_table(SourceParams.from_moduli(0.3, 0.4))
    by_ref = Counter(r.reference for r in table.rows if r.cls == SUCCESS)
    assert by_ref == {"phi0++": 16, "phi0--": 16, "phi0+-": 4, "phi0-+": 4}
    assert all(r.interval in (1, 3) for r in table.rows if r.cls == FAIL)
    assert table.totals()[SUCCESS] == pytest.approx(0.2016)
    assert find_detector_bijection(table) == {
        "D1": "D1", "D2": "D2", "D3": "D4", "D4": "D3", "D5": "D5", "D6": "D6", "D7": "D8", "D8": "D7"
    }


def test_bijection_absent_for_tampered_table():
    table = derive_signature_table(SourceParams.balanced())
    i = next(i for i, r in enumerate(table.rows) if r.reference == "phi0+-")
    table.rows[i] = replace(table.rows[i], reference="phi0++")
    assert find_detector_bijection(table) is None


def test_table_serialisation():
    table = derive_signature_table(SourceParams.balanced())
    csv_text = table.to_csv()
    assert csv_text.splitlines()[0] == "pattern,interval,class,reference,feedforward,probability"
    assert len(csv_text.splitlines()) == len(table.rows) + 1
    assert '"protocol": "bell"' in table.to_json()


def test_published_tables_consistent():
    assert len(expected_signatures(BELL)) == 8 + 4 * 3 + 4 * 2 + 32
    assert len(expected_signatures(GHZ)) == 4 * len(expected_signatures(BELL))
    with pytest.raises(ValueError):
        expected_signatures("w")


def test_ghz_fail_ignores_charlie():
    run = run_protocol(SourceParams.from_moduli(0.3, 0.4), GHZ)
    classes = {}
    for o in run.outcomes:
        classes.setdefault(o.record.timed_clicks(), set()).add(o.cls)
    assert all(c == {FAIL} for c in classes.values() if FAIL in c)
    assert run.success == pytest.approx(0.2016, abs=1e-9)


def test_unknown_protocol():
    with pytest.raises(ValueError):
        run_protocol(SourceParams.balanced(), "w")
