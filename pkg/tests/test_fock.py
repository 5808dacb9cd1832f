import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperecp.fock import (
    IDENTITY,
    Mode,
    ModeMap,
    NonUnitaryError,
    State,
    apply_mode_map,
    bosonic_weight,
    expand,
    fidelity,
    inner_product,
    monomial,
    normalize,
    tensor,
)
from hyperecp.optics import BS, HWP, element_map

paths = st.sampled_from(["x", "y"])
pols = st.sampled_from(["H", "V"])
tbins = st.integers(0, 2)
modes = st.builds(Mode, paths, pols, tbins)
amps = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


def two_photon_states():
    term = st.tuples(st.lists(modes, min_size=2, max_size=2), amps)
    return st.lists(term, min_size=1, max_size=6).map(State.from_terms).filter(lambda s: s.norm_sq > 1e-6)


def test_monomial_is_sorted_and_counts_repeats():
    m = monomial([("y", "H"), ("x", "V"), ("y", "H")])
    assert m == ((Mode("x", "V", 0), 1), (Mode("y", "H", 0), 2))
    assert bosonic_weight(m) == 2


def test_double_occupancy_norm_includes_factorial():
    s = State.single(("x", "H"), ("x", "H"))
    assert s.norm_sq == pytest.approx(2.0)


def test_like_terms_collect_and_cancel():
    s = State.from_terms([([("x", "H")], 1.0), ([("x", "H")], -1.0), ([("y", "V")], 0.5)])
    assert len(s) == 1
    assert s.terms[monomial([("y", "V")])] == 0.5


def test_mixed_photon_numbers_rejected():
    with pytest.raises(ValueError):
        State.from_terms([([("x", "H")], 1.0), ([("x", "H"), ("y", "H")], 1.0)])


def test_tensor_rejects_shared_path():
    with pytest.raises(ValueError):
        tensor(State.single(("x", "H")), State.single(("x", "V")))


def test_fidelity_of_zero_state_rejected():
    with pytest.raises(ValueError):
        fidelity(State(), State.single(("x", "H")))


def test_nonunitary_map_rejected():
    lossy = ModeMap({("x", "H"): (("x", "H", 0, 0.5),)}, name="lossy")
    with pytest.raises(NonUnitaryError):
        apply_mode_map(State.single(("x", "H")), lossy)


def test_identity_map_is_noop():
    s = State.single(("x", "H"), ("y", "V"), amplitude=0.3j)
    assert apply_mode_map(s, IDENTITY) == s


def test_hom_bunching_amplitudes():
    out = apply_mode_map(State.single(("x", "H"), ("y", "H")), element_map(BS("x", "y")))
    assert monomial([("x", "H"), ("y", "H")]) not in out.terms
    assert out.terms[monomial([("x", "H"), ("x", "H")])] == pytest.approx(0.5)
    assert out.terms[monomial([("y", "H"), ("y", "H")])] == pytest.approx(-0.5)
    assert out.norm_sq == pytest.approx(1.0)


def test_distinguishable_photons_do_not_bunch():
    out = apply_mode_map(State.single(("x", "H"), ("y", "V")), element_map(BS("x", "y")))
    assert monomial([("x", "H"), ("y", "V")]) in out.terms


def test_matrix_of_bs_is_hadamard_block():
    mat, rows, cols = element_map(BS("x", "y")).matrix()
    assert mat.shape == (4, 4)
    assert np.allclose(mat.conj().T @ mat, np.eye(4))


@settings(max_examples=60, deadline=None)
@given(two_photon_states())
def test_norm_preserved_by_bs_and_hwp(s):
    for e in (BS("x", "y"), HWP("x", 22.5), HWP("y", 45)):
        out = apply_mode_map(s, element_map(e))
        assert out.norm_sq == pytest.approx(s.norm_sq, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(two_photon_states())
def test_inverse_restores_state(s):
    m = element_map(BS("x", "y"))
    back = apply_mode_map(apply_mode_map(s, m), m.inverse())
    assert fidelity(back, s) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(two_photon_states())
def test_canonical_form_is_idempotent(s):
    again = State.from_terms([(expand(mono), a) for mono, a in s])
    assert again == s


@settings(max_examples=40, deadline=None)
@given(two_photon_states(), two_photon_states())
def test_inner_product_is_hermitian(s, t):
    assert inner_product(s, t) == pytest.approx(inner_product(t, s).conjugate(), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_tensor_norm_multiplies(a, b):
    s1 = State.single(("x", "H"), amplitude=a)
    s2 = State.single(("y", "V"), ("y", "H"), amplitude=b)
    assert tensor(s1, s2).norm_sq == pytest.approx(s1.norm_sq * s2.norm_sq)


def test_normalize():
    s = normalize(State.from_terms([([("x", "H")], 3.0), ([("y", "H")], 4.0j)]))
    assert math.isclose(s.norm_sq, 1.0)
