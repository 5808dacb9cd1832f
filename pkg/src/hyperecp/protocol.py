"""Source states, concentration circuits, reference states and corrections.

Photon naming: the first source emits photons A and B (paths ``a1, a2`` and
``b1, b2``), the second emits A' and B' (``a1', a2'``, ``b1', b2'``). For the
GHZ version photons C and C' are added on ``c1, c2`` and ``c1', c2'``.
Photons A' and B (and C' for GHZ) are measured; A and B' (and C) are kept.
"""

from __future__ import annotations

import cmath
import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

from .fock import Mode, State, normalize, tensor
from .optics import BS, HWP, PBS, PS, Circuit, ConditionalDelay, PathSwap, apply_circuit

NORM_TOL = 1e-12

ZS = "ZS"
ZP = "ZP"

# Alice delays photon A' and Bob delays photon B, in units of the base delay.
ALICE_DELAYS = {("a1'", "H"): 1, ("a1'", "V"): 2, ("a2'", "V"): 3, ("a2'", "H"): 4}
BOB_DELAYS = {("b2", "V"): 1, ("b2", "H"): 2, ("b1", "H"): 3, ("b1", "V"): 4}

# Terminal PBS per measured path: (input, vacuum port, H rail, V rail).
ALICE_RAILS = (("a1'", "d1", "d2"), ("a2'", "d3", "d4"))
BOB_RAILS = (("b1", "d5", "d6"), ("b2", "d7", "d8"))
CHARLIE_RAILS = (("c1'", "dh1", "dv1"), ("c2'", "dh2", "dv2"))

BPRIME_PATHS = ("b1'", "b2'")


@dataclass(frozen=True)
class SourceParams:
    """Amplitudes of a partially entangled source.

    ``alpha, beta`` weight the polarisation terms HH and VV, ``gamma,
    delta`` the spatial terms with index 1 and 2.
    """

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        pol = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        spa = abs(self.gamma) ** 2 + abs(self.delta) ** 2
        if abs(pol - 1) > NORM_TOL or abs(spa - 1) > NORM_TOL:
            raise ValueError(
                f"unnormalised amplitudes: |alpha|^2+|beta|^2 = {pol!r}, "
                f"|gamma|^2+|delta|^2 = {spa!r}"
            )

    @classmethod
    def from_moduli(
        cls,
        alpha2: float,
        gamma2: float,
        phase_alpha: float = 0.0,
        phase_gamma: float = 0.0,
        phase_beta: float = 0.0,
        phase_delta: float = 0.0,
    ) -> SourceParams:
        """Build from ``|alpha|^2`` and ``|gamma|^2`` plus optional phases."""
        for name, v in (("alpha2", alpha2), ("gamma2", gamma2)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        return cls(
            math.sqrt(alpha2) * cmath.exp(1j * phase_alpha),
            math.sqrt(1 - alpha2) * cmath.exp(1j * phase_beta),
            math.sqrt(gamma2) * cmath.exp(1j * phase_gamma),
            math.sqrt(1 - gamma2) * cmath.exp(1j * phase_delta),
        )

    @classmethod
    def balanced(cls) -> SourceParams:
        return cls.from_moduli(0.5, 0.5)

    @property
    def alpha2(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def gamma2(self) -> float:
        return abs(self.gamma) ** 2

    @property
    def pol_recycle_factor(self) -> float:
        return abs(self.alpha) ** 4 + abs(self.beta) ** 4

    @property
    def spatial_recycle_factor(self) -> float:
        return abs(self.gamma) ** 4 + abs(self.delta) ** 4

    def recycled(self) -> RecycledParams:
        """Amplitudes of the residual state left on a recycle outcome."""
        np_, ns = math.sqrt(self.pol_recycle_factor), math.sqrt(self.spatial_recycle_factor)
        return RecycledParams(
            self.alpha**2 / np_, self.beta**2 / np_, self.gamma**2 / ns, self.delta**2 / ns
        )


class RecycledParams(SourceParams):
    """Primed amplitudes ``alpha' = alpha^2 / sqrt(|alpha|^4 + |beta|^4)`` etc."""


def _hyper_state(
    pol_terms: Sequence[tuple[complex, str]],
    path_terms: Sequence[tuple[complex, Sequence[str]]],
) -> State:
    # pol_terms[i] = (amp, "HVH"), path_terms[j] = (amp, ("a1", "b2'", "c1"))
    terms = []
    for (cp, pols), (cs, paths) in itertools.product(pol_terms, path_terms):
        terms.append(([Mode(path, pol) for path, pol in zip(paths, pols)], cp * cs))
    return State.from_terms(terms)


def _paths(photons: Sequence[str], index: int, prime: bool) -> tuple[str, ...]:
    return tuple(f"{x}{index}{chr(39) if prime else ''}" for x in photons)


def make_bell_source(p: SourceParams, photons: Sequence[str] = ("a", "b"), prime: bool = False) -> State:
    """``(alpha|HH> + beta|VV>) (gamma|x1 y1> + delta|x2 y2>)`` for photons x, y."""
    if len(photons) != 2:
        raise ValueError("a Bell source has two photons")
    return _make_source(p, photons, prime)


def make_ghz_source(
    p: SourceParams, photons: Sequence[str] = ("a", "b", "c"), prime: bool = False
) -> State:
    if len(photons) != 3:
        raise ValueError("a GHZ source has three photons")
    return _make_source(p, photons, prime)


def _make_source(p: SourceParams, photons: Sequence[str], prime: bool) -> State:
    if not isinstance(p, SourceParams):
        raise TypeError("expected SourceParams")
    n = len(photons)
    return _hyper_state(
        [(p.alpha, "H" * n), (p.beta, "V" * n)],
        [(p.gamma, _paths(photons, 1, prime)), (p.delta, _paths(photons, 2, prime))],
    )


def bell_input(p: SourceParams) -> State:
    """Both sources, before any optics."""
    return tensor(make_bell_source(p), make_bell_source(p, prime=True))


def ghz_input(p: SourceParams) -> State:
    return tensor(make_ghz_source(p), make_ghz_source(p, prime=True))


# -- circuits ---------------------------------------------------------------


def front_end() -> Circuit:
    """Mix B with A' on each spatial index (before distribution)."""
    return Circuit((BS("b1", "a1'"), BS("b2", "a2'")))


def bprime_flip() -> Circuit:
    """Polarisation and spatial bit flip of photon B'."""
    return Circuit((HWP("b1'", 45), HWP("b2'", 45), PathSwap("b1'", "b2'")))


def delay_stage() -> Circuit:
    return Circuit((ConditionalDelay(ALICE_DELAYS), ConditionalDelay(BOB_DELAYS)))


def hadamard_stage() -> Circuit:
    """Spatial and polarisation Hadamards on A' and B."""
    return Circuit(
        (
            BS("b1", "b2"),
            BS("a1'", "a2'"),
            HWP("b1", 22.5),
            HWP("b2", 22.5),
            HWP("a1'", 22.5),
            HWP("a2'", 22.5),
        )
    )


def _rails(rails) -> Circuit:
    return Circuit(tuple(PBS(src, f"{src}~", h, v) for src, h, v in rails))


def detection_stage() -> Circuit:
    return _rails(ALICE_RAILS + BOB_RAILS)


def charlie_stage() -> Circuit:
    """Diagonal-basis measurement of C' in both degrees of freedom."""
    return Circuit((BS("c1'", "c2'"), HWP("c1'", 22.5), HWP("c2'", 22.5))) + _rails(CHARLIE_RAILS)


def bell_stages() -> dict[str, Circuit]:
    return {
        "front_end": front_end(),
        "flip": bprime_flip(),
        "delay": delay_stage(),
        "hadamard": hadamard_stage(),
        "detect": detection_stage(),
    }


def ghz_stages() -> dict[str, Circuit]:
    stages = bell_stages()
    stages["charlie"] = charlie_stage()
    return stages


def build_bell_circuit() -> Circuit:
    return sum(bell_stages().values(), Circuit())


def build_ghz_circuit() -> Circuit:
    return sum(ghz_stages().values(), Circuit())


# -- references and corrections ----------------------------------------------


@dataclass(frozen=True, order=True)
class Reference:
    """A target or residual state, e.g. ``Reference("phi0", -1, +1)``.

    ``pol`` and ``spatial`` are the relative signs in the polarisation and
    spatial superpositions.
    """

    family: str
    pol: int = 1
    spatial: int = 1

    FAMILIES = ("phi0", "phi1", "phi2", "psi0", "psi1", "bell", "ghz")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown reference family {self.family!r}")
        if self.pol not in (1, -1) or self.spatial not in (1, -1):
            raise ValueError("signs must be +1 or -1")

    @property
    def label(self) -> str:
        return f"{self.family}{'+' if self.pol > 0 else '-'}{'+' if self.spatial > 0 else '-'}"

    @classmethod
    def parse(cls, label: str) -> Reference:
        family, signs = label[:-2], label[-2:]
        return cls(family, 1 if signs[0] == "+" else -1, 1 if signs[1] == "+" else -1)

    @property
    def feedforward(self) -> frozenset[str]:
        """Corrections on B' that bring this reference to its ``++`` member."""
        ff = set()
        if self.pol < 0:
            ff.add(ZP)
        if self.spatial < 0:
            ff.add(ZS)
        return frozenset(ff)

    @property
    def needs_params(self) -> bool:
        return self.family in ("phi1", "phi2", "psi1")

    @property
    def is_target(self) -> bool:
        return self.family in ("phi0", "psi0", "bell", "ghz")

    def __str__(self):
        return self.label


def reference_state(r: Reference, params: SourceParams | None = None) -> State:
    """Normalised state of a reference.

    ``params`` are the primed amplitudes for the ``phi1``, ``phi2`` and
    ``psi1`` families and are ignored otherwise.
    """
    if r.needs_params and params is None:
        raise ValueError(f"{r.label} needs amplitudes")
    half = 1 / math.sqrt(2)
    s, q = r.spatial, r.pol
    if r.family == "phi0":
        st = _hyper_state([(half, "HH"), (q * half, "VV")], [(half, ("a1", "b1'")), (s * half, ("a2", "b2'"))])
    elif r.family == "bell":
        st = _hyper_state([(half, "HH"), (q * half, "VV")], [(half, ("a1", "b1")), (s * half, ("a2", "b2"))])
    elif r.family == "phi1":
        p = params
        st = _hyper_state(
            [(p.alpha, "HV"), (q * p.beta, "VH")], [(p.gamma, ("a1", "b2'")), (s * p.delta, ("a2", "b1'"))]
        )
    elif r.family == "phi2":
        p = params
        st = _hyper_state(
            [(p.alpha, "HH"), (q * p.beta, "VV")], [(p.gamma, ("a1", "b1'")), (s * p.delta, ("a2", "b2'"))]
        )
    elif r.family == "psi0":
        st = _hyper_state(
            [(half, "HHH"), (q * half, "VVV")],
            [(half, ("a1", "b1'", "c1")), (s * half, ("a2", "b2'", "c2"))],
        )
    elif r.family == "ghz":
        st = _hyper_state(
            [(half, "HHH"), (q * half, "VVV")], [(half, ("a1", "b1", "c1")), (s * half, ("a2", "b2", "c2"))]
        )
    else:  # psi1
        p = params
        st = _hyper_state(
            [(p.alpha, "HVH"), (q * p.beta, "VHV")],
            [(p.gamma, ("a1", "b2'", "c1")), (s * p.delta, ("a2", "b1'", "c2"))],
        )
    return normalize(st)


def reference_family(kind: str, params: SourceParams | None = None) -> dict[Reference, State]:
    """All four sign variants of a family, e.g. ``reference_family("phi0")``."""
    return {
        (r := Reference(kind, q, s)): reference_state(r, params)
        for q, s in ((1, 1), (1, -1), (-1, 1), (-1, -1))
    }


def _require_bprime(s: State) -> None:
    if not s.paths() & set(BPRIME_PATHS):
        raise ValueError("state has no photon on the B' paths")


def feedforward_circuit(ff: frozenset[str] | set[str] | Sequence[str]) -> Circuit:
    ff = frozenset(ff)
    unknown = ff - {ZS, ZP}
    if unknown:
        raise ValueError(f"unknown feed-forward operation(s) {sorted(unknown)}")
    elements = []
    if ZS in ff:
        elements.append(PS("b2'"))
    if ZP in ff:
        elements.extend(HWP(p, 0) for p in BPRIME_PATHS)
    return Circuit(tuple(elements))


def feed_forward(s: State, ff: frozenset[str] | set[str] | Sequence[str]) -> State:
    """Apply Z^S (phase shifter on b2') and/or Z^P (HWP at 0° on B')."""
    circuit = feedforward_circuit(ff)
    if circuit.elements:
        _require_bprime(s)
    return apply_circuit(s, circuit)


def flip_bprime(s: State) -> State:
    _require_bprime(s)
    return apply_circuit(s, bprime_flip())
