"""Passive optical elements as mode maps, and circuits built from them.

Conventions:

* ``BS(x, y)`` is the balanced beam splitter ``[[1, 1], [1, -1]]/sqrt(2)``
  acting on paths ``(x, y)``: ``x -> (x + y)/sqrt(2)`` and
  ``y -> (x - y)/sqrt(2)``. The first-listed path takes the "+" row.
* ``PBS`` transmits H (path kept) and reflects V (path exchanged), unit
  phases on both.
* ``HWP(path, theta)`` has Jones matrix ``[[cos 2θ, sin 2θ], [sin 2θ, -cos 2θ]]``:
  0° is a sign flip on V, 22.5° a polarisation Hadamard, 45° swaps H and V.
* ``ConditionalDelay`` adds an integer number of time bins per
  ``(path, pol)`` with no phase (the delay phase is a multiple of 2π).
  In hardware each entry is an unbalanced interferometer made of two
  PBSs; only the composite action is simulated.
"""

from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .fock import (
    POLARIZATIONS,
    UNITARITY_TOL,
    Mode,
    ModeMap,
    State,
    apply_mode_map,
    fidelity,
    normalize,
)

SQRT_HALF = 1 / math.sqrt(2)

# Row of the BS matrix given to the first-listed path.
BS_PLUS_FIRST = True


@dataclass(frozen=True)
class BS:
    x: str
    y: str

    def rules(self):
        s = SQRT_HALF
        sign = 1 if BS_PLUS_FIRST else -1
        out = {}
        for pol in POLARIZATIONS:
            out[(self.x, pol)] = ((self.x, pol, 0, s), (self.y, pol, 0, sign * s))
            out[(self.y, pol)] = ((self.x, pol, 0, s), (self.y, pol, 0, -sign * s))
        return out

    def paths(self):
        return (self.x, self.y)

    def to_text(self):
        return f"BS {self.x} {self.y}"


@dataclass(frozen=True)
class PBS:
    in1: str
    in2: str
    out1: str | None = None
    out2: str | None = None

    @property
    def outputs(self) -> tuple[str, str]:
        return (self.out1 or self.in1, self.out2 or self.in2)

    def rules(self):
        o1, o2 = self.outputs
        out = {
            (self.in1, "H"): ((o1, "H", 0, 1.0),),
            (self.in1, "V"): ((o2, "V", 0, 1.0),),
            (self.in2, "H"): ((o2, "H", 0, 1.0),),
            (self.in2, "V"): ((o1, "V", 0, 1.0),),
        }
        if {o1, o2} != {self.in1, self.in2}:
            if {o1, o2} & {self.in1, self.in2}:
                raise ValueError(f"PBS outputs must equal or be disjoint from its inputs: {self}")
            # close the map on the output paths so it stays a permutation;
            # the output rails carry no photons before the PBS
            for (p, q), ((p2, q2, _, _),) in list(out.items()):
                out[(p2, q2)] = ((p, q, 0, 1.0),)
        return out

    def paths(self):
        return (self.in1, self.in2, *self.outputs)

    def to_text(self):
        if self.out1 is None:
            return f"PBS {self.in1} {self.in2}"
        return f"PBS {self.in1} {self.in2} -> {self.out1} {self.out2}"


@dataclass(frozen=True)
class HWP:
    path: str
    angle: float

    def rules(self):
        t = math.radians(2 * self.angle)
        c, s = _clean(math.cos(t)), _clean(math.sin(t))
        return {
            (self.path, "H"): _nonzero(((self.path, "H", 0, c), (self.path, "V", 0, s))),
            (self.path, "V"): _nonzero(((self.path, "H", 0, s), (self.path, "V", 0, -c))),
        }

    def paths(self):
        return (self.path,)

    def to_text(self):
        return f"HWP {self.path} {self.angle:g}"


@dataclass(frozen=True)
class PS:
    path: str

    def rules(self):
        return {(self.path, pol): ((self.path, pol, 0, -1.0),) for pol in POLARIZATIONS}

    def paths(self):
        return (self.path,)

    def to_text(self):
        return f"PS {self.path}"


@dataclass(frozen=True)
class ConditionalDelay:
    table: tuple[tuple[tuple[str, str], int], ...]

    def __post_init__(self):
        if isinstance(self.table, Mapping):
            object.__setattr__(self, "table", tuple(sorted(self.table.items())))
        for (path, pol), k in self.table:
            if pol not in POLARIZATIONS or k < 0:
                raise ValueError(f"bad delay entry {(path, pol)} -> {k}")

    def rules(self):
        return {(p, q): ((p, q, k, 1.0),) for (p, q), k in self.table}

    def paths(self):
        return tuple(sorted({p for (p, _), _ in self.table}))

    def to_text(self):
        return "\n".join(f"DELAY {p} {q} {k}" for (p, q), k in self.table)


@dataclass(frozen=True)
class PathSwap:
    x: str
    y: str

    def rules(self):
        out = {}
        for pol in POLARIZATIONS:
            out[(self.x, pol)] = ((self.y, pol, 0, 1.0),)
            out[(self.y, pol)] = ((self.x, pol, 0, 1.0),)
        return out

    def paths(self):
        return (self.x, self.y)

    def to_text(self):
        return f"SWAP {self.x} {self.y}"


Element = Union[BS, PBS, HWP, PS, ConditionalDelay, PathSwap]


def _clean(x: float) -> float:
    return 0.0 if abs(x) < 1e-15 else x


def _nonzero(rule):
    return tuple(r for r in rule if r[3] != 0)


def element_map(e: Element, universe: Iterable[str] | None = None) -> ModeMap:
    """Lower an element to its mode map.

    With ``universe`` given, every path the element touches must be in it.
    """
    if universe is not None:
        known = set(universe)
        unknown = [p for p in e.paths() if p not in known]
        if unknown:
            raise ValueError(f"{e.to_text()!r} references unknown path(s) {unknown}")
    return ModeMap(e.rules(), name=e.to_text())


@dataclass(frozen=True)
class Circuit:
    """Elements applied left to right."""

    elements: tuple[Element, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def __add__(self, other: Circuit) -> Circuit:
        return Circuit(self.elements + other.elements)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def paths(self) -> frozenset[str]:
        return frozenset(p for e in self.elements for p in e.paths())

    def to_text(self) -> str:
        return "\n".join(e.to_text() for e in self.elements) + ("\n" if self.elements else "")


def apply_circuit(s: State, c: Circuit | Sequence[Element]) -> State:
    for e in c:
        s = apply_mode_map(s, element_map(e))
    return s


@dataclass
class UnitarityReport:
    element: str
    ok: bool
    max_deviation: float
    worst_singular_value: float
    shape: tuple[int, int]
    decomposition_fidelity: float | None = None

    def __str__(self):
        status = "pass" if self.ok else "FAIL"
        extra = ""
        if self.decomposition_fidelity is not None:
            extra = f", BS-PS-BS fidelity {self.decomposition_fidelity:.15f}"
        return (
            f"{status}: {self.element} {self.shape[0]}x{self.shape[1]}, "
            f"max deviation {self.max_deviation:.3g}{extra}"
        )


def check_unitarity(
    e: Element | ModeMap, tbins: int | None = None, tol: float = UNITARITY_TOL
) -> UnitarityReport:
    """Check that the columns of the element's induced matrix are orthonormal."""
    m = e if isinstance(e, ModeMap) else element_map(e)
    mat, _, _ = m.matrix(tbins)
    if mat.size:
        gram = mat.conj().T @ mat
        dev = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
        sv = np.linalg.svd(mat, compute_uv=False)
        worst = float(sv[np.argmax(np.abs(sv - 1.0))])
    else:
        dev, worst = 0.0, 1.0
    ok = dev <= tol
    decomp = None
    if isinstance(e, PathSwap):
        decomp = swap_decomposition_fidelity(e)
        ok = ok and decomp >= 1 - tol
    return UnitarityReport(m.name, ok, dev, worst, mat.shape, decomp)


def swap_realization(x: str, y: str) -> Circuit:
    """Spatial bit flip built from two beam splitters and a phase shifter."""
    return Circuit((BS(x, y), PS(y), BS(x, y)))


def swap_decomposition_fidelity(sw: PathSwap) -> float:
    """Worst fidelity between PathSwap and BS-PS-BS over a set of probe states.

    Probes are single photons with fixed, incommensurate amplitudes on all
    four (path, pol) modes, so a relative phase error would show up.
    """
    worst = 1.0
    probes = [
        (1.0, 0.3j, -0.7, 0.2 + 0.5j),
        (0.1, 1.0, 0.4j, -0.9),
        (0.6 - 0.2j, -0.1, 1.0, 0.3j),
    ]
    modes = [Mode(sw.x, "H"), Mode(sw.x, "V"), Mode(sw.y, "H"), Mode(sw.y, "V")]
    for amps in probes:
        s = normalize(State.from_terms([([m], a) for m, a in zip(modes, amps)]))
        direct = apply_circuit(s, [sw])
        composed = apply_circuit(s, swap_realization(sw.x, sw.y))
        worst = min(worst, fidelity(direct, composed))
    return worst


_LINE = re.compile(r"\s+")


def parse_element(line: str) -> Element:
    """Parse one line of the circuit text format (case-insensitive)."""
    tokens = _LINE.split(line.strip().lower())
    kind, args = tokens[0], tokens[1:]
    try:
        if kind == "bs":
            (x, y) = args
            return BS(x, y)
        if kind == "pbs":
            if "->" in args:
                i = args.index("->")
                (a, b), (c, d) = args[:i], args[i + 1 :]
                return PBS(a, b, c, d)
            (a, b) = args
            return PBS(a, b)
        if kind == "hwp":
            (p, angle) = args
            return HWP(p, float(angle))
        if kind == "ps":
            (p,) = args
            return PS(p)
        if kind == "delay":
            (p, pol, k) = args
            return ConditionalDelay((((p, pol.upper()), int(k)),))
        if kind == "swap":
            (x, y) = args
            return PathSwap(x, y)
    except ValueError as exc:
        raise ValueError(f"malformed circuit line {line.strip()!r}: {exc}") from None
    raise ValueError(f"unknown element {tokens[0]!r} in line {line.strip()!r}")


def parse_circuit(text: str) -> Circuit:
    """Parse the line-oriented circuit format.

    Blank lines and ``#`` comments are skipped. Example::

        BS a1' b1
        HWP b1 22.5
        DELAY a1' H 1
        PBS b1 b2 -> d1 d2
    """
    elements = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            elements.append(parse_element(line))
    return Circuit(tuple(elements))


def format_circuit(c: Circuit) -> str:
    return c.to_text()
