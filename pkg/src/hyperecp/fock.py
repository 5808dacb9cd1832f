"""Exact algebra of multi-photon states over labelled bosonic modes.

A state is a polynomial in creation operators acting on the vacuum. Each
term is a monomial (a multiset of modes) with a complex amplitude. The
amplitudes use the creation-operator convention, so the bosonic
normalisation factor ``prod(n_i!)`` lives in the inner product rather than
in the stored amplitudes. A doubly occupied mode ``(a†)^2|0>`` therefore
has squared norm 2.
"""

from __future__ import annotations

import cmath
import itertools
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import NamedTuple, Union

import numpy as np

PRUNE_TOL = 1e-12
UNITARITY_TOL = 1e-12
PROB_TOL = 1e-9

POLARIZATIONS = ("H", "V")


class Mode(NamedTuple):
    """One bosonic mode: spatial path, polarisation and time bin.

    Tuple ordering gives the canonical (path, pol, tbin) order.
    """

    path: str
    pol: str
    tbin: int = 0

    def shifted(self, k: int) -> Mode:
        return Mode(self.path, self.pol, self.tbin + k)


Monomial = tuple[tuple[Mode, int], ...]
ModeLike = Union[Mode, tuple]


def _as_mode(m: ModeLike) -> Mode:
    if isinstance(m, Mode):
        return m
    mode = Mode(*m)
    if mode.pol not in POLARIZATIONS:
        raise ValueError(f"polarisation must be H or V, got {mode.pol!r}")
    if mode.tbin < 0:
        raise ValueError(f"time bin must be non-negative, got {mode.tbin}")
    return mode


def monomial(modes: Iterable[ModeLike]) -> Monomial:
    """Canonical monomial for a sequence of (possibly repeated) modes."""
    ordered = sorted(_as_mode(m) for m in modes)
    return tuple((m, len(list(g))) for m, g in itertools.groupby(ordered))


def expand(mono: Monomial) -> list[Mode]:
    """List every photon of a monomial, repeated modes included."""
    return [m for m, n in mono for _ in range(n)]


def bosonic_weight(mono: Monomial) -> int:
    """``<m|m>`` for a monomial, i.e. the product of occupation factorials."""
    return math.prod(math.factorial(n) for _, n in mono)


def photon_count(mono: Monomial) -> int:
    return sum(n for _, n in mono)


class State:
    """Immutable superposition of creation-operator monomials.

    Build one with :meth:`from_terms`, which accepts any iterable of
    ``(modes, amplitude)`` pairs and collects like terms.

    >>> s = State.from_terms([([("a", "H")], 1.0), ([("b", "V")], 1.0)])
    >>> round(s.norm_sq, 12)
    2.0
    """

    __slots__ = ("_terms", "__weakref__")

    def __init__(self, terms: Mapping[Monomial, complex] | None = None):
        clean = {}
        for mono, amp in (terms or {}).items():
            if abs(amp) >= PRUNE_TOL:
                clean[mono] = complex(amp)
        counts = {photon_count(m) for m in clean}
        if len(counts) > 1:
            raise ValueError(f"mixed photon numbers in one state: {sorted(counts)}")
        self._terms = MappingProxyType(dict(sorted(clean.items())))

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[Iterable[ModeLike], complex]]) -> State:
        acc: dict[Monomial, complex] = {}
        for modes, amp in terms:
            key = monomial(modes)
            acc[key] = acc.get(key, 0j) + amp
        return cls(acc)

    @classmethod
    def single(cls, *modes: ModeLike, amplitude: complex = 1.0) -> State:
        return cls.from_terms([(modes, amplitude)])

    @property
    def terms(self) -> Mapping[Monomial, complex]:
        return self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    @property
    def n_photons(self) -> int:
        for mono in self._terms:
            return photon_count(mono)
        return 0

    @property
    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 * bosonic_weight(m) for m, a in self._terms.items())

    def paths(self) -> frozenset[str]:
        return frozenset(mode.path for mono in self._terms for mode, _ in mono)

    def modes(self) -> frozenset[Mode]:
        return frozenset(mode for mono in self._terms for mode, _ in mono)

    def __add__(self, other: State) -> State:
        acc = dict(self._terms)
        for m, a in other._terms.items():
            acc[m] = acc.get(m, 0j) + a
        return State(acc)

    def __sub__(self, other: State) -> State:
        return self + (-1) * other

    def __mul__(self, scalar: complex) -> State:
        return State({m: a * scalar for m, a in self._terms.items()})

    __rmul__ = __mul__

    def __neg__(self) -> State:
        return -1 * self

    def __eq__(self, other: object) -> bool:
        # exact structural equality; physical comparisons go through fidelity()
        return isinstance(other, State) and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "State(0)"
        return "State(" + " + ".join(format_term(m, a) for m, a in self._terms.items()) + ")"


def format_mode(mode: Mode) -> str:
    return f"{mode.path}{mode.pol}" + (f"@{mode.tbin}" if mode.tbin else "")


def format_term(mono: Monomial, amp: complex) -> str:
    ops = " ".join(format_mode(m) + (f"^{n}" if n > 1 else "") for m, n in mono)
    if abs(amp.imag) < PRUNE_TOL:
        coeff = f"{amp.real:+.6g}"
    else:
        coeff = f"({amp.real:.6g}{amp.imag:+.6g}j)"
    return f"{coeff}[{ops}]"


# Image of a (path, pol) pair: output (path, pol, tbin offset, coefficient).
ImageRule = tuple[tuple[str, str, int, complex], ...]


@dataclass(frozen=True)
class NonUnitaryError(ValueError):
    message: str
    singular_value: float

    def __str__(self) -> str:
        return self.message


@dataclass(frozen=True)
class ModeMap:
    """Linear substitution of creation operators.

    ``rules[(path, pol)]`` lists the images of ``(path, pol, tau)`` as
    ``(path', pol', dtau, coeff)``, valid for every time bin ``tau``; the
    output lands in bin ``tau + dtau``. Modes without a rule are left alone.
    """

    rules: Mapping[tuple[str, str], ImageRule] = field(default_factory=dict)
    name: str = ""

    def image(self, mode: Mode) -> list[tuple[Mode, complex]]:
        rule = self.rules.get((mode.path, mode.pol))
        if rule is None:
            return [(mode, 1.0)]
        return [(Mode(p, q, mode.tbin + d), c) for p, q, d, c in rule]

    @cached_property
    def _span(self) -> int:
        shifts = [d for rule in self.rules.values() for _, _, d, _ in rule]
        return max(shifts, default=0) - min(shifts, default=0)

    def matrix(self, tbins: int | None = None) -> tuple[np.ndarray, list[Mode], list[Mode]]:
        """Induced matrix on the affected modes over a finite time window.

        Columns are inputs with ``tbin < tbins``; rows are every mode those
        inputs reach. Returns ``(matrix, row_modes, col_modes)``.
        """
        if tbins is None:
            tbins = 2 * self._span + 1
        base = self._offset
        keys = sorted(set(self.rules) | {(p, q) for r in self.rules.values() for p, q, _, _ in r})
        cols = [Mode(p, q, base + t) for p, q in keys for t in range(tbins)]
        images = [self.image(m) if (m.path, m.pol) in self.rules else [(m, 1.0)] for m in cols]
        rows = sorted({m for img in images for m, _ in img} | set(cols))
        index = {m: i for i, m in enumerate(rows)}
        mat = np.zeros((len(rows), len(cols)), dtype=complex)
        for j, img in enumerate(images):
            for m, c in img:
                mat[index[m], j] += c
        return mat, rows, cols

    @cached_property
    def _offset(self) -> int:
        # inputs start late enough that negative offsets stay in range
        return max((-d for rule in self.rules.values() for _, _, d, _ in rule), default=0)

    @cached_property
    def unitarity(self) -> tuple[float, float]:
        """``(max |G - I|, worst singular value)`` of the induced matrix."""
        mat, _, _ = self.matrix()
        if mat.size == 0:
            return 0.0, 1.0
        gram = mat.conj().T @ mat
        dev = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
        sv = np.linalg.svd(mat, compute_uv=False)
        worst = float(sv[np.argmax(np.abs(sv - 1.0))])
        return dev, worst

    def check(self, tol: float = UNITARITY_TOL) -> None:
        dev, worst = self.unitarity
        if dev > tol:
            label = f" {self.name}" if self.name else ""
            raise NonUnitaryError(
                f"mode map{label} is not unitary: singular value {worst:.15g} "
                f"(max Gram deviation {dev:.3g} > {tol:g})",
                worst,
            )

    def inverse(self) -> ModeMap:
        """Conjugate-transpose map, valid on states produced by this map."""
        inv: dict[tuple[str, str], list] = {}
        for (p, q), rule in self.rules.items():
            for p2, q2, d, c in rule:
                inv.setdefault((p2, q2), []).append((p, q, -d, complex(c).conjugate()))
        # modes reached only via identity keep their identity image
        for key in self.rules:
            if key not in inv:
                inv[key] = [(key[0], key[1], 0, 1.0)]
        return ModeMap({k: tuple(v) for k, v in inv.items()}, name=f"{self.name}^-1")


IDENTITY = ModeMap({}, name="identity")


def apply_mode_map(s: State, m: ModeMap) -> State:
    """Substitute every creation operator of ``s`` by its image under ``m``."""
    m.check()
    if not m.rules:
        return s
    acc: dict[Monomial, complex] = {}
    for mono, amp in s:
        fixed: list[Mode] = []
        moving: list[list[tuple[Mode, complex]]] = []
        for mode in expand(mono):
            if (mode.path, mode.pol) in m.rules:
                moving.append(m.image(mode))
            else:
                fixed.append(mode)
        if not moving:
            acc[mono] = acc.get(mono, 0j) + amp
            continue
        for choice in itertools.product(*moving):
            coeff = amp
            modes = list(fixed)
            for mode, c in choice:
                coeff *= c
                modes.append(mode)
            key = monomial(modes)
            acc[key] = acc.get(key, 0j) + coeff
    return State(acc)


def tensor(s1: State, s2: State) -> State:
    """Product of two states living on disjoint sets of paths."""
    shared = s1.paths() & s2.paths()
    if shared:
        raise ValueError(f"tensor factors share path labels: {sorted(shared)}")
    acc = {}
    for m1, a1 in s1:
        for m2, a2 in s2:
            acc[tuple(sorted(m1 + m2))] = a1 * a2
    return State(acc)


def inner_product(s1: State, s2: State) -> complex:
    """``<s1|s2>``, antilinear in the first argument."""
    small, large = (s1, s2) if len(s1) <= len(s2) else (s2, s1)
    total = 0j
    for mono, a in small:
        b = large.terms.get(mono)
        if b is not None:
            total += (a.conjugate() * b if small is s1 else b.conjugate() * a) * bosonic_weight(mono)
    return total


def fidelity(s1: State, s2: State) -> float:
    n1, n2 = s1.norm_sq, s2.norm_sq
    if n1 <= 0 or n2 <= 0:
        raise ValueError("fidelity is undefined for a zero-norm state")
    return abs(inner_product(s1, s2)) ** 2 / (n1 * n2)


def normalize(s: State) -> State:
    n = s.norm_sq
    if n <= 0:
        raise ValueError("cannot normalise the zero state")
    return s * (1 / math.sqrt(n))


def phase(theta: float) -> complex:
    return cmath.exp(1j * theta)
