"""Two-photon interference on a balanced beam splitter.

Identical photons entering the two ports leave together. Making them
distinguishable, by polarisation or by arrival time, restores the
coincidences.
"""

from hyperecp import BS, Mode, State, apply_circuit
from hyperecp.fock import monomial

bs = BS("x", "y")

# identical photons: H polarised, same time bin
s = State.single(Mode("x", "H"), Mode("y", "H"))
out = apply_circuit(s, [bs])
print("identical:", out)

coincidence = monomial([Mode("x", "H"), Mode("y", "H")])
print("coincidence amplitude:", out.terms.get(coincidence, 0))

# orthogonal polarisations
out = apply_circuit(State.single(Mode("x", "H"), Mode("y", "V")), [bs])
print("distinguishable by polarisation:", out)

# one photon a bin late
out = apply_circuit(State.single(Mode("x", "H", 0), Mode("y", "H", 1)), [bs])
print("distinguishable by time:", out)
