"""The same circuit acting on two three-photon GHZ-type sources.

Charlie measures C' in the diagonal basis; the A/B' pattern alone decides
whether the round failed.
"""

from hyperecp import GHZ, SourceParams, derive_signature_table, find_detector_bijection, run_protocol

p = SourceParams.from_moduli(0.2, 0.35, phase_alpha=0.4)
run = run_protocol(p, GHZ)
print(f"{len(run.outcomes)} outcomes")
print({k: round(v, 10) for k, v in run.aggregates.items()})
print("4|abgd|^2 =", 4 * abs(p.alpha * p.beta * p.gamma * p.delta) ** 2)

table = derive_signature_table(SourceParams.balanced(), GHZ)
print("charlie outcomes:", sorted({r.charlie for r in table.rows}))
print("relabelling:", {k: v for k, v in find_detector_bijection(table).items() if k != v})
