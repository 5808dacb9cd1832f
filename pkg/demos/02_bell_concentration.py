"""One round of concentration on two partially hyperentangled pairs.

Each pair is (alpha|HH> + beta|VV>)(gamma|a1 b1> + delta|a2 b2>). Photons
B and A' are measured, and the click pattern announces whether A and B'
now share a maximally hyperentangled state.
"""

from collections import Counter

from hyperecp import SourceParams, analysis, run_protocol

p = SourceParams.from_moduli(0.3, 0.4)
run = run_protocol(p)

print(f"{len(run.outcomes)} distinct click records")
print("classes:", dict(Counter(o.cls for o in run.outcomes)))
for cls, prob in run.aggregates.items():
    print(f"  {cls:<8} {prob:.6f}")

rep = analysis.analytic_probs(p)
print(f"closed form: success {rep.p1:.6f}, recycle {rep.recycle_prob:.6f}")
print(f"with one recycling round: {rep.p2:.6f}")

# a few heralded outcomes and the correction each needs
for o in run.of_class("Success")[:4]:
    print(o.record.label(), "->", o.reference.label, sorted(o.feedforward), f"{o.probability:.5f}")

print("worst fidelity after correction:", run.min_corrected_fidelity("Success"))
