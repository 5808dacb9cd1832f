"""Derive the detector signature table and line it up with the published one.

Detector numbering in the published tables differs from ours by swapping
two detectors on each side; the search below finds that relabelling.
"""

from collections import Counter

from hyperecp import SourceParams, derive_signature_table, find_detector_bijection

table = derive_signature_table(SourceParams.balanced())
heralded = [r for r in table.rows if r.cls != "Fail"]
print(f"{len(table.rows)} rows, {len(heralded)} heralded")
print(Counter((r.cls, r.reference) for r in heralded))

print(table.to_csv().splitlines()[0])
for line in table.to_csv().splitlines()[1:9]:
    print(line)

mapping = find_detector_bijection(table)
print("relabelling:", {k: v for k, v in mapping.items() if k != v})
