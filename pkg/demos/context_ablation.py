"""How much do planning contexts help the heuristic proposer?

Each multi-task set is grounded ten times with and without the failed
planning contexts, using the same seeds and the strict consistency check.
"""

from btground.domains import ABLATION_SETS, load_bundled
from btground.harness import ablation, format_table

rows = []
for name in ABLATION_SETS:
    row = ablation(name, *load_bundled(name), runs=10)
    rows.append((name, row.without, row.with_))
    print(f"{name:9s} CSR gain {row.csr_gain:+.2f}")

print()
print(format_table(rows))
