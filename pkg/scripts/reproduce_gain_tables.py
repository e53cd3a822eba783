"""Print both gain tables with the exponent pairs they are computed from."""
from qmitm.experiments import format_table, gains_rows

for depth in (2, 4):
    print(f"{depth}-fold encryption")
    print(format_table(gains_rows(depth)))
