"""Lift the uniform claw-finding adversary matrix to 2-key extraction and check its structure."""
from qmitm.adversary_bound import verify_lift

for m in (3, 4):
    for domain in ("generic", "full"):
        rep = verify_lift(2, m, 0, 1, domain)
        red = rep.reduction
        print(
            f"N=2 M={m} {domain:<8} fibres {rep.fiber_sizes} D={rep.d} "
            f"|G_cf|={rep.norm_cf:.4f} |G_ke2|={rep.norm_ke2:.4f} tensor={rep.tensor} "
            f"max_all={red.max_all:.4f} max_I={red.max_query_set:.4f} max_I_conj={red.max_query_set_conjugated:.4f} "
            f"passed={rep.passed}"
        )
