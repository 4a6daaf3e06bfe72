"""Manufactured-solution convergence study with a log-log rate plot.

Both registered smooth cases are solved on a ladder of grids; discrete H1
errors against the interpolated exact solution are tabulated with their
incremental rates and the least-squares fitted order.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from orlicz_elastica import refinement_ladder

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

fig, ax = plt.subplots(figsize=(5, 4))
for case in ("quadratic_hooke", "mms_p4"):
    ladder = refinement_ladder(case, levels=(8, 16, 32, 64))
    print(f"\ncase {case} (fitted H1 order {ladder.h1_rate:.2f})")
    print(f"{'n':>4s} {'h':>9s} {'H1 error':>12s} {'rate':>6s} {'newton':>6s}")
    prev = None
    for row in ladder.rows:
        rate = "" if prev is None else f"{np.log(prev[1]/row.h1_error)/np.log(prev[0]/row.h):.2f}"
        print(f"{row.n:4d} {row.h:9.5f} {row.h1_error:12.4e} {rate:>6s} {row.iterations:6d}")
        prev = (row.h, row.h1_error)
    hs = [r.h for r in ladder.rows]
    ax.loglog(hs, [r.h1_error for r in ladder.rows], "o-", label=case)

hs = np.array(hs)
ax.loglog(hs, hs * 0.5, "k--", lw=1, label="slope 1")
ax.set_xlabel("h")
ax.set_ylabel("discrete H1 error")
ax.legend()
fig.tight_layout()
path = os.path.join(out_dir, "h1_convergence.png")
fig.savefig(path, dpi=120)
print("\nwrote", path)
