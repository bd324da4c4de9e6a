# %% [markdown]
# # How often is the right K chosen?
#
# For each photon budget we draw `R` independent datasets, run model
# selection over K = 1..5 on each, and count the winners. The default here
# is a small desk-scale run; raise `R` (and use `workers` if there are
# spare cores) for a smoother table. The same study is available as
# `binospec table1`.

# %%
import numpy as np

from binospec import emc, experiments
from binospec.priors import flattened_prior, observable_prior
from binospec.synthetic import preset_flattened, preset_observable

R = 3
ladder = emc.make_ladder(24, 0.0)
plan = emc.RunPlan(burn_in=2000, iterations=6000, store_all_params=False)


def show(result):
    print("N      " + "  ".join(f"K={k}" for k in result.k_values))
    for N, row in zip(result.photon_counts, result.counts):
        print(f"{N:<6} " + "  ".join(f"{c:3d}" for c in row))


# %%
upper = experiments.table1(preset_observable(), observable_prior(), R, ladder=ladder, plan=plan, seed=0)
show(upper)

# %%
lower = experiments.table1(preset_flattened(), flattened_prior(), R, ladder=ladder, plan=plan, seed=0)
show(lower)

# %% [markdown]
# The per-replicate free energies are kept, so the margins behind each vote
# can be inspected. A narrow margin between the winner and the runner-up
# means the vote would flip easily under a different noise draw.

# %%
for N in lower.photon_counts:
    gaps = []
    for fe in lower.free_energies[N]:
        f = np.sort(list(fe.values()))
        gaps.append(f[1] - f[0])
    print(N, np.round(gaps, 2))
