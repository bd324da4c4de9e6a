# %% [markdown]
# # Three overlapping peaks, well below saturation
#
# A synthetic absorption spectrum with three Gaussian peaks on a small
# constant background. We simulate photon counting at several incident
# photon budgets, look at how noisy the counts become, and then let the
# replica-exchange sampler decide how many peaks the data support.
#
# Runtime: a couple of minutes on one core at the settings below.

# %%
import matplotlib.pyplot as plt
import numpy as np

from binospec import emc, evidence, experiments
from binospec.priors import observable_prior
from binospec.spectral import absorption_rate
from binospec.synthetic import generate, preset_observable

base = preset_observable()
truth = base.truth
print(truth)

# %% [markdown]
# ## The data at four photon budgets
#
# Each grid point sees `N` photons and counts how many were absorbed. With
# `N = 10` the observed fraction `n/N` can only take eleven values, so the
# peak structure is mostly buried.

# %%
fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True, sharey=True)
for ax, N in zip(axes.flat, (10000, 1000, 100, 10)):
    d = generate(base.with_photons(N, seed=1))
    ax.plot(d.x, d.n / d.N, ".", ms=3, label="n / N")
    ax.plot(d.x, absorption_rate(d.x, truth), lw=1, label="true rate")
    ax.set_title(f"N = {N}")
axes[0, 0].legend()
fig.tight_layout()
fig.savefig("observable_data.png", dpi=120)

# %% [markdown]
# ## Model selection at N = 1000
#
# A 24-rung ladder from the prior (beta = 0) to the posterior (beta = 1) is
# enough here. The free energy `F(K)` is the negative log evidence; smaller
# is better.

# %%
data = generate(base.with_photons(1000, seed=1))
spec = observable_prior()
ladder = emc.make_ladder(24, 0.0)
plan = emc.RunPlan(burn_in=2000, iterations=6000)
report = evidence.select_model(data, spec, range(1, 6), ladder, plan, seed=3, keep_archives=True)

for k, r in report.results.items():
    print(f"K={k}  F={r.free_energy:9.2f} +/- {r.stderr:.2f}   p(K|D)={report.posterior[k]:.3g}")
print("selected K =", report.selected_k)

# %%
Ks = sorted(report.results)
plt.figure(figsize=(4, 3))
plt.errorbar(Ks, [report.results[k].free_energy for k in Ks],
             yerr=[report.results[k].stderr for k in Ks], fmt="o-")
plt.xlabel("K")
plt.ylabel("F(K)")
plt.tight_layout()
plt.savefig("observable_free_energy.png", dpi=120)

# %% [markdown]
# ## The fitted curve and the peak positions
#
# Peaks are sorted by position in every sample before averaging, which
# removes the label-switching symmetry.

# %%
best = report.results[report.selected_k]
header, rows = experiments.curve_rows(data.x, best.archive, best.map_params)
rows = np.asarray(rows)
plt.figure(figsize=(6, 3.5))
plt.plot(data.x, data.n / data.N, ".", ms=3, color="0.6", label="n / N")
plt.fill_between(rows[:, 0], rows[:, 3], rows[:, 4], alpha=0.3, label="90% band")
plt.plot(rows[:, 0], rows[:, 1], label="MAP")
plt.legend()
plt.tight_layout()
plt.savefig("observable_fit.png", dpi=120)

mean = experiments.posterior_mean_params(best.archive)
print("posterior mean mu:", np.round(mean.mu, 4), " true:", truth.mu)

# %%
tri = experiments.sorted_peak_samples(best.archive.target_params)
plt.figure(figsize=(6, 3))
for k in range(tri.shape[1]):
    plt.hist(tri[:, k, 1], bins=np.linspace(0.5, 1.0, 201), histtype="step", label=f"peak {k + 1}")
for m in truth.mu:
    plt.axvline(m, color="k", lw=0.5)
plt.xlim(0.65, 0.82)
plt.xlabel("mu")
plt.legend()
plt.tight_layout()
plt.savefig("observable_mu_hist.png", dpi=120)
