# %% [markdown]
# # Saturated peaks
#
# Here the peak intensities push the absorption rate above one, so the
# clipped rate sits at 1 over a wide band and every photon there is
# absorbed. The individual peaks are invisible in the counts; only the
# shoulders of the plateau carry information about them.

# %%
import matplotlib.pyplot as plt
import numpy as np

from binospec import emc, evidence, experiments
from binospec.priors import flattened_prior
from binospec.spectral import absorption_rate, signal
from binospec.synthetic import generate, preset_flattened, saturation_fraction

base = preset_flattened()
truth = base.truth
cfg = base.with_photons(10000, seed=4)
data = generate(cfg)
print(f"{saturation_fraction(cfg):.1%} of grid points have a true rate of 1")

# %%
plt.figure(figsize=(6, 3.5))
plt.plot(data.x, data.n / data.N, ".", ms=3, label="n / N")
plt.plot(data.x, signal(data.x, truth), lw=1, label="unclipped f")
plt.plot(data.x, absorption_rate(data.x, truth), lw=1, label="clipped rate")
plt.ylim(0, 1.6)
plt.legend()
plt.tight_layout()
plt.savefig("flattened_data.png", dpi=120)

# %% [markdown]
# ## How many peaks?

# %%
spec = flattened_prior()
ladder = emc.make_ladder(24, 0.0)
plan = emc.RunPlan(burn_in=2000, iterations=6000)
report = evidence.select_model(data, spec, range(1, 6), ladder, plan, seed=5, keep_archives=True)
for k, r in report.results.items():
    print(f"K={k}  F={r.free_energy:9.2f} +/- {r.stderr:.2f}   p(K|D)={report.posterior[k]:.3g}")
print("selected K =", report.selected_k)

# %% [markdown]
# ## Positions recovered from under the plateau

# %%
best = report.results[report.selected_k]
mean = experiments.posterior_mean_params(best.archive)
print("posterior mean mu:", np.round(mean.mu, 4), " true:", truth.mu)

tri = experiments.sorted_peak_samples(best.archive.target_params)
plt.figure(figsize=(6, 3))
for k in range(tri.shape[1]):
    plt.hist(tri[:, k, 1], bins=np.linspace(3.0, 5.0, 201), histtype="step", label=f"peak {k + 1}")
for m in truth.mu:
    plt.axvline(m, color="k", lw=0.5)
plt.xlim(3.6, 4.3)
plt.legend()
plt.tight_layout()
plt.savefig("flattened_mu_hist.png", dpi=120)

# %% [markdown]
# Swap acceptance between neighbouring rungs tells whether the ladder is
# dense enough: every pair should exchange states now and then.

# %%
print(np.round(best.archive.swap_rates, 3))
