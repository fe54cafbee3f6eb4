"""
Estimators for missing responses
================================

Delete responses at random (more often for large x) and compare the
complete-case, weighted and imputation estimators against the truth.
"""

import numpy as np

from modalms import (Bandwidths, MeanShiftConfig, impute_single, modal_curve,
                     multiple_imputation_curve, weights_for)
from modalms.metrics import ase
from modalms.missing import fit_propensity_logistic, known_propensity
from modalms.simulate import ScenarioSpec, apply_missingness, gen_scenario, true_modal_curve

spec = ScenarioSpec(1, k=0.75, n=300)
full = gen_scenario(spec, 1)
ds = apply_missingness(full, "M1", 2)      # p(x) = 0.6 + 0.3 cos(pi x)
print(f"{ds.n_missing} of {ds.n} responses missing")

bw = Bandwidths(0.05, 0.5)
# drop local maxima below 5% of the densest mode: an isolated extreme response
# otherwise shows up as a branch of its own
cfg = MeanShiftConfig(prune_fraction=0.05)
mesh = np.linspace(0, 1, 100)
truth = true_modal_curve(spec, mesh)

curves = {
    "C": modal_curve(full, np.ones(full.n), bw, mesh, cfg),
    "S": modal_curve(ds, weights_for("S", ds), bw, mesh, cfg),
    "W": modal_curve(ds, weights_for("W", ds, known_propensity("M1")), bw, mesh, cfg),
}

# the propensity can also be estimated; here with a logistic fit
fitted = fit_propensity_logistic(ds)
print("logistic coefficients:", np.round(fitted.params, 3))
curves["W (fitted p)"] = modal_curve(ds, weights_for("W", ds, fitted), bw, mesh, cfg)

# single imputation fills each gap with its densest candidate mode
filled = impute_single(ds, bw, cfg).completed
curves["SI"] = modal_curve(filled, np.ones(filled.n), bw, mesh, cfg)

# multiple imputation draws among the candidate modes B times and pools
curves["MI"] = multiple_imputation_curve(ds, bw, cfg, B=20, mesh=mesh, rng_stream=3)

for name, c in curves.items():
    print(f"{name:13s} ASE x 1000 = {1000 * ase(c, truth):8.1f}")
