"""A link whose sign flips between regimes is invisible to a pooled analysis.

X1 drives X2 with +0.8 in one regime and -0.8 in the other. Averaged over
the whole record the two cancel, so PCMCI on the full series reports the
variables as unconnected. Learning the regimes alongside the networks
recovers both signs.

Run with ``python gallery/01_hidden_sign_flip.py``.
"""

from regime_pcmci.driver import DriverConfig, fit_annealed
from regime_pcmci.metrics import evaluate
from regime_pcmci.pcmci import run_pcmci
from regime_pcmci.synthetic import get_experiment

exp = get_experiment("sign_x1x2")
series, truth = exp.generate(seed=3)
print(f"T={series.T}, {truth.schedule.n_switches} regime switches")

pooled = run_pcmci(series, None, exp.pcmci)
for j, parents in enumerate(pooled.parents):
    print(f"pooled parents of X{j + 1}:", [f"X{i + 1}(t-{tau})" for i, tau in parents])

cfg = DriverConfig(2, exp.switch_budget, exp.n_iterations, n_annealings=20, pcmci=exp.pcmci)
annealing = fit_annealed(series, cfg)
best = annealing.best
report = evaluate(series, best, truth.assignment, truth.coefficients.padded(3), 3)

phi = best.coefficients.permuted(report.matched_permutation).phi
for k in range(2):
    print(f"regime {k}: X1(t-1) -> X2 effect {phi[k, 1, 0, 1]:+.3f}")
print(f"mislabelled steps: {report.delta_gamma_pct:.1f}%")
print(f"links found: TPR {report.tpr_all:.2f}, FPR {report.fpr_all:.3f}")
