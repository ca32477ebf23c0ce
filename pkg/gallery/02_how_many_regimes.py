"""Choosing the number of regimes with AICc.

Each candidate N_K is fitted with a switch budget that keeps the mean regime
duration fixed. The AICc curve drops until the true number of regimes and
flattens after it; the smallest N_K on the plateau is chosen.

Run with ``python gallery/02_how_many_regimes.py``.
"""

from regime_pcmci.driver import DriverConfig, select_n_regimes
from regime_pcmci.synthetic import get_experiment

for name in ("sign_x1x2", "sign_x1x2_arrow"):
    exp = get_experiment(name)
    series, _ = exp.generate(seed=0)
    cfg = DriverConfig(exp.n_regimes, exp.switch_budget, exp.n_iterations, n_annealings=10, pcmci=exp.pcmci)
    report = select_n_regimes(series, cfg, candidates=range(1, 5))
    print(f"{name} (true N_K = {exp.n_regimes})")
    for c in report.candidates:
        mark = "  <- chosen" if c.chosen else ""
        print(f"  N_K={c.n_regimes} N_C={c.switch_budget:3d} params={c.n_para:4d} AICc={c.aicc:10.1f}{mark}")
